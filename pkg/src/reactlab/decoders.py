"""Syndrome computation, bit-flipping decoders and DFR estimation.

Three decoder flavors are supported:

``bf-private``
    Gallager bit flipping with the private H on s = e' H^T, recovering the
    expanded error e' = e Q^T; e is then obtained through (Q^T)^{-1}.
``q-decoder``
    correlations R = (s * H) * Q (integer products) decide flips of e itself;
    the syndrome is updated with the columns of H~ = H Q.
``bf-htilde``
    plain bit flipping with the public-code parity-check H~ on e.

In MDPC mode Q = I and all three coincide.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from . import _kernels
from .qc_code import (
    PrivateKey,
    contract_error,
    encrypt,
    sample_error,
    sample_error_supports,
)
from .ring import RingElement

log = logging.getLogger(__name__)

FLAVORS = ("bf-private", "q-decoder", "bf-htilde")
DEFAULT_CHUNK = 2048


class DecodingFailure(Exception):
    """Decryption did not produce a valid error vector (Bob's observable reaction)."""


@dataclass(frozen=True)
class DecoderConfig:
    flavor: str = "bf-private"
    max_iterations: int = 20
    thresholds: tuple[int, ...] = ()  # empty: max-counter rule
    flip_cap: int | None = None  # q-decoder default: m

    def __post_init__(self) -> None:
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown decoder flavor {self.flavor!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if any(th <= 0 for th in self.thresholds):
            raise ValueError("fixed thresholds must be positive")

    @property
    def threshold_rule(self) -> str:
        return "fixed" if self.thresholds else "max-counter"


@dataclass
class DecodeOutcome:
    recovered_error: np.ndarray | None
    success: bool
    iterations_used: int


def _pad(supports: Sequence[Sequence[int]]) -> np.ndarray:
    width = max([len(s) for s in supports] + [1])
    out = -np.ones((len(supports), width), dtype=np.int64)
    for i, s in enumerate(supports):
        out[i, :len(s)] = sorted(s)
    return out


def _pad_grid(grid: Sequence[Sequence[Sequence[int]]]) -> np.ndarray:
    n = len(grid)
    width = max([len(s) for row in grid for s in row] + [1])
    out = -np.ones((n, n, width), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            s = sorted(grid[i][j])
            out[i, j, :len(s)] = s
    return out


def _decode_arrays(blocks: Sequence[RingElement]) -> np.ndarray:
    return _pad([b.support for b in blocks])


class Decoder:
    """Decoder bound to a private key; holds the padded support tables."""

    def __init__(self, sk: PrivateKey, cfg: DecoderConfig = DecoderConfig()):
        self.sk = sk
        self.cfg = cfg
        prm = sk.params
        self.p = prm.p
        self.n0 = prm.n0
        H = _decode_arrays(sk.H)
        Ht = _decode_arrays(sk.htilde)
        self.public_upd = Ht
        self.qsup = _pad_grid([[sk.Q[i, j].support for j in range(prm.n0)] for i in range(prm.n0)])
        flavor = cfg.flavor
        if prm.mdpc:
            flavor = "bf-private"
        self.effective_flavor = flavor
        if flavor == "bf-private":
            self.stage1, self.upd, self.two_stage = H, H, False
            self.expanded_target = not prm.mdpc
        elif flavor == "q-decoder":
            self.stage1, self.upd, self.two_stage = H, Ht, True
            self.expanded_target = False
        else:
            self.stage1, self.upd, self.two_stage = Ht, Ht, False
            self.expanded_target = False
        cap = cfg.flip_cap
        if cap is None:
            cap = prm.m if flavor == "q-decoder" else 0
        self.cap = int(cap)
        self.thresholds = np.asarray(cfg.thresholds, dtype=np.int64)

    def decode(self, s: np.ndarray) -> DecodeOutcome:
        """Decode one syndrome.  The estimate is e' for bf-private on an LDPC key, else e."""
        s = np.array(s, dtype=np.uint8) & 1
        if s.shape != (self.p,):
            raise ValueError(f"syndrome must have {self.p} bits")
        est = np.zeros(self.n0 * self.p, dtype=np.uint8)
        ok, it = _kernels.decode_syndrome(s, est, self.stage1, self.qsup, self.upd, self.p,
                                          self.cfg.max_iterations, self.thresholds, self.cap,
                                          self.two_stage)
        # never report success with residual syndrome
        assert not ok or not s.any()
        return DecodeOutcome(est if ok else None, bool(ok), int(it))

    def failures(self, supports: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Failure bits and iteration counts for a batch of error supports (B x t)."""
        supports = np.ascontiguousarray(supports, dtype=np.int64)
        B = supports.shape[0]
        fail = np.zeros(B, dtype=np.int64)
        iters = np.zeros(B, dtype=np.int64)
        _kernels.decode_batch(supports, self.public_upd, self.stage1, self.qsup, self.upd,
                              self.p, self.cfg.max_iterations, self.thresholds, self.cap,
                              self.two_stage, self.expanded_target, fail, iters)
        return fail, iters


def syndrome(x: np.ndarray, sk: PrivateKey) -> np.ndarray:
    """s = x Q^T H^T (= x H^T in MDPC mode)."""
    prm = sk.params
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (prm.n,):
        raise ValueError(f"ciphertext must have {prm.n} bits")
    sup = np.flatnonzero(x).astype(np.int64)
    s = np.zeros(prm.p, dtype=np.uint8)
    if prm.mdpc:
        _kernels.syndrome_from_support(sup, _decode_arrays(sk.H), prm.p, s)
    else:
        expanded = np.zeros(prm.n, dtype=np.uint8)
        _kernels.expand_support(sup, _pad_grid(
            [[sk.Q[i, j].support for j in range(prm.n0)] for i in range(prm.n0)]), prm.p, expanded)
        _kernels.syndrome_from_support(np.flatnonzero(expanded).astype(np.int64),
                                       _decode_arrays(sk.H), prm.p, s)
    return s


def bf_decode(s: np.ndarray, H: Sequence[RingElement], cfg: DecoderConfig = DecoderConfig()) -> DecodeOutcome:
    """Bit flipping with an arbitrary list of parity-check blocks."""
    p = H[0].p
    sup = _decode_arrays(H)
    s = np.array(s, dtype=np.uint8) & 1
    est = np.zeros(len(H) * p, dtype=np.uint8)
    ok, it = _kernels.decode_syndrome(s, est, sup, np.zeros((1, 1, 1), dtype=np.int64), sup, p,
                                      cfg.max_iterations, np.asarray(cfg.thresholds, dtype=np.int64),
                                      int(cfg.flip_cap or 0), False)
    assert not ok or not s.any()
    return DecodeOutcome(est if ok else None, bool(ok), int(it))


def q_decode(s: np.ndarray, sk: PrivateKey, cfg: DecoderConfig = DecoderConfig("q-decoder")) -> DecodeOutcome:
    if sk.params.mdpc:
        return bf_decode(s, sk.H, cfg)
    return Decoder(sk, replace(cfg, flavor="q-decoder")).decode(s)


def decrypt(x: np.ndarray, sk: PrivateKey, cfg: DecoderConfig = DecoderConfig(),
            decoder: Decoder | None = None) -> np.ndarray:
    """Message bits, or DecodingFailure."""
    prm = sk.params
    dec = decoder or Decoder(sk, cfg)
    out = dec.decode(syndrome(x, sk))
    if not out.success:
        raise DecodingFailure(f"syndrome not cleared after {out.iterations_used} iterations")
    e = out.recovered_error
    if dec.expanded_target:
        e = contract_error(e, sk)
    # weight 0 only arises from a zero syndrome, i.e. an error-free codeword
    if int(e.sum()) not in (0, prm.t):
        raise DecodingFailure(f"recovered error has weight {int(e.sum())}, expected {prm.t}")
    return (np.asarray(x, dtype=np.uint8) ^ e)[:prm.k]


def wilson_interval(failures: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(failures, trials).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class DfrEstimate:
    t: int
    trials: int
    failures: int
    ci_low: float
    ci_high: float

    @property
    def rate(self) -> float:
        return self.failures / self.trials

    def csv_row(self) -> list:
        return [self.t, self.trials, self.failures, f"{self.rate:.6g}",
                f"{self.ci_low:.6g}", f"{self.ci_high:.6g}"]


DFR_CSV_HEADER = ["t", "trials", "failures", "rate", "ci_low", "ci_high"]


def chunk_rng(seed: int, chunk: int, stream: int = 0) -> np.random.Generator:
    """RNG for one fixed-size chunk of trials; independent of how chunks are scheduled."""
    return np.random.default_rng([int(seed), int(stream), int(chunk)])


def _count_chunk(args) -> int:
    sk, cfg, t, seed, chunk, size = args
    dec = Decoder(sk, cfg)
    sup = sample_error_supports(sk.params.n, t, size, chunk_rng(seed, chunk, 1))
    return int(dec.failures(sup)[0].sum())


def _chunks(trials: int, chunk: int) -> list[tuple[int, int]]:
    return [(c, min(chunk, trials - c * chunk)) for c in range((trials + chunk - 1) // chunk)]


def run_chunks(fn, jobs: list, workers: int = 1) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    from multiprocessing import get_context

    with get_context("spawn").Pool(workers) as pool:
        return pool.map(fn, jobs)


def estimate_dfr(sk: PrivateKey, cfg: DecoderConfig, trials: int, seed: int, t: int | None = None,
                 workers: int = 1, chunk: int = DEFAULT_CHUNK, full_roundtrip: bool = False) -> DfrEstimate:
    """Failure rate on a fixed key with fresh random errors (and messages, if full_roundtrip).

    The batch path decodes xH~^T = eH~^T directly: the message part of a
    ciphertext has zero syndrome, so it cannot change the outcome.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t = sk.params.t if t is None else t
    if full_roundtrip:
        rng = np.random.default_rng(seed)
        pk = sk.public_key()
        dec = Decoder(sk, cfg)
        prm = replace(sk.params, t=t)
        sk_t = replace(sk, params=prm)
        fails = 0
        for _ in range(trials):
            u = rng.integers(0, 2, prm.k, dtype=np.uint8)
            x = encrypt(u, pk, sample_error(prm.n, t, rng))
            try:
                if not np.array_equal(decrypt(x, sk_t, cfg, dec), u):
                    fails += 1
            except DecodingFailure:
                fails += 1
    else:
        jobs = [(sk, cfg, t, seed, c, size) for c, size in _chunks(trials, chunk)]
        fails = sum(run_chunks(_count_chunk, jobs, workers))
    lo, hi = wilson_interval(fails, trials)
    return DfrEstimate(t, trials, fails, lo, hi)

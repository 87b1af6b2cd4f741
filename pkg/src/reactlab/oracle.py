"""Decryption-failure oracle, tally collection and multiplicity classification.

Collection runs in fixed-size chunks of queries; chunk c draws its error
vectors from its own seeded stream, so tallies do not depend on how many
workers process the chunks or on checkpoint/resume boundaries.
"""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from . import _kernels
from .decoders import (
    DEFAULT_CHUNK,
    Decoder,
    DecoderConfig,
    DecodingFailure,
    chunk_rng,
    decrypt,
    run_chunks,
)
from .qc_code import PrivateKey, PublicKey, encrypt, sample_error_supports

log = logging.getLogger(__name__)

METHODS = ("gjs", "fhs", "fhz")
ERROR_STREAM = 2


class OracleBudgetExhausted(Exception):
    pass


class InsufficientData(ValueError):
    pass


class DecryptionOracle:
    """Bob: answers one bit per ciphertext, 1 on decoding failure."""

    def __init__(self, sk: PrivateKey, cfg: DecoderConfig, budget: int | None = None,
                 rng: np.random.Generator | int | None = 0):
        self.sk = sk
        self.pk: PublicKey = sk.public_key()
        self.cfg = cfg
        self.budget = budget
        self.queries = 0
        self.rng = np.random.default_rng(rng)
        self._decoder = Decoder(sk, cfg)

    def _charge(self, count: int) -> None:
        if self.budget is not None and self.queries + count > self.budget:
            raise OracleBudgetExhausted(f"budget of {self.budget} queries exhausted")
        self.queries += count

    def query(self, e: np.ndarray) -> int:
        """Full path: encrypt a random message with e, decrypt, report failure."""
        prm = self.sk.params
        e = np.asarray(e, dtype=np.uint8)
        if e.shape != (prm.n,):
            raise ValueError(f"error vector must have {prm.n} bits")
        if int(e.sum()) not in (0, prm.t):
            raise ValueError(f"error vector must have weight {prm.t}")
        self._charge(1)
        u = self.rng.integers(0, 2, prm.k, dtype=np.uint8)
        x = encrypt(u, self.pk, e)
        try:
            out = decrypt(x, self.sk, self.cfg, self._decoder)
        except DecodingFailure:
            return 1
        return int(not np.array_equal(out, u))

    def query_supports(self, supports: np.ndarray) -> np.ndarray:
        """Batch path on error supports.  The message never affects the syndrome,
        so only e is simulated; a decode counts as a failure unless it returns e exactly."""
        supports = np.ascontiguousarray(supports, dtype=np.int64)
        self._charge(supports.shape[0])
        return self._decoder.failures(supports)[0]


@dataclass
class TallySet:
    """Failure counts a and query counts b per distance (index 0 unused).

    gjs: one row (last error block); fhs: one row for the union of block
    spectra plus u, v for the last block; fhz: one row per error block.
    """
    method: str
    p: int
    a: np.ndarray
    b: np.ndarray
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    queries: int = 0
    failures: int = 0
    chunks_done: int = 0

    @classmethod
    def empty(cls, method: str, p: int, n0: int) -> "TallySet":
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        rows = n0 if method == "fhz" else 1
        z = lambda: np.zeros((rows, p // 2 + 1), dtype=np.int64)  # noqa: E731
        if method == "fhs":
            return cls(method, p, z(), z(), np.zeros((1, p // 2 + 1), dtype=np.int64),
                       np.zeros((1, p // 2 + 1), dtype=np.int64))
        return cls(method, p, z(), z())

    def add(self, other: "TallySet") -> None:
        self.a += other.a
        self.b += other.b
        if self.u is not None:
            self.u += other.u
            self.v += other.v
        self.queries += other.queries
        self.failures += other.failures
        self.chunks_done += other.chunks_done

    def check(self) -> None:
        for a, b in [(self.a, self.b)] + ([(self.u, self.v)] if self.u is not None else []):
            if (a < 0).any() or (a > b).any() or (b > self.queries).any():
                raise AssertionError("tally invariant violated")

    def ratios(self, row: int = 0, which: str = "ab") -> np.ndarray:
        a, b = (self.a, self.b) if which == "ab" else (self.u, self.v)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(b[row] > 0, a[row] / np.maximum(b[row], 1), np.nan)

    @property
    def dfr(self) -> float:
        return self.failures / self.queries if self.queries else float("nan")

    # persistence -----------------------------------------------------------
    def save(self, path: str | os.PathLike) -> None:
        arrays = {"a": self.a, "b": self.b}
        if self.u is not None:
            arrays.update(u=self.u, v=self.v)
        tmp = Path(str(path) + ".tmp.npz")
        np.savez(tmp, method=self.method, p=self.p, queries=self.queries, failures=self.failures,
                 chunks_done=self.chunks_done, **arrays)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TallySet":
        with np.load(path) as z:
            return cls(str(z["method"]), int(z["p"]), z["a"].copy(), z["b"].copy(),
                       z["u"].copy() if "u" in z else None, z["v"].copy() if "v" in z else None,
                       int(z["queries"]), int(z["failures"]), int(z["chunks_done"]))

    def write_csv(self, fh: TextIO, row: int = 0, which: str = "ab",
                  true_multiplicity: np.ndarray | None = None) -> None:
        a, b = (self.a, self.b) if which == "ab" else (self.u, self.v)
        w = csv.writer(fh, lineterminator="\n")
        head = ["d", "b_d", "a_d", "ratio"] + (["true_multiplicity"] if true_multiplicity is not None else [])
        w.writerow(head)
        for d in range(1, self.p // 2 + 1):
            bd, ad = int(b[row, d]), int(a[row, d])
            rec = [d, bd, ad, f"{ad / bd:.8f}" if bd else "nan"]
            if true_multiplicity is not None:
                rec.append(int(true_multiplicity[d]))
            w.writerow(rec)

    def write_plot_data(self, fh: TextIO, row: int = 0, true_multiplicity: np.ndarray | None = None) -> None:
        """Whitespace-separated columns for gnuplot: d ratio [mu]."""
        r = self.ratios(row)
        fh.write("# d ratio" + (" mu" if true_multiplicity is not None else "") + "\n")
        for d in range(1, self.p // 2 + 1):
            extra = f" {int(true_multiplicity[d])}" if true_multiplicity is not None else ""
            fh.write(f"{d} {r[d]:.8f}{extra}\n")


def _tally_chunk(args) -> TallySet:
    sk, cfg, method, seed, chunk, size = args
    prm = sk.params
    p, n0 = prm.p, prm.n0
    sup = sample_error_supports(prm.n, prm.t, size, chunk_rng(seed, chunk, ERROR_STREAM))
    fails = Decoder(sk, cfg).failures(sup)[0]
    out = TallySet.empty(method, p, n0)
    last = np.array([n0 - 1], dtype=np.int64)
    if method == "gjs":
        _kernels.tally_blocks(sup, fails, p, last, out.a, out.b)
    elif method == "fhs":
        _kernels.tally_union(sup, fails, p, n0, out.a[0], out.b[0])
        _kernels.tally_blocks(sup, fails, p, last, out.u, out.v)
    else:
        _kernels.tally_blocks(sup, fails, p, np.arange(n0, dtype=np.int64), out.a, out.b)
    out.queries = size
    out.failures = int(fails.sum())
    out.chunks_done = 1
    return out


def collect(oracle: DecryptionOracle, method: str, T: int, seed: int, workers: int = 1,
            chunk: int = DEFAULT_CHUNK, checkpoint: str | os.PathLike | None = None,
            checkpoint_every: int = 16) -> TallySet:
    """Run T random-error queries against the oracle and tally by distance.

    With ``checkpoint`` set, tallies are saved every ``checkpoint_every``
    chunks and an existing checkpoint is resumed.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    prm = oracle.sk.params
    if method in ("fhs", "fhz") and prm.mdpc:
        log.warning("%s collection on an MDPC key reduces to GJS-style tallies", method)
    total = TallySet.empty(method, prm.p, prm.n0)
    if checkpoint is not None and Path(checkpoint).exists():
        total = TallySet.load(checkpoint)
        if total.method != method or total.p != prm.p:
            raise ValueError("checkpoint belongs to a different campaign")
        log.info("resuming from %s after %d queries", checkpoint, total.queries)
    sizes = [min(chunk, T - c * chunk) for c in range((T + chunk - 1) // chunk)]
    todo = list(range(total.chunks_done, len(sizes)))
    step = max(1, checkpoint_every) * max(1, workers)
    for start in range(0, len(todo), step):
        part = todo[start:start + step]
        need = sum(sizes[c] for c in part)
        oracle._charge(need)
        jobs = [(oracle.sk, oracle.cfg, method, seed, c, sizes[c]) for c in part]
        for res in run_chunks(_tally_chunk, jobs, workers):
            total.add(res)
        if checkpoint is not None:
            total.save(checkpoint)
    total.check()
    return total


def gjs_collect(oracle: DecryptionOracle, T: int, seed: int, **kw) -> TallySet:
    """Tallies over the spectrum of the last error block."""
    return collect(oracle, "gjs", T, seed, **kw)


def fhs_collect(oracle: DecryptionOracle, T: int, seed: int, **kw) -> TallySet:
    """(a, b) over the union of all block spectra, (u, v) over the last block."""
    return collect(oracle, "fhs", T, seed, **kw)


def fhz_collect(oracle: DecryptionOracle, M: int, seed: int, **kw) -> TallySet:
    """One (a, b) row per error block j; row j reflects the entries of Q touching e_j."""
    return collect(oracle, "fhz", M, seed, **kw)


def trace_tally(method: str, p: int, n0: int, supports: Sequence[Sequence[int]], fails: Sequence[int]) -> TallySet:
    """Tally explicit queries (error supports with their failure bits)."""
    sup = np.array([sorted(s) for s in supports], dtype=np.int64).reshape(len(supports), -1)
    f = np.asarray(fails, dtype=np.int64)
    out = TallySet.empty(method, p, n0)
    last = np.array([n0 - 1], dtype=np.int64)
    if method == "gjs":
        _kernels.tally_blocks(sup, f, p, last, out.a, out.b)
    elif method == "fhs":
        _kernels.tally_union(sup, f, p, n0, out.a[0], out.b[0])
        _kernels.tally_blocks(sup, f, p, last, out.u, out.v)
    else:
        _kernels.tally_blocks(sup, f, p, np.arange(n0, dtype=np.int64), out.a, out.b)
    out.queries = len(f)
    out.failures = int(f.sum())
    return out


# -- classification ---------------------------------------------------------

@dataclass
class MultiplicityEstimate:
    p: int
    multiplicities: dict[int, int]
    ratios: dict[int, float]
    confidence: float  # smallest gap between adjacent bands, in ratio units
    confidence_se: float  # the same gap over the pooled per-distance standard error
    band_edges: list[tuple[float, float]] = field(default_factory=list)

    def distances(self, min_multiplicity: int = 1) -> frozenset[int]:
        return frozenset(d for d, m in self.multiplicities.items() if m >= min_multiplicity)

    @property
    def bands(self) -> int:
        return len(self.band_edges)


def classify_multiplicities(a: np.ndarray, b: np.ndarray, max_multiplicity: int | None = None,
                            gap_se: float = 4.0, min_samples: int = 1,
                            known_block_weight: int | None = None) -> MultiplicityEstimate:
    """Split sorted ratios a_d/b_d into bands at the widest gaps.

    With ``max_multiplicity`` K the K widest gaps are used; otherwise every
    gap wider than ``gap_se`` pooled standard errors starts a new band.  The
    highest band is multiplicity 0, the next one down 1, and so on.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    p = 2 * (len(a) - 1) + 1
    ds = np.arange(1, len(a))
    if (b[1:] < min_samples).any():
        raise InsufficientData(f"{int((b[1:] < min_samples).sum())} distances below {min_samples} samples")
    r = a[1:] / b[1:]
    order = np.argsort(-r, kind="stable")  # descending: band 0 first
    rs = r[order]
    gaps = rs[:-1] - rs[1:]
    rate = float(a[1:].sum() / b[1:].sum())
    se = float(np.sqrt(max(rate * (1 - rate), 1e-300) / np.mean(b[1:])))
    if max_multiplicity is not None:
        k = min(max_multiplicity, len(gaps))
        cuts = sorted(np.argsort(-gaps, kind="stable")[:k]) if k else []
        cuts = [c for c in cuts if gaps[c] > 0]
    else:
        cuts = [int(i) for i in np.flatnonzero(gaps > gap_se * se)]
    labels = np.zeros(len(rs), dtype=np.int64)
    edges = []
    start = 0
    for band, c in enumerate(list(cuts) + [len(rs) - 1]):
        labels[start:c + 1] = band
        edges.append((float(rs[c]), float(rs[start])))
        start = c + 1
    if known_block_weight is not None:
        labels = np.minimum(labels, known_block_weight * (known_block_weight - 1) // 2)
    mult = {int(ds[order[i]]): int(labels[i]) for i in range(len(rs))}
    conf = float(min(gaps[c] for c in cuts)) if cuts else 0.0
    return MultiplicityEstimate(p, dict(sorted(mult.items())), {int(d): float(x) for d, x in zip(ds, r)},
                                conf, conf / se if se > 0 else 0.0, edges)


def ranked_distances(est: MultiplicityEstimate) -> list[int]:
    """Distances ordered from most to least likely to lie in the spectrum (lowest ratio first)."""
    return sorted(est.ratios, key=lambda d: (est.ratios[d], d))


def grouped_ratio_stats(ratios: np.ndarray, mu: np.ndarray, levels: Sequence[int] = (0, 1, 2)) -> dict:
    """Mean ratio and its standard error per true multiplicity (index 0 unused in both arrays)."""
    out = {}
    r = np.asarray(ratios)[1:]
    m = np.asarray(mu)[1:]
    for lv in levels:
        sel = r[(m == lv) & np.isfinite(r)]
        if len(sel):
            out[lv] = (float(sel.mean()), float(sel.std(ddof=1) / np.sqrt(len(sel))) if len(sel) > 1 else 0.0,
                       int(len(sel)))
    return out

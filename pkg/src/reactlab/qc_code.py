"""QC-LDPC / QC-MDPC McEliece: parameters, key generation, encryption, key files.

Conventions: an n-bit vector is split into n0 length-p blocks; the private
parity-check matrix is H = [H_0 | ... | H_{n0-1}], the public one is
H~ = H Q, and the systematic public generator is G' = [I | P] with block
P_i the circulant of g_i = (H~_{n0-1}^{-1} H~_i)^T.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, TextIO

import numpy as np

from .ring import (
    NotInvertible,
    QcBlockMatrix,
    RingElement,
    clmul,
    fold,
    is_prime,
    packed_mul,
    qc_inverse,
    qc_mul,
    qc_transpose,
    ring_inv,
    ring_mul,
    ring_transpose,
)


class ParameterError(ValueError):
    pass


def circulant_weights(mbar: Sequence[int]) -> np.ndarray:
    n0 = len(mbar)
    return np.array([[mbar[(j - i) % n0] for j in range(n0)] for i in range(n0)], dtype=np.int64)


def permanent(mat: np.ndarray) -> int:
    """Ryser's formula, exact integer arithmetic."""
    mat = [[int(x) for x in row] for row in np.asarray(mat)]
    n = len(mat)
    if n == 0:
        return 1
    total = 0
    for subset in range(1, 1 << n):
        cols = [j for j in range(n) if subset >> j & 1]
        prod = 1
        for row in mat:
            prod *= sum(row[j] for j in cols)
            if prod == 0:
                break
        total += (-1) ** len(cols) * prod
    return (-1) ** n * total


def permanent_bruteforce(mat: np.ndarray) -> int:
    n = len(mat)
    return sum(math.prod(int(mat[i][s[i]]) for i in range(n)) for s in itertools.permutations(range(n)))


def build_weight_matrix(mbar: Sequence[int]) -> tuple[np.ndarray, int, bool]:
    """w(Q), its permanent and whether the permanent is odd."""
    w = circulant_weights(mbar)
    per = permanent(w)
    return w, per, per % 2 == 1


@dataclass(frozen=True)
class SystemParams:
    n0: int
    p: int
    dv: int
    t: int
    mbar: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        mbar = tuple(int(m) for m in self.mbar) or (0,) * self.n0
        object.__setattr__(self, "mbar", mbar)
        if self.n0 < 2:
            raise ParameterError("n0 must be at least 2")
        if not is_prime(self.p) or self.p < 3:
            raise ParameterError(f"p={self.p} is not an odd prime")
        if len(mbar) != self.n0:
            raise ParameterError("mbar needs one weight per block")
        if not 0 < self.dv < self.p or self.dv % 2 == 0:
            raise ParameterError("dv must be odd and below p")
        if not 0 <= self.t <= self.n:
            raise ParameterError("t out of range")
        if any(m < 0 or m >= self.p for m in mbar):
            raise ParameterError("block weights of Q must lie in [0, p)")
        if not self.mdpc:
            if any(m == 0 for m in mbar) and sum(mbar) == 0:
                raise ParameterError("mbar is all zero")
            if not build_weight_matrix(mbar)[2]:
                raise ParameterError(f"permanent of w(Q) for mbar={list(mbar)} is even")

    @property
    def mdpc(self) -> bool:
        return all(m == 0 for m in self.mbar)

    @property
    def n(self) -> int:
        return self.n0 * self.p

    @property
    def k(self) -> int:
        return (self.n0 - 1) * self.p

    @property
    def m(self) -> int:
        """Row weight of Q (1 in MDPC mode, where Q = I)."""
        return 1 if self.mdpc else sum(self.mbar)

    def describe(self) -> str:
        mode = "MDPC" if self.mdpc else f"LDPC mbar={list(self.mbar)} m={self.m}"
        return f"n0={self.n0} p={self.p} dv={self.dv} t={self.t} n={self.n} k={self.k} {mode}"


@dataclass(frozen=True)
class PublicKey:
    params: SystemParams
    gpolys: tuple[RingElement, ...]

    @cached_property
    def gbits(self) -> tuple[int, ...]:
        return tuple(g.to_int() for g in self.gpolys)

    def generator_dense(self) -> np.ndarray:
        """(n0-1)p x n0 p binary generator G' = [I | P]."""
        prm = self.params
        k, p = prm.k, prm.p
        mat = np.zeros((k, prm.n), dtype=np.uint8)
        mat[:, :k] = np.eye(k, dtype=np.uint8)
        for i, g in enumerate(self.gpolys):
            mat[i * p:(i + 1) * p, k:] = g.circulant()
        return mat


@dataclass(frozen=True)
class PrivateKey:
    params: SystemParams
    H: tuple[RingElement, ...]
    Q: QcBlockMatrix

    @cached_property
    def h_matrix(self) -> QcBlockMatrix:
        return QcBlockMatrix.from_rows([self.H])

    @cached_property
    def htilde(self) -> tuple[RingElement, ...]:
        """Blocks of H~ = H Q."""
        return qc_mul(self.h_matrix, self.Q).blocks[0]

    @cached_property
    def q_inverse_transpose(self) -> QcBlockMatrix:
        return qc_transpose(qc_inverse(self.Q))

    def public_key(self) -> PublicKey:
        return derive_public_key(self)


def derive_public_key(sk: PrivateKey) -> PublicKey:
    ht = sk.htilde
    inv_last = ring_inv(ht[-1])
    return PublicKey(sk.params, tuple(ring_transpose(ring_mul(inv_last, h)) for h in ht[:-1]))


def _sample_q(params: SystemParams, rng: np.random.Generator) -> QcBlockMatrix:
    w = circulant_weights(params.mbar)
    return QcBlockMatrix(params.p, tuple(
        tuple(RingElement.random(int(w[i, j]), params.p, rng) for j in range(params.n0))
        for i in range(params.n0)))


def keygen(params: SystemParams, rng: np.random.Generator | int,
           max_attempts: int = 1000) -> tuple[PrivateKey, PublicKey]:
    """Random private key and matching public key.

    Q is redrawn until it is non-singular (tested by inversion, the
    permanent rule being only sufficient), H is redrawn until the last block
    of H Q is invertible.
    """
    rng = np.random.default_rng(rng)
    p, n0 = params.p, params.n0
    for _ in range(max_attempts):
        H = tuple(RingElement.random(params.dv, p, rng) for _ in range(n0))
        if params.mdpc:
            Q = QcBlockMatrix.identity(n0, p)
        else:
            for _ in range(max_attempts):
                Q = _sample_q(params, rng)
                try:
                    qc_inverse(Q)
                    break
                except NotInvertible:
                    continue
            else:
                raise ParameterError("could not draw a non-singular Q")
        sk = PrivateKey(params, H, Q)
        if sk.htilde[-1].is_unit():
            return sk, derive_public_key(sk)
    raise ParameterError("could not draw an invertible last block of H Q")


def sample_error(n: int, t: int, rng: np.random.Generator) -> np.ndarray:
    e = np.zeros(n, dtype=np.uint8)
    if t:
        e[rng.choice(n, size=t, replace=False)] = 1
    return e


def sample_error_supports(n: int, t: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """count x t array of sorted error positions, each row uniform among weight-t sets."""
    if t == 0:
        return np.zeros((count, 0), dtype=np.int64)
    # argpartition of iid keys gives a uniform t-subset per row
    keys = rng.random((count, n))
    sup = np.argpartition(keys, t - 1, axis=1)[:, :t] if t < n else np.tile(np.arange(n), (count, 1))
    return np.sort(sup, axis=1).astype(np.int64)


def _blocks(vec: np.ndarray, n0: int, p: int) -> list[int]:
    """Packed int per length-p block."""
    vec = np.asarray(vec, dtype=np.uint8)
    out = []
    for j in range(n0):
        blk = vec[j * p:(j + 1) * p]
        out.append(int.from_bytes(np.packbits(blk, bitorder="little").tobytes(), "little"))
    return out


def _unblocks(blocks: Sequence[int], p: int) -> np.ndarray:
    nbytes = (p + 7) // 8
    parts = [np.unpackbits(np.frombuffer(b.to_bytes(nbytes, "little"), dtype=np.uint8),
                           bitorder="little")[:p] for b in blocks]
    return np.concatenate(parts).astype(np.uint8)


def encode(u: np.ndarray, pk: PublicKey) -> np.ndarray:
    """Codeword u G'."""
    prm = pk.params
    u = np.asarray(u, dtype=np.uint8)
    if u.shape != (prm.k,):
        raise ValueError(f"message must have {prm.k} bits")
    ub = _blocks(u, prm.n0 - 1, prm.p)
    red = 0
    for ui, gi in zip(ub, pk.gbits):
        if ui:
            red ^= fold(clmul(ui, gi), prm.p)
    return np.concatenate([u, _unblocks([red], prm.p)])


def encrypt(u: np.ndarray, pk: PublicKey, e: np.ndarray) -> np.ndarray:
    prm = pk.params
    e = np.asarray(e, dtype=np.uint8)
    if e.shape != (prm.n,):
        raise ValueError(f"error vector must have {prm.n} bits")
    return encode(u, pk) ^ e


def public_syndrome(x: np.ndarray, sk: PrivateKey) -> np.ndarray:
    """x H~^T via the public parity-check blocks."""
    prm = sk.params
    xb = _blocks(x, prm.n0, prm.p)
    acc = 0
    for xj, hj in zip(xb, sk.htilde):
        if xj:
            acc ^= packed_mul(xj, ring_transpose(hj))
    return _unblocks([acc], prm.p)


def expand_error(e: np.ndarray, sk: PrivateKey) -> np.ndarray:
    """e' = e Q^T."""
    prm = sk.params
    eb = _blocks(e, prm.n0, prm.p)
    Q = sk.Q
    out = []
    for j in range(prm.n0):
        acc = 0
        for i in range(prm.n0):
            if eb[i]:
                acc ^= packed_mul(eb[i], ring_transpose(Q[j, i]))
        out.append(acc)
    return _unblocks(out, prm.p)


def contract_error(e_exp: np.ndarray, sk: PrivateKey) -> np.ndarray:
    """Invert expand_error: e = e' (Q^T)^{-1}."""
    prm = sk.params
    eb = _blocks(e_exp, prm.n0, prm.p)
    qit = sk.q_inverse_transpose
    out = []
    for j in range(prm.n0):
        acc = 0
        for i in range(prm.n0):
            if eb[i] and not qit[i, j].is_zero():
                acc ^= fold(clmul(eb[i], qit[i, j].to_int()), prm.p)
        out.append(acc)
    return _unblocks(out, prm.p)


# -- key files --------------------------------------------------------------

def format_element(a: RingElement) -> str:
    """p on the first line, then one support index per line."""
    return "\n".join([str(a.p)] + [str(i) for i in a.support]) + "\n"


def parse_element(text: str) -> RingElement:
    vals = [int(tok) for tok in text.split()]
    return RingElement(vals[0], tuple(vals[1:]))


def _sup(a: RingElement) -> str:
    return " ".join(str(i) for i in a.support)


def write_key(fh: TextIO, params: SystemParams, sk: PrivateKey | None = None,
              pk: PublicKey | None = None, header: Sequence[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    if not params.mdpc:
        # the public part alone does not determine mbar
        fh.write(f"# mbar: {' '.join(str(m) for m in params.mbar)}\n")
    fh.write(f"{params.n0} {params.p} {params.dv} {params.t}\n")
    if sk is not None:
        for i, h in enumerate(sk.H):
            fh.write(f"H {i}: {_sup(h)}\n")
        if not params.mdpc:
            for i in range(params.n0):
                for j in range(params.n0):
                    fh.write(f"Q {i} {j}: {_sup(sk.Q[i, j])}\n")
    if pk is not None:
        for i, g in enumerate(pk.gpolys):
            fh.write(f"G {i}: {_sup(g)}\n")


@dataclass
class KeyFile:
    params: SystemParams
    sk: PrivateKey | None = None
    pk: PublicKey | None = None
    comments: list[str] = field(default_factory=list)


def read_key(fh: TextIO) -> KeyFile:
    header = None
    H: dict[int, RingElement] = {}
    Qd: dict[tuple[int, int], RingElement] = {}
    G: dict[int, RingElement] = {}
    comments = []
    for raw in fh:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        if header is None:
            header = [int(x) for x in line.split()]
            if len(header) != 4:
                raise ValueError("key header must read 'n0 p dv t'")
            p = header[1]
            continue
        tag, _, sup = line.partition(":")
        parts = tag.split()
        elem = RingElement(p, tuple(int(x) for x in sup.split()))
        if parts[0] == "H":
            H[int(parts[1])] = elem
        elif parts[0] == "Q":
            Qd[int(parts[1]), int(parts[2])] = elem
        elif parts[0] == "G":
            G[int(parts[1])] = elem
        else:
            raise ValueError(f"unknown key line: {line!r}")
    if header is None:
        raise ValueError("empty key file")
    n0, p, dv, t = header
    if Qd:
        Q = QcBlockMatrix(p, tuple(tuple(Qd[i, j] for j in range(n0)) for i in range(n0)))
        mbar = tuple(int(w) for w in Q.weights()[0])
    else:
        Q = QcBlockMatrix.identity(n0, p)
        noted = [c for c in comments if c.startswith("mbar:")]
        mbar = tuple(int(x) for x in noted[-1][5:].split()) if noted else ()
    params = SystemParams(n0, p, dv, t, mbar)
    sk = PrivateKey(params, tuple(H[i] for i in range(n0)), Q) if H else None
    pk = PublicKey(params, tuple(G[i] for i in range(n0 - 1))) if G else None
    return KeyFile(params, sk, pk, comments)

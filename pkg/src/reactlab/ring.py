"""Binary circulant blocks as elements of GF(2)[x]/(x^p + 1).

A circulant p x p matrix whose first row has ones at positions S is the
polynomial sum_{i in S} x^i.  Row r of the matrix is the first row rotated
right by r, so a row vector times the matrix is the polynomial product and
the transpose is the support negated modulo p.

Two representations are kept:

* sparse: sorted tuple of exponents (``RingElement.support``);
* packed: a Python ``int`` whose bit i is the coefficient of x^i.

Sparse x packed products use shift-accumulate with cyclic rotation; the
dense path is a carry-less multiply followed by folding modulo x^p + 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np


class NotInvertible(ArithmeticError):
    """Raised when an element (or block matrix) has no inverse."""


class ModulusMismatch(ValueError):
    pass


@lru_cache(maxsize=None)
def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def multiplicative_order_of_two(p: int) -> int:
    """Order of 2 modulo an odd prime p (p - 1 means x^p+1 = (x+1) * irreducible)."""
    k, acc = 1, 2 % p
    while acc != 1:
        acc = acc * 2 % p
        k += 1
    return k


# -- packed helpers ---------------------------------------------------------

def _mask(p: int) -> int:
    return (1 << p) - 1


def rotate(bits: int, k: int, p: int) -> int:
    """Multiply a packed element by x^k."""
    k %= p
    if k == 0:
        return bits
    return ((bits << k) | (bits >> (p - k))) & _mask(p)


def clmul(a: int, b: int) -> int:
    """Carry-less product in GF(2)[x] (no reduction)."""
    if a.bit_length() < b.bit_length():
        a, b = b, a
    out = 0
    while b:
        low = b & -b
        out ^= a << (low.bit_length() - 1)
        b ^= low
    return out


def fold(bits: int, p: int) -> int:
    """Reduce a packed GF(2)[x] polynomial modulo x^p + 1."""
    m = _mask(p)
    while bits >> p:
        bits = (bits & m) ^ (bits >> p)
    return bits


def _degree(a: int) -> int:
    return a.bit_length() - 1


def _poly_divmod(a: int, b: int) -> tuple[int, int]:
    if b == 0:
        raise ZeroDivisionError("division by zero polynomial")
    q = 0
    db = _degree(b)
    while a and _degree(a) >= db:
        s = _degree(a) - db
        q ^= 1 << s
        a ^= b << s
    return q, a


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _poly_divmod(a, b)[1]
    return a


def _packed_inverse(a: int, p: int) -> int:
    """Extended Euclid for a^{-1} mod x^p + 1, packed ints throughout."""
    modulus = (1 << p) | 1
    r0, r1 = modulus, a
    s0, s1 = 0, 1
    while r1:
        q, r = _poly_divmod(r0, r1)
        r0, r1 = r1, r
        s0, s1 = s1, s0 ^ clmul(q, s1)
    if r0 != 1:
        raise NotInvertible(f"gcd with x^{p}+1 has degree {_degree(r0)}")
    return fold(s0, p)


def _support_of(bits: int) -> tuple[int, ...]:
    out = []
    while bits:
        low = bits & -bits
        out.append(low.bit_length() - 1)
        bits ^= low
    return tuple(out)


# -- RingElement ------------------------------------------------------------

@dataclass(frozen=True)
class RingElement:
    """Sparse polynomial in GF(2)[x]/(x^p + 1); immutable."""

    p: int
    support: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.p < 3 or not is_prime(self.p):
            raise ValueError(f"modulus p={self.p} must be a prime >= 3")
        sup = tuple(sorted(int(i) for i in self.support))
        if len(set(sup)) != len(sup):
            raise ValueError("duplicate exponents in support")
        if sup and (sup[0] < 0 or sup[-1] >= self.p):
            raise ValueError("exponents must lie in [0, p-1]")
        object.__setattr__(self, "support", sup)

    # constructors
    @classmethod
    def zero(cls, p: int) -> "RingElement":
        return cls(p, ())

    @classmethod
    def one(cls, p: int) -> "RingElement":
        return cls(p, (0,))

    @classmethod
    def monomial(cls, k: int, p: int) -> "RingElement":
        return cls(p, (k % p,))

    @classmethod
    def from_exponents(cls, exps: Iterable[int], p: int) -> "RingElement":
        """Sum of x^e over exps, reducing exponents mod p and cancelling pairs."""
        bits = 0
        for e in exps:
            bits ^= 1 << (int(e) % p)
        return cls.from_int(bits, p)

    @classmethod
    def from_int(cls, bits: int, p: int) -> "RingElement":
        return cls(p, _support_of(fold(bits, p)))

    @classmethod
    def from_array(cls, arr: Sequence[int] | np.ndarray, p: int) -> "RingElement":
        arr = np.asarray(arr)
        if arr.shape != (p,):
            raise ValueError(f"expected length-{p} vector")
        return cls(p, tuple(int(i) for i in np.flatnonzero(arr & 1)))

    @classmethod
    def random(cls, weight: int, p: int, rng: np.random.Generator) -> "RingElement":
        if weight > p:
            raise ValueError("weight exceeds p")
        return cls(p, tuple(int(i) for i in rng.choice(p, size=weight, replace=False)))

    # views
    @property
    def weight(self) -> int:
        return len(self.support)

    def is_zero(self) -> bool:
        return not self.support

    def to_int(self) -> int:
        bits = 0
        for i in self.support:
            bits |= 1 << i
        return bits

    def to_array(self, dtype=np.uint8) -> np.ndarray:
        out = np.zeros(self.p, dtype=dtype)
        out[list(self.support)] = 1
        return out

    def circulant(self) -> np.ndarray:
        """Dense p x p circulant matrix with this element as first row."""
        row = self.to_array()
        return np.stack([np.roll(row, r) for r in range(self.p)])

    # algebra
    def __add__(self, other: "RingElement") -> "RingElement":
        return ring_add(self, other)

    def __mul__(self, other: "RingElement") -> "RingElement":
        return ring_mul(self, other)

    def shift(self, k: int) -> "RingElement":
        return RingElement(self.p, tuple(sorted((i + k) % self.p for i in self.support)))

    def transpose(self) -> "RingElement":
        return ring_transpose(self)

    def inverse(self) -> "RingElement":
        return ring_inv(self)

    def is_unit(self) -> bool:
        if not self.support:
            return False
        return poly_gcd((1 << self.p) | 1, self.to_int()) == 1

    def __str__(self) -> str:
        return " ".join(str(i) for i in self.support)


def _check(a: RingElement, b: RingElement) -> None:
    if a.p != b.p:
        raise ModulusMismatch(f"moduli differ: {a.p} vs {b.p}")


def ring_add(a: RingElement, b: RingElement) -> RingElement:
    _check(a, b)
    return RingElement(a.p, tuple(sorted(set(a.support) ^ set(b.support))))


def mul_sparse(a: RingElement, b: RingElement) -> RingElement:
    """Shift-accumulate: rotate the packed form of the heavier operand."""
    _check(a, b)
    if a.weight < b.weight:
        a, b = b, a
    dense, p = a.to_int(), a.p
    acc = 0
    for k in b.support:
        acc ^= rotate(dense, k, p)
    return RingElement.from_int(acc, p)


def mul_dense(a: RingElement, b: RingElement) -> RingElement:
    """Carry-less product of packed forms, folded modulo x^p + 1."""
    _check(a, b)
    return RingElement.from_int(fold(clmul(a.to_int(), b.to_int()), a.p), a.p)


def ring_mul(a: RingElement, b: RingElement) -> RingElement:
    _check(a, b)
    if min(a.weight, b.weight) <= 64:
        return mul_sparse(a, b)
    return mul_dense(a, b)


def ring_inv(a: RingElement) -> RingElement:
    if a.is_zero():
        raise NotInvertible("zero has no inverse")
    if a.weight == 1:
        return RingElement.monomial(-a.support[0], a.p)
    return RingElement.from_int(_packed_inverse(a.to_int(), a.p), a.p)


def ring_transpose(a: RingElement) -> RingElement:
    return RingElement(a.p, tuple(sorted((-i) % a.p for i in a.support)))


def packed_mul(bits: int, a: RingElement) -> int:
    """Packed x sparse product, staying in the packed domain."""
    acc = 0
    for k in a.support:
        acc ^= rotate(bits, k, a.p)
    return acc


# -- block matrices ---------------------------------------------------------

@dataclass(frozen=True)
class QcBlockMatrix:
    """rows x cols grid of circulant blocks sharing one modulus."""

    p: int
    blocks: tuple[tuple[RingElement, ...], ...]

    def __post_init__(self) -> None:
        if not self.blocks or not self.blocks[0]:
            raise ValueError("empty block matrix")
        width = len(self.blocks[0])
        for row in self.blocks:
            if len(row) != width:
                raise ValueError("ragged block grid")
            for b in row:
                if b.p != self.p:
                    raise ModulusMismatch("all blocks must share p")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[RingElement]]) -> "QcBlockMatrix":
        return cls(rows[0][0].p, tuple(tuple(r) for r in rows))

    @classmethod
    def identity(cls, size: int, p: int) -> "QcBlockMatrix":
        return cls(p, tuple(
            tuple(RingElement.one(p) if i == j else RingElement.zero(p) for j in range(size))
            for i in range(size)))

    @property
    def rows(self) -> int:
        return len(self.blocks)

    @property
    def cols(self) -> int:
        return len(self.blocks[0])

    def __getitem__(self, ij: tuple[int, int]) -> RingElement:
        i, j = ij
        return self.blocks[i][j]

    def weights(self) -> np.ndarray:
        return np.array([[b.weight for b in row] for row in self.blocks], dtype=np.int64)

    def to_dense(self) -> np.ndarray:
        return np.block([[b.circulant() for b in row] for row in self.blocks]).astype(np.uint8)

    @classmethod
    def from_dense(cls, mat: np.ndarray, p: int) -> "QcBlockMatrix":
        """Read back a block-circulant matrix from the first row of every block."""
        r, c = mat.shape[0] // p, mat.shape[1] // p
        return cls(p, tuple(
            tuple(RingElement.from_array(mat[i * p, j * p:(j + 1) * p], p) for j in range(c))
            for i in range(r)))

    def __mul__(self, other: "QcBlockMatrix") -> "QcBlockMatrix":
        return qc_mul(self, other)

    def transpose(self) -> "QcBlockMatrix":
        return qc_transpose(self)


def qc_mul(a: QcBlockMatrix, b: QcBlockMatrix) -> QcBlockMatrix:
    if a.p != b.p:
        raise ModulusMismatch("moduli differ")
    if a.cols != b.rows:
        raise ValueError(f"shape mismatch: {a.rows}x{a.cols} times {b.rows}x{b.cols}")
    p = a.p
    out = []
    for i in range(a.rows):
        row = []
        for j in range(b.cols):
            acc = 0
            for k in range(a.cols):
                x, y = a[i, k], b[k, j]
                if x.is_zero() or y.is_zero():
                    continue
                sparse, dense = (x, y) if x.weight <= y.weight else (y, x)
                acc ^= packed_mul(dense.to_int(), sparse)
            row.append(RingElement.from_int(acc, p))
        out.append(tuple(row))
    return QcBlockMatrix(p, tuple(out))


def qc_transpose(a: QcBlockMatrix) -> QcBlockMatrix:
    return QcBlockMatrix(a.p, tuple(
        tuple(ring_transpose(a[j, i]) for j in range(a.rows)) for i in range(a.cols)))


def qc_inverse(a: QcBlockMatrix) -> QcBlockMatrix:
    """Inverse of a square block matrix over the ring.

    Gauss-Jordan with unit pivots; when a column has no unit entry a sum of
    two candidate rows is tried.  If that still fails the dense binary
    matrix is inverted instead, which also settles singularity.
    """
    from . import gf2

    n, p = a.rows, a.p
    if n != a.cols:
        raise ValueError("matrix must be square")
    # packed working copies: left | right (identity)
    left = [[a[i, j].to_int() for j in range(n)] for i in range(n)]
    right = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    modulus = (1 << p) | 1

    def unit(bits: int) -> bool:
        return bits != 0 and poly_gcd(modulus, bits) == 1

    def axpy(dst: int, src: int, coeff: int) -> None:
        for j in range(n):
            if left[src][j]:
                left[dst][j] ^= fold(clmul(coeff, left[src][j]), p)
            if right[src][j]:
                right[dst][j] ^= fold(clmul(coeff, right[src][j]), p)

    for col in range(n):
        piv = next((r for r in range(col, n) if unit(left[r][col])), None)
        if piv is None:
            for r1 in range(col, n):
                for r2 in range(r1 + 1, n):
                    if unit(left[r1][col] ^ left[r2][col]):
                        axpy(r1, r2, 1)
                        piv = r1
                        break
                if piv is not None:
                    break
        if piv is None:
            dense = a.to_dense()
            inv = gf2.inverse(dense)  # raises NotInvertible on singular input
            return QcBlockMatrix.from_dense(inv, p)
        left[col], left[piv] = left[piv], left[col]
        right[col], right[piv] = right[piv], right[col]
        pinv = _packed_inverse(left[col][col], p)
        left[col] = [fold(clmul(pinv, x), p) if x else 0 for x in left[col]]
        right[col] = [fold(clmul(pinv, x), p) if x else 0 for x in right[col]]
        for r in range(n):
            if r != col and left[r][col]:
                axpy(r, col, left[r][col])
    return QcBlockMatrix(p, tuple(
        tuple(RingElement.from_int(right[i][j], p) for j in range(n)) for i in range(n)))


def is_invertible(a: QcBlockMatrix) -> bool:
    try:
        qc_inverse(a)
    except NotInvertible:
        return False
    return True

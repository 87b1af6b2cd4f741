"""Dense GF(2) linear algebra on rows packed into Python ints.

Row i of an r x c matrix is an int whose bit j is entry (i, j).  Used for
the block-matrix inversion fallback and for information-set decoding.
"""
from __future__ import annotations

import numpy as np

from .ring import NotInvertible


def pack_rows(mat: np.ndarray) -> list[int]:
    mat = np.asarray(mat, dtype=np.uint8) & 1
    out = []
    for row in mat:
        # bit j <-> column j, so reverse the little-endian bit order of packbits
        out.append(int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little"))
    return out


def unpack_rows(rows: list[int], ncols: int) -> np.ndarray:
    nbytes = (ncols + 7) // 8
    buf = b"".join(r.to_bytes(nbytes, "little") for r in rows)
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")
    return bits.reshape(len(rows), nbytes * 8)[:, :ncols].copy()


def rref(rows: list[int], ncols: int, col_order=None) -> tuple[list[int], list[int]]:
    """Reduced row echelon form; returns (rows, pivot columns).

    ``col_order`` sets the order in which columns are tried as pivots, which
    is how an information set is chosen.
    """
    rows = list(rows)
    pivots: list[int] = []
    r = 0
    for c in (range(ncols) if col_order is None else col_order):
        if r == len(rows):
            break
        bit = 1 << int(c)
        piv = next((i for i in range(r, len(rows)) if rows[i] & bit), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pr = rows[r]
        for i in range(len(rows)):
            if i != r and rows[i] & bit:
                rows[i] ^= pr
        pivots.append(int(c))
        r += 1
    return rows[:r], pivots


def rank(mat: np.ndarray) -> int:
    return len(rref(pack_rows(mat), mat.shape[1])[1])


def inverse(mat: np.ndarray) -> np.ndarray:
    n = mat.shape[0]
    if mat.shape != (n, n):
        raise ValueError("square matrix required")
    aug = [r | (1 << (n + i)) for i, r in enumerate(pack_rows(mat))]
    red, piv = rref(aug, 2 * n, col_order=range(n))
    if len(piv) != n:
        raise NotInvertible("singular binary matrix")
    return unpack_rows([r >> n for r in red], n)


def null_space(mat: np.ndarray) -> np.ndarray:
    """Basis (as rows) of {v : mat @ v = 0}."""
    ncols = mat.shape[1]
    red, piv = rref(pack_rows(mat), ncols)
    free = [c for c in range(ncols) if c not in set(piv)]
    basis = []
    for f in free:
        v = 1 << f
        for row, pc in zip(red, piv):
            if row >> f & 1:
                v |= 1 << pc
        basis.append(v)
    return unpack_rows(basis, ncols) if basis else np.zeros((0, ncols), dtype=np.uint8)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (np.asarray(a, dtype=np.int64) @ np.asarray(b, dtype=np.int64) % 2).astype(np.uint8)

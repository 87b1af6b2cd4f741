"""From recovered distance spectra back to keys that decode.

Supports are handled as sorted tuples of positions modulo p.  A support is
"canonical" when it is the lexicographically smallest of its cyclic shifts;
the mirror of a support is its negation, canonicalised.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import gf2
from .decoders import DecoderConfig, Decoder, DecodingFailure, bf_decode, decrypt
from .qc_code import PrivateKey, PublicKey, encode, encrypt, sample_error
from .ring import (
    QcBlockMatrix,
    RingElement,
    packed_mul,
    qc_mul,
    ring_mul,
    ring_transpose,
    rotate,
)
from .spectrum import spectrum

log = logging.getLogger(__name__)


class NoSolution(Exception):
    """The spectrum admits no support of the requested weight."""


class BudgetExhausted(Exception):
    pass


# -- supports ---------------------------------------------------------------

def canonical(support: Iterable[int], p: int) -> tuple[int, ...]:
    sup = sorted({int(s) % p for s in support})
    if not sup:
        return ()
    return min(tuple(sorted((s - a) % p for s in sup)) for a in sup)


def mirror(support: Iterable[int], p: int) -> tuple[int, ...]:
    return canonical((-int(s) for s in support), p)


def distance_set(support: Iterable[int], p: int) -> frozenset[int]:
    return spectrum(support, p).distances()


# -- graph ------------------------------------------------------------------

def build_graph(distances: Iterable[int], p: int) -> list[int]:
    """Adjacency bitsets: bit j of adj[i] set iff the cyclic distance of i, j is listed."""
    ds = set(int(d) for d in distances)
    for d in ds:
        if not 1 <= d <= p // 2:
            raise ValueError(f"distance {d} outside [1, {p // 2}]")
    row0 = 0
    for d in ds:
        row0 |= 1 << d
        row0 |= 1 << (p - d)
    return [rotate(row0, i, p) for i in range(p)]


def edge_count(adj: Sequence[int]) -> int:
    return sum(a.bit_count() for a in adj) // 2


def _cliques(adj: Sequence[int], chosen: list[int], cand: int, need: int) -> Iterator[list[int]]:
    # vertices are taken in increasing order so each clique is produced once
    if need == 0:
        yield list(chosen)
        return
    while cand:
        if cand.bit_count() < need:
            return
        low = cand & -cand
        v = low.bit_length() - 1
        cand ^= low
        chosen.append(v)
        yield from _cliques(adj, chosen, cand & adj[v], need - 1)
        chosen.pop()


# -- DSR / DSDR -------------------------------------------------------------

@dataclass(frozen=True)
class DsrInstance:
    p: int
    distances: frozenset[int]
    weight: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "distances", frozenset(int(d) for d in self.distances))
        if any(not 1 <= d <= self.p // 2 for d in self.distances):
            raise ValueError("distances must lie in [1, p//2]")
        if self.weight < 1:
            raise ValueError("weight must be positive")
        if len(self.distances) > self.weight * (self.weight - 1) // 2:
            raise ValueError("more distances than pairs of a weight-w support")


def solve_dsr(inst: DsrInstance, max_solutions: int | None = None) -> list[tuple[int, ...]]:
    """All canonical supports of weight w whose distance set equals the target.

    The search is anchored at {0, d_min}: some pair of the unknown support is
    at distance d_min, and a cyclic shift moves it onto those two nodes.
    """
    p, w, target = inst.p, inst.weight, inst.distances
    if w == 1:
        if target:
            raise NoSolution("a single position has no distances")
        return [(0,)]
    if not target:
        raise NoSolution("empty spectrum for weight >= 2")
    adj = build_graph(target, p)
    d1 = min(target)
    cand = adj[0] & adj[d1] & ~1 & ~(1 << d1)
    found: set[tuple[int, ...]] = set()
    for rest in _cliques(adj, [], cand, w - 2):
        sup = [0, d1] + rest
        if distance_set(sup, p) == target:
            found.add(canonical(sup, p))
            if max_solutions and len(found) >= max_solutions:
                break
    if not found:
        raise NoSolution(f"no weight-{w} support has this spectrum")
    return sorted(found)


def mirror_pairs(solutions: Iterable[tuple[int, ...]], p: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Group canonical supports as (support, mirror); self-mirrored ones pair with themselves."""
    seen: set[tuple[int, ...]] = set()
    out = []
    for s in sorted(solutions):
        if s in seen:
            continue
        m = mirror(s, p)
        seen.update((s, m))
        out.append((s, m))
    return out


def _subset_cliques(adj: Sequence[int], p: int, w: int) -> list[tuple[int, ...]]:
    """Canonical weight-w cliques through node 0 (every distance inside the graph's set)."""
    if w == 1:
        return [(0,)]
    found = {canonical([0] + rest, p) for rest in _cliques(adj, [], adj[0] & ~1, w - 1)}
    return sorted(found)


@dataclass
class DsdrResult:
    p: int
    weights: tuple[int, ...]
    families: dict[int, list[tuple[tuple[int, ...], tuple[int, ...]]]]
    assignments: list[tuple[tuple[int, ...], ...]]

    @property
    def conservative_count(self) -> int:
        """2 per vector that has a nontrivial mirror (weight >= 3)."""
        return 2 * sum(1 for w in self.weights if w >= 3)

    @property
    def inflation(self) -> float:
        """Solutions found relative to one mirror-class assignment."""
        return len(self.assignments)


def solve_dsdr(union: Iterable[int], p: int, weights: Sequence[int],
               max_assignments: int = 10_000) -> DsdrResult:
    """Supports of the given weights whose spectra together cover exactly ``union``.

    Families list, per distinct weight, every mirror class of cliques lying
    inside the union graph.  Assignments pick one class per requested weight
    (unordered among equal weights) with the union of spectra equal to the
    target; the mirror partner of each pick is an equally valid solution.
    """
    weights = tuple(int(w) for w in weights)
    if not weights:
        raise ValueError("at least one weight required")
    target = frozenset(int(d) for d in union)
    adj = build_graph(target, p)
    families: dict[int, list] = {}
    spectra: dict[tuple[int, ...], frozenset[int]] = {}
    for w in sorted(set(weights)):
        cl = _subset_cliques(adj, p, w)
        families[w] = mirror_pairs(cl, p)
        for s, _ in families[w]:
            spectra[s] = distance_set(s, p)
    order = sorted(range(len(weights)), key=lambda i: -weights[i])
    cap_left = [sum(weights[i] * (weights[i] - 1) // 2 for i in order[k:]) for k in range(len(order) + 1)]
    out: list[tuple[tuple[int, ...], ...]] = []
    picks: list[tuple[int, ...] | None] = [None] * len(weights)

    def rec(k: int, covered: frozenset[int], last_idx: dict[int, int]) -> None:
        if len(out) >= max_assignments:
            return
        if len(target - covered) > cap_left[k]:
            return
        if k == len(order):
            if covered == target:
                out.append(tuple(picks))  # type: ignore[arg-type]
            return
        i = order[k]
        w = weights[i]
        fam = families[w]
        for idx in range(last_idx.get(w, 0), len(fam)):
            s = fam[idx][0]
            picks[i] = s
            rec(k + 1, covered | spectra[s], {**last_idx, w: idx})
        picks[i] = None

    rec(0, frozenset(), {})
    if not out:
        raise NoSolution("no assignment of cliques reproduces the spectrum union")
    return DsdrResult(p, weights, families, out)


# -- verification -----------------------------------------------------------

def key_syndrome(x: np.ndarray, blocks: Sequence[RingElement]) -> np.ndarray:
    """x times the transpose of the 1 x n0 circulant row [blocks]."""
    p = blocks[0].p
    x = np.asarray(x, dtype=np.uint8)
    acc = 0
    for j, b in enumerate(blocks):
        xb = x[j * p:(j + 1) * p]
        if xb.any():
            bits = int.from_bytes(np.packbits(xb, bitorder="little").tobytes(), "little")
            acc ^= packed_mul(bits, ring_transpose(b))
    out = np.zeros(p, dtype=np.uint8)
    for i in range(p):
        out[i] = acc >> i & 1
    return out


def intercept_ciphertexts(pk: PublicKey, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Fresh encryptions of random messages (the attacker only keeps the ciphertexts)."""
    prm = pk.params
    out = []
    for _ in range(count):
        u = rng.integers(0, 2, prm.k, dtype=np.uint8)
        out.append(encrypt(u, pk, sample_error(prm.n, prm.t, rng)))
    return out


def _is_codeword(c: np.ndarray, pk: PublicKey) -> bool:
    return bool(np.array_equal(encode(c[:pk.params.k], pk), c))


def decodes_with_blocks(blocks: Sequence[RingElement], pk: PublicKey, ciphertexts: Sequence[np.ndarray],
                        cfg: DecoderConfig) -> int:
    """Ciphertexts for which BF on [blocks] yields a weight-t error leaving a public codeword."""
    ok = 0
    for x in ciphertexts:
        out = bf_decode(key_syndrome(x, blocks), blocks, cfg)
        if not out.success:
            continue
        e = out.recovered_error
        if int(e.sum()) == pk.params.t and _is_codeword(x ^ e, pk):
            ok += 1
    return ok


def decodes_with_private_key(sk: PrivateKey, pk: PublicKey, ciphertexts: Sequence[np.ndarray],
                             cfg: DecoderConfig) -> int:
    dec = Decoder(sk, cfg)
    ok = 0
    for x in ciphertexts:
        try:
            u = decrypt(x, sk, cfg, dec)
        except DecodingFailure:
            continue
        if int((encode(u, pk) ^ x).sum()) == pk.params.t:
            ok += 1
    return ok


# -- GJS --------------------------------------------------------------------

@dataclass
class CandidateKey:
    blocks: tuple[RingElement, ...]
    provenance: dict = field(default_factory=dict)
    decoded: int = 0
    tested: int = 0


def blocks_from_last(last: RingElement, pk: PublicKey) -> tuple[RingElement, ...]:
    """All parity-check blocks implied by a guess of the last one: h_i = h_last * g_i^T."""
    return tuple(ring_mul(last, ring_transpose(g)) for g in pk.gpolys) + (last,)


def gjs_reconstruct(distances: Iterable[int], weight: int, pk: PublicKey, ciphertexts: Sequence[np.ndarray],
                    cfg: DecoderConfig = DecoderConfig(max_iterations=50), max_block_weight: int | None = None,
                    min_fraction: float = 1.0) -> CandidateKey:
    """Solve DSR for the last block and keep the first candidate that decodes.

    A wrong guess (such as the mirror) makes the other blocks dense, so the
    block-weight test rejects it before any decoding is attempted.
    """
    p = pk.params.p
    sols = solve_dsr(DsrInstance(p, frozenset(distances), weight))
    limit = max_block_weight if max_block_weight is not None else 2 * weight
    for sup in sols:
        last = RingElement(p, sup)
        blocks = blocks_from_last(last, pk)
        if max(b.weight for b in blocks) > limit:
            continue
        ok = decodes_with_blocks(blocks, pk, ciphertexts, cfg)
        log.info("gjs candidate %s decodes %d/%d", sup[:6], ok, len(ciphertexts))
        if ok >= min_fraction * len(ciphertexts):
            return CandidateKey(blocks, {"support": sup, "solutions": len(sols)}, ok, len(ciphertexts))
    raise NoSolution("no DSR solution yields a decoding key")


def supports_within(candidates: Iterable[int], p: int, weight: int, anchor: int) -> Iterator[tuple[int, ...]]:
    """Canonical weight-w supports through {0, anchor} whose distances all lie in ``candidates``.

    Any support with a pair at distance ``anchor`` can be rotated onto these
    two nodes, so anchoring loses nothing as long as ``anchor`` is a true distance.
    """
    adj = build_graph(candidates, p)
    cand = adj[0] & adj[anchor] & ~1 & ~(1 << anchor)
    for rest in _cliques(adj, [], cand, weight - 2):
        yield canonical([0, anchor] + rest, p)


def gjs_reconstruct_ranked(ranked: Sequence[int], weight: int, pk: PublicKey, ciphertexts: Sequence[np.ndarray],
                           cfg: DecoderConfig = DecoderConfig(max_iterations=50), start: int | None = None,
                           step: int = 16, max_candidates: int | None = None, anchors: int = 3,
                           max_block_weight: int | None = None, min_fraction: float = 1.0) -> CandidateKey:
    """Key recovery when the multiplicity bands overlap.

    ``ranked`` lists distances from most to least likely to be in the
    spectrum.  A window over the head of that list grows until some
    weight-w support whose distances all fall inside it yields a key that
    decodes.  The exact-spectrum condition is replaced by containment, so a
    few misranked distances only cost a wider window.
    """
    p = pk.params.p
    ranked = [int(d) for d in ranked]
    pairs = weight * (weight - 1) // 2
    size = min(start or pairs, len(ranked))
    top = min(max_candidates or 4 * pairs, len(ranked))
    limit = max_block_weight if max_block_weight is not None else 2 * weight
    seen: set[tuple[int, ...]] = set()
    while True:
        window = ranked[:size]
        for anchor in window[:anchors]:
            for sup in supports_within(window, p, weight, anchor):
                if sup in seen:
                    continue
                seen.add(sup)
                blocks = blocks_from_last(RingElement(p, sup), pk)
                if max(b.weight for b in blocks) > limit:
                    continue
                ok = decodes_with_blocks(blocks, pk, ciphertexts, cfg)
                log.info("window %d: candidate %s decodes %d/%d", size, sup[:6], ok, len(ciphertexts))
                if ok >= min_fraction * len(ciphertexts):
                    return CandidateKey(blocks, {"support": sup, "window": size, "candidates": len(seen)},
                                        ok, len(ciphertexts))
        if size >= top:
            break
        size = min(size + step, top)
    raise NoSolution(f"no weight-{weight} support inside the top {top} distances yields a decoding key")


def shift_between(a: RingElement, b: RingElement) -> int | None:
    """k with b = x^k a, if any."""
    if a.weight != b.weight or a.p != b.p:
        return None
    if a.is_zero():
        return 0
    sb = set(b.support)
    for y in b.support:
        k = (y - a.support[0]) % a.p
        if all((s + k) % a.p in sb for s in a.support):
            return k
    return None


def common_shift(found: Sequence[RingElement], true: Sequence[RingElement]) -> int | None:
    """Single k with found_i = x^k true_i for every block, else None."""
    k = shift_between(true[-1], found[-1])
    if k is None:
        return None
    return k if all(f == t.shift(k) for f, t in zip(found, true)) else None


# -- FHS+ -------------------------------------------------------------------

def _mirror_options(sup: tuple[int, ...], p: int) -> list[tuple[int, ...]]:
    # weight <= 2: the mirror is a shift of the support itself
    if len(sup) <= 2:
        return [sup]
    return [sup, mirror(sup, p)]


def distinct_permutations(items: Sequence[tuple[int, ...]]) -> list[tuple[int, ...]]:
    """Index permutations, with all weight-1 items regarded as the same polynomial."""
    keys = [("unit",) if len(s) == 1 else ("poly", i) for i, s in enumerate(items)]
    seen = set()
    out = []
    for perm in itertools.permutations(range(len(items))):
        key = tuple(keys[i] for i in perm)
        if key not in seen:
            seen.add(key)
            out.append(perm)
    return out


@dataclass
class FhsOutcome:
    visited: int
    survivors: int
    key: CandidateKey | None


def fhs_enumerate(h_supports: Sequence[tuple[int, ...]], q_supports: Sequence[tuple[int, ...]], pk: PublicKey,
                  budget: int | None = None, ciphertexts: Sequence[np.ndarray] = (),
                  cfg: DecoderConfig = DecoderConfig("bf-htilde", 50), min_fraction: float = 1.0,
                  weight_limit: int | None = None, stop_on_success: bool = True,
                  plant_first: tuple | None = None) -> FhsOutcome:
    """Walk candidates x^{b_j} h_j q_{pi(j)} summed over j (b_0 = 0) for the last block of H~.

    Each candidate is multiplied by the first public polynomial; only those
    giving weight <= m*dv are rebuilt into a full H~ and test-decoded.
    ``plant_first`` = (h mirror bits, q mirror bits, permutation, shifts) is
    visited before the regular stream.
    """
    prm = pk.params
    p, n0 = prm.p, prm.n0
    if len(h_supports) != n0 or len(q_supports) != n0:
        raise ValueError("need n0 h-candidates and n0 q-candidates")
    limit = weight_limit if weight_limit is not None else prm.m * prm.dv
    g0t = ring_transpose(pk.gpolys[0])
    h_opts = [_mirror_options(tuple(s), p) for s in h_supports]
    q_opts = [_mirror_options(tuple(s), p) for s in q_supports]
    perms = distinct_permutations([tuple(s) for s in q_supports])
    visited = survivors = 0

    def check(products: list[int], shifts: tuple[int, ...], prov: dict) -> CandidateKey | None:
        nonlocal visited, survivors
        visited += 1
        acc = products[0]
        for j in range(1, n0):
            acc ^= rotate(products[j], shifts[j - 1], p)
        cand = RingElement.from_int(acc, p)
        if cand.is_zero() or RingElement.from_int(packed_mul(acc, g0t), p).weight > limit:
            return None
        blocks = blocks_from_last(cand, pk)
        if max(b.weight for b in blocks) > limit:
            return None
        survivors += 1
        ok = decodes_with_blocks(blocks, pk, ciphertexts, cfg) if ciphertexts else 0
        if ok >= min_fraction * len(ciphertexts):
            return CandidateKey(blocks, prov, ok, len(ciphertexts))
        return None

    def products_for(hm, qm, perm) -> list[int]:
        hs = [RingElement(p, h_opts[j][hm[j]]) for j in range(n0)]
        qs = [RingElement(p, q_opts[i][qm[i]]) for i in range(n0)]
        return [ring_mul(hs[j], qs[perm[j]]).to_int() for j in range(n0)]

    if plant_first is not None:
        hm, qm, perm, shifts = plant_first
        key = check(products_for(hm, qm, perm), tuple(shifts),
                    {"h_mirror": hm, "q_mirror": qm, "perm": perm, "shifts": tuple(shifts), "planted": True})
        if key is not None and stop_on_success:
            return FhsOutcome(visited, survivors, key)
    found = None
    for hm in itertools.product(*[range(len(o)) for o in h_opts]):
        for qm in itertools.product(*[range(len(o)) for o in q_opts]):
            for perm in perms:
                prods = products_for(hm, qm, perm)
                for shifts in itertools.product(range(p), repeat=n0 - 1):
                    if budget is not None and visited >= budget:
                        raise BudgetExhausted(f"{visited} candidates visited")
                    key = check(prods, shifts, {"h_mirror": hm, "q_mirror": qm, "perm": perm, "shifts": shifts})
                    if key is not None and found is None:
                        found = key
                        if stop_on_success:
                            return FhsOutcome(visited, survivors, found)
    return FhsOutcome(visited, survivors, found)


def planted_fhs_choice(sk: PrivateKey, h_supports: Sequence[tuple[int, ...]],
                       q_supports: Sequence[tuple[int, ...]]) -> tuple:
    """Mirror bits, permutation and shifts under which the candidate is a shift of the true H~ last block."""
    p, n0 = sk.params.p, sk.params.n0
    last = n0 - 1
    h_opts = [_mirror_options(tuple(s), p) for s in h_supports]
    q_opts = [_mirror_options(tuple(s), p) for s in q_supports]
    hm, h_shift, h_index = [], [], []
    for j in range(n0):
        for idx, opt in enumerate(h_opts[j]):
            hit = next(((i, k) for i in range(n0) for k in [shift_between(RingElement(p, opt), sk.H[i])]
                        if k is not None), None)
            if hit is not None:
                hm.append(idx)
                h_index.append(hit[0])
                h_shift.append(hit[1])
                break
        else:
            raise ValueError("h candidate is not a shift of any private block")
    # for each true row i, locate q_{i,last} among the q candidates
    qm = [0] * n0
    q_shift = {}
    q_for_row = {}
    used = set()
    for i in range(n0):
        target = sk.Q[i, last]
        for c in range(n0):
            if c in used:
                continue
            for idx, opt in enumerate(q_opts[c]):
                k = shift_between(RingElement(p, opt), target)
                if k is not None:
                    qm[c] = idx
                    q_shift[c] = k
                    q_for_row[i] = c
                    used.add(c)
                    break
            if i in q_for_row:
                break
        if i not in q_for_row:
            raise ValueError("q candidate list does not match Q")
    perm = tuple(q_for_row[h_index[j]] for j in range(n0))
    total = [h_shift[j] + q_shift[perm[j]] for j in range(n0)]
    shifts = tuple((total[j] - total[0]) % p for j in range(1, n0))
    return tuple(hm), tuple(qm), perm, shifts


# -- information set decoding -----------------------------------------------

@dataclass
class IsdResult:
    vector: np.ndarray | None
    iterations: int


def prange_isd(matrix: np.ndarray, target_weight: int, max_iterations: int, rng: np.random.Generator,
               syndrome: np.ndarray | None = None) -> IsdResult:
    """Prange information-set decoding.

    With a syndrome, ``matrix`` is a parity-check matrix and the result is a
    vector e of weight <= w with matrix @ e = syndrome.  Without one,
    ``matrix`` generates a code and the result is a nonzero codeword of
    weight <= w (some row of a random systematic form).
    """
    mat = np.asarray(matrix, dtype=np.uint8) & 1
    r, n = mat.shape
    if not 0 <= target_weight <= n:
        raise ValueError("target weight out of range")
    rows = gf2.pack_rows(mat)
    if syndrome is not None:
        s = np.asarray(syndrome, dtype=np.uint8) & 1
        if s.shape != (r,):
            raise ValueError("syndrome length must equal the number of rows")
        rows = [row | (int(sb) << n) for row, sb in zip(rows, s)]
        if not s.any():
            return IsdResult(np.zeros(n, dtype=np.uint8), 0)
    mask = (1 << n) - 1
    for it in range(1, max_iterations + 1):
        order = rng.permutation(n)
        red, piv = gf2.rref(rows, n, col_order=order)
        if syndrome is not None:
            if any(row >> n & 1 for row in red[len(piv):]):
                continue
            e = 0
            for row, c in zip(red, piv):
                if row >> n & 1:
                    e |= 1 << c
            if e.bit_count() <= target_weight:
                vec = gf2.unpack_rows([e], n)[0]
                if np.array_equal(gf2.matmul(mat, vec), s):
                    return IsdResult(vec, it)
        else:
            best = min((row & mask for row in red if row & mask), key=int.bit_count, default=0)
            if best and best.bit_count() <= target_weight:
                return IsdResult(gf2.unpack_rows([best], n)[0], it)
    return IsdResult(None, max_iterations)


# -- FHZ --------------------------------------------------------------------

def _weight_grid(params) -> np.ndarray:
    n0 = params.n0
    mbar = params.mbar
    return np.array([[mbar[(j - i) % n0] for j in range(n0)] for i in range(n0)])


@dataclass(frozen=True)
class FhzChoice:
    """One Q* candidate: q entries (canonical supports, placed by row) and row-relative shifts.

    ``entries[i][j]`` is the support of Q*_{i,j} before shifting; ``shifts``
    holds a_{i,j} for j >= 1 (a_{i,0} = 0), row-major.
    """
    entries: tuple[tuple[tuple[int, ...], ...], ...]
    shifts: tuple[int, ...]

    def matrix(self, p: int) -> QcBlockMatrix:
        n0 = len(self.entries)
        it = iter(self.shifts)
        rows = []
        for i in range(n0):
            row = []
            for j in range(n0):
                a = 0 if j == 0 else next(it)
                row.append(RingElement(p, self.entries[i][j]).shift(a))
            rows.append(row)
        return QcBlockMatrix.from_rows(rows)


def _column_layouts(col: Sequence[tuple[int, ...]], want: Sequence[int], p: int) -> list[tuple[tuple[int, ...], ...]]:
    """Ways to place one column's recovered polynomials on rows with the required weights."""
    opts = [_mirror_options(tuple(s), p) for s in col]
    layouts = set()
    out = []
    for mir in itertools.product(*[range(len(o)) for o in opts]):
        polys = [opts[c][mir[c]] for c in range(len(col))]
        for perm in itertools.permutations(range(len(col))):
            placed = tuple(polys[perm[i]] for i in range(len(col)))
            if all(len(placed[i]) == want[i] for i in range(len(col))) and placed not in layouts:
                layouts.add(placed)
                out.append(placed)
    return out


ORIENTATIONS = ("column", "row")


def fhz_layouts(q_groups: Sequence[Sequence[tuple[int, ...]]], params,
                orientation: str = "column") -> list[tuple[tuple[tuple[int, ...], ...], ...]]:
    """All Q* entry layouts (rows x columns); there are N_Q of them for distinct recovered polynomials.

    With ``orientation="column"`` group j holds the entries of column j of Q
    (the blocks an error block j is multiplied by); with ``"row"`` it holds row j.
    """
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}")
    n0, p = params.n0, params.p
    w = _weight_grid(params)
    if orientation == "row":
        w = w.T
    per_group = [_column_layouts(q_groups[j], [int(w[i, j]) for i in range(n0)], p) for j in range(n0)]
    out = []
    for combo in itertools.product(*per_group):
        grid = tuple(tuple(combo[j][i] for j in range(n0)) for i in range(n0))
        if orientation == "row":
            grid = tuple(tuple(grid[j][i] for j in range(n0)) for i in range(n0))
        out.append(grid)
    return out


def fhz_candidates(q_groups: Sequence[Sequence[tuple[int, ...]]], params,
                   rng: np.random.Generator | None = None, orientation: str = "column") -> Iterator[FhzChoice]:
    """Stream of Q* candidates: layouts x shifts, lexicographic (or shuffled shifts with rng)."""
    n0, p = params.n0, params.p
    free = n0 * n0 - n0
    for layout in fhz_layouts(q_groups, params, orientation):
        if rng is None:
            shifts_iter = itertools.product(range(p), repeat=free)
        else:
            shifts_iter = (tuple(int(v) for v in np.unravel_index(i, (p,) * free))
                           for i in rng.permutation(p ** free))
        for shifts in shifts_iter:
            yield FhzChoice(layout, tuple(shifts))


def public_generator_blocks(pk: PublicKey) -> QcBlockMatrix:
    prm = pk.params
    p, n0 = prm.p, prm.n0
    rows = []
    for r in range(n0 - 1):
        row = [RingElement.one(p) if c == r else RingElement.zero(p) for c in range(n0 - 1)]
        row.append(pk.gpolys[r])
        rows.append(row)
    return QcBlockMatrix.from_rows(rows)


def transformed_generator(pk: PublicKey, qstar: QcBlockMatrix) -> np.ndarray:
    """Dense G* = G' Q*^T; with the right Q* its dual holds the rows of a private H."""
    return qc_mul(public_generator_blocks(pk), qstar.transpose()).to_dense()


@dataclass
class FhzOutcome:
    visited: int
    isd_iterations: int
    key: PrivateKey | None
    choice: FhzChoice | None = None


def fhz_enumerate(candidates: Iterable[FhzChoice], pk: PublicKey, rng: np.random.Generator,
                  budget: int | None = None, isd_iterations: int = 200,
                  ciphertexts: Sequence[np.ndarray] = (), cfg: DecoderConfig = DecoderConfig("bf-private", 50),
                  min_fraction: float = 1.0) -> FhzOutcome:
    """Try Q* candidates until ISD finds a weight-n0*dv word in the dual of G' Q*^T that decodes."""
    prm = pk.params
    p, n0 = prm.p, prm.n0
    w = n0 * prm.dv
    visited = iters = 0
    for choice in candidates:
        if budget is not None and visited >= budget:
            raise BudgetExhausted(f"{visited} Q* candidates tried")
        visited += 1
        qstar = choice.matrix(p)
        gstar = transformed_generator(pk, qstar)
        dual = gf2.null_space(gstar)
        if dual.shape[0] == 0:
            continue
        res = prange_isd(dual, w, isd_iterations, rng)
        iters += res.iterations
        if res.vector is None:
            continue
        v = res.vector
        if int(v.sum()) != w or gf2.matmul(gstar, v).any():
            continue
        H = tuple(RingElement.from_array(v[j * p:(j + 1) * p], p) for j in range(n0))
        if any(h.weight != prm.dv for h in H):
            continue
        sk = PrivateKey(prm, H, qstar)
        if not sk.htilde[-1].is_unit():
            continue
        ok = decodes_with_private_key(sk, pk, ciphertexts, cfg) if ciphertexts else 0
        if ok >= min_fraction * len(ciphertexts):
            return FhzOutcome(visited, iters, sk, choice)
    return FhzOutcome(visited, iters, None)


def planted_fhz_choice(sk: PrivateKey) -> FhzChoice:
    """The candidate that the stream reaches for the true Q (entries canonical, shifts row-relative)."""
    p, n0 = sk.params.p, sk.params.n0
    entries = []
    alpha = np.zeros((n0, n0), dtype=np.int64)
    for i in range(n0):
        row = []
        for j in range(n0):
            q = sk.Q[i, j]
            c = canonical(q.support, p)
            k = shift_between(RingElement(p, c), q)
            assert k is not None
            alpha[i, j] = k
            row.append(c)
        entries.append(tuple(row))
    shifts = tuple(int((alpha[i, j] - alpha[i, 0]) % p) for i in range(n0) for j in range(1, n0))
    return FhzChoice(tuple(entries), shifts)


def q_columns_of(sk: PrivateKey, orientation: str = "column") -> list[list[tuple[int, ...]]]:
    """Canonical supports of each column (or row) of Q, as per-group DSDR would return them."""
    p, n0 = sk.params.p, sk.params.n0
    if orientation == "row":
        return [[canonical(sk.Q[j, i].support, p) for i in range(n0)] for j in range(n0)]
    return [[canonical(sk.Q[i, j].support, p) for i in range(n0)] for j in range(n0)]


def q_group_weights(params, j: int, orientation: str = "column") -> list[int]:
    """Block weights of Q along column (or row) j."""
    w = _weight_grid(params)
    return [int(x) for x in (w[:, j] if orientation == "column" else w[j, :])]

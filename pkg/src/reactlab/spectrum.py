"""Cyclic distances and distance spectra of supports modulo p."""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, TextIO

import numpy as np

from .ring import ModulusMismatch, RingElement


def distance(j1: int, j2: int, p: int) -> int:
    """Circular gap min{(j1 - j2) mod p, (j2 - j1) mod p}."""
    if j1 % p == j2 % p:
        raise ValueError("distance undefined for equal indices")
    d = (j1 - j2) % p
    return min(d, p - d)


@dataclass(frozen=True)
class DistanceSpectrum:
    p: int
    multiplicities: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        half = self.p // 2
        for d, mu in self.multiplicities.items():
            if not 1 <= d <= half or mu < 1:
                raise ValueError(f"bad spectrum entry {d}: {mu}")

    def distances(self) -> frozenset[int]:
        return frozenset(self.multiplicities)

    def __getitem__(self, d: int) -> int:
        return self.multiplicities.get(d, 0)

    def __contains__(self, d: int) -> bool:
        return d in self.multiplicities

    def __len__(self) -> int:
        return len(self.multiplicities)

    def total_pairs(self) -> int:
        return sum(self.multiplicities.values())

    def as_array(self) -> np.ndarray:
        """Multiplicity indexed by distance, length floor(p/2) + 1 (index 0 unused)."""
        out = np.zeros(self.p // 2 + 1, dtype=np.int64)
        for d, mu in self.multiplicities.items():
            out[d] = mu
        return out

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["distance", "multiplicity"])
        for d in sorted(self.multiplicities):
            w.writerow([d, self.multiplicities[d]])


def spectrum(support: Iterable[int] | RingElement, p: int | None = None) -> DistanceSpectrum:
    if isinstance(support, RingElement):
        p, support = support.p, support.support
    if p is None:
        raise ValueError("modulus required for a raw support")
    sup = sorted({int(s) % p for s in support})
    counts = Counter(distance(a, b, p) for a, b in combinations(sup, 2))
    return DistanceSpectrum(p, dict(sorted(counts.items())))


def distance_array(support: Iterable[int], p: int) -> np.ndarray:
    """Distances of all unordered pairs (with repetition), vectorised."""
    s = np.asarray(sorted(support), dtype=np.int64)
    if s.size < 2:
        return np.zeros(0, dtype=np.int64)
    i, j = np.triu_indices(s.size, 1)
    d = (s[j] - s[i]) % p
    return np.minimum(d, p - d)


def spectrum_union(spectra: Iterable[DistanceSpectrum]) -> frozenset[int]:
    spectra = list(spectra)
    if not spectra:
        return frozenset()
    p = spectra[0].p
    out: set[int] = set()
    for s in spectra:
        if s.p != p:
            raise ModulusMismatch("spectra over different moduli")
        out |= s.multiplicities.keys()
    return frozenset(out)


def repeated_distance_fraction(weight: int, p: int, trials: int, rng: np.random.Generator) -> float:
    """Fraction of random weight-w supports having some distance with multiplicity >= 2."""
    hits = 0
    for _ in range(trials):
        d = distance_array(rng.choice(p, size=weight, replace=False), p)
        if d.size != np.unique(d).size:
            hits += 1
    return hits / trials

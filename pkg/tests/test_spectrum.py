import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reactlab.qc_code import SystemParams, keygen
from reactlab.ring import ModulusMismatch, RingElement
from reactlab.spectrum import (
    DistanceSpectrum,
    distance,
    distance_array,
    repeated_distance_fraction,
    spectrum,
    spectrum_union,
)


def test_distance_examples():
    assert distance(0, 3, 7) == 3
    assert distance(1, 6, 7) == 2
    assert distance(6, 1, 7) == 2
    with pytest.raises(ValueError):
        distance(4, 4, 7)


@given(st.integers(0, 1018), st.integers(1, 1018), st.integers(0, 1018))
def test_distance_shift_invariant(j, k, shift):
    p = 1019
    d = distance(0, k, p)
    assert d == distance(j, (j + k) % p, p)
    assert d == distance((j + shift) % p, (j + k + shift) % p, p)
    assert 1 <= d <= p // 2


def test_spectrum_examples():
    assert dict(spectrum({0, 1, 3}, 7).multiplicities) == {1: 1, 2: 1, 3: 1}
    assert dict(spectrum({0, 1, 2}, 7).multiplicities) == {1: 2, 2: 1}
    assert len(spectrum(set(), 7)) == 0
    assert len(spectrum({4}, 7)) == 0
    assert spectrum(RingElement(7, (0, 1, 2))) == spectrum({0, 1, 2}, 7)


@given(st.sets(st.integers(0, 210), max_size=20), st.integers(0, 210))
def test_spectrum_shift_and_mirror_invariant(sup, k):
    p = 211
    s = spectrum(sup, p)
    assert s.total_pairs() == len(sup) * (len(sup) - 1) // 2
    assert spectrum({(x + k) % p for x in sup}, p) == s
    assert spectrum({(-x) % p for x in sup}, p) == s
    assert np.array_equal(np.bincount(distance_array(sup, p), minlength=p // 2 + 1), s.as_array())


def test_union_examples(rng):
    a = spectrum({0, 1, 5}, 13)
    assert spectrum_union([a]) == a.distances()
    assert spectrum_union([DistanceSpectrum(13, {1: 1}), DistanceSpectrum(13, {2: 1})]) == {1, 2}
    with pytest.raises(ModulusMismatch):
        spectrum_union([DistanceSpectrum(13, {1: 1}), DistanceSpectrum(11, {2: 1})])


def test_union_of_key_blocks_matches_dense_rows():
    sk, _ = keygen(SystemParams(2, 53, 5, 4), 3)
    dense = sk.h_matrix.to_dense()
    p = 53
    brute = set()
    for row in dense:
        # distances inside each length-p block of a row of H
        for j in range(2):
            ones = np.flatnonzero(row[j * p:(j + 1) * p])
            for a in ones:
                for b in ones:
                    if a < b:
                        brute.add(min(b - a, p - (b - a)))
    assert spectrum_union(spectrum(h) for h in sk.H) == brute


def test_spectrum_validation_and_csv():
    with pytest.raises(ValueError):
        DistanceSpectrum(7, {4: 1})
    buf = io.StringIO()
    spectrum({0, 1, 3}, 7).write_csv(buf)
    assert buf.getvalue().splitlines() == ["distance,multiplicity", "1,1", "2,1", "3,1"]


def test_repeated_distance_fraction_matches_direct_count(rng):
    p, w, n = 1019, 9, 2000
    frac = repeated_distance_fraction(w, p, n, rng)
    check = np.random.default_rng(99)
    direct = np.mean([max(spectrum(check.choice(p, w, replace=False), p).multiplicities.values()) >= 2
                      for _ in range(n)])
    # two independent estimates of the same probability (about 0.5 at w=9)
    assert abs(frac - direct) < 4 * np.sqrt(direct * (1 - direct) / n) * np.sqrt(2)
    assert repeated_distance_fraction(5, p, n, rng) < 0.2

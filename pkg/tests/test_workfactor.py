import math
from importlib.resources import files

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import hypergeom

from reactlab.qc_code import SystemParams, sample_error
from reactlab.workfactor import (
    block_weight_distribution,
    candidate_count_fhs,
    default_costs,
    fhs_candidate_count,
    fhz_ng,
    fhz_nq,
    isd_cost,
    read_parameter_table,
    validate_parameter_set,
    wf_fhz,
    wf_gjs,
)

FIG1 = SystemParams(2, 4801, 9, 95, (2, 3))


def _table(name):
    with files("reactlab").joinpath("data", name).open() as fh:
        return read_parameter_table(fh)


@given(st.sampled_from([(2, 101, 5, 7), (3, 211, 7, 12), (2, 523, 15, 19), (4, 13, 3, 9)]))
def test_block_weights_sum_to_one(shape):
    n0, p, dv, t = shape
    assert sum(block_weight_distribution(SystemParams(n0, p, dv, t))) == 1


def test_block_weights_single_block_degenerate():
    # with t = n every block is full, the same corner case as n = p
    prm = SystemParams(2, 5, 1, 10)
    dist = block_weight_distribution(prm)
    assert dist[5] == 1 and sum(dist) == 1


def test_block_weights_match_sampler():
    rng = np.random.default_rng(11)
    N = 1_000_000
    counts = np.zeros(FIG1.t + 1, dtype=np.int64)
    for _ in range(N):
        counts[int(sample_error(FIG1.n, FIG1.t, rng)[:FIG1.p].sum())] += 1
    exp = np.array([float(x) for x in block_weight_distribution(FIG1)])
    sigma = np.sqrt(N * exp * (1 - exp))
    assert np.all(np.abs(counts - N * exp) <= 3 * sigma + 1)


def test_wf_gjs_collapse_and_doubling():
    prm = SystemParams(2, 101, 5, 9)
    mean = sum(pt * math.comb(tp, 2) for tp, pt in enumerate(block_weight_distribution(prm)))
    assert wf_gjs(prm, 1, 0.0, 0, 0) == pytest.approx(math.log2(2 * mean), abs=1e-12)
    for T in (1, 10, 12345):
        assert wf_gjs(prm, 2 * T, 0.01, 7, 3) - wf_gjs(prm, T, 0.01, 7, 3) == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        wf_gjs(prm, 0, 0.0)


def test_wf_gjs_fig1_independent_evaluation():
    T, eps = 10**6, 1e-2
    c_enc, c_dec = default_costs(FIG1)
    tp = np.arange(FIG1.t + 1)
    pmf = hypergeom(FIG1.n, FIG1.p, FIG1.t).pmf(tp)
    per_query = c_enc + c_dec + (2 + eps) * float(np.sum(pmf * tp * (tp - 1) / 2))
    assert wf_gjs(FIG1, T, eps) == pytest.approx(math.log2(T * per_query), abs=1e-6)


def test_table2_row1_fhs_margin():
    prm, target = _table("table2.csv")[0]
    _, log_fhs = candidate_count_fhs(prm)
    assert abs(log_fhs - 82.9) <= 0.1
    assert target == 80


@pytest.mark.parametrize("name,target", [("table2.csv", 80), ("table3.csv", 128)])
def test_tables_pass_fhs_and_fhz_even_with_unit_isd(name, target):
    rows = _table(name)
    assert len(rows) == 4
    for prm, tgt in rows:
        assert tgt == target
        rep = validate_parameter_set(prm, tgt, isd_model="unit")
        assert rep.log2_wf_fhs >= tgt
        assert rep.log2_wf_fhz_unit_isd >= tgt
        assert rep.passed


def test_candidate_count_examples():
    assert fhs_candidate_count(SystemParams(2, 53, 3, 2, (1, 2))) == 424
    # no weight-one entry: both orderings, all four mirrors plus one for the weight-3 q
    assert fhs_candidate_count(SystemParams(2, 31, 3, 2, (2, 3))) == 2 * 8 * 31


def test_fhz_counts():
    assert fhz_nq(SystemParams(2, 7, 3, 2, (1, 2))) == 1
    assert fhz_ng(SystemParams(2, 7, 3, 2, (1, 2))) == 49
    # two weight-3 entries per column: 2^4 orientations, 1 ordering per weight class
    assert fhz_nq(SystemParams(2, 101, 5, 2, (2, 3))) == 2 ** (4 - 2)
    assert fhz_nq(SystemParams(3, 101, 3, 2, (3, 2, 2))) == 2 ** (9 - 6) * math.factorial(2) ** 3
    lq, lg, lw = wf_fhz(SystemParams(2, 101, 5, 2, (1, 2)), "unit")
    assert lw == pytest.approx(lq + lg)


def test_fig1_parameters_fall_short_of_80_bits():
    assert not validate_parameter_set(FIG1, 80).passed


def test_weakened_row_fails():
    prm, tgt = _table("table2.csv")[0]
    weak = SystemParams(prm.n0, 4273, prm.dv, prm.t, prm.mbar)
    rep = validate_parameter_set(weak, tgt, isd_model="unit")
    assert not rep.passed and rep.margin() < 0


def test_counts_grow_with_p():
    small = SystemParams(3, 211, 7, 12, (3, 2, 2))
    large = SystemParams(3, 419, 7, 12, (3, 2, 2))
    assert candidate_count_fhs(large)[1] > candidate_count_fhs(small)[1]
    assert wf_fhz(large)[2] > wf_fhz(small)[2]


def test_isd_cost_properties():
    assert isd_cost(100, 50, 10, "unit") == 0
    assert isd_cost(100, 50, 0, "prange") == pytest.approx(math.log2(50 ** 2 * 100))
    assert isd_cost(200, 100, 12) > isd_cost(200, 100, 10)
    assert isd_cost(2000, 1000, 40, "stern-estimate") < isd_cost(2000, 1000, 40, "prange")
    with pytest.raises(ValueError):
        isd_cost(10, 5, 6, "prange")
    with pytest.raises(ValueError):
        isd_cost(10, 5, 2, "lattice")

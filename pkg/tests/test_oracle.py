import numpy as np
import pytest

from reactlab.decoders import DecoderConfig, estimate_dfr
from reactlab.oracle import (
    DecryptionOracle,
    InsufficientData,
    OracleBudgetExhausted,
    TallySet,
    classify_multiplicities,
    collect,
    fhs_collect,
    fhz_collect,
    gjs_collect,
    grouped_ratio_stats,
    trace_tally,
)
from reactlab.qc_code import SystemParams, keygen, sample_error, sample_error_supports
from reactlab.spectrum import spectrum

LDPC = SystemParams(2, 101, 5, 3, (1, 2))
MDPC = SystemParams(2, 389, 13, 18)


@pytest.fixture(scope="module")
def mdpc_oracle():
    sk, _ = keygen(MDPC, 1)
    return DecryptionOracle(sk, DecoderConfig(), rng=0)


def test_query_examples(mdpc_oracle, rng):
    prm = MDPC
    assert mdpc_oracle.query(np.zeros(prm.n, np.uint8)) == 0
    e = sample_error(prm.n, prm.t, rng)
    first = mdpc_oracle.query(e)
    assert all(mdpc_oracle.query(e) == first for _ in range(3))
    with pytest.raises(ValueError):
        mdpc_oracle.query(sample_error(prm.n, prm.t - 1, rng))


def test_full_and_batch_query_agree(mdpc_oracle, rng):
    sup = sample_error_supports(MDPC.n, MDPC.t, 300, rng)
    fast = mdpc_oracle.query_supports(sup)
    for row, bit in zip(sup, fast):
        e = np.zeros(MDPC.n, np.uint8)
        e[row] = 1
        assert mdpc_oracle.query(e) == bit


def test_oracle_rate_matches_estimate_dfr(mdpc_oracle):
    ts = gjs_collect(mdpc_oracle, 6000, 5)
    est = estimate_dfr(mdpc_oracle.sk, mdpc_oracle.cfg, 6000, 6)
    pool = (ts.failures + est.failures) / 12000
    z = abs(ts.dfr - est.rate) / np.sqrt(2 * pool * (1 - pool) / 6000)
    assert z < 2.58 and 0 < ts.dfr < 1


def test_budget_enforced():
    sk, _ = keygen(MDPC, 1)
    orc = DecryptionOracle(sk, DecoderConfig(), budget=5000)
    gjs_collect(orc, 4096, 1, chunk=1024)
    assert orc.queries == 4096
    with pytest.raises(OracleBudgetExhausted):
        gjs_collect(orc, 2048, 1, chunk=1024)


def test_gjs_trace():
    p = 13
    # last block support {0, 1, 4} (positions 13, 14, 17): distances 1, 3, 4
    ts = trace_tally("gjs", p, 2, [[2, 13, 14, 17]], [1])
    assert ts.a[0].tolist() == ts.b[0].tolist()
    assert set(np.flatnonzero(ts.b[0])) == {1, 3, 4}
    ts = trace_tally("gjs", p, 2, [[13, 14, 16]], [0])
    assert not ts.a.any() and set(np.flatnonzero(ts.b[0])) == {1, 2, 3}


def test_fhs_trace():
    p = 13
    ts = trace_tally("fhs", p, 2, [[0, 2, 13, 18]], [1])
    assert set(np.flatnonzero(ts.a[0])) == {2, 5}
    assert set(np.flatnonzero(ts.u[0])) == {5}
    assert (ts.u <= ts.a).all() and (ts.v <= ts.b).all()


def test_fhz_trace_and_decomposition(rng):
    p, n0 = 29, 3
    sup = sample_error_supports(n0 * p, 9, 50, rng)
    fails = rng.integers(0, 2, 50)
    ts = trace_tally("fhz", p, n0, sup, fails)
    for j in range(n0):
        expected = np.zeros(p // 2 + 1, np.int64)
        for row in sup:
            blk = [x - j * p for x in row if j * p <= x < (j + 1) * p]
            for d in spectrum(blk, p).distances():
                expected[d] += 1
        assert np.array_equal(ts.b[j], expected)
    # per-block distinct-distance counts add up as in the union tally when blocks are disjoint
    fhs = trace_tally("fhs", p, n0, sup, fails)
    assert (fhs.b[0] <= ts.b.sum(axis=0)).all()


def test_tally_conservation(mdpc_oracle):
    ts = gjs_collect(mdpc_oracle, 2048, 9)
    sup = sample_error_supports(MDPC.n, MDPC.t, 2048, np.random.default_rng([9, 2, 0]))
    expected = 0
    for row in sup:
        last = [x - MDPC.p for x in row if x >= MDPC.p]
        expected += len(spectrum(last, MDPC.p))
    assert ts.b.sum() == expected
    ts.check()
    r = ts.ratios()[1:]
    assert np.nanmin(r) >= 0 and np.nanmax(r) <= 1
    weighted = ts.a[0].sum() / ts.b[0].sum()
    assert abs(weighted - ts.dfr) < 3 * np.sqrt(ts.dfr * (1 - ts.dfr) / 2048) + 0.01


def test_collection_deterministic_across_workers_and_resume(tmp_path):
    sk, _ = keygen(LDPC, 2)
    cfg = DecoderConfig("bf-private", 20)
    one = fhs_collect(DecryptionOracle(sk, cfg), 5000, 3, chunk=512)
    two = fhs_collect(DecryptionOracle(sk, cfg), 5000, 3, chunk=512, workers=2)
    assert np.array_equal(one.a, two.a) and np.array_equal(one.v, two.v)
    # interrupted: the budget stops the run after some checkpoints, then resume
    ck = tmp_path / "c.npz"
    with pytest.raises(OracleBudgetExhausted):
        collect(DecryptionOracle(sk, cfg, budget=2048), "fhs", 5000, 3, chunk=512, checkpoint=ck,
                checkpoint_every=2)
    assert TallySet.load(ck).chunks_done == 4
    resumed = collect(DecryptionOracle(sk, cfg), "fhs", 5000, 3, chunk=512, checkpoint=ck, checkpoint_every=2)
    assert np.array_equal(resumed.a, one.a) and np.array_equal(resumed.u, one.u)
    assert resumed.queries == one.queries == 5000
    with pytest.raises(ValueError):
        collect(DecryptionOracle(sk, cfg), "gjs", 5000, 3, chunk=512, checkpoint=ck)


def test_fhz_rows(rng):
    sk, _ = keygen(LDPC, 2)
    ts = fhz_collect(DecryptionOracle(sk, DecoderConfig("bf-private")), 1000, 1)
    assert ts.a.shape == (2, 51)
    ts.check()


def _synthetic(rng, n0=150, n1=40, n2=6, base=0.010, step=0.003, b=200_000):
    mu = np.zeros(n0 + n1 + n2 + 1, np.int64)
    mu[1 + n0:1 + n0 + n1] = 1
    mu[1 + n0 + n1:] = 2
    perm = rng.permutation(len(mu) - 1) + 1
    mu[1:] = mu[perm]
    bvec = np.full(len(mu), b, np.int64)
    a = rng.binomial(bvec, base - step * mu)
    a[0] = bvec[0] = 0
    return a, bvec, mu


def test_classifier_recovers_synthetic_bands(rng):
    a, b, mu = _synthetic(rng)
    b[0] = 1
    est = classify_multiplicities(a, b)
    assert est.bands == 3
    assert all(est.multiplicities[d] == mu[d] for d in range(1, len(mu)))
    assert est.confidence_se > 4
    fixed = classify_multiplicities(a, b, max_multiplicity=2)
    assert fixed.multiplicities == est.multiplicities
    assert fixed.distances() == {d for d in range(1, len(mu)) if mu[d] >= 1}


def test_classifier_degenerate_input():
    a = np.full(51, 10)
    b = np.full(51, 1000)
    est = classify_multiplicities(a, b)
    assert est.bands == 1 and est.confidence == 0 and not est.distances()
    b[5] = 0
    with pytest.raises(InsufficientData):
        classify_multiplicities(a, b, min_samples=10)


def test_classifier_weight_cap(rng):
    a, b, mu = _synthetic(rng)
    est = classify_multiplicities(a, b, known_block_weight=2)
    assert max(est.multiplicities.values()) == 1


def test_grouped_stats(rng):
    a, b, mu = _synthetic(rng)
    stats = grouped_ratio_stats(a / np.maximum(b, 1), mu)
    assert stats[0][0] > stats[1][0] > stats[2][0]
    assert stats[0][2] == 150


def test_csv_and_plot_output(mdpc_oracle):
    import io

    ts = gjs_collect(mdpc_oracle, 2048, 4)
    mu = spectrum(mdpc_oracle.sk.H[-1]).as_array()
    buf = io.StringIO()
    ts.write_csv(buf, true_multiplicity=mu)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "d,b_d,a_d,ratio,true_multiplicity"
    assert len(lines) == MDPC.p // 2 + 1
    buf = io.StringIO()
    ts.write_plot_data(buf)
    assert buf.getvalue().startswith("# d ratio\n1 ")

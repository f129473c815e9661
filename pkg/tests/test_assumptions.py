import numpy as np
import pytest

from chaoskit import assumptions as A
from chaoskit import kernels
from chaoskit.tensor import SymTensor


def piecewise(order, dim, times, entries, theta=2.0):
    """CUSTOM family through the given node kernels."""
    nodes = [(t, SymTensor.from_dict(order, dim, e) if e else SymTensor.zero(order, dim)) for t, e in zip(times, entries)]
    return kernels.custom(nodes, theta=theta)


def cell_family(cells=4, pairs=False):
    """Fresh direction per dyadic cell: increments over disjoint cells are orthogonal."""
    times = np.linspace(0, 1, cells + 1)
    if pairs:
        keys = [(2 * k, 2 * k + 1) for k in range(cells)]
        order, dim = 2, 2 * cells
    else:
        keys = [(k,) for k in range(cells)]
        order, dim = 1, cells
    entries = [{keys[k]: 1.0 for k in range(j)} for j in range(cells + 1)]
    return piecewise(order, dim, times, entries)


# PartitionConfig -----------------------------------------------------------


def test_partition_config_validation():
    with pytest.raises(ValueError):
        A.PartitionConfig((0.5,))
    with pytest.raises(ValueError):
        A.PartitionConfig((0.5, 0.4))
    with pytest.raises(ValueError):
        A.PartitionConfig((0.2, 0.4), left=(0.3,))
    with pytest.raises(ValueError):
        A.PartitionConfig((0.2, 0.4), right=(0.4,))
    c = A.PartitionConfig((0.2, 0.4, 0.6), left=(0.1,), right=(0.8, 1.0))
    assert c.inner_intervals() == [(0.2, 0.4), (0.4, 0.6)]
    assert c.conditioning_intervals() == [(0.0, 0.1), (0.1, 0.2), (0.6, 0.8), (0.8, 1.0)]
    assert A.PartitionConfig.from_json(c.to_json()) == c
    # a left point at 0 contributes no zero-length interval
    assert A.PartitionConfig((0.5, 1.0), left=(0.0,)).conditioning_intervals() == [(0.0, 0.5)]


def test_config_generators():
    assert len(A.dyadic_configs(2)) == 10
    r1 = A.random_configs(50, seed=3)
    assert r1 == A.random_configs(50, seed=3)
    knots = np.linspace(0, 1, 9)
    for c in A.random_configs(50, seed=3, knots=knots):
        assert set(c.inner + c.left + c.right) <= set(knots)


# regularity ----------------------------------------------------------------


def test_regularity_examples(blk2, fd):
    assert A.check_regularity(blk2).theta_hat == pytest.approx(2.0, abs=0.05)
    r = A.check_regularity(fd)
    assert r.verdict and r.theta_hat == pytest.approx(1.5, abs=0.1) and r.min_norm > 0
    flat = piecewise(1, 1, [0.0, 0.5, 1.0], [{}, {(0,): 1.0}, {(0,): 1.0}])
    bad = A.check_regularity(flat, np.linspace(0, 1, 9))
    assert not bad.verdict and bad.min_norm == 0.0
    assert bad.witness[0] >= 0.5 and bad.witness[1] > bad.witness[0]
    with pytest.raises(ValueError):
        A.check_regularity(fd, np.linspace(0, 1, 5))


# subspaces ------------------------------------------------------------------


def test_chaos_subspace_examples(blk2):
    B = A.chaos_subspace(blk2, 0.1, 0.4)
    assert B.rank == 1
    np.testing.assert_allclose(np.abs(B.basis[:, 0]), [1, 0])
    pair = piecewise(2, 3, [0.0, 1.0], [{}, {(0, 1): 1.0}])
    B = A.chaos_subspace(pair, 0.2, 0.6)
    np.testing.assert_allclose(B.basis @ B.basis.T, np.diag([1.0, 1.0, 0.0]), atol=1e-12)
    v = A.chaos_subspace(blk2, 0.25, 0.75)
    np.testing.assert_allclose(np.abs(v.basis[:, 0]), [1 / np.sqrt(2)] * 2)
    flat = piecewise(1, 1, [0.0, 0.5, 1.0], [{}, {(0,): 1.0}, {(0,): 1.0}])
    assert A.chaos_subspace(flat, 0.6, 0.9).rank == 0


def test_alpha_examples(blk2, fd):
    left_half = A.PartitionConfig((0.25, 0.3, 0.5), left=(0.1,))
    res = A.estimate_alpha(blk2, [left_half])
    assert res.value == pytest.approx(0.0, abs=1e-15) and res.witness == left_half
    assert A.residual_of(blk2, A.PartitionConfig((0.1, 0.3))) == 1.0
    a = A.estimate_alpha(fd, A.dyadic_configs(4))
    assert 0 < a.value < 1
    assert A.residual_of(fd, a.witness) == a.value


def test_beta_examples(fd):
    configs = A.default_configs(depth=3, count=40, knots=fd.knots)
    a = A.estimate_alpha(fd, configs)
    b = A.estimate_beta(fd, configs)
    assert a.value == pytest.approx(b.value, abs=1e-10)
    pairs = cell_family(4, pairs=True)
    assert A.estimate_beta(pairs, A.dyadic_configs(2)).value == pytest.approx(1.0, abs=1e-12)
    assert A.estimate_alpha(pairs, A.dyadic_configs(2)).value == pytest.approx(1.0, abs=1e-12)
    contained = A.PartitionConfig((0.25, 0.5), left=(0.1,), right=(0.75,))
    assert A.estimate_beta(kernels.blk2(), [A.PartitionConfig((0.1, 0.2), left=(0.05,))]).value == pytest.approx(0, abs=1e-15)
    assert A.residual_of(pairs, contained, level="kernel") == pytest.approx(1.0)


def test_orthogonal_increments_give_alpha_one():
    fam = cell_family(4)
    assert A.estimate_alpha(fam, A.dyadic_configs(2)).value == pytest.approx(1.0, abs=1e-12)


def test_estimates_monotone_in_config_set(fd):
    small = A.dyadic_configs(2)
    big = small + A.dyadic_configs(3) + A.random_configs(30, seed=1, knots=fd.knots)
    for est in (A.estimate_alpha, A.estimate_beta):
        assert est(fd, big).value <= est(fd, small).value + 1e-15


def test_degenerate_config_is_skipped():
    flat = piecewise(1, 2, [0.0, 0.5, 1.0], [{}, {(0,): 1.0}, {(0,): 1.0, (1,): 0.0}])
    res = A.estimate_alpha(flat, [A.PartitionConfig((0.6, 0.9)), A.PartitionConfig((0.1, 0.4))])
    assert res.skipped == 1 and res.value == 1.0


# row sums -------------------------------------------------------------------


def test_row_sum_examples(blk2):
    lin = piecewise(1, 1, [0.0, 1.0], [{}, {(0,): 1.0}])
    assert A.check_row_sums(lin).min_value >= 0
    r = A.check_row_sums(blk2)
    # nested grid intervals overlap, so the grid minimum is one cell squared (infimum 0)
    assert r.verdict and r.min_value == pytest.approx((1 / 32) ** 2, rel=1e-12)
    ts = np.linspace(0, 1, 65)
    osc = piecewise(1, 2, ts, [{(0,): float(np.sin(2 * np.pi * t)), (1,): float(t)} if t > 0 else {} for t in ts])
    bad = A.check_row_sums(osc, np.linspace(0, 1, 17))
    assert not bad.verdict and bad.min_value < 0
    u, v, s, t = bad.witness
    assert s <= u < v <= t
    G = osc.increment(u, v).dense() @ osc.increment(s, t).dense()
    assert G == pytest.approx(bad.min_value, rel=1e-12)
    with pytest.raises(ValueError):
        A.check_row_sums(blk2, [0.0, 1.0])


def test_row_sums_brute_force(herm2):
    g = np.linspace(0, 1, 9)
    best = np.inf
    for si in range(9):
        for ti in range(si + 1, 9):
            for ui in range(si, ti):
                for vi in range(ui + 1, ti + 1):
                    Q = herm2.coords([g[ui], g[vi], g[si], g[ti]])
                    best = min(best, float((Q[1] - Q[0]) @ (Q[3] - Q[2])))
    assert A.check_row_sums(herm2, g).min_value == pytest.approx(best, abs=1e-15)


# report ---------------------------------------------------------------------


def test_report_structure(blk2):
    rep = A.assumption_report(blk2, depth=3, count=20)
    js = rep.to_json()
    assert list(js) == ["family", "checks", "alpha_by_depth", "thresholds", "passed", "note"]
    assert [c["paper_ref"] for c in js["checks"]] == [
        "holder-regularity", "block-nondeterminism", "kernel-nondeterminism", "nonnegative-row-sums"]
    assert list(js["alpha_by_depth"]) == ["2", "3"]
    assert js["passed"] is False
    assert js["checks"][1]["verdict"] is False and js["checks"][1]["value"] == 0.0
    assert js["thresholds"]["random_points"] == "knots"

import itertools
import json
import math

import numpy as np
import pytest

from chaoskit import assumptions as A
from chaoskit import kernels
from chaoskit.chaos import evaluate, malliavin_gradient
from chaoskit.chaos import hermite
from chaoskit.tensor import SymTensor, inner

BUILTIN = ["BLK2", "FD", "HERM2", "ROSEN"]


@pytest.mark.parametrize("name", BUILTIN)
def test_kernel_vanishes_at_zero(name):
    fam = kernels.make_family(name)
    assert fam.kernel_at(0.0).is_zero
    X, DX = kernels.sample_paths(fam, [0.0, 0.5], np.ones((2, fam.dim)))
    assert np.all(X[:, 0] == 0) and np.all(np.asarray(DX)[:, 0] == 0)


def test_blk2_examples(blk2):
    assert blk2.kernel_at(0.75).as_dict() == {(0,): 0.5, (1,): 0.25}
    assert blk2.increment(0.25, 0.75).as_dict() == {(0,): 0.25, (1,): 0.25}
    with pytest.raises(ValueError):
        blk2.kernel_at(1.5)


def test_family_shapes(fd, herm2, rosen):
    assert (fd.order, fd.dim) == (1, 128)
    assert herm2.order == 2 and herm2.dim == 17
    assert rosen.order == 2 and rosen.dim == 31
    with pytest.raises(ValueError, match="unknown family"):
        kernels.make_family("NOPE")


def test_first_chaos_path_is_linear(fd, gen):
    grid = fd.grid()
    z = gen.standard_normal(fd.dim)
    p = kernels.sample_path(fd, grid, z)
    expect = [float(np.dot(fd.kernel_at(t).dense(), z)) for t in grid]
    np.testing.assert_allclose(p.X, expect, atol=1e-12)
    np.testing.assert_allclose(p.DX[-1], fd.kernel_at(1.0).dense(), atol=1e-15)


def dense_chaos2(f: SymTensor, z: np.ndarray) -> float:
    """I_2(f) = sum_{i,j} F_ij z_i z_j - trace(F) for the dense symmetric array F."""
    F = np.zeros((f.dim, f.dim))
    for (i, j), c in f.as_dict().items():
        F[i, j] += c / 2
        F[j, i] += c / 2
    return float(z @ F @ z - np.trace(F))


def test_herm2_matches_dense_oracle(gen):
    fam = kernels.herm2(L=2)
    assert fam.dim <= 8
    grid = np.linspace(0, 1, 9)
    Z = gen.standard_normal((5, fam.dim))
    X, DX = kernels.sample_paths(fam, grid, Z)
    for s in range(5):
        for k, t in enumerate(grid):
            f = fam.kernel_at(t)
            assert X[s, k] == pytest.approx(dense_chaos2(f, Z[s]), abs=1e-10)
            np.testing.assert_allclose(DX[s, k], malliavin_gradient(f, Z[s]), atol=1e-10)


@pytest.mark.parametrize("name,claimed", [("FD", 1.5), ("HERM2", 1.5), ("ROSEN", 1.6), ("BLK2", 2.0)])
def test_holder_fit_recovers_theta(name, claimed):
    fam = kernels.make_family(name)
    assert fam.theta == pytest.approx(claimed)
    assert A.check_regularity(fam).theta_hat == pytest.approx(claimed, abs=0.1)


def test_fd_finest_level_increments_orthogonal(fd):
    """Rising halves of distinct finest hats carry orthogonal finest-level parts."""
    finest = fd.support[fd.support[:, 0] >= 2**6]
    assert finest.shape[0] == 2**6

    def part(a, b):
        return SymTensor(1, fd.dim, finest, fd.increment(a, b).dense()[finest[:, 0]])

    h = 2.0**-6
    parts = [part(k * h, (k + 0.5) * h) for k in range(2**6)]
    assert all(not p.is_zero for p in parts)
    for i, j in itertools.combinations(range(len(parts)), 2):
        assert inner(parts[i], parts[j]) == 0.0
    # the two halves of one hat are antiparallel, not orthogonal
    assert inner(part(0.0, 0.5 * h), part(0.5 * h, h)) < 0


def test_gram_is_covariance(herm2, gen):
    ts = np.array([0.2, 0.5, 0.9])
    G = herm2.gram(ts)
    for a, s in enumerate(ts):
        for b, t in enumerate(ts):
            assert G[a, b] == pytest.approx(inner(herm2.kernel_at(s), herm2.kernel_at(t)), rel=1e-12)
    Z = gen.standard_normal((20000, herm2.dim))
    X, _ = kernels.sample_paths(herm2, np.r_[0.0, ts], Z, with_dx=False)
    emp = X[:, 1:].T @ X[:, 1:] / Z.shape[0]
    np.testing.assert_allclose(emp, 2 * G, atol=0.1)


def test_custom_family_roundtrip(tmp_path):
    nodes = [
        {"t": 0.0, "tensor": SymTensor.zero(2, 3).to_json()},
        {"t": 0.5, "tensor": SymTensor.from_dict(2, 3, {(0, 1): 1.0}).to_json()},
        {"t": 1.0, "tensor": SymTensor.from_dict(2, 3, {(0, 1): 1.0, (2, 2): 2.0}).to_json()},
    ]
    p = tmp_path / "k.json"
    p.write_text(json.dumps({"theta": 2.0, "nodes": nodes}))
    fam = kernels.make_family("CUSTOM", file=str(p))
    assert fam.kernel_at(0.25).as_dict() == {(0, 1): 0.5}
    assert fam.kernel_at(0.75).as_dict() == {(0, 1): 1.0, (2, 2): 1.0}
    np.testing.assert_array_equal(fam.knots, [0.0, 0.5, 1.0])
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([{"t": 0.0}]))
    with pytest.raises(ValueError, match="malformed"):
        kernels.load_custom(bad)
    with pytest.raises(ValueError, match="t=0"):
        kernels.custom([(0.0, SymTensor.basis(2, 0))])


def test_sample_paths_validation(fd):
    with pytest.raises(ValueError):
        kernels.sample_paths(fd, [0.0, 0.5], np.zeros((1, 3)))
    with pytest.raises(ValueError):
        kernels.sample_paths(fd, [0.1, 0.5], np.zeros((1, fd.dim)))


def test_gradient_operator_matches_reference(rosen, gen):
    Z = gen.standard_normal((3, rosen.dim))
    A_ = kernels.gradient_operator(rosen, Z)
    c = rosen.coefficients([0.6])[0]
    f = rosen.kernel_at(0.6)
    for s in range(3):
        np.testing.assert_allclose(c @ A_[s], malliavin_gradient(f, Z[s]), atol=1e-10)
        assert float(c @ kernels.backend.product_basis(rosen.support, Z[s:s + 1])[0]) == pytest.approx(evaluate(f, Z[s]))


def test_factorial():
    assert [kernels.fam_factorial(n) for n in range(5)] == [math.factorial(n) for n in range(5)]
    assert hermite(0, 1.3) == 1.0

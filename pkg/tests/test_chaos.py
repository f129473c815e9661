import math

import numpy as np
import pytest
import sympy as sp

from chaoskit import rng
from chaoskit.chaos import (
    ChaosVariable,
    GaussianSample,
    evaluate,
    gradient_batch,
    hermite,
    malliavin_gradient,
    malliavin_matrix,
    mc_expectation,
)
from chaoskit.tensor import SymTensor


def rodrigues(k):
    x = sp.Symbol("x")
    w = sp.exp(-x**2 / 2)
    return x, sp.expand(sp.simplify((-1) ** k * sp.diff(w, x, k) / w))


@pytest.mark.parametrize("k", range(7))
def test_hermite_matches_rodrigues(k):
    x, poly = rodrigues(k)
    for v in (-2, -1, 0, 1, 2):
        assert hermite(k, float(v)) == float(poly.subs(x, v))


def test_hermite_examples():
    assert hermite(1, 0.7) == 0.7
    assert hermite(2, 1.0) == 0.0
    assert hermite(3, 2.0) == 2.0
    np.testing.assert_allclose(hermite(2, np.array([0.0, 2.0])), [-1.0, 3.0])
    with pytest.raises(ValueError):
        hermite(-1, 0.0)


def test_evaluate_examples():
    assert evaluate(SymTensor.basis(3, 0, 0), np.zeros(3)) == -1.0
    assert evaluate(SymTensor.basis(3, 0, 1), np.array([1.0, 2.0, 0.0])) == 2.0
    assert evaluate(ChaosVariable(SymTensor.basis(2, 0)), GaussianSample(np.array([0.7, 5.0]))) == 0.7
    with pytest.raises(ValueError):
        evaluate(SymTensor.basis(3, 0), np.zeros(2))


def test_evaluate_against_symbolic_polynomial():
    """I_3 of a mixed kernel equals its explicit Hermite polynomial."""
    f = SymTensor.from_dict(3, 3, {(0, 0, 1): 2.0, (0, 1, 2): -1.5, (2, 2, 2): 0.5})
    z = np.array([0.3, -1.2, 0.8])
    expect = 2.0 * (z[0] ** 2 - 1) * z[1] - 1.5 * z[0] * z[1] * z[2] + 0.5 * (z[2] ** 3 - 3 * z[2])
    assert evaluate(f, z) == pytest.approx(expect, rel=1e-14)
    batch = np.stack([z, -z])
    np.testing.assert_allclose(evaluate(f, batch), [expect, -expect], rtol=1e-14)


def test_gradient_examples():
    np.testing.assert_allclose(malliavin_gradient(SymTensor.basis(2, 0, 1), [1.0, 2.0]), [2.0, 1.0])
    np.testing.assert_allclose(malliavin_gradient(SymTensor.basis(2, 0, 0), [3.0, 9.0]), [6.0, 0.0])
    np.testing.assert_allclose(malliavin_gradient(SymTensor.basis(3, 1), [4.0, -1.0, 2.0]), [0, 1, 0])
    with pytest.raises(ValueError):
        malliavin_gradient(SymTensor.basis(2, 0), np.zeros((2, 2)))


def test_gradient_batch_matches_reference(gen):
    f = SymTensor.from_dict(3, 4, {(0, 1, 1): 1.0, (2, 3, 3): -0.5, (0, 0, 0): 0.25, (1, 2, 3): 2.0})
    Z = gen.standard_normal((20, 4))
    ref = np.array([malliavin_gradient(f, z) for z in Z])
    np.testing.assert_allclose(gradient_batch(f, Z), ref, rtol=1e-12, atol=1e-12)
    assert not gradient_batch(SymTensor.zero(2, 4), Z).any()


def test_malliavin_matrix_examples():
    np.testing.assert_allclose(malliavin_matrix([np.array([2.0, 1.0])]), [[5.0]])
    np.testing.assert_allclose(malliavin_matrix([[1.0, 0.0], [0.0, 1.0]]), np.eye(2))
    C = malliavin_matrix([[1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(C, [[1, 1], [1, 1]])
    assert np.linalg.det(C) == 0.0
    with pytest.raises(ValueError):
        malliavin_matrix([[1.0, 0.0, 0.0]], blocks=[2])


def test_malliavin_matrix_psd(gen):
    for _ in range(20):
        C = malliavin_matrix(gen.standard_normal((3, 5)), blocks=[2, 3])
        assert np.allclose(C, C.T)
        assert np.linalg.eigvalsh(C).min() >= -1e-10


def test_mc_examples():
    e1 = SymTensor.basis(2, 0)
    e12 = SymTensor.basis(2, 0, 1)
    e11 = SymTensor.basis(2, 0, 0)
    m, se = mc_expectation(lambda Z: evaluate(e1, Z), 10**5, seed=1, dim=2)
    assert abs(m) <= 3 * se
    m, se = mc_expectation(lambda Z: evaluate(e12, Z) ** 2, 10**5, seed=2, dim=2)
    assert abs(m - 1.0) <= 3 * se
    m, se = mc_expectation(lambda Z: evaluate(e1, Z) * evaluate(e11, Z), 10**5, seed=3, dim=2)
    assert abs(m) <= 3 * se


@pytest.mark.parametrize("n", [1, 2, 3])
def test_chaos_variables_are_centered(n):
    f = SymTensor.from_dict(n, 3, {tuple([0] * n): 1.0, tuple(range(n)) if n <= 3 else (0,) * n: 0.5})
    m, se = mc_expectation(lambda Z: evaluate(f, Z), 10**5, seed=n, dim=3)
    assert abs(m) <= 4 * se


def test_mc_threads_do_not_change_result():
    f = SymTensor.basis(3, 0, 1, 2)
    a = mc_expectation(lambda Z: evaluate(f, Z) ** 2, 5000, seed=4, dim=3, threads=1)
    b = mc_expectation(lambda Z: evaluate(f, Z) ** 2, 5000, seed=4, dim=3, threads=8)
    assert a == b
    assert abs(a[0] - math.factorial(3) / 6) <= 4 * a[1]


def test_gaussian_sample_reproducible():
    a = GaussianSample.draw(9, 1500, 4)
    b = GaussianSample.draw(9, 1500, 4)
    np.testing.assert_array_equal(a.Z, b.Z)
    np.testing.assert_array_equal(a.Z, rng.normals(9, 0, 2000, 4)[1500])

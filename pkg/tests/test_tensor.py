import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoskit.tensor import (
    SymTensor,
    contract_last,
    enumerate_multi_indices,
    inner,
    norm,
    orthonormal_range,
    residual_ratio,
    span_union,
    symmetrize,
    to_coords,
    unfold,
    weights,
)


def dense_oracle(f: SymTensor) -> np.ndarray:
    """Expand by explicit permutation averaging, independent of the library weights."""
    out = np.zeros((f.dim,) * f.order)
    fact = math.factorial(f.order)
    for sigma, c in f.as_dict().items():
        for perm in itertools.permutations(sigma):
            out[perm] += c / fact
    return out


@st.composite
def tensors(draw, order=None, dim=None):
    n = draw(st.integers(1, 3)) if order is None else order
    d = draw(st.integers(1, 4)) if dim is None else dim
    keys = draw(st.lists(st.tuples(*[st.integers(0, d - 1)] * n).map(lambda k: tuple(sorted(k))),
                         max_size=6, unique=True))
    coef = st.one_of(st.just(0.0), st.floats(1e-3, 3.0), st.floats(-3.0, -1e-3))
    vals = draw(st.lists(coef, min_size=len(keys), max_size=len(keys)))
    return SymTensor.from_dict(n, d, dict(zip(keys, vals)))


@st.composite
def tensor_pairs(draw):
    n = draw(st.integers(1, 3))
    d = draw(st.integers(1, 4))
    return draw(tensors(n, d)), draw(tensors(n, d))


# examples (0-based: e_1, e_2 of the notation are indices 0, 1) ------------------


def test_inner_examples():
    assert inner(SymTensor.basis(2, 0, 1), SymTensor.basis(2, 0, 0)) == 0.0
    assert inner(SymTensor.basis(2, 0, 1), SymTensor.basis(2, 0, 1)) == pytest.approx(0.5)


def test_contract_examples():
    c = contract_last(SymTensor.basis(2, 0, 1), 0)
    assert c.as_dict() == {(1,): 0.5}
    assert contract_last(SymTensor.basis(2, 0, 0), 0).as_dict() == {(0,): 1.0}
    assert contract_last(SymTensor.basis(2, 0, 0), 1).is_zero


def test_to_coords_examples():
    v = to_coords(SymTensor.basis(2, 0, 1))
    keys = [tuple(r) for r in enumerate_multi_indices(2, 2)]
    assert v[keys.index((0, 1))] == pytest.approx(math.sqrt(0.5))
    assert np.count_nonzero(v) == 1
    assert not np.any(to_coords(SymTensor.zero(2, 3)))
    w = to_coords(SymTensor.from_dict(2, 2, {(0, 0): 2.0}))
    assert w[keys.index((0, 0))] == 2.0


def test_unfold_examples():
    M = unfold(SymTensor.basis(2, 0, 1))
    np.testing.assert_allclose(M, [[0, 0.5], [0.5, 0]])
    assert orthonormal_range(M).rank == 2
    M = unfold(SymTensor.basis(2, 0, 0))
    np.testing.assert_allclose(M, [[1, 0], [0, 0]])
    assert orthonormal_range(M).rank == 1
    v = SymTensor.from_vector([1.0, -2.0, 0.5])
    np.testing.assert_allclose(unfold(v), [[1.0], [-2.0], [0.5]])


def test_orthonormal_range_examples():
    assert orthonormal_range(np.array([[1, 2], [0, 0]])).rank == 1
    B = orthonormal_range(np.array([[1.0, 2.0], [0.0, 0.0]]))
    np.testing.assert_allclose(np.abs(B.basis[:, 0]), [1, 0])
    assert orthonormal_range(np.eye(2)).rank == 2
    assert orthonormal_range(np.array([[1, 1], [1, 1 + 1e-14]]), tol=1e-10).rank == 1
    assert orthonormal_range(np.zeros((3, 0))).rank == 0


def test_residual_ratio_examples():
    e1 = orthonormal_range([[1.0], [0.0]])
    e2 = orthonormal_range([[0.0], [1.0]])
    diag = orthonormal_range([[1.0], [1.0]])
    assert residual_ratio(e1, e2) == pytest.approx(1.0)
    assert residual_ratio(e1, diag) == pytest.approx(0.5)
    assert residual_ratio(e1, e1) == pytest.approx(0.0, abs=1e-15)
    assert residual_ratio(e1, orthonormal_range(np.zeros((2, 0)))) == 1.0
    with pytest.raises(ValueError, match="empty subspace"):
        residual_ratio(orthonormal_range(np.zeros((2, 0))), e1)


def test_span_union():
    e1 = orthonormal_range([[1.0], [0.0], [0.0]])
    e12 = orthonormal_range([[1.0, 0.0], [1.0, 1.0], [0.0, 0.0]])
    assert span_union([e1, e12], 3).rank == 2
    assert span_union([], 3).rank == 0


def test_validation():
    with pytest.raises(ValueError):
        SymTensor.from_dict(2, 2, {(0, 2): 1.0})
    with pytest.raises(ValueError):
        SymTensor(2, 3, np.array([[1, 0]]), np.array([1.0]))
    with pytest.raises(ValueError):
        SymTensor.from_dict(2, 3, {(0,): 1.0})
    with pytest.raises(ValueError):
        contract_last(SymTensor.basis(3, 0), 3)


def test_canonical_form_merges_and_drops_zeros():
    f = SymTensor(2, 3, np.array([[0, 1], [0, 1], [1, 2]]), np.array([1.0, 2.0, 0.0]))
    assert f.as_dict() == {(0, 1): 3.0}


def test_json_roundtrip():
    f = SymTensor.from_dict(3, 4, {(0, 1, 1): 1.5, (2, 3, 3): -0.25})
    g = SymTensor.from_json(f.to_json())
    assert g.as_dict() == f.as_dict()


# properties -----------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_basis_norm_is_weight(n, d):
    for sigma in enumerate_multi_indices(d, n):
        e = SymTensor.basis(d, *sigma)
        ks = np.bincount(sigma, minlength=d)
        expect = np.prod([math.factorial(k) for k in ks]) / math.factorial(n)
        assert inner(e, e) == pytest.approx(expect, rel=1e-15)
        assert weights(sigma.reshape(1, -1))[0] == pytest.approx(expect, rel=1e-15)


@settings(max_examples=150, deadline=None)
@given(tensor_pairs())
def test_inner_matches_dense_oracle(pair):
    f, g = pair
    assert inner(f, g) == pytest.approx(float(np.sum(dense_oracle(f) * dense_oracle(g))), abs=1e-12)
    assert inner(f, g) == pytest.approx(inner(g, f), abs=1e-15)
    assert float(to_coords(f) @ to_coords(g)) == pytest.approx(inner(f, g), abs=1e-12)
    np.testing.assert_allclose(f.dense(), dense_oracle(f), atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(tensor_pairs(), st.floats(-2, 2, allow_nan=False))
def test_inner_bilinear(pair, a):
    f, g = pair
    assert inner(f * a + g, g) == pytest.approx(a * inner(f, g) + inner(g, g), abs=1e-10)
    assert inner(f, f) >= 0
    assert (norm(f) == 0) == f.is_zero


@settings(max_examples=150, deadline=None)
@given(tensors(), st.data())
def test_contract_matches_dense(f, data):
    j = data.draw(st.integers(0, f.dim - 1))
    D = dense_oracle(f)
    expect = np.tensordot(D, np.eye(f.dim)[j], axes=([f.order - 1], [0]))
    got = contract_last(f, j)
    if f.order == 1:
        assert float(expect) == pytest.approx(float(sum(got.coef)) if not got.is_zero else 0.0, abs=1e-12)
    else:
        np.testing.assert_allclose(dense_oracle(got), expect, atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(tensors())
def test_unfold_matches_dense(f):
    D = dense_oracle(f)
    M = unfold(f)
    cols = enumerate_multi_indices(f.dim, f.order - 1)
    for c, tau in enumerate(cols):
        np.testing.assert_allclose(M[:, c], D[(slice(None),) + tuple(tau)], atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(tensors())
def test_unfold_slot_invariance(f):
    """Pairing any slot spans the same subspace as pairing the first."""
    D = dense_oracle(f)
    P0 = orthonormal_range(unfold(f), ambient=f.dim)
    for slot in range(f.order):
        moved = np.moveaxis(D, slot, 0).reshape(f.dim, -1)
        P = orthonormal_range(moved, ambient=f.dim)
        assert P.rank == P0.rank
        np.testing.assert_allclose(P.basis @ P.basis.T, P0.basis @ P0.basis.T, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_residual_ratio_properties(d, ru, rs, seed):
    gen = np.random.default_rng(seed)
    U = orthonormal_range(gen.standard_normal((d, min(ru, d))))
    S = orthonormal_range(gen.standard_normal((d, min(rs, d))))
    r = residual_ratio(U, S)
    assert -1e-12 <= r <= 1 + 1e-12
    # brute force: minimize over unit u in U of |u - P_S u|^2 via eigen-decomposition
    Q = U.basis.T @ (np.eye(d) - S.basis @ S.basis.T) @ U.basis
    assert r == pytest.approx(np.linalg.eigvalsh(Q)[0], abs=1e-10)
    if U.rank + S.rank > d:
        assert r == pytest.approx(0.0, abs=1e-10)


def test_symmetrize_averages():
    a = np.zeros((3, 3))
    a[0, 1] = 1.0
    f = symmetrize(a)
    np.testing.assert_allclose(dense_oracle(f), (a + a.T) / 2)

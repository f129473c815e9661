"""Pure numpy implementations of the hot kernels (fallback backend)."""
from __future__ import annotations

import numpy as np


def distinct_layout(index: np.ndarray):
    """Per sorted multi-index: distinct values and multiplicities, padded.

    Returns ``(J, Kk)`` of shape ``(K, n)``.  Position ``p`` carries the value
    and multiplicity of a run that starts at ``p``; other positions hold
    ``(0, 0)``, whose Hermite factor is ``H_0 = 1``.
    """
    index = np.asarray(index, dtype=np.int64)
    K, n = index.shape
    J = np.zeros((K, n), dtype=np.int64)
    Kk = np.zeros((K, n), dtype=np.int64)
    if n == 0 or K == 0:
        return J, Kk
    start = np.ones((K, n), dtype=bool)
    start[:, 1:] = index[:, 1:] != index[:, :-1]
    for p in range(n):
        # multiplicity: length of the run starting at p
        run = np.zeros(K, dtype=np.int64)
        alive = start[:, p].copy()
        for q in range(p, n):
            alive &= index[:, q] == index[:, p]
            run += alive
        J[:, p] = np.where(start[:, p], index[:, p], 0)
        Kk[:, p] = np.where(start[:, p], run, 0)
    return J, Kk


def hermite_table(x: np.ndarray, kmax: int) -> np.ndarray:
    """``H_k(x)`` for ``k = 0..kmax`` stacked on a new last axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (kmax + 1,))
    out[..., 0] = 1.0
    if kmax >= 1:
        out[..., 1] = x
    for k in range(1, kmax):
        out[..., k + 1] = x * out[..., k] - k * out[..., k - 1]
    return out


def product_basis(index: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """``B[s, sigma] = prod_l H_{k_l}(Z[s, j_l])`` for each sample row of ``Z``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    index = np.asarray(index, dtype=np.int64)
    K, n = index.shape
    if n == 0:
        return np.ones((Z.shape[0], K))
    J, Kk = distinct_layout(index)
    H = hermite_table(Z, n)
    return np.prod(H[:, J, Kk], axis=2)


def gradient_basis(index: np.ndarray, Z: np.ndarray):
    """Partial derivatives of each basis polynomial.

    Returns ``(G, J)``; ``G[s, sigma, p]`` is the derivative of basis
    function ``sigma`` in direction ``Z[J[sigma, p]]`` (zero at padded slots).
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    index = np.asarray(index, dtype=np.int64)
    K, n = index.shape
    J, Kk = distinct_layout(index)
    H = hermite_table(Z, n)
    F = H[:, J, Kk]  # (N, K, n)
    dF = Kk[None] * H[:, J, np.maximum(Kk - 1, 0)]
    G = np.empty_like(F)
    for p in range(n):
        others = np.ones(F.shape[:2])
        for q in range(n):
            if q != p:
                others = others * F[:, :, q]
        G[:, :, p] = dF[:, :, p] * others
    return G, J


def flow_products(E: np.ndarray, Einv: np.ndarray):
    """``J_{k+1} = E_k J_k`` and ``K_{k+1} = K_k Einv_k`` from identity."""
    E = np.asarray(E, dtype=float)
    Einv = np.asarray(Einv, dtype=float)
    N, m, d, _ = E.shape
    J = np.empty((N, m + 1, d, d))
    K = np.empty((N, m + 1, d, d))
    J[:, 0] = np.eye(d)
    K[:, 0] = np.eye(d)
    for k in range(m):
        J[:, k + 1] = E[:, k] @ J[:, k]
        K[:, k + 1] = K[:, k] @ Einv[:, k]
    return J, K

"""Chaos variables on a truncated isonormal process.

The isonormal process is realized by ``Z_i = W(e_i)``, i.i.d. standard
normals indexed by the orthonormal basis.  ``I_n(f)`` for a kernel in
coefficient-map form is the sum of products of probabilists' Hermite
polynomials; its Malliavin derivative is ``n I_{n-1}`` of the one-slot
contraction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from chaoskit import backend, rng
from chaoskit.tensor import SymTensor, contract_last


def hermite(k: int, x):
    """Probabilists' Hermite polynomial ``H_k(x)`` by three-term recurrence."""
    if k < 0:
        raise ValueError("k must be >= 0")
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), x
    if k == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for j in range(1, k):
        h_prev, h = h, x * h - j * h_prev
    return h if h.ndim else float(h)


@dataclass(frozen=True)
class GaussianSample:
    """One realization of ``(W(e_1), ..., W(e_d))`` with its provenance."""

    Z: np.ndarray
    seed: int | None = None
    index: int | None = None

    @property
    def dim(self) -> int:
        return self.Z.shape[-1]

    @classmethod
    def draw(cls, seed: int, index: int, dim: int, stream: int = 0) -> "GaussianSample":
        return cls(rng.normals(seed, index, 1, dim, stream)[0], seed, index)


@dataclass(frozen=True)
class ChaosVariable:
    """``I_n(f)`` for a symmetric kernel ``f``."""

    kernel: SymTensor

    @property
    def order(self) -> int:
        return self.kernel.order

    @property
    def dim(self) -> int:
        return self.kernel.dim


def _as_array(Z, dim: int) -> np.ndarray:
    z = Z.Z if isinstance(Z, GaussianSample) else np.asarray(Z, dtype=float)
    if z.shape[-1] != dim:
        raise ValueError(f"sample has dimension {z.shape[-1]}, kernel has {dim}")
    return z


def evaluate(v: ChaosVariable | SymTensor, Z) -> float | np.ndarray:
    """Value of ``I_n(f)`` at one sample (1-d ``Z``) or a batch (rows of ``Z``)."""
    f = v.kernel if isinstance(v, ChaosVariable) else v
    z = _as_array(Z, f.dim)
    batch = np.atleast_2d(z)
    if f.is_zero:
        out = np.zeros(batch.shape[0])
    else:
        out = backend.product_basis(f.index, batch) @ f.coef
    return out if z.ndim == 2 else float(out[0])


def malliavin_gradient(v: ChaosVariable | SymTensor, Z) -> np.ndarray:
    """``D I_n(f) = n I_{n-1}(<f, e_j>)`` as a coordinate vector of length ``d``.

    Reference route: one contraction and one evaluation per direction.
    """
    f = v.kernel if isinstance(v, ChaosVariable) else v
    if f.order < 1:
        raise ValueError("Malliavin derivative needs order >= 1")
    z = _as_array(Z, f.dim)
    if z.ndim != 1:
        raise ValueError("malliavin_gradient takes a single sample; use gradient_batch")
    out = np.zeros(f.dim)
    for j in np.unique(f.index):
        out[j] = f.order * evaluate(contract_last(f, int(j)), z)
    return out


def gradient_batch(f: SymTensor, Z: np.ndarray) -> np.ndarray:
    """Malliavin gradients for a batch of samples, shape ``(N, d)``."""
    z = np.atleast_2d(_as_array(Z, f.dim))
    out = np.zeros((z.shape[0], f.dim))
    if f.is_zero:
        return out
    G, J = backend.gradient_basis(f.index, z)
    for p in range(f.order):
        np.add.at(out.T, J[:, p], (G[:, :, p] * f.coef).T)
    return out


def malliavin_matrix(gradients: Sequence[np.ndarray], blocks: Sequence[int] | None = None) -> np.ndarray:
    """Gram matrix ``<DF_i, DF_j>`` under the block-diagonal inner product.

    ``blocks`` lists the lengths of the independent driver blocks; every
    gradient must have total length ``sum(blocks)``.
    """
    G = np.atleast_2d(np.asarray(gradients, dtype=float))
    if blocks is not None and sum(blocks) != G.shape[1]:
        raise ValueError(f"gradient length {G.shape[1]} does not match block layout {list(blocks)}")
    C = G @ G.T
    return 0.5 * (C + C.T)


def mc_expectation(
    expr: Callable[[np.ndarray], np.ndarray],
    N: int,
    seed: int,
    dim: int,
    threads: int = 1,
    stream: int = 0,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``expr`` over ``N`` samples.

    ``expr`` maps a block of samples ``(B, dim)`` to ``B`` values.  Blocks
    and their reduction tree are fixed by ``N``, so ``threads`` does not
    change the result.
    """
    if N < 2:
        raise ValueError("need N >= 2")

    def block(a, b):
        Z = rng.normals(seed, a, b - a, dim, stream)
        return rng.moments(np.asarray(expr(Z), dtype=float).reshape(-1))

    n, mean, m2 = rng.tree_reduce(rng.map_blocks(block, N, threads), rng.merge_moments)
    var = m2 / (n - 1)
    return float(mean), float(np.sqrt(var / n))

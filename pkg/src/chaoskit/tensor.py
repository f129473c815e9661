"""Symmetric tensors over a finite orthonormal basis.

A symmetric tensor of order ``n`` over ``R^d`` is stored as a coefficient map
over sorted multi-indices ``sigma = (i_1 <= ... <= i_n)`` (0-based), with

    f = sum_sigma c_sigma * sym(e_{i_1} x ... x e_{i_n})

where ``sym`` averages over all n! slot permutations.  The dense array of
``sym(e_sigma)`` holds ``w_sigma = prod(k_l!) / n!`` at every arrangement of
``sigma`` (``k_l`` the multiplicities), which is also ``||sym(e_sigma)||^2``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Iterable, Mapping

import numpy as np

DEFAULT_RANK_TOL = 1e-10


@lru_cache(maxsize=64)
def enumerate_multi_indices(dim: int, order: int) -> np.ndarray:
    """All sorted multi-indices of ``order`` over ``range(dim)``, lexicographic.

    Returns an int64 array of shape ``(C(dim+order-1, order), order)``.
    """
    rows = list(itertools.combinations_with_replacement(range(dim), order))
    out = np.array(rows, dtype=np.int64).reshape(len(rows), order)
    out.setflags(write=False)
    return out


def multi_index_keys(index: np.ndarray, dim: int) -> np.ndarray:
    """Base-``dim`` integer key per row; key order equals lexicographic order."""
    index = np.asarray(index, dtype=np.int64)
    key = np.zeros(index.shape[0], dtype=np.int64)
    for p in range(index.shape[1]):
        key = key * dim + index[:, p]
    return key


def multiplicities(sigma: Iterable[int]) -> dict[int, int]:
    out: dict[int, int] = {}
    for i in sigma:
        out[int(i)] = out.get(int(i), 0) + 1
    return out


def weights(index: np.ndarray) -> np.ndarray:
    """``w_sigma = prod(k_l!) / n!`` for each row of a sorted index array."""
    index = np.asarray(index)
    n = index.shape[1] if index.ndim == 2 else 0
    if index.shape[0] == 0:
        return np.zeros(0)
    if n == 0:
        return np.ones(index.shape[0])
    # runs of equal entries in sorted rows give the multiplicities
    w = np.ones(index.shape[0])
    run = np.ones(index.shape[0])
    for p in range(1, n):
        same = index[:, p] == index[:, p - 1]
        run = np.where(same, run + 1, 1.0)
        w = w * run
    return w / factorial(n)


@dataclass(frozen=True, eq=False)
class SymTensor:
    """Immutable symmetric tensor in coefficient-map form.

    ``index`` rows are sorted, unique and lexicographically ordered; ``coef``
    carries no exact zeros, so the zero tensor has an empty map.
    """

    order: int
    dim: int
    index: np.ndarray
    coef: np.ndarray

    def __post_init__(self):
        if self.order < 0 or self.dim < 1:
            raise ValueError(f"bad shape: order={self.order}, dim={self.dim}")
        coef = np.asarray(self.coef, dtype=float).reshape(-1)
        idx = np.asarray(self.index, dtype=np.int64)
        idx = idx.reshape(coef.size if self.order == 0 else -1, self.order)
        if idx.shape[0] != coef.shape[0]:
            raise ValueError("index/coef length mismatch")
        if idx.size and (idx.min() < 0 or idx.max() >= self.dim):
            raise ValueError(f"basis index outside 0..{self.dim - 1}")
        if self.order > 1 and idx.shape[0] and np.any(np.diff(idx, axis=1) < 0):
            raise ValueError("multi-indices must be sorted")
        idx, coef = _canonical(idx, coef, self.dim)
        idx.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "coef", coef)

    # construction ---------------------------------------------------------
    @classmethod
    def zero(cls, order: int, dim: int) -> "SymTensor":
        return cls(order, dim, np.zeros((0, order), dtype=np.int64), np.zeros(0))

    @classmethod
    def from_dict(cls, order: int, dim: int, entries: Mapping[tuple, float]) -> "SymTensor":
        keys = [tuple(sorted(int(i) for i in k)) for k in entries]
        for k in keys:
            if len(k) != order:
                raise ValueError(f"multi-index {k} has order {len(k)}, expected {order}")
        idx = np.array(keys, dtype=np.int64).reshape(len(keys), order)
        return cls(order, dim, idx, np.array(list(entries.values()), dtype=float))

    @classmethod
    def basis(cls, dim: int, *sigma: int) -> "SymTensor":
        """The symmetrized elementary tensor ``sym(e_sigma)`` with coefficient 1."""
        return cls.from_dict(len(sigma), dim, {tuple(sigma): 1.0})

    @classmethod
    def from_vector(cls, v) -> "SymTensor":
        v = np.asarray(v, dtype=float)
        return cls(1, v.size, np.arange(v.size).reshape(-1, 1), v)

    # views ----------------------------------------------------------------
    def as_dict(self) -> dict[tuple, float]:
        return {tuple(int(i) for i in row): float(c) for row, c in zip(self.index, self.coef)}

    def dense(self) -> np.ndarray:
        """Full ``dim**order`` array (test oracle; small shapes only)."""
        out = np.zeros((self.dim,) * self.order)
        w = weights(self.index)
        for row, c, wi in zip(self.index, self.coef, w):
            for perm in set(itertools.permutations(row)):
                out[perm] += c * wi
        return out

    def to_vector(self) -> np.ndarray:
        if self.order != 1:
            raise ValueError("to_vector needs an order-1 tensor")
        v = np.zeros(self.dim)
        v[self.index[:, 0]] = self.coef
        return v

    @property
    def is_zero(self) -> bool:
        return self.coef.size == 0

    # arithmetic -----------------------------------------------------------
    def _check_compatible(self, other: "SymTensor"):
        if not isinstance(other, SymTensor):
            raise TypeError(f"expected SymTensor, got {type(other).__name__}")
        if (self.order, self.dim) != (other.order, other.dim):
            raise ValueError(
                f"shape mismatch: order/dim {self.order}/{self.dim} vs {other.order}/{other.dim}"
            )

    def __add__(self, other: "SymTensor") -> "SymTensor":
        self._check_compatible(other)
        return SymTensor(
            self.order,
            self.dim,
            np.concatenate([self.index, other.index]),
            np.concatenate([self.coef, other.coef]),
        )

    def __neg__(self) -> "SymTensor":
        return SymTensor(self.order, self.dim, self.index, -self.coef)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        return self + (-other)

    def __mul__(self, a: float) -> "SymTensor":
        return SymTensor(self.order, self.dim, self.index, float(a) * self.coef)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SymTensor(order={self.order}, dim={self.dim}, nnz={self.coef.size})"

    # serialization --------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "order": self.order,
            "dim": self.dim,
            "entries": [[list(map(int, row)), float(c)] for row, c in zip(self.index, self.coef)],
        }

    @classmethod
    def from_json(cls, obj) -> "SymTensor":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            order, dim, entries = int(obj["order"]), int(obj["dim"]), obj["entries"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed SymTensor JSON: {exc}") from None
        idx = np.array([sorted(e[0]) for e in entries], dtype=np.int64).reshape(len(entries), order)
        coef = np.array([e[1] for e in entries], dtype=float)
        return cls(order, dim, idx, coef)


def _canonical(idx: np.ndarray, coef: np.ndarray, dim: int):
    if idx.shape[0] == 0:
        return idx.copy(), coef.copy()
    keys = multi_index_keys(idx, dim)
    uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
    summed = np.zeros(uniq.size)
    np.add.at(summed, inv, coef)
    keep = summed != 0.0
    return idx[first][keep].copy(), summed[keep]


def symmetrize(a: np.ndarray, dim: int | None = None) -> SymTensor:
    """Symmetrize a dense ``d x ... x d`` array into coefficient-map form.

    Each sorted ``sigma`` collects the sum of the input over all arrangements
    of ``sigma``; expanding the result densely gives the permutation average.
    """
    a = np.asarray(a, dtype=float)
    n = a.ndim
    if n == 0:
        raise ValueError("need an array of order >= 1")
    d = a.shape[0]
    if any(s != d for s in a.shape) or (dim is not None and dim != d):
        raise ValueError(f"array shape {a.shape} is not cubic with side {dim or d}")
    nz = np.argwhere(a != 0.0)
    if nz.size == 0:
        return SymTensor.zero(n, d)
    return SymTensor(n, d, np.sort(nz, axis=1), a[tuple(nz.T)])


def inner(f: SymTensor, g: SymTensor) -> float:
    """``<f, g>`` in ``H^{x n}``: ``sum_sigma c_sigma d_sigma w_sigma``."""
    f._check_compatible(g)
    if f.is_zero or g.is_zero:
        return 0.0
    kf = multi_index_keys(f.index, f.dim)
    kg = multi_index_keys(g.index, g.dim)
    common, i_f, i_g = np.intersect1d(kf, kg, assume_unique=True, return_indices=True)
    if common.size == 0:
        return 0.0
    w = weights(f.index[i_f])
    return float(np.sum(f.coef[i_f] * g.coef[i_g] * w))


def norm(f: SymTensor) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


def contract_last(f: SymTensor, j: int) -> SymTensor:
    """Pair one slot of ``f`` with ``e_j``; result has order ``n - 1``.

    Each sigma containing ``j`` (multiplicity ``k_j``) contributes
    ``(k_j / n) c_sigma`` to ``sigma`` with one copy of ``j`` removed.
    """
    n = f.order
    if n < 1:
        raise ValueError("cannot contract an order-0 tensor")
    if not 0 <= j < f.dim:
        raise ValueError(f"basis index {j} outside 0..{f.dim - 1}")
    hit = f.index == j
    k = hit.sum(axis=1)
    rows = np.nonzero(k)[0]
    if rows.size == 0:
        return SymTensor.zero(n - 1, f.dim)
    # drop the first occurrence of j in each hit row
    first = np.argmax(hit[rows], axis=1)
    keep = np.ones((rows.size, n), dtype=bool)
    keep[np.arange(rows.size), first] = False
    reduced = f.index[rows][keep].reshape(rows.size, n - 1)
    return SymTensor(n - 1, f.dim, reduced, f.coef[rows] * k[rows] / n)


def to_coords(f: SymTensor) -> np.ndarray:
    """Isometric coordinates ``c_sigma sqrt(w_sigma)`` over the canonical enumeration."""
    enum = enumerate_multi_indices(f.dim, f.order)
    out = np.zeros(enum.shape[0])
    if f.is_zero:
        return out
    slots = np.searchsorted(multi_index_keys(enum, f.dim), multi_index_keys(f.index, f.dim))
    out[slots] = f.coef * np.sqrt(weights(f.index))
    return out


def unfold(f: SymTensor) -> np.ndarray:
    """``dim x #(n-1)-multi-indices`` matrix of single-free-slot pairings.

    Column ``tau`` holds ``(<f, e_i x e_tau>)_i``; its entry at row ``i`` is
    ``c_sigma w_sigma`` for ``sigma = sort(tau + (i,))``.
    """
    n, d = f.order, f.dim
    if n < 1:
        raise ValueError("unfold needs order >= 1")
    cols = enumerate_multi_indices(d, n - 1)
    out = np.zeros((d, cols.shape[0]))
    if f.is_zero:
        return out
    col_keys = multi_index_keys(cols, d)
    w = weights(f.index)
    for p in range(n):
        # free slot taken at position p; skip repeats so each distinct i counts once
        if p > 0:
            distinct = f.index[:, p] != f.index[:, p - 1]
        else:
            distinct = np.ones(f.index.shape[0], dtype=bool)
        rows = np.nonzero(distinct)[0]
        if rows.size == 0:
            continue
        rest = np.delete(f.index[rows], p, axis=1)
        c = np.searchsorted(col_keys, multi_index_keys(rest, d)) if n > 1 else np.zeros(rows.size, int)
        np.add.at(out, (f.index[rows, p], c), f.coef[rows] * w[rows])
    return out


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Orthonormal columns spanning a subspace of ``R^ambient``."""

    ambient: int
    basis: np.ndarray
    tol: float = DEFAULT_RANK_TOL

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def project(self, v: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.T @ v)


def orthonormal_range(columns, tol: float = DEFAULT_RANK_TOL, ambient: int | None = None) -> SubspaceBasis:
    """Orthonormal basis of the column space; rank counts ``s > tol * s_max``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = np.asarray(columns, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    amb = ambient if ambient is not None else a.shape[0]
    if a.size == 0:
        return SubspaceBasis(amb, np.zeros((amb, 0)), tol)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0 or not np.isfinite(s[0]):
        return SubspaceBasis(amb, np.zeros((amb, 0)), tol)
    r = int(np.sum(s > tol * s[0]))
    return SubspaceBasis(amb, u[:, :r].copy(), tol)


def span_union(bases: Iterable[SubspaceBasis], ambient: int, tol: float = DEFAULT_RANK_TOL) -> SubspaceBasis:
    blocks = [b.basis for b in bases if b.rank]
    if not blocks:
        return SubspaceBasis(ambient, np.zeros((ambient, 0)), tol)
    return orthonormal_range(np.hstack(blocks), tol, ambient)


def residual_ratio(U: SubspaceBasis, S: SubspaceBasis) -> float:
    """``min_{u in U, |u|=1} |u - P_S u|^2 = 1 - sigma_max(B_U^T B_S)^2``."""
    if U.ambient != S.ambient:
        raise ValueError("ambient dimension mismatch")
    if U.rank == 0:
        raise ValueError("empty subspace")
    if S.rank == 0:
        return 1.0
    smax = np.linalg.norm(U.basis.T @ S.basis, 2)
    return float(min(1.0, max(0.0, 1.0 - smax * smax)))

"""Kernel families ``t -> f_t`` with ``f_0 = 0`` and chaos path sampling.

Every family has a fixed support (a set of sorted multi-indices) and a
vectorized coefficient function ``ts -> (len(ts), K)``; ``kernel_at`` wraps
one row into a :class:`SymTensor`.  ``knots`` lists the times where
``t -> f_t`` may bend (it is affine in between); below that resolution
increments are parallel, so configuration samplers draw from the knots.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from chaoskit import backend
from chaoskit.tensor import SymTensor, multi_index_keys, weights


@dataclass(frozen=True, eq=False)
class KernelFamily:
    name: str
    order: int
    dim: int
    support: np.ndarray
    coef_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    params: dict = field(default_factory=dict)
    theta: float = 2.0
    rho: float | None = None
    C_cov: float | None = None
    eta: float | None = None
    default_points: int = 33
    knots: np.ndarray | None = None

    def __post_init__(self):
        if self.rho is None:
            # any rho in (1/2, theta/2) works; take the midpoint
            object.__setattr__(self, "rho", 0.25 + self.theta / 4)
        sup = np.asarray(self.support, dtype=np.int64).reshape(-1, self.order)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "_w", weights(sup))
        if self.knots is not None:
            object.__setattr__(self, "knots", np.asarray(self.knots, dtype=float))

    # coefficients ---------------------------------------------------------
    def coefficients(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if ts.size and (ts.min() < 0.0 or ts.max() > 1.0):
            raise ValueError("t outside [0, 1]")
        return np.asarray(self.coef_fn(ts), dtype=float).reshape(ts.size, -1)

    def coords(self, ts) -> np.ndarray:
        """Isometric coordinates of ``f_t`` restricted to the support."""
        return self.coefficients(ts) * np.sqrt(self._w)

    def kernel_at(self, t: float) -> SymTensor:
        return SymTensor(self.order, self.dim, self.support, self.coefficients([t])[0])

    def increment(self, s: float, t: float) -> SymTensor:
        c = self.coefficients([s, t])
        return SymTensor(self.order, self.dim, self.support, c[1] - c[0])

    def gram(self, ts) -> np.ndarray:
        """``<f_s, f_t>`` for all pairs of ``ts``."""
        Q = self.coords(ts)
        return Q @ Q.T

    def grid(self, points: int | None = None) -> np.ndarray:
        return np.linspace(0.0, 1.0, points or self.default_points)

    def metadata(self) -> dict:
        return {
            "name": self.name,
            "order": self.order,
            "dim": self.dim,
            "params": dict(self.params),
            "theta": self.theta,
            "rho": self.rho,
            "C_cov": self.C_cov,
            "eta": self.eta,
        }


@dataclass
class PathSample:
    grid: np.ndarray
    X: np.ndarray
    DX: np.ndarray
    sample: object = None


# built-in families ----------------------------------------------------------


def blk2() -> KernelFamily:
    """``f_t = (min(t, 1/2), (t - 1/2)_+)`` in the first chaos of ``R^2``."""

    def coef(ts):
        return np.stack([np.minimum(ts, 0.5), np.maximum(ts - 0.5, 0.0)], axis=1)

    return KernelFamily("BLK2", 1, 2, np.array([[0], [1]]), coef, {}, theta=2.0, knots=np.array([0.0, 0.5, 1.0]))


def schauder_functions(ts: np.ndarray, L: int, theta: float) -> np.ndarray:
    """Columns: ``t`` then the weighted hats of levels ``0..L``.

    Hat ``(l, k)`` lives on ``[k 2^-l, (k+1) 2^-l]`` with peak
    ``h0 * 2^(-l theta/2)``; ``h0^2 = (r - 1)/4`` with ``r = 2^(2 - theta)``
    makes ``|f_t - f_s|^2 = |t - s|^theta`` on aligned dyadic intervals.
    """
    ts = np.asarray(ts, dtype=float)
    r = 2.0 ** (2.0 - theta)
    h0 = np.sqrt((r - 1.0) / 4.0)
    cols = [ts]
    for l in range(L + 1):
        n = 2**l
        x = ts * n
        k = np.arange(n)
        u = x[:, None] - k[None, :]
        hat = np.clip(1.0 - np.abs(2.0 * u - 1.0), 0.0, None)
        cols.append(h0 * 2.0 ** (-l * theta / 2.0) * hat)
    return np.column_stack(cols)


def _fit_cov_floor(fam: KernelFamily, eta: float, points: int) -> float:
    ts = np.linspace(0.0, 1.0, points)
    G = fam.gram(ts)
    dg = np.diag(G)
    i, j = np.triu_indices(points, 1)
    var = fam_factorial(fam.order) * (dg[i] + dg[j] - 2.0 * G[i, j])
    return float(np.min(var / (ts[j] - ts[i]) ** eta))


def fam_factorial(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def fd(L: int = 6, theta: float = 1.5) -> KernelFamily:
    """First-chaos Faber-Schauder family with a fresh direction per hat.

    ``dim = 2^(L+1)``: one linear direction plus ``2^(L+1) - 1`` hats.
    The covariance floor ``(C_cov, eta = theta)`` is fitted on the
    ``2^(L+1)``-cell grid.
    """
    if not 1.0 < theta < 2.0:
        raise ValueError("FD needs theta in (1, 2)")
    dim = 2 ** (L + 1)
    fam = KernelFamily(
        "FD", 1, dim, np.arange(dim).reshape(-1, 1),
        lambda ts: schauder_functions(ts, L, theta),
        {"L": L, "theta": theta}, theta=theta, default_points=2 ** min(L, 5) + 1,
        knots=np.linspace(0.0, 1.0, 2 ** (L + 1) + 1),
    )
    c = _fit_cov_floor(fam, theta, 2 ** (L + 1) + 1)
    return _with(fam, C_cov=c, eta=theta)


def _with(fam: KernelFamily, **kw) -> KernelFamily:
    d = {k: getattr(fam, k) for k in fam.__dataclass_fields__}
    d.update(kw)
    return KernelFamily(**d)


def pair_dim(count: int) -> int:
    d = 2
    while d * (d - 1) // 2 < count:
        d += 1
    return d


def herm2(L: int = 6, theta: float = 1.5) -> KernelFamily:
    """Second-chaos analogue of FD: each Schauder function on its own pair ``sym(e_u, e_v)``."""
    if not 1.0 < theta < 2.0:
        raise ValueError("HERM2 needs theta in (1, 2)")
    count = 2 ** (L + 1)
    d = pair_dim(count)
    iu, ju = np.triu_indices(d, 1)
    support = np.column_stack([iu, ju])[:count]
    fam = KernelFamily(
        "HERM2", 2, d, support,
        lambda ts: schauder_functions(ts, L, theta),
        {"L": L, "theta": theta}, theta=theta, default_points=2 ** min(L, 5) + 1,
        knots=np.linspace(0.0, 1.0, 2 ** (L + 1) + 1),
    )
    c = _fit_cov_floor(fam, theta, 2 ** (L + 1) + 1)
    return _with(fam, C_cov=c, eta=theta)


def rosen(hurst: float = 0.9, m: int = 16, past: float = 1e3) -> KernelFamily:
    """Discretized second-order Hermite (Rosenblatt-type) kernel.

    ``f_t(x, y) ~ int_0^t (s-x)_+^a (s-y)_+^a ds`` with ``a = H' - 3/2``.
    The basis is normalized cell indicators: ``m`` uniform cells on
    ``[0, 1]`` plus geometrically growing cells back to ``-past``.  The
    ``s``-integral uses the midpoint rule on the ``m`` cells; the singular
    factor is replaced by its exact cell average, which regularizes it at
    grid resolution.  Self-similarity index is ``2H' - 1``, so the claimed
    ``theta = 4H' - 2``.  Scaled so ``|f_1| = 1``.
    """
    if not 0.75 < hurst < 1.0:
        raise ValueError("ROSEN needs H' in (3/4, 1) so that theta > 1")
    a = hurst - 1.5
    back = []
    k = 0
    while not back or -back[-1] < past:
        back.append(-(2.0**k) / m)
        k += 1
    edges = np.concatenate([np.sort(back), np.arange(m + 1) / m])
    lo, hi = edges[:-1], edges[1:]
    s = (np.arange(m) + 0.5) / m
    up = np.clip(s[:, None] - lo[None, :], 0.0, None) ** (a + 1)
    down = np.clip(s[:, None] - hi[None, :], 0.0, None) ** (a + 1)
    phi = (up - down) / (a + 1) / np.sqrt(hi - lo)[None, :]  # (cell k in s, basis i)
    d = lo.size
    iu, ju = np.triu_indices(d)
    phi_c = phi[:, iu] * phi[:, ju] * np.where(iu == ju, 1.0, 2.0)
    support = np.column_stack([iu, ju])
    total = phi_c.sum(axis=0) / m
    scale = 1.0 / np.sqrt(np.sum(total**2 * weights(support)))

    def coef(ts):
        occ = np.clip(ts[:, None] - np.arange(m)[None, :] / m, 0.0, 1.0 / m)
        return scale * occ @ phi_c

    return KernelFamily(
        "ROSEN", 2, d, support, coef, {"hurst": hurst, "m": m, "past": past},
        theta=4 * hurst - 2, default_points=m + 1, knots=np.linspace(0.0, 1.0, m + 1),
    )


def custom(nodes: list[tuple[float, SymTensor]], theta: float = 2.0, name: str = "CUSTOM") -> KernelFamily:
    """Piecewise-linear interpolation between kernel nodes (constant after the last)."""
    if not nodes:
        raise ValueError("need at least one node")
    ts = np.array([t for t, _ in nodes], dtype=float)
    if ts[0] != 0.0 or np.any(np.diff(ts) <= 0) or ts[-1] > 1.0:
        raise ValueError("node times must increase strictly from 0 within [0, 1]")
    tensors = [f for _, f in nodes]
    order, dim = tensors[0].order, tensors[0].dim
    for f in tensors:
        if (f.order, f.dim) != (order, dim):
            raise ValueError("all node tensors must share order and dimension")
    if not tensors[0].is_zero:
        raise ValueError("kernel at t=0 must be zero")
    idx = np.concatenate([f.index for f in tensors] + [np.zeros((0, order), np.int64)])
    keys, first = np.unique(multi_index_keys(idx, dim), return_index=True)
    support = idx[first]
    table = np.zeros((ts.size, support.shape[0]))
    for r, f in enumerate(tensors):
        if not f.is_zero:
            table[r, np.searchsorted(keys, multi_index_keys(f.index, dim))] = f.coef

    def coef(q):
        return np.column_stack([np.interp(q, ts, table[:, c]) for c in range(table.shape[1])]) \
            if table.shape[1] else np.zeros((q.size, 0))

    knots = ts if ts[-1] == 1.0 else np.append(ts, 1.0)
    return KernelFamily(name, order, dim, support, coef, {"nodes": ts.size}, theta=theta,
                        default_points=max(9, 2 * ts.size - 1), knots=knots)


def load_custom(path: str | Path, theta: float = 2.0) -> KernelFamily:
    """Read ``[{"t": ..., "tensor": {order, dim, entries}}, ...]``."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        theta = float(data.get("theta", theta))
        data = data["nodes"]
    try:
        nodes = [(float(n["t"]), SymTensor.from_json(n["tensor"])) for n in data]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed custom kernel file: {exc}") from None
    return custom(nodes, theta=theta)


FAMILIES = {"BLK2": blk2, "FD": fd, "HERM2": herm2, "ROSEN": rosen}


def make_family(name: str, **params) -> KernelFamily:
    key = name.upper()
    if key == "CUSTOM":
        return load_custom(params.pop("file"), **params)
    if key not in FAMILIES:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES) + ['CUSTOM']}")
    return FAMILIES[key](**params)


# sampling -------------------------------------------------------------------


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 1 or g[0] != 0.0 or np.any(np.diff(g) <= 0) or g[-1] > 1.0:
        raise ValueError("grid must increase strictly from 0 within [0, 1]")
    return g


def gradient_operator(fam: KernelFamily, Z: np.ndarray) -> np.ndarray:
    """Per-sample ``(K, d)`` map from support coefficients to ``D I_n``."""
    Z = np.atleast_2d(Z)
    K = fam.support.shape[0]
    A = np.zeros((Z.shape[0], K, fam.dim))
    G, J = backend.gradient_basis(fam.support, Z)
    rows = np.arange(K)
    for p in range(fam.order):
        np.add.at(A, (slice(None), rows, J[:, p]), G[:, :, p])
    return A


def sample_paths(fam: KernelFamily, grid, Z: np.ndarray, with_dx: bool = True):
    """``X`` of shape ``(N, T)`` and ``DX`` of shape ``(N, T, d)`` for sample rows ``Z``.

    First-chaos ``DX`` is deterministic and returned as a broadcast view.
    """
    g = _check_grid(grid)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != fam.dim:
        raise ValueError(f"samples have dimension {Z.shape[1]}, family has {fam.dim}")
    C = fam.coefficients(g)
    X = backend.product_basis(fam.support, Z) @ C.T
    if not with_dx:
        return X, None
    if fam.order == 1:
        dx = np.zeros((g.size, fam.dim))
        dx[:, fam.support[:, 0]] = C
        return X, np.broadcast_to(dx, (Z.shape[0],) + dx.shape)
    return X, C @ gradient_operator(fam, Z)


def sample_path(fam: KernelFamily, grid, Z) -> PathSample:
    z = getattr(Z, "Z", Z)
    X, DX = sample_paths(fam, grid, np.asarray(z)[None, :])
    return PathSample(np.asarray(grid, dtype=float), X[0], np.array(DX[0]), Z)

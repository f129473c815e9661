"""Young integration and Young-regime SDEs driven by chaos paths.

All solvers are vectorized over a leading sample axis ``N``.  Drivers are
arrays ``X`` of shape ``(N, T, d)`` on a common increasing grid.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Callable

import numpy as np
from scipy.linalg import expm

from chaoskit import backend

OVERFLOW_GUARD = 1e12


class OutsideYoungRegime(ValueError):
    pass


class Divergence(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"solution exceeded {OVERFLOW_GUARD:g} at t={t:.6g}")
        self.t = t


@dataclass
class Path:
    """Values on a grid; ``values[k]`` may be a scalar, vector or matrix."""

    grid: np.ndarray
    values: np.ndarray
    holder: float = 1.0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.values.shape[0] != self.grid.size:
            raise ValueError("values and grid disagree in length")


def _pair(g: np.ndarray, dx: np.ndarray) -> np.ndarray:
    """``sum_k g_k . dx_k`` for scalar, vector or matrix ``g_k``."""
    if g.ndim == 1:
        return np.tensordot(g, dx, axes=(0, 0))
    if g.ndim == 2 and dx.ndim == 1:
        return np.einsum("ka,k->a", g, dx)
    if g.ndim == 2 and dx.ndim == 2 and g.shape[1] == dx.shape[1]:
        return np.einsum("ka,ka->", g, dx)
    if g.ndim == 3:
        return np.einsum("kab,kb->a", g, dx)
    raise ValueError(f"cannot pair integrand of shape {g.shape[1:]} with increments {dx.shape[1:]}")


def riemann_sum(g: np.ndarray, x: np.ndarray, step: int = 1) -> np.ndarray:
    """Left-point sum using every ``step``-th grid point."""
    T = x.shape[0]
    if (T - 1) % step:
        raise ValueError("grid length incompatible with step")
    idx = np.arange(0, T, step)
    return _pair(g[idx[:-1]], np.diff(x[idx], axis=0))


def young_integral(g: Path, X: Path) -> tuple[np.ndarray | float, float]:
    """``int g dX`` by left-point sums, with the gap to the half-coarsened sum."""
    if g.holder + X.holder <= 1.0:
        raise OutsideYoungRegime(f"outside Young regime: tau + rho = {g.holder + X.holder:g} <= 1")
    if g.grid.shape != X.grid.shape or not np.array_equal(g.grid, X.grid):
        raise ValueError("integrand and integrator need a common grid")
    val = riemann_sum(g.values, X.values)
    if (X.grid.size - 1) % 2 == 0 and X.grid.size >= 3:
        err = float(np.max(np.abs(val - riemann_sum(g.values, X.values, 2))))
    else:
        err = float("nan")
    return (float(val) if np.ndim(val) == 0 else val), err


def cumulative_integral(g: np.ndarray, dx: np.ndarray) -> np.ndarray:
    """Running left-point integral ``int_0^{t_k} g dX`` for ``k = 0..m``.

    ``g``: ``(N, m)`` or ``(m,)`` integrand at left points; ``dx``: ``(N, m, d)``
    or ``(m, d)`` increments.  Output ``(N, m+1, d)``.
    """
    g = np.asarray(g, dtype=float)
    dx = np.asarray(dx, dtype=float)
    prod = g[..., None] * dx
    out = np.zeros(prod.shape[:-2] + (prod.shape[-2] + 1, prod.shape[-1]))
    np.cumsum(prod, axis=-2, out=out[..., 1:, :])
    return out


# vector fields -------------------------------------------------------------


@dataclass
class VectorFieldSet:
    """Drift ``V_0`` and diffusion fields ``V_1..V_q`` on ``R^d``.

    Callables take a batch ``y`` of shape ``(N, d)``:
    ``sigma(y) -> (N, d, q)`` with column ``i`` equal to ``V_{i+1}(y)``;
    ``dsigma(y) -> (N, q, d, d)`` the Jacobians of those fields;
    ``drift(y) -> (N, d)``; ``ddrift(y) -> (N, d, d)``.
    """

    d: int
    q: int
    sigma: Callable[[np.ndarray], np.ndarray]
    dsigma: Callable[[np.ndarray], np.ndarray]
    drift: Callable[[np.ndarray], np.ndarray]
    ddrift: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    elliptic: bool = False
    spec: dict = field(default_factory=dict)

    def min_singular(self, ys: np.ndarray) -> float:
        """Smallest singular value of ``[V_1 .. V_q](y)`` over sample points."""
        S = self.sigma(np.atleast_2d(ys))
        return float(np.min(np.linalg.svd(S, compute_uv=False)[:, -1]))

    def check_derivatives(self, ys: np.ndarray, h: float = 1e-6) -> float:
        """Max central-difference discrepancy of the supplied Jacobians."""
        ys = np.atleast_2d(ys)
        err = 0.0
        for l in range(self.d):
            e = np.zeros(self.d)
            e[l] = h
            ds = (self.sigma(ys + e) - self.sigma(ys - e)) / (2 * h)  # (N, d, q)
            db = (self.drift(ys + e) - self.drift(ys - e)) / (2 * h)
            err = max(err, float(np.max(np.abs(ds - self.dsigma(ys)[:, :, :, l].transpose(0, 2, 1)))))
            err = max(err, float(np.max(np.abs(db - self.ddrift(ys)[:, :, l]))))
        return err


def affine_fields(A: list, c: list, A0=None, c0=None, name: str = "affine") -> VectorFieldSet:
    """``V_i(y) = A_i y + c_i`` and ``V_0(y) = A_0 y + c_0``."""
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)
    q, d, _ = A.shape
    if c.shape != (q, d):
        raise ValueError("affine diffusion: need A of shape (q, d, d) and c of shape (q, d)")
    A0 = np.zeros((d, d)) if A0 is None else np.asarray(A0, dtype=float)
    c0 = np.zeros(d) if c0 is None else np.asarray(c0, dtype=float)
    if A0.shape != (d, d) or c0.shape != (d,):
        raise ValueError("affine drift: need A0 (d, d) and c0 (d,)")

    def sigma(y):
        return np.einsum("ikl,nl->nki", A, y) + c.T[None]

    def dsigma(y):
        return np.broadcast_to(A, (y.shape[0],) + A.shape)

    def drift(y):
        return y @ A0.T + c0

    def ddrift(y):
        return np.broadcast_to(A0, (y.shape[0], d, d))

    spec = {"A": A.tolist(), "c": c.tolist(), "A0": A0.tolist(), "c0": c0.tolist()}
    return VectorFieldSet(d, q, sigma, dsigma, drift, ddrift, name, False, spec)


def linear_fields(a: float = 1.0, d: int = 1) -> VectorFieldSet:
    """``V_i(y) = a y_i e_i``: diagonal geometric noise, no drift."""
    A = np.zeros((d, d, d))
    for i in range(d):
        A[i, i, i] = a
    return affine_fields(A, np.zeros((d, d)), name="linear")


def additive_fields(d: int = 1, scale: float = 1.0, drift=None) -> VectorFieldSet:
    """``V_i = scale * e_i`` (constant, elliptic)."""
    f = affine_fields(np.zeros((d, d, d)), scale * np.eye(d), None, drift, name="additive")
    f.elliptic = True
    return f


def elliptic_sine(d: int = 2, eps: float = 0.1) -> VectorFieldSet:
    """``V(y) = I + eps S(y)``, ``S_ki = sin(y_k + y_i)``; drift ``eps cos(y)``."""
    eye = np.eye(d)

    def sigma(y):
        return eye + eps * np.sin(y[:, :, None] + y[:, None, :])

    def dsigma(y):
        C = np.cos(y[:, :, None] + y[:, None, :])  # (N, k, i)
        # d/dy_l sin(y_k + y_i) = cos(.)(delta_kl + delta_il); layout (N, i, k, l)
        out = eps * (C.transpose(0, 2, 1)[:, :, :, None] * (eye[None, None, :, :] + eye[None, :, None, :]))
        return out

    def drift(y):
        return eps * np.cos(y)

    def ddrift(y):
        return -eps * np.sin(y)[:, :, None] * eye

    return VectorFieldSet(d, d, sigma, dsigma, drift, ddrift, "elliptic-sine", True, {"d": d, "eps": eps})


def load_fields(path: str | FilePath) -> VectorFieldSet:
    """Affine fields from ``{"diffusion": [{"A":..,"c":..},..], "drift": {"A":..,"c":..}}``."""
    obj = json.loads(FilePath(path).read_text())
    try:
        diff = obj["diffusion"]
        A = [f["A"] for f in diff]
        c = [f["c"] for f in diff]
        dr = obj.get("drift", {})
        fs = affine_fields(A, c, dr.get("A"), dr.get("c"), name=obj.get("name", "affine"))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed vector-field file: {exc}") from None
    fs.elliptic = bool(obj.get("elliptic", False))
    return fs


FIELDS = {"linear": linear_fields, "additive": additive_fields, "elliptic-sine": elliptic_sine}


def make_fields(name: str, d: int = 2, **kw) -> VectorFieldSet:
    if name not in FIELDS:
        raise ValueError(f"unknown vector fields {name!r}; choose from {sorted(FIELDS)} or a JSON file")
    return FIELDS[name](d=d, **kw)


# solvers ---------------------------------------------------------------------


@dataclass
class SDEResult:
    grid: np.ndarray
    Y: np.ndarray  # (N, T, d)
    Y_half: np.ndarray | None = None  # (N, T//2 + 1, d) on every other grid point
    J: np.ndarray | None = None  # (N, T, d, d)
    Jinv: np.ndarray | None = None
    DY: np.ndarray | None = None  # (N, q, d, dH) at the final time
    C: np.ndarray | None = None  # (N, d, d) at the final time

    def inverse_defect(self) -> float:
        if self.J is None or self.Jinv is None:
            raise ValueError("Jacobians not computed")
        d = self.J.shape[-1]
        return float(np.max(np.linalg.norm(self.J @ self.Jinv - np.eye(d), ord=2, axis=(-2, -1))))


def _drivers(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError("drivers must have shape (N, T, q) or (T, q)")
    return X


def _euler(V: VectorFieldSet, grid: np.ndarray, X: np.ndarray, y0: np.ndarray) -> np.ndarray:
    N, T, q = X.shape
    if q != V.q:
        raise ValueError(f"{q} drivers for {V.q} diffusion fields")
    Y = np.empty((N, T, V.d))
    Y[:, 0] = y0
    dX = np.diff(X, axis=1)
    dt = np.diff(grid)
    for k in range(T - 1):
        y = Y[:, k]
        Y[:, k + 1] = y + np.einsum("nki,ni->nk", V.sigma(y), dX[:, k]) + V.drift(y) * dt[k]
        if not np.all(np.isfinite(Y[:, k + 1])) or np.max(np.abs(Y[:, k + 1])) > OVERFLOW_GUARD:
            raise Divergence(float(grid[k + 1]))
    return Y


def solve_sde(V: VectorFieldSet, grid, X, y0, half: bool = True) -> SDEResult:
    """Left-point Euler scheme for ``dY = sum V_i(Y) dX^i + V_0(Y) dt``."""
    grid = np.asarray(grid, dtype=float)
    X = _drivers(X)
    if X.shape[1] != grid.size:
        raise ValueError("driver length does not match the grid")
    y0 = np.broadcast_to(np.asarray(y0, dtype=float), (X.shape[0], V.d))
    Y = _euler(V, grid, X, y0)
    Yh = None
    if half and (grid.size - 1) % 2 == 0 and grid.size >= 3:
        Yh = _euler(V, grid[::2], X[:, ::2], y0)
    return SDEResult(grid, Y, Yh)


def _generators(V: VectorFieldSet, grid, X, Y) -> np.ndarray:
    """``A_k = sum_i DV_i(Y_k) dX^i_k + DV_0(Y_k) dt_k``, shape ``(N, m, d, d)``."""
    X = _drivers(X)
    N, T, d = Y.shape
    dX = np.diff(X, axis=1)
    dt = np.diff(grid)
    y = Y[:, :-1].reshape(-1, d)
    DS = V.dsigma(y).reshape(N, T - 1, V.q, d, d)
    DB = V.ddrift(y).reshape(N, T - 1, d, d)
    return np.einsum("nkiab,nki->nkab", DS, dX) + DB * dt[None, :, None, None]


def _flows(V, grid, X, Y, scheme: str):
    A = _generators(V, np.asarray(grid, dtype=float), X, Y)
    if scheme == "exp":
        E, Einv = expm(A), expm(-A)
    elif scheme == "euler":
        eye = np.eye(A.shape[-1])
        E, Einv = eye + A, eye - A
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    J, K = backend.flow_products(np.ascontiguousarray(E), np.ascontiguousarray(Einv))
    return J, K


def solve_jacobian(V, grid, X, Y, scheme: str = "exp") -> np.ndarray:
    """``J_{t<-0}``; ``scheme='euler'`` is the plain factor ``I + A_k``."""
    return _flows(V, grid, X, Y, scheme)[0]


def solve_jacobian_inverse(V, grid, X, Y, scheme: str = "exp") -> np.ndarray:
    """``J^{-1}_{t<-0}`` from ``dK = -K (sum DV_i dX^i + DV_0 dt)``."""
    return _flows(V, grid, X, Y, scheme)[1]


def solve_all(V, grid, X, y0, scheme: str = "exp") -> SDEResult:
    res = solve_sde(V, grid, X, y0)
    res.J, res.Jinv = _flows(V, res.grid, X, res.Y, scheme)
    return res


def duhamel_malliavin(V: VectorFieldSet, Y, J, Jinv, DX, k: int | None = None):
    """Malliavin derivative of ``Y_{t_k}`` and its Malliavin matrix.

    ``DX``: list of ``q`` driver derivatives, each ``(T, dH)`` (deterministic)
    or ``(N, T, dH)``.  Driver ``j`` only sees its own copy of the isonormal
    process, so ``D^j Y_t = J_t int_0^t J_s^{-1} V_j(Y_s) dD^j X^j_s``.
    Returns ``DY`` of shape ``(N, q, d, dH)`` and ``C`` of shape ``(N, d, d)``.
    """
    if DX is None:
        raise ValueError("driver Malliavin derivatives (DX) are required")
    N, T, d = Y.shape
    k = T - 1 if k is None else k
    if len(DX) != V.q:
        raise ValueError(f"need {V.q} DX paths, got {len(DX)}")
    if k == 0:
        dH = np.asarray(DX[0]).shape[-1]
        return np.zeros((N, V.q, d, dH)), np.zeros((N, d, d))
    S = V.sigma(Y[:, :k].reshape(-1, d)).reshape(N, k, d, V.q)
    M = np.einsum("nkab,nkbj->nkaj", Jinv[:, :k], S)  # (N, k, d, q)
    blocks = []
    for j in range(V.q):
        dj = np.diff(np.asarray(DX[j], dtype=float)[..., : k + 1, :], axis=-2)
        if dj.ndim == 2:
            inner = np.einsum("nka,kh->nah", M[..., j], dj)
        else:
            inner = np.einsum("nka,nkh->nah", M[..., j], dj)
        blocks.append(np.einsum("nab,nbh->nah", J[:, k], inner))
    DY = np.stack(blocks, axis=1)
    C = np.einsum("njah,njbh->nab", DY, DY)
    return DY, 0.5 * (C + C.transpose(0, 2, 1))

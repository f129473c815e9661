"""Numerical checks of the regularity, non-determinism and row-sum conditions.

The infimum over all partitions is not computable.  The non-determinism
estimates minimize over a finite configuration set: every contiguous block
of a dyadic grid (with all remaining grid points as conditioning points)
plus random configurations.  The result is an upper estimate of the true
infimum, i.e. a lower-bound *diagnostic*, never a certificate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from chaoskit import rng
from chaoskit.kernels import KernelFamily
from chaoskit.tensor import (
    DEFAULT_RANK_TOL,
    SubspaceBasis,
    orthonormal_range,
    residual_ratio,
    span_union,
    unfold,
)

log = logging.getLogger(__name__)

STRICT_MARGIN = 1e-12
ROW_SUM_FLOOR = -1e-12


@dataclass(frozen=True)
class PartitionConfig:
    inner: tuple[float, ...]
    left: tuple[float, ...] = ()
    right: tuple[float, ...] = ()

    def __post_init__(self):
        t = np.asarray(self.inner, dtype=float)
        if t.size < 2 or np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > 1:
            raise ValueError(f"inner points must be >= 2 increasing points in [0,1]: {self.inner}")
        s = np.asarray(self.left, dtype=float)
        if s.size and (np.any(np.diff(s) <= 0) or s[0] < 0 or s[-1] >= t[0]):
            raise ValueError(f"left points must increase within [0, t_1): {self.left}")
        r = np.asarray(self.right, dtype=float)
        if r.size and (np.any(np.diff(r) <= 0) or r[0] <= t[-1] or r[-1] > 1):
            raise ValueError(f"right points must increase within (t_m, 1]: {self.right}")

    def inner_intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.inner[:-1], self.inner[1:]))

    def conditioning_intervals(self) -> list[tuple[float, float]]:
        out = []
        if self.left:
            chain = (0.0,) + tuple(self.left) + (self.inner[0],)
            out += [(a, b) for a, b in zip(chain[:-1], chain[1:]) if b > a]
        if self.right:
            chain = (self.inner[-1],) + tuple(self.right)
            out += list(zip(chain[:-1], chain[1:]))
        return out

    def to_json(self) -> dict:
        return {k: [float(x) for x in getattr(self, k)] for k in ("inner", "left", "right")}

    @classmethod
    def from_json(cls, obj) -> "PartitionConfig":
        return cls(tuple(obj["inner"]), tuple(obj.get("left", ())), tuple(obj.get("right", ())))


def dyadic_configs(depth: int) -> list[PartitionConfig]:
    """Every contiguous block ``[t_i, t_j]`` of the ``2^depth`` grid, conditioned on the rest.

    For a fixed grid these dominate all sub-configurations: finer spans
    contain coarser ones, so the minimum over this set is the minimum over
    every configuration with points on the grid.
    """
    g = np.linspace(0.0, 1.0, 2**depth + 1)
    out = []
    n = g.size
    for i in range(n - 1):
        for j in range(i + 1, n):
            out.append(PartitionConfig(tuple(g[i : j + 1]), tuple(g[:i]), tuple(g[j + 1 :])))
    return out


def random_configs(
    count: int,
    seed: int = 0,
    max_inner: int = 5,
    max_side: int = 3,
    knots=None,
) -> list[PartitionConfig]:
    """Random configurations; points are uniform on ``[0, 1]`` or drawn from ``knots``."""
    gen = rng.block_generator(seed, 0, stream=7)
    pool = None if knots is None else np.unique(np.asarray(knots, dtype=float))
    if pool is not None and pool.size < 2:
        raise ValueError("need at least two knots")
    out = []
    while len(out) < count:
        m = int(gen.integers(2, max_inner + 1))
        k = int(gen.integers(0, max_side + 1))
        l = int(gen.integers(0, max_side + 1))
        if pool is None:
            pts = np.sort(gen.uniform(0.0, 1.0, m + k + l))
            if np.any(np.diff(pts) <= 0):
                continue
        else:
            m = min(m, pool.size)
            k = min(k, pool.size - m)
            l = min(l, pool.size - m - k)
            pts = np.sort(gen.choice(pool, m + k + l, replace=False))
        out.append(PartitionConfig(tuple(pts[k : k + m]), tuple(pts[:k]), tuple(pts[k + m :])))
    return out


def default_configs(depth: int = 4, count: int = 200, seed: int = 0, knots=None) -> list[PartitionConfig]:
    return dyadic_configs(depth) + random_configs(count, seed, knots=knots)


# regularity ----------------------------------------------------------------


@dataclass
class RegularityResult:
    theta_hat: float
    C_hat: float
    C_sup: float
    min_norm: float
    witness: tuple[float, float]
    theta_ls: float
    verdict: bool
    margin: float


def check_regularity(fam: KernelFamily, grid=None, margin: float = 0.05, max_lag: float = 0.5) -> RegularityResult:
    """Hoelder fit of ``|f_t - f_s|`` against ``|t - s|`` on grid pairs.

    The fitted curve is the per-lag maximum (the Hoelder envelope) over lags
    up to ``max_lag``; slope ``theta/2``, intercept ``log C``.  The plain
    least-squares slope over all pairs is reported as ``theta_ls``.
    """
    g = np.asarray(fam.grid() if grid is None else grid, dtype=float)
    if g.size < 9:
        raise ValueError("regularity fit needs a grid with >= 9 points")
    Q = fam.coords(g)
    i, j = np.triu_indices(g.size, 1)
    norms = np.linalg.norm(Q[j] - Q[i], axis=1)
    lags = g[j] - g[i]
    k = int(np.argmin(norms))
    min_norm = float(norms[k])
    positive = min_norm > 1e-12 * float(norms.max())
    ls_slope = np.polyfit(np.log(lags), np.log(np.maximum(norms, 1e-300)), 1)[0] if positive else np.nan

    key = np.round(lags / lags.min() * 1024).astype(np.int64)
    uniq = np.unique(key[lags <= max_lag + 1e-12])
    if uniq.size < 2:
        uniq = np.unique(key)
    env = np.array([norms[key == u].max() for u in uniq])
    env_lag = np.array([lags[key == u][0] for u in uniq])
    slope, icept = np.polyfit(np.log(env_lag), np.log(np.maximum(env, 1e-300)), 1)
    theta_hat = 2.0 * slope
    C_sup = float(np.max(norms / lags ** (theta_hat / 2.0)))
    return RegularityResult(
        theta_hat=float(theta_hat),
        C_hat=float(np.exp(icept)),
        C_sup=C_sup,
        min_norm=min_norm,
        witness=(float(g[i[k]]), float(g[j[k]])),
        theta_ls=float(2.0 * ls_slope),
        verdict=bool(theta_hat > 1.0 + margin and positive),
        margin=margin,
    )


# non-determinism ------------------------------------------------------------


def chaos_subspace(fam: KernelFamily, s: float, t: float, tol: float = DEFAULT_RANK_TOL) -> SubspaceBasis:
    """Span of the single-slot pairings of ``f_t - f_s`` inside ``H``."""
    if not s < t:
        raise ValueError("need s < t")
    return orthonormal_range(unfold(fam.increment(s, t)), tol, fam.dim)


@dataclass
class NondetResult:
    value: float
    witness: PartitionConfig | None
    per_config: list[float] = field(repr=False, default_factory=list)
    skipped: int = 0

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "witness": self.witness.to_json() if self.witness else None,
            "configs": len(self.per_config),
            "skipped": self.skipped,
        }


class _SubspaceCache:
    def __init__(self, fam: KernelFamily, tol: float, level: str):
        self.fam, self.tol, self.level = fam, tol, level
        self._store: dict[tuple[float, float], np.ndarray] = {}

    def basis(self, s: float, t: float) -> SubspaceBasis:
        key = (float(s), float(t))
        if key not in self._store:
            if self.level == "chaos":
                b = chaos_subspace(self.fam, s, t, self.tol).basis
            else:
                c = self.fam.coords([s, t])
                b = (c[1] - c[0]).reshape(-1, 1)
            self._store[key] = b
        return self._store[key]

    def span(self, intervals) -> SubspaceBasis:
        amb = self.fam.dim if self.level == "chaos" else self.fam.support.shape[0]
        blocks = [self.basis(a, b) for a, b in intervals]
        blocks = [b for b in blocks if b.shape[1]]
        if not blocks:
            return SubspaceBasis(amb, np.zeros((amb, 0)), self.tol)
        return orthonormal_range(np.hstack(blocks), self.tol, amb)


def _estimate(fam, configs, tol, level) -> NondetResult:
    configs = list(configs)
    if not configs:
        raise ValueError("need at least one configuration")
    cache = _SubspaceCache(fam, tol, level)
    vals: list[float] = []
    best, witness, skipped = np.inf, None, 0
    for cfg in configs:
        U = cache.span(cfg.inner_intervals())
        if U.rank == 0:
            skipped += 1
            log.warning("degenerate inner increments in %s; skipped", cfg)
            vals.append(np.nan)
            continue
        r = residual_ratio(U, cache.span(cfg.conditioning_intervals()))
        vals.append(r)
        if r < best:
            best, witness = r, cfg
    if witness is None:
        best = np.nan
    return NondetResult(float(best), witness, vals, skipped)


def estimate_alpha(fam: KernelFamily, configs: Iterable[PartitionConfig], tol: float = DEFAULT_RANK_TOL) -> NondetResult:
    """Minimum projection residual of inner chaos subspaces against conditioning ones."""
    return _estimate(fam, configs, tol, "chaos")


def estimate_beta(fam: KernelFamily, configs: Iterable[PartitionConfig], tol: float = DEFAULT_RANK_TOL) -> NondetResult:
    """Same residual computed on the kernel increments in ``H^{x n}`` coordinates."""
    return _estimate(fam, configs, tol, "kernel")


def residual_of(fam: KernelFamily, cfg: PartitionConfig, level: str = "chaos", tol: float = DEFAULT_RANK_TOL) -> float:
    """Re-evaluate one configuration (witness reproduction)."""
    return _estimate(fam, [cfg], tol, level).value


# row sums --------------------------------------------------------------------


@dataclass
class RowSumResult:
    min_value: float
    witness: tuple[float, float, float, float]
    verdict: bool


def check_row_sums(fam: KernelFamily, grid=None) -> RowSumResult:
    """``min <f_v - f_u, f_t - f_s>`` over nested grid intervals ``[u,v] in [s,t]``."""
    g = np.asarray(fam.grid() if grid is None else grid, dtype=float)
    if g.size < 3:
        raise ValueError("row-sum check needs >= 3 grid points")
    G = fam.gram(g)
    best, wit = np.inf, (0.0, 0.0, 0.0, 0.0)
    n = g.size
    for s in range(n - 1):
        for t in range(s + 1, n):
            # value(u, v) = a[v] - a[u] with a[x] = <f_x, f_t - f_s>
            a = G[s : t + 1, t] - G[s : t + 1, s]
            run_max = np.maximum.accumulate(a[:-1])
            cand = a[1:] - run_max
            k = int(np.argmin(cand))
            if cand[k] < best:
                u = int(np.argmax(a[: k + 1] == run_max[k]))
                best, wit = float(cand[k]), (g[s + u], g[s + k + 1], g[s], g[t])
    return RowSumResult(best, tuple(float(x) for x in wit), bool(best >= ROW_SUM_FLOOR))


# report ----------------------------------------------------------------------


@dataclass
class AssumptionReport:
    family: dict
    regularity: dict
    alpha: dict
    beta: dict
    row_sums: dict
    alpha_by_depth: dict
    verdicts: dict
    thresholds: dict
    note: str = (
        "alpha/beta are minima over a finite configuration set: estimates of the "
        "infimum over all partitions, not certificates"
    )

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self) -> dict:
        rows = [
            ("regularity", "holder-regularity", self.regularity),
            ("block_nondeterminism", "block-nondeterminism", self.alpha),
            ("kernel_nondeterminism", "kernel-nondeterminism", self.beta),
            ("row_sums", "nonnegative-row-sums", self.row_sums),
        ]
        return {
            "family": self.family,
            "checks": [
                {"claim": c, "paper_ref": ref, "verdict": self.verdicts[c], **vals} for c, ref, vals in rows
            ],
            "alpha_by_depth": self.alpha_by_depth,
            "thresholds": self.thresholds,
            "passed": self.passed,
            "note": self.note,
        }


def assumption_report(
    fam: KernelFamily,
    grid=None,
    depth: int = 4,
    count: int = 200,
    seed: int = 0,
    tol: float = DEFAULT_RANK_TOL,
    margin: float = 0.05,
) -> AssumptionReport:
    reg = check_regularity(fam, grid, margin)
    configs = default_configs(depth, count, seed, fam.knots)
    a = estimate_alpha(fam, configs, tol)
    b = estimate_beta(fam, configs, tol)
    rows = check_row_sums(fam, grid)
    by_depth = {str(L): estimate_alpha(fam, dyadic_configs(L), tol).value for L in range(2, depth + 1)}
    verdicts = {
        "regularity": reg.verdict,
        "block_nondeterminism": bool(a.value >= STRICT_MARGIN),
        "kernel_nondeterminism": bool(b.value >= STRICT_MARGIN),
        "row_sums": rows.verdict,
    }
    return AssumptionReport(
        family=fam.metadata(),
        regularity={
            "theta_hat": reg.theta_hat, "C_hat": reg.C_hat, "C_sup": reg.C_sup,
            "min_norm": reg.min_norm, "witness": list(reg.witness), "theta_ls": reg.theta_ls,
        },
        alpha=a.to_json(),
        beta=b.to_json(),
        row_sums={"min_value": rows.min_value, "witness": list(rows.witness)},
        alpha_by_depth=by_depth,
        verdicts=verdicts,
        thresholds={
            "theta_min": 1.0 + margin, "alpha_min": STRICT_MARGIN, "beta_min": STRICT_MARGIN,
            "row_sum_floor": ROW_SUM_FLOOR, "rank_tol": tol, "depth": depth,
            "random_configs": count, "seed": seed,
            "random_points": "knots" if fam.knots is not None else "uniform",
        },
    )

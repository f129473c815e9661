"""Command-line front end: ``chaoskit check|verify|sde|simulate --config FILE``.

Exit codes: 0 all verdicts pass, 1 some verdict failed, 2 configuration or
runtime error.  Reports never contain the thread count or timestamps, so a
fixed config and seed produce byte-identical files.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chaoskit import assumptions, kernels, nondegen, young
from chaoskit.chaos import evaluate
from chaoskit.rng import normals
from chaoskit.serialize import csv_text, dumps
from chaoskit.svg import line_plot

log = logging.getLogger("chaoskit")

DEFAULTS = {
    "family": {"name": "FD"},
    "run": {"seed": "0", "threads": "1", "out": "out", "m": "256", "n": "1000"},
    "check": {"depth": "4", "count": "200", "margin": "0.05", "tol": "1e-10", "points": ""},
    "verify": {
        "suites": "interpolation, energy, corollary, uniform, nonvanishing, subspace, norris, density",
        "integrands": "t, sin, sinX",
        "n_mc": "10000",
        "alpha_depth": "6",
        "nu": "0.8",
        "epsilons": "0.25, 0.1, 0.03, 0.01",
        "deltas": "",
        "tpow_tau": "0.5",
    },
    "sde": {"fields": "elliptic-sine", "d": "2", "y0": "", "t": "1.0", "scheme": "exp", "deltas": ""},
    "simulate": {},
}

FAMILY_PARAMS = {"L": int, "theta": float, "hurst": float, "m": int, "past": float}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    raw: configparser.ConfigParser
    seed: int
    threads: int
    out: Path
    m: int
    N: int

    def get(self, section: str, key: str) -> str:
        return self.raw.get(section, key, fallback=DEFAULTS.get(section, {}).get(key, "")).strip()

    def floats(self, section: str, key: str) -> list[float]:
        txt = self.get(section, key)
        try:
            return [float(v) for v in txt.replace(";", ",").split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected a comma-separated list of numbers") from None

    def words(self, section: str, key: str) -> list[str]:
        return [w.strip() for w in self.get(section, key).split(",") if w.strip()]

    def number(self, section: str, key: str, kind=float):
        txt = self.get(section, key)
        try:
            return kind(txt)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: cannot parse {txt!r} as {kind.__name__}") from None

    def echo(self) -> dict:
        """Config as used (thread count excluded so outputs do not depend on it)."""
        out = {}
        for sec in self.raw.sections():
            items = {k: v for k, v in self.raw.items(sec) if not (sec == "run" and k in ("threads", "out"))}
            out[sec] = dict(sorted(items.items()))
        return out


def load_config(path: str | None, overrides: list[str], args) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str.lower
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read_string(p.read_text(encoding="utf-8"), source=str(p))
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {str(exc).splitlines()[0]}") from None
    for sec in DEFAULTS:
        if not cp.has_section(sec):
            cp.add_section(sec)
    for item in overrides or []:
        key, sep, val = item.partition("=")
        sec, dot, opt = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, opt.lower(), val.strip())
    for flag, key in (("seed", "seed"), ("threads", "threads"), ("out", "out")):
        v = getattr(args, flag, None)
        if v is not None:
            cp.set("run", key, str(v))
    run = lambda k: cp.get("run", k, fallback=DEFAULTS["run"][k])  # noqa: E731
    try:
        seed, threads, m, N = int(run("seed")), int(run("threads")), int(run("m")), int(run("n"))
    except ValueError as exc:
        raise ConfigError(f"[run] {exc}") from None
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    if m < 2 or m & (m - 1):
        raise ConfigError(f"grid size m must be a power of two, got {m}")
    if N < 1:
        raise ConfigError("N must be >= 1")
    return ExperimentConfig(cp, seed, threads, Path(run("out")), m, N)


def build_family(cfg: ExperimentConfig) -> kernels.KernelFamily:
    sec = cfg.raw["family"]
    name = sec.get("name", "FD").strip()
    params = {}
    for k, v in sec.items():
        if k == "name":
            continue
        if k == "file":
            params["file"] = v.strip()
            continue
        key = {"l": "L"}.get(k, k)
        if key not in FAMILY_PARAMS:
            raise ConfigError(f"[family] unknown parameter {k!r}")
        try:
            params[key] = FAMILY_PARAMS[key](v)
        except ValueError:
            raise ConfigError(f"[family] {k}: cannot parse {v!r}") from None
    if name.upper() == "CUSTOM" and "file" not in params:
        raise ConfigError("CUSTOM family needs [family] file = PATH")
    try:
        return kernels.make_family(name, **params)
    except TypeError as exc:
        raise ConfigError(f"[family] {exc}") from None


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_bytes(text.encode("utf-8"))
    return p


def _grid(cfg: ExperimentConfig, t: float = 1.0) -> np.ndarray:
    return np.linspace(0.0, t, cfg.m + 1)


# subcommands -----------------------------------------------------------------


def cmd_check(cfg: ExperimentConfig, svg: bool) -> int:
    fam = build_family(cfg)
    pts = cfg.get("check", "points")
    grid = fam.grid(int(pts)) if pts else None
    rep = assumptions.assumption_report(
        fam,
        grid=grid,
        depth=cfg.number("check", "depth", int),
        count=cfg.number("check", "count", int),
        seed=cfg.seed,
        tol=cfg.number("check", "tol"),
        margin=cfg.number("check", "margin"),
    )
    doc = {"command": "check", "config": cfg.echo(), "report": rep.to_json()}
    _write(cfg.out, "check.json", dumps(doc))
    rows = [
        ("regularity", f"theta_hat={rep.regularity['theta_hat']:.4f} min_norm={rep.regularity['min_norm']:.3g}"),
        ("block_nondeterminism", f"alpha_hat={rep.alpha['value']:.6g}"),
        ("kernel_nondeterminism", f"beta_hat={rep.beta['value']:.6g}"),
        ("row_sums", f"min={rep.row_sums['min_value']:.6g}"),
    ]
    print(f"{'check':<24} {'verdict':<8} value")
    for name, val in rows:
        print(f"{name:<24} {'PASS' if rep.verdicts[name] else 'FAIL':<8} {val}")
    if svg:
        g = fam.grid(65)
        Q = fam.coords(g)
        norms = np.linalg.norm(Q - Q[0], axis=1)
        _write(cfg.out, "check_increments.svg", line_plot(
            [(g, norms, "|f_t - f_0|"), (g, g ** (fam.theta / 2) * norms[-1], "t^(theta/2)")],
            f"{fam.name} increment norms", "t", "norm"))
    return 0 if rep.passed else 1


def cmd_verify(cfg: ExperimentConfig, svg: bool) -> int:
    fam = build_family(cfg)
    suites = cfg.words("verify", "suites")
    known = {"interpolation", "energy", "corollary", "uniform", "nonvanishing", "subspace", "norris", "density"}
    bad = [s for s in suites if s not in known]
    if bad:
        raise ConfigError(f"[verify] unknown suites {bad}; choose from {sorted(known)}")
    tau = cfg.number("verify", "tpow_tau")
    specs = [nondegen.make_integrand(n, tau=tau, rho=fam.rho) for n in cfg.words("verify", "integrands")]
    for sp in specs:
        sp.check_regime(fam)
    det = [s for s in specs if not s.random]
    nmc = cfg.number("verify", "n_mc", int)
    seed, th, N = cfg.seed, cfg.threads, cfg.N
    reports = []
    beta = alpha = None
    if {"interpolation", "corollary"} & set(suites):
        beta = assumptions.estimate_beta(fam, assumptions.default_configs(seed=seed, knots=fam.knots)).value
    if "uniform" in suites:
        alpha = assumptions.estimate_alpha(fam, assumptions.dyadic_configs(cfg.number("verify", "alpha_depth", int))).value
    ugrid = np.linspace(0.0, 1.0, 2 ** cfg.number("verify", "alpha_depth", int) + 1)
    for sp in det:
        if "interpolation" in suites and np.max(np.abs(sp.values(_grid(cfg)))) > nondegen.NONZERO_FLOOR:
            reports.append(nondegen.verify_interpolation(fam, sp, beta))
        if "energy" in suites:
            reports.append(nondegen.verify_energy_identity(fam, sp, N=nmc, seed=seed, threads=th))
        if "corollary" in suites:
            reports.append(nondegen.verify_corollary_bounds(fam, sp, beta, N=nmc, seed=seed, threads=th))
    for sp in specs:
        if "uniform" in suites:
            reports.append(nondegen.verify_uniform_bound(fam, sp, alpha, N=N, seed=seed, threads=th, grid=ugrid))
        if "nonvanishing" in suites:
            reports.append(nondegen.verify_nonvanishing(fam, sp, N=nmc, seed=seed, threads=th))
    if "subspace" in suites:
        reports.append(nondegen.verify_DX_in_F(fam, N=N, seed=seed))
    grid = _grid(cfg)
    Z = normals(seed, 0, 1, fam.dim, stream=20)
    X, DX = kernels.sample_paths(fam, grid, Z)
    if "norris" in suites:
        eps = cfg.floats("verify", "epsilons")
        for sp in specs:
            g = sp.values(grid, X)[0] if sp.random else sp.values(grid)
            r = nondegen.norris_check(grid, np.asarray(DX[0]), cfg.number("verify", "nu"), eps, g, sp.tau, fam.rho)
            r.details["integrand"] = sp.name
            reports.append(r)
    dens_samples = {}
    if "density" in suites:
        deltas = cfg.floats("verify", "deltas") or None
        for sp in det:
            F = nondegen.integrated_kernel(fam, sp.values(grid), grid)
            ys = np.concatenate([evaluate(F, normals(seed, a, min(1024, nmc - a), fam.dim, stream=21)) for a in range(0, nmc, 1024)])
            r = nondegen.density_diagnostic(ys, deltas=deltas)
            r.details["integrand"] = sp.name
            reports.append(r)
            dens_samples[sp.name] = ys
    ok = all(r.verdict for r in reports)
    doc = {
        "command": "verify",
        "config": cfg.echo(),
        "family": fam.metadata(),
        "alpha_hat": alpha,
        "beta_hat": beta,
        "reports": [r.to_json() for r in reports],
        "passed": ok,
    }
    _write(cfg.out, "verify.json", dumps(doc))
    summary = [(r.claim, r.details.get("integrand", ""), "PASS" if r.verdict else "FAIL", r.slack) for r in reports]
    _write(cfg.out, "verify.csv", csv_text(["claim", "integrand", "verdict", "slack"],
                                           [(c, i, v, "" if s is None else s) for c, i, v, s in summary]))
    for c, i, v, s in summary:
        print(f"{c:<26} {i:<8} {v:<5} slack={'n/a' if s is None else f'{s:.4g}'}")
    if svg:
        series = [(grid, X[0], "X")]
        _write(cfg.out, "verify_path.svg", line_plot(series, f"{fam.name} sample path", "t", "X_t"))
        for name, ys in dens_samples.items():
            xs, ds = nondegen.kde_curve(ys)
            _write(cfg.out, f"verify_kde_{name}.svg", line_plot([(xs, ds, "KDE")], f"density of int {name} dX", "y", "density"))
    return 0 if ok else 1


def build_fields(cfg: ExperimentConfig) -> young.VectorFieldSet:
    name = cfg.get("sde", "fields")
    if name.endswith(".json"):
        return young.load_fields(name)
    return young.make_fields(name, d=cfg.number("sde", "d", int))


def cmd_sde(cfg: ExperimentConfig, svg: bool) -> int:
    fam = build_family(cfg)
    V = build_fields(cfg)
    y0 = cfg.floats("sde", "y0") or [0.0] * V.d
    if len(y0) != V.d:
        raise ConfigError(f"[sde] y0 has {len(y0)} entries, system has d={V.d}")
    deltas = cfg.floats("sde", "deltas") or None
    rep, table = nondegen.sde_density_experiment(
        fam, V, y0, t=cfg.number("sde", "t"), N=cfg.N, m=cfg.m, seed=cfg.seed,
        threads=cfg.threads, scheme=cfg.get("sde", "scheme"), deltas=deltas,
    )
    doc = {"command": "sde", "config": cfg.echo(), "report": rep.to_json()}
    _write(cfg.out, "sde.json", dumps(doc))
    header = [f"Y_{i + 1}" for i in range(V.d)] + ["lambda_min", "lambda_max"]
    _write(cfg.out, "sde_samples.csv", csv_text(header, table.tolist()))
    fb = rep.fractions_below
    print(f"sde-density {'PASS' if rep.verdict else 'FAIL'} min_lambda={rep.lhs:.4g} "
          f"below(1e-9)={fb[1e-9]:g} N={rep.n_samples}")
    if svg:
        for i in range(V.d):
            xs, ds = nondegen.kde_curve(table[:, i])
            _write(cfg.out, f"sde_kde_Y{i + 1}.svg", line_plot([(xs, ds, f"Y_{i + 1}")], f"KDE of Y_{i + 1}(t)", "y", "density"))
    return 0 if rep.verdict else 1


def cmd_simulate(cfg: ExperimentConfig, svg: bool) -> int:
    fam = build_family(cfg)
    grid = _grid(cfg)
    Z = normals(cfg.seed, 0, cfg.N, fam.dim, stream=22)
    width = len(str(cfg.N - 1))
    header = ["t", "X"] + [f"DX_{j + 1}" for j in range(fam.dim)]
    series = []
    for i in range(cfg.N):
        X, DX = kernels.sample_paths(fam, grid, Z[i : i + 1])
        rows = np.column_stack([grid, X[0], DX[0]])
        name = "paths.csv" if cfg.N == 1 else f"paths_{i:0{width}d}.csv"
        _write(cfg.out, name, csv_text(header, rows.tolist()))
        if i < 8:
            series.append((grid, X[0], f"X[{i}]"))
    if svg:
        _write(cfg.out, "paths.svg", line_plot(series, f"{fam.name} sample paths", "t", "X_t"))
    print(f"wrote {cfg.N} path file(s) to {cfg.out}")
    return 0


COMMANDS = {"check": cmd_check, "verify": cmd_verify, "sde": cmd_sde, "simulate": cmd_simulate}


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chaoskit", description="Non-degeneracy checks for chaos-driven integrals and SDEs.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="INI-style config file ([family], [run], [check], [verify], [sde])")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, help="worker threads (does not change results)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--svg", action="store_true", help="also write SVG plots")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config value")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.set, args)
        return COMMANDS[args.command](cfg, args.svg)
    except (ConfigError, ValueError, young.Divergence, OSError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"chaoskit: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

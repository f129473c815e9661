"""Time the compiled and numpy backends on the hot kernels.

    python3 benchmarks/bench_backends.py [--repeat 5] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from chaoskit import backend, kernels


def cases():
    gen = np.random.default_rng(0)
    h2 = kernels.herm2()
    ros = kernels.rosen()
    z_h2 = gen.standard_normal((1024, h2.dim))
    z_ros = gen.standard_normal((1024, ros.dim))
    x = gen.standard_normal(200_000)
    A = 0.01 * gen.standard_normal((64, 4096, 2, 2))
    E, Einv = np.eye(2) + A, np.eye(2) - A
    return [
        ("hermite_table(2e5, k=6)", lambda b: b.hermite_table(x, 6)),
        ("product_basis(HERM2, 1024)", lambda b: b.product_basis(h2.support, z_h2)),
        ("product_basis(ROSEN, 1024)", lambda b: b.product_basis(ros.support, z_ros)),
        ("gradient_basis(ROSEN, 1024)", lambda b: b.gradient_basis(ros.support, z_ros)),
        ("flow_products(64 x 4096, 2x2)", lambda b: b.flow_products(E, Einv)),
    ]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    impls = backend.implementations()
    if "cython" not in impls:
        print("compiled backend not built; only the numpy fallback is available", file=sys.stderr)
    rows = []
    for name, fn in cases():
        ref = None
        times = {}
        for bname, mod in impls.items():
            out = fn(mod)
            flat = np.concatenate([np.ravel(o) for o in (out if isinstance(out, tuple) else (out,))])
            if ref is None:
                ref = flat
            elif not np.allclose(ref, flat, rtol=1e-12, atol=1e-12):
                print(f"{name}: backends disagree", file=sys.stderr)
                return 1
            times[bname] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        rows.append({"case": name, **{f"{k}_s": v for k, v in times.items()}})
    print(f"{'case':<32}" + "".join(f"{b + ' [ms]':>16}" for b in impls) + (f"{'speedup':>10}" if len(impls) > 1 else ""))
    for r in rows:
        line = f"{r['case']:<32}" + "".join(f"{1e3 * r[b + '_s']:>16.2f}" for b in impls)
        if "cython_s" in r:
            line += f"{r['python_s'] / r['cython_s']:>9.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())

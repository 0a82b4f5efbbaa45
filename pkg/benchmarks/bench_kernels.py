"""Compiled vs pure-Python transfer kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times transfer_matrix on three workloads with each backend and reports the
speedup and the largest disagreement between the two results.
"""

import argparse
import time

from confluence import integrator
from confluence.family import conditioned_loop, coupled_family, euler_family
from confluence.integrator import Path, transfer_matrix


def workloads():
    e = euler_family()
    t3 = coupled_family(0.3, 0.3)
    return [
        ("euler circle eps=0.5", e.field(0.5), Path.circle(0.5j, 0.25)),
        ("t3 conditioned loop eps=0.4", t3.field(0.4), conditioned_loop(t3, 0.4, 0)),
        ("t3 unperturbed circle |t|=0.5", t3.unperturbed_field(), Path.circle(0, 0.5, 1.0)),
    ]


def bench(field, path, repeat, **kw):
    best = float("inf")
    F = None
    for _ in range(repeat):
        t = time.perf_counter()
        F = transfer_matrix(field, path, tol=1e-10, **kw)
        best = min(best, time.perf_counter() - t)
    return best, F


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        integrator.set_backend("cython")
    except ImportError:
        print("compiled kernel not built; only the fallback can be timed")
        return 1
    print(f"{'workload':32s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, field, path in workloads():
        kw = {"d_min": 0.0} if not field.singularities or field.singularities[0] == field.singularities[1] else {}
        integrator.set_backend("cython")
        tc, Fc = bench(field, path, args.repeat, **kw)
        integrator.set_backend("python")
        tp, Fp = bench(field, path, args.repeat, **kw)
        diff = Fc.distance(Fp)
        print(f"{name:32s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f} {diff:10.2e}")
    integrator.set_backend("cython")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

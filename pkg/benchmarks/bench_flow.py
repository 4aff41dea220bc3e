"""Compiled vs numpy flow kernel: timing and agreement.

    PYTHONPATH=src python3 benchmarks/bench_flow.py [--points N] [--steps K] [--repeat R]
"""
import argparse
import time

import numpy as np

from bishop_fill import _flow_py
from bishop_fill.contactomorphism import REFERENCE_BUMP, ContactHamiltonian

try:
    from bishop_fill import _flowkernel
except ImportError:
    _flowkernel = None


def sphere_points(n, seed=0, near=None, spread=0.6):
    """Uniform points on S^3, or points clustered around ``near`` (all inside a bump)."""
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(n, 4))
    if near is not None:
        p = np.asarray(near) + spread * p / np.linalg.norm(p, axis=1, keepdims=True) \
            * rng.uniform(0, 1, (n, 1))
    return p / np.linalg.norm(p, axis=1, keepdims=True)


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    c, r, a = ContactHamiltonian((REFERENCE_BUMP,), 1.0).arrays
    rows = []
    for label, pts in (("uniform", sphere_points(args.points)),
                       ("in support", sphere_points(args.points, 1, REFERENCE_BUMP.center, 0.3))):
        tp, yp = best_of(lambda: _flow_py.flow_points(pts, c, r, a, 1.0, args.steps), args.repeat)
        if _flowkernel is None:
            rows.append((label, tp, None, None))
            continue
        tc, yc = best_of(lambda: _flowkernel.flow_points(pts, c, r, a, 1.0, args.steps),
                         args.repeat)
        rows.append((label, tp, tc, float(np.max(np.abs(yp - yc)))))
    print(f"{args.points} points, {args.steps} RK4 steps, best of {args.repeat}")
    print(f"{'sample':<12}{'numpy [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max |diff|':>13}")
    for label, tp, tc, diff in rows:
        if tc is None:
            print(f"{label:<12}{tp:>12.4f}{'n/a':>12}")
        else:
            print(f"{label:<12}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}{diff:>13.2e}")


if __name__ == "__main__":
    main()

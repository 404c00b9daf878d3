"""Compare the compiled and numpy enumeration kernels.

    python3 benchmarks/bench_scan.py [--repeat N] [--large]

Times full exhaustive verification passes (scan + KL) on a few schemes with
each backend and checks the two produce identical reports.
"""

import argparse
import time

from qmacsec import kernels, verify
from qmacsec import protocols as P

CASES = [
    ("qsk-sum d=3 K=5", lambda: P.QSKSum(3, 5)),
    ("qsk-sum d=4 K=4", lambda: P.QSKSum(4, 4)),
    ("qsk-sum d=4 K=5", lambda: P.QSKSum(4, 5)),
    ("qsk-prod d=8 K=3", lambda: P.QSKProd(2, 3, 3)),
    ("qsk-prod d=9 K=3", lambda: P.QSKProd(3, 2, 3)),
]
LARGE = [("qsk-sum d=5 K=5", lambda: P.QSKSum(5, 5))]


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=1)
    ap.add_argument("--large", action="store_true", help="include the 1.2e9-evaluation sum case")
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])
    print(f"{'case':20} {'evaluations':>13} " + " ".join(f"{b + ' s':>10}" for b in backends) + f" {'speedup':>8} {'Meval/s':>8}")
    for label, make in CASES + (LARGE if args.large else []):
        scheme = make()
        times, reps = {}, {}
        for b in backends:
            t, e = best_of(lambda: verify.enumerate_scheme(scheme, "affine", limit=4 * 10**9, backend=b), args.repeat)
            times[b], reps[b] = t, e
        digests = {b: [v.digest for v in reps[b].views] for b in backends}
        assert len({tuple(v) for v in digests.values()}) == 1, f"{label}: backends disagree"
        n = reps[backends[0]].evaluations
        fast = times.get("cython", times["python"])
        print(f"{label:20} {n:13d} " + " ".join(f"{times[b]:10.2f}" for b in backends)
              + f" {times['python'] / fast:8.1f} {n / fast / 1e6:8.1f}")


if __name__ == "__main__":
    main()

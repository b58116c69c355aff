"""Time the inner kernels and an end-to-end star lift under both backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each backend runs in a fresh interpreter because the backend is fixed at
import time by KGMOTIF_BACKEND.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from kgmotif import _kernels
from kgmotif.connecthub import generate
from kgmotif.lift import lift
from kgmotif.motifs import catalog

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)

def best(fn):
    fn()  # warm-up (includes JIT compilation for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); times.append(time.perf_counter() - t0)
    return min(times)

indptr = np.concatenate([[0], np.cumsum(rng.integers(0, 8, 200_000))])
keys = rng.integers(0, 200_000, 400_000)
vals = rng.standard_normal((500_000, 32))
segs = np.sort(rng.integers(0, 10_000, 500_000))
x = rng.standard_normal((20_000, 64)); w = rng.standard_normal((32, 64)); b = rng.standard_normal(32)
g = generate(5).graphs[0].kg
stars = catalog("f6star")

out = {
    "backend": _kernels.BACKEND,
    "csr_expand": best(lambda: _kernels.csr_expand(indptr, keys)),
    "segment_sum": best(lambda: _kernels.segment_sum(vals, segs, 10_000)),
    "affine": best(lambda: _kernels.affine(x, w, b)),
    "lift_f6star_connecthub5": best(lambda: lift(stars, g)),
}
print(json.dumps(out))
"""


def run(backend: str, repeat: int) -> dict:
    env = dict(os.environ, KGMOTIF_BACKEND=backend)
    res = subprocess.run([sys.executable, "-c", CHILD, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rows = [run(b, args.repeat) for b in ("numpy", "numba")]
    names = [k for k in rows[0] if k != "backend"]
    print(f"{'kernel':<26}" + "".join(f"{r['backend']:>12}" for r in rows) + f"{'speedup':>10}")
    for k in names:
        print(f"{k:<26}" + "".join(f"{r[k] * 1e3:>10.1f}ms" for r in rows) + f"{rows[0][k] / rows[1][k]:>9.1f}x")


if __name__ == "__main__":
    main()

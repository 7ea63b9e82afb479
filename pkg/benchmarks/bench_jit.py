"""Compare the compiled kernels with the pure-Python fallback.

Each backend runs in its own interpreter (the backend is fixed at import
time by BRICKWORK_DISABLE_JIT). Reported times exclude one warm-up pass,
so numba compilation/cache loading is not counted.

    python benchmarks/bench_jit.py [--rounds N] [--repeat K]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from brickwork import _jit, _kernels as K
from brickwork.config import ScenarioConfig
from brickwork.harness import run_eval

rounds, repeat = int(sys.argv[1]), int(sys.argv[2])
cfg = ScenarioConfig(rounds=rounds, seed=42)
pts = np.random.default_rng(0).normal(size=(60, 3))

def kernels():
    for _ in range(2000):
        mean, cov = K.cloud_moments(pts)
        K.sym3_eigh(cov)
    for i in range(20000):
        K.trapezoid_velocity(3.0, 0.5, (i % 300) * 0.01)

def best(fn):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); times.append(time.perf_counter() - t0)
    return min(times)

out = {"backend": _jit.backend(),
       "kernels_s": best(kernels),
       "eval_s": best(lambda: run_eval(cfg)),
       "tsv": run_eval(cfg).to_tsv()}
print(json.dumps(out))
"""


def run(disable: bool, rounds: int, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("BRICKWORK_DISABLE_JIT", None)
    if disable:
        env["BRICKWORK_DISABLE_JIT"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(rounds), str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    fast = run(False, args.rounds, args.repeat)
    slow = run(True, args.rounds, args.repeat)
    print(f"{'benchmark':<22}{fast['backend']:>10}{slow['backend']:>10}{'speedup':>10}")
    for key, label in (("kernels_s", "kernel micro (s)"), ("eval_s", f"{args.rounds}-round eval (s)")):
        print(f"{label:<22}{fast[key]:>10.3f}{slow[key]:>10.3f}{slow[key] / fast[key]:>9.1f}x")
    print("reports identical:", fast["tsv"] == slow["tsv"])
    return 0 if fast["tsv"] == slow["tsv"] else 1


if __name__ == "__main__":
    sys.exit(main())

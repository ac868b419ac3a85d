"""Compare the numba and pure-Python integration kernels.

Each backend runs in its own interpreter because the backend is fixed at import
time by ``PSHLAB_DISABLE_NUMBA``.

    python3 benchmarks/bench_integrator.py [--repeat 5] [--tmax 50]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from pshlab._accel import backend
from pshlab.euler_arnold import table_field
from pshlab.flow import IntegratorConfig, integrate
from pshlab.metric import parse_label

repeat, t_max = int(sys.argv[1]), float(sys.argv[2])
cases = [("Q2:1", (0.1, 0.5, -0.2)), ("Q3", (0.5, -0.5, 0.5)), ("Q5", (1.0, 0.0, 0.0))]
out = {"backend": backend(), "cases": []}
t0 = time.perf_counter()
integrate(table_field(parse_label("Q3")), (1.0, 1.0, 0.0), IntegratorConfig(t_max=0.1))
out["warmup_s"] = time.perf_counter() - t0
for key, v0 in cases:
    F = table_field(parse_label(key))
    cfg = IntegratorConfig(t_max=t_max)
    best, steps, final = float("inf"), 0, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = integrate(F, v0, cfg)
        best = min(best, time.perf_counter() - t0)
        steps, final = traj.t.size - 1, traj.final.tolist()
    out["cases"].append({"label": key, "steps": steps, "best_s": best, "final": final})
print(json.dumps(out))
"""


def run_backend(disable: bool, repeat: int, t_max: float) -> dict:
    env = dict(os.environ)
    if disable:
        env["PSHLAB_DISABLE_NUMBA"] = "1"
    else:
        env.pop("PSHLAB_DISABLE_NUMBA", None)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat), str(t_max)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--tmax", type=float, default=50.0)
    args = ap.parse_args(argv)

    fast = run_backend(False, args.repeat, args.tmax)
    slow = run_backend(True, args.repeat, args.tmax)
    print(f"{'label':6} {'steps':>7} {'numba [s]':>11} {'python [s]':>11} {'speedup':>8} {'max |diff|':>11}")
    for a, b in zip(fast["cases"], slow["cases"]):
        diff = max(abs(x - y) for x, y in zip(a["final"], b["final"]))
        print(f"{a['label']:6} {a['steps']:7d} {a['best_s']:11.5f} {b['best_s']:11.5f} "
              f"{b['best_s'] / a['best_s']:8.1f} {diff:11.3e}")
    print(f"first call (includes JIT compile or cache load): numba {fast['warmup_s']:.3f} s, "
          f"python {slow['warmup_s']:.3f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read at import.

    python3 benchmarks/bench_backends.py [--rounds 2000] [--dims 4 16 64]
"""
import argparse
import json
import os
import subprocess
import sys

PROBE = r"""
import json, sys, time
import numpy as np
from gaugeons import geometry as geo, losses, reduction
from gaugeons._accel import backend
from gaugeons.gauge import gauge_dist

T, dims = int(sys.argv[1]), [int(x) for x in sys.argv[2:]]
out = {"backend": backend(), "runs": []}
for d in dims:
    body = geo.anisotropic_box(d, 1, 10)
    stream = losses.LossStream("linear_adversarial", d, seed=0, schedule="killer_kappa")
    reduction.run_oco(body, stream, 20, "barrier_ons", keep_records=False)  # warm-up / compile
    t0 = time.perf_counter()
    reduction.run_oco(body, stream, T, "barrier_ons", keep_records=False)
    t_run = time.perf_counter() - t0
    rng = np.random.default_rng(0)
    W = rng.normal(size=(2000, d)) * 20
    gauge_dist(body, W[0], 1e-6)
    t0 = time.perf_counter()
    for w in W:
        gauge_dist(body, w, 1e-6)
    t_gauge = time.perf_counter() - t0
    out["runs"].append({"d": d, "oco_s": t_run, "gauge_us": 1e6 * t_gauge / len(W)})
print(json.dumps(out))
"""


def measure(disable, rounds, dims):
    env = dict(os.environ)
    env.pop("GAUGEONS_DISABLE_NUMBA", None)
    if disable:
        env["GAUGEONS_DISABLE_NUMBA"] = "1"
    r = subprocess.run([sys.executable, "-c", PROBE, str(rounds), *map(str, dims)],
                       capture_output=True, text=True, env=env, check=True)
    return json.loads(r.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=2000)
    ap.add_argument("--dims", type=int, nargs="+", default=[4, 16, 64])
    args = ap.parse_args()
    fast = measure(False, args.rounds, args.dims)
    slow = measure(True, args.rounds, args.dims)
    print(f"{'d':>4} {'backend':>8} {'run s':>9} {'gauge us':>9}")
    for a, b in zip(fast["runs"], slow["runs"]):
        for name, x in ((fast["backend"], a), (slow["backend"], b)):
            print(f"{x['d']:>4} {name:>8} {x['oco_s']:>9.3f} {x['gauge_us']:>9.1f}")
        print(f"{'':>4} {'speedup':>8} {b['oco_s'] / a['oco_s']:>9.1f}x "
              f"{b['gauge_us'] / a['gauge_us']:>8.1f}x")


if __name__ == "__main__":
    main()

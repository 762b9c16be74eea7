"""Compare the compiled and pure-Python segment loops.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--horizon 9]

Two measurements per method:

* ``segment``: one long jump-free segment (huge threshold), which isolates
  the stepping loop itself;
* ``path``: a whole HH-P1 path, where per-jump bookkeeping in Python is
  shared by both backends and dilutes the difference.

Both backends must produce bit-identical output; the script checks this
before timing.
"""

import argparse
import time

import numpy as np

from pdmpsim import kernels
from pdmpsim.crk import Method, builtin_tableau
from pdmpsim.models import HHParams, build_hh_model
from pdmpsim.rng import UniformStream
from pdmpsim.simulate import SimulationConfig, simulate_approx


def run(backend: str, method: str, h: float, horizon: float, seed: int):
    params = HHParams.p1()
    model = build_hh_model(params).with_options(
        segment_integrator=kernels.hh_segment_integrator(params, backend=backend))
    cfg = SimulationConfig(method=method, h=h, horizon=horizon, seed=seed)
    return simulate_approx(model, cfg, UniformStream(seed))


def segment(backend: str, method: str, h: float, horizon: float):
    params = HHParams.p1()
    model = build_hh_model(params)
    integ = kernels.hh_segment_integrator(params, backend=backend)
    return integ(builtin_tableau(method), model.x0.theta, model.x0.y, 0.0, h, 1e300, horizon,
                 10**9)


def best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--horizon", type=float, default=9.0)
    ap.add_argument("--h", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default: {kernels.BACKEND})")
    header = f"{'case':22s} " + " ".join(f"{b:>10s}" for b in backends) + "   speed-up"
    print(header)
    for method in (m.value for m in Method):
        cases = {
            "segment": lambda b: segment(b, method, args.h / 10, args.horizon),
            "path": lambda b: run(b, method, args.h, args.horizon, args.seed),
        }
        for name, fn in cases.items():
            outs = [fn(b) for b in backends]
            for o in outs[1:]:
                ref = outs[0]
                same = (np.array_equal(o.jump_times, ref.jump_times) if name == "path"
                        else all(np.array_equal(x, y) for x, y in zip(o[1:], ref[1:])))
                assert same, f"backends disagree on {name}/{method}"
            times = [best_of(lambda b=b: fn(b), args.repeat) for b in backends]
            ratio = times[-1] / times[0] if len(times) > 1 else 1.0
            print(f"{method + ' ' + name:22s} " + " ".join(f"{t:9.3f}s" for t in times)
                  + f"   {ratio:6.1f}x")

if __name__ == "__main__":
    main()

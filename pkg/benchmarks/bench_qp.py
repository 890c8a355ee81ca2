"""Time the compiled and numpy QP backends on MPC problems of the case-study plant.

    python benchmarks/bench_qp.py [--reps 200] [--horizons 10 25 50]

Each horizon solves the same set of random initial states with every
available backend and reports the median time per solve and the largest
difference between backends' optimal inputs.
"""

import argparse
import time

import numpy as np

from wsanctl import HAVE_EXTENSION
from wsanctl.config import load_config, preset_path
from wsanctl.harness import build_setpoint
from wsanctl.mpc import MpcConfig, Polytope, solve_mpc
from wsanctl.plant import PlantModel


def case_plant():
    lc = load_config(preset_path("interference")).loops[0]
    model = PlantModel(lc.A, lc.B, lc.C)
    return model, build_setpoint(model, lc), lc


def time_backend(cfg, states, backend):
    times, sols = [], []
    for x in states:
        t0 = time.perf_counter()
        sol = solve_mpc(x, cfg, backend=backend)
        times.append(time.perf_counter() - t0)
        sols.append(sol.u_seq.ravel())
    return np.median(times), np.array(sols)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--horizons", type=int, nargs="+", default=[10, 25, 50])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model, sp, lc = case_plant()
    backends = ["python"] + (["compiled"] if HAVE_EXTENSION else [])
    if not HAVE_EXTENSION:
        print("compiled extension not built; timing the numpy backend only")
    rng = np.random.default_rng(args.seed)
    print(f"{'N':>4} {'backend':>9} {'median ms':>10} {'speedup':>8} {'max |du|':>10}")
    for N in args.horizons:
        cfg = MpcConfig(model.A, model.B, lc.Q, lc.R, N, lc.beta, U=Polytope.box(-lc.u_max - sp.u_bar, lc.u_max - sp.u_bar))
        states = rng.normal(scale=3.0, size=(args.reps, model.n))
        results = {b: time_backend(cfg, states, b) for b in backends}
        ref_t, ref_u = results["python"]
        for b in backends:
            t, u = results[b]
            print(f"{N:>4} {b:>9} {1e3 * t:>10.3f} {ref_t / t:>8.1f} {np.abs(u - ref_u).max():>10.2e}")


if __name__ == "__main__":
    main()

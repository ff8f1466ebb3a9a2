"""Time the simulated panel likelihood and averaged-probability kernels on both backends.

    python3 benchmarks/bench_kernels.py --individuals 1000 --draws 500
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from abmode import _accel
from abmode.choice_core import LV_MASK, UTILITY_PARAMS
from abmode.draws import LatentDrawPlan
from abmode.kernels import mean_probabilities, panel_loglik
from abmode.params import reference_parameters
from abmode.synthetic import synthetic_choice_data


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--individuals", type=int, default=1000)
    ap.add_argument("--draws", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    threads = _accel.set_threads(args.threads)

    params = reference_parameters("mixl")
    data = synthetic_choice_data(args.individuals, params, seed=0)
    random = params.random_coefficients
    X = data.design(UTILITY_PARAMS)
    beta = np.array([params[n] for n in UTILITY_PARAMS])
    rand_idx = np.array([UTILITY_PARAMS.index(n) for n in random])
    sd = np.array([params[f"{n}_sd"] for n in random])
    xi = LatentDrawPlan(args.draws, 0).normal(data.ids, len(random))
    eff = np.zeros((data.n_individuals, args.draws))
    extra = np.zeros_like(eff)

    def loglik(backend):
        return panel_loglik(X, data.avail, data.chosen, data.starts, data.counts, beta, rand_idx, sd, xi, eff,
                            LV_MASK, extra, want_grad=True, backend=backend)

    def probs(backend):
        return mean_probabilities(X, data.avail, data.ind_of_row, beta, rand_idx, sd, xi, eff, LV_MASK,
                                  backend=backend)

    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    print(f"{data.n_individuals} individuals x {len(data) // data.n_individuals} tasks, "
          f"{args.draws} draws, {threads} thread(s)")
    results = {}
    for name, fn in (("panel_loglik+grad", loglik), ("mean_probabilities", probs)):
        for b in backends:
            fn(b)  # compile / warm caches
            results[(name, b)] = best_of(lambda: fn(b), args.repeat)
            print(f"{name:<20}{b:<8}{results[(name, b)] * 1e3:>10.1f} ms")
        if "numba" in backends:
            ll_np, ll_nb = fn("numpy"), fn("numba")
            a = ll_np[0] if isinstance(ll_np, tuple) else ll_np
            c = ll_nb[0] if isinstance(ll_nb, tuple) else ll_nb
            speedup = results[(name, "numpy")] / results[(name, "numba")]
            print(f"{'':<20}speedup {speedup:.1f}x, max abs diff {np.max(np.abs(a - c)):.2e}")


if __name__ == "__main__":
    main()

"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 26x79 100x300]

Both implementations are imported directly, so the env flag is not needed.
Numba compile time is excluded by a warm-up call.
"""
import argparse
import time

import numpy as np

from opinionfit import _kernels_numpy as knp
from opinionfit.synthetic import PanelLayout, generate_synthetic, random_model_params

try:
    from opinionfit import _kernels_numba as knb
except ImportError:
    knb = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(t):
    s, j, u = t.subject_index, t.stimulus_index, t.scores
    I, J = t.num_subjects, t.num_stimuli
    g = np.random.default_rng(0)
    psi, delta, ups = g.uniform(1, 5, J), g.normal(0, 0.5, I), g.uniform(0.3, 1.2, I)
    pinned = np.zeros(I, dtype=bool)
    mos = np.bincount(j, weights=u, minlength=J) / np.bincount(j, minlength=J)
    return {
        "log_likelihood": lambda k: k.log_likelihood(s, j, u, psi, delta, ups),
        "derivatives": lambda k: k.derivatives(s, j, u, psi, delta, ups),
        "ap_iterate": lambda k: k.ap_iterate(s, j, u, I, J, mos, np.zeros(I), 1e-8, 10000, 1e-8, pinned),
        "nr_iterate": lambda k: k.nr_iterate(s, j, u, I, J, mos, np.zeros(I), np.ones(I), 0.1, 1e-9, 10000,
                                             1e-8, pinned, 1e-12),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", nargs="+", default=["26x79", "100x300", "400x1000"])
    args = ap.parse_args()

    print(f"{'panel':>10} {'kernel':>15} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>8}")
    for size in args.sizes:
        I, J = (int(x) for x in size.split("x"))
        t = generate_synthetic(random_model_params(I, J, 0), PanelLayout(I, J, 1, 0.1, 0))
        for name, call in cases(t).items():
            t_np = best_of(lambda: call(knp), args.repeat)
            if knb is None:
                print(f"{size:>10} {name:>15} {t_np * 1e3:12.3f} {'n/a':>12} {'':>8}")
                continue
            call(knb)  # compile
            t_nb = best_of(lambda: call(knb), args.repeat)
            print(f"{size:>10} {name:>15} {t_np * 1e3:12.3f} {t_nb * 1e3:12.3f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()

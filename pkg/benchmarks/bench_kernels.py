"""Wall-time comparison of the numba kernels against the pure-numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Each case is one single
trajectory; the first numba call is made beforehand so compilation time is
excluded. Both backends are checked to agree before timings are reported.
"""

import argparse
import time

import numpy as np

from aerislock import protocol as P
from aerislock._accel import HAVE_NUMBA
from aerislock.molecule import FieldConfig, chloroethane, methyl_acetate, trimethyl_phosphate
from aerislock.noise import OUParams

FIELD = FieldConfig(2.0)
NOISE = OUParams.from_hz(10.0, 4.6e-3)


def cases(repetitions: int):
    cont = P.AerisConfig(P.EncodingStage("continuous", 1000.0), repetitions=repetitions)
    robust = P.AerisConfig(P.EncodingStage("robust", 1000.0), repetitions=repetitions)
    return {
        "fid methyl_acetate (spin_half, 0.17 s)":
            lambda nb: P.run_fid(methyl_acetate(), FIELD, NOISE, 0.17, seed=1, use_numba=nb).total,
        "spin lock methyl_acetate (spin_half, 0.5 s)":
            lambda nb: P.run_spin_lock(methyl_acetate(), FIELD, NOISE, 1000.0, 0.5, seed=1,
                                       use_numba=nb).total,
        f"aeris continuous methyl_acetate (spin_half, R={repetitions})":
            lambda nb: P.run_aeris(methyl_acetate(), FIELD, NOISE, cont, seed=1,
                                   use_numba=nb).values,
        f"aeris robust trimethyl_phosphate (spin_half, R={repetitions})":
            lambda nb: P.run_aeris(trimethyl_phosphate(), FIELD, NOISE, robust, seed=1,
                                   use_numba=nb).values,
        f"aeris continuous chloroethane (dense, R={repetitions})":
            lambda nb: P.run_aeris(chloroethane(), FIELD, NOISE, cont, seed=1,
                                   use_numba=nb).values,
    }


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--repeat", type=int, default=3, help="timings per case (best is kept)")
    p.add_argument("--repetitions", type=int, default=200, help="AERIS repetitions R")
    args = p.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not active (missing or AERISLOCK_DISABLE_NUMBA set); "
              "only the numpy backend is timed")
    print(f"{'case':58s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speed-up':>9s}")
    for name, run in cases(args.repetitions).items():
        t_np = best_of(lambda: run(False), args.repeat)
        if HAVE_NUMBA:
            ref = run(True)  # compile outside the timed region
            if not np.allclose(ref, run(False), rtol=1e-9, atol=1e-12):
                raise SystemExit(f"backends disagree on {name}")
            t_nb = best_of(lambda: run(True), args.repeat)
            print(f"{name:58s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}x")
        else:
            print(f"{name:58s} {t_np:10.4f} {'-':>10s} {'-':>9s}")


if __name__ == "__main__":
    main()

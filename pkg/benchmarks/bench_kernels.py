"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Each case runs through the public API with ``backend="cython"`` and
``backend="python"``; the table reports the best wall time of the repeats
and the speed-up. The two backends must agree, which is checked first.
"""

import argparse
import timeit

import numpy as np

from rcdyn import analysis as an
from rcdyn import kernels
from rcdyn import reservoir as res
from rcdyn import systems


def cases(scale):
    lorenz = systems.lorenz(28.0)
    n_rk4 = int(200_000 * scale)
    orbit = systems.integrate(lorenz, [1.0, 1.0, 20.0], 0.01, int(20_000 * scale),
                              n_transient=1000)
    rng = np.random.default_rng(0)
    cfg = res.ReservoirConfig(N=500, seed=1)
    A, W_in = res.build_reservoir(cfg)
    inputs = rng.uniform(-1, 1, size=(int(5_000 * scale), cfg.M))
    model = res.train(cfg, orbit, L0=500, noise_amplitude=0.01)
    st = res.synchronize(model, orbit.slice(0, 1200))
    n_auto = int(5_000 * scale)

    yield ("rk4 integrate", f"{n_rk4} steps",
           lambda b: systems.integrate(lorenz, [1.0, 1.0, 20.0], 0.01, n_rk4, backend=b).samples)
    yield ("reservoir drive", f"N={cfg.N}, {len(inputs)} steps",
           lambda b: res.drive(A, W_in, cfg.alpha, inputs, np.zeros(cfg.N), backend=b))
    yield ("closed loop", f"N={cfg.N}, {n_auto} steps",
           lambda b: res.predict_autonomous(model, st, n_auto, backend=b).samples)
    yield ("tangent QR", f"{len(orbit)} samples",
           lambda b: np.asarray(an.lyapunov_spectrum(orbit, lorenz.jacobian,
                                                     backend=b).exponents))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiplies every problem size")
    args = ap.parse_args(argv)
    if not kernels.have_compiled():
        raise SystemExit("compiled kernels are not built; run pip install -e . first")
    print(f"{'kernel':<16} {'size':<24} {'cython s':>9} {'python s':>9} {'speed-up':>9}")
    for name, size, fn in cases(args.scale):
        a, b = fn("cython"), fn("python")
        if not np.allclose(a, b, rtol=1e-9, atol=1e-9):
            raise SystemExit(f"{name}: backends disagree (max diff {np.max(np.abs(a - b)):.3g})")
        t_c = min(timeit.repeat(lambda: fn("cython"), number=1, repeat=args.repeat))
        t_p = min(timeit.repeat(lambda: fn("python"), number=1, repeat=args.repeat))
        print(f"{name:<16} {size:<24} {t_c:9.4f} {t_p:9.4f} {t_p / t_c:8.1f}x")


if __name__ == "__main__":
    main()

"""Command-line front end: ``rcdyn {generate,train,predict,analyze,reproduce}``.

Heavy modules are imported inside the commands so that ``--threads`` can set
the BLAS/OpenMP thread variables before numpy loads.

Exit codes: 0 success, 1 tolerance failure, 2 usage, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger("rcdyn")

EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3
IDENTIFIERS = ("table2", "table3", "table4", "table5", "fig1", "fig2", "fig4", "fig5",
               "fig6", "fig8")
SYSTEM_CHOICES = ("lorenz28", "lorenz60", "rossler")
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


def _triple(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return vals


def _wolf_tuple(text):
    parts = text.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError("Wolf parameters are DIM,TAU,SCALMX,SCALMN,EVOLV,ANGLMX")
    return tuple(float(p) for p in parts)


def build_parser() -> argparse.ArgumentParser:
    def global_flags(p, default):
        p.add_argument("--config", type=Path, default=default,
                       help="reservoir configuration JSON")
        p.add_argument("--seed", type=int, default=default, help="random seed (default 0)")
        p.add_argument("--out", type=Path, default=default,
                       help="output directory (default ./out)")
        p.add_argument("--threads", type=int, default=default, help="BLAS/OpenMP threads")
        p.add_argument("-v", "--verbose", action="store_true",
                       default=False if default is None else default)

    # flags are accepted before or after the subcommand; SUPPRESS keeps the
    # subcommand from resetting values given before it
    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="rcdyn",
                                     description="Reservoir surrogates of chaotic flows.")
    global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="integrate a reference system")
    g.add_argument("--system", choices=SYSTEM_CHOICES, default="lorenz28")
    g.add_argument("--T", type=float, required=True, help="duration (time units)")
    g.add_argument("--dt", type=float, help="sampling step (system default if omitted)")
    g.add_argument("--transient", type=float, help="discarded transient (time units)")
    g.add_argument("--name", default=None, help="output file name (default <system>.csv)")

    t = sub.add_parser("train", parents=[common], help="train a reservoir model")
    t.add_argument("--input", type=Path, required=True, help="training trajectory CSV")
    t.add_argument("--preset", choices=("lorenz28", "lorenz60", "rossler", "table1-lorenz28",
                                        "table1-lorenz60"))
    t.add_argument("--L0", type=int, default=1000, help="discarded warm-up states")
    t.add_argument("--noise", type=float, default=0.0,
                   help="input noise amplitude relative to each component's sd")
    t.add_argument("--name", default="model", help="bundle directory name")

    p = sub.add_parser("predict", parents=[common], help="closed-loop run of a trained model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True, help="synchronization CSV")
    p.add_argument("--T", type=float, required=True, help="free-run duration")
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--name", default="prediction.csv")

    a = sub.add_parser("analyze", parents=[common], help="diagnostics of a trajectory or model")
    src = a.add_argument_group("source")
    src.add_argument("--input", type=Path, help="trajectory CSV (or sync data with --model)")
    src.add_argument("--system", choices=SYSTEM_CHOICES,
                     help="reference system (generated when --input is absent)")
    src.add_argument("--model", type=Path, help="model bundle; analyzes its free run")
    src.add_argument("--T", type=float, default=1e4, help="generated / free-run duration")
    sel = a.add_argument_group("selectors")
    for flag in ("lyapunov", "wolf", "clv-angles", "fixed-points", "upo-shadow", "poincare",
                 "density", "laminar"):
        sel.add_argument(f"--{flag}", action="store_true")
    par = a.add_argument_group("parameters")
    par.add_argument("--component", type=int, default=0, help="scalar component (0-based)")
    par.add_argument("--bins", type=int, help="histogram bins")
    par.add_argument("--threshold", type=float, default=1.8, help="laminar band half-width")
    par.add_argument("--wolf-params", type=_wolf_tuple, default=(3, 11, 0.1, 0.001, 600, 0.013))
    par.add_argument("--eps-p", type=float, default=0.05, help="section band |x-y| < eps_p")
    par.add_argument("--guess", type=_triple, action="append", help="fixed-point guess x,y,z")
    par.add_argument("--eps0", type=float, default=0.01)
    par.add_argument("--n0", type=int, default=10_000)
    par.add_argument("--renorm", type=int, default=5, help="steps between QR renormalizations")
    par.add_argument("--period-range", type=float, nargs=2, default=(1.0, 6.0),
                     metavar=("TMIN", "TMAX"))
    par.add_argument("--max-orbits", type=int, default=50)
    par.add_argument("--upo-T", type=float, default=2000.0, help="orbit-search series length")

    r = sub.add_parser("reproduce", parents=[common], help="run a table/figure recipe")
    r.add_argument("identifier", nargs="+", help=f"one of {', '.join(IDENTIFIERS)} or all")
    r.add_argument("--quick", action="store_true", help="small smoke-test scale")
    return parser


# --- commands -----------------------------------------------------------------

def _out(args) -> Path:
    out = args.out or Path("out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args):
    return 0 if args.seed is None else args.seed


def _read_series(path):
    from .timeseries import read_csv

    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"input CSV not found: {path}")
    return read_csv(path)


def _write_json(obj, path):
    from .experiments import write_json

    return write_json(obj, path)


def cmd_generate(args):
    from .experiments import generate
    from .timeseries import write_csv

    series = generate(args.system, args.T, seed=_seed(args), dt=args.dt,
                      transient=args.transient)
    path = write_csv(series, _out(args) / (args.name or f"{args.system}.csv"))
    log.info("generated %s: %d samples, T=%g, dt=%g -> %s", args.system, len(series),
             args.T, series.dt, path)
    return EXIT_OK


def _train_config(args):
    from . import reservoir as res

    if args.config is not None:
        if not args.config.is_file():
            raise FileNotFoundError(f"config not found: {args.config}")
        cfg = res.ReservoirConfig.load(args.config)
    elif args.preset == "table1-lorenz28":
        cfg = res.TABLE1_LORENZ28
    elif args.preset == "table1-lorenz60":
        cfg = res.TABLE1_LORENZ60
    elif args.preset:
        cfg = res.load_preset(args.preset)
    else:
        cfg = res.ReservoirConfig()
    return cfg if args.seed is None else cfg.replace(seed=args.seed)


def cmd_train(args):
    from . import reservoir as res

    data = _read_series(args.input)
    cfg = _train_config(args)
    model = res.train(cfg, data, L0=args.L0,
                      noise_amplitude=args.noise * data.samples.std(axis=0))
    path = res.save_model(model, _out(args) / args.name)
    rho = res.spectral_radius(model.A)
    _write_json({"config": cfg.to_dict(), "samples": len(data), "L0": args.L0,
                 "noise_rel": args.noise, "spectral_radius": rho}, path / "train.json")
    log.info("trained N=%d on %d samples; spectral radius %.6f (target %g) -> %s",
             cfg.N, len(data), rho, cfg.rho, path)
    return EXIT_OK


def cmd_predict(args):
    from . import reservoir as res
    from .timeseries import write_csv

    if not args.T > 0:
        raise ValueError("--T must be positive")
    model = res.load_model(args.model)
    sync = _read_series(args.input)
    n = int(round(args.T / model.config.dt))
    run = res.free_run(model, sync, n, warmup=args.warmup)
    path = write_csv(run, _out(args) / args.name)
    log.info("free run of %d steps -> %s", n, path)
    return EXIT_OK


def _analysis_source(args):
    """(trajectory, jacobian callable or None, model or None, system or None)."""
    from . import reservoir as res
    from . import systems
    from .experiments import generate

    if not args.T > 0:
        raise ValueError("--T must be positive")
    sysm = systems.get_system(args.system) if args.system else None
    if args.model is not None:
        model = res.load_model(args.model)
        if args.input is not None:
            sync = _read_series(args.input)
        elif args.system:
            sync = generate(args.system, 30.0, seed=_seed(args) + 1000)
        else:
            raise UsageError("--model needs --input or --system for synchronization")
        traj = res.free_run(model, sync, int(round(args.T / model.config.dt)))
        return traj, None, model, sysm
    if args.input is not None:
        return _read_series(args.input), None, None, sysm
    if args.system:
        traj = generate(args.system, args.T, seed=_seed(args))
        return traj, sysm.jacobian, None, sysm
    raise UsageError("analyze needs --input, --system or --model")


def _fixed_points(args, traj, jac, model, sysm, out, report):
    import numpy as np
    from scipy.optimize import root

    from . import analysis as an
    from . import systems
    from .experiments import write_fixed_point_table

    guesses = args.guess
    if not guesses:
        if args.system == "rossler":
            guesses = [[0.0, 0.0, 0.0]]
        else:
            r = float(args.system[len("lorenz"):]) if args.system else 28.0
            c = float(np.sqrt(systems.LORENZ_BETA * (r - 1)))
            guesses = [[-c, -c, r - 1], [c, c, r - 1], [0.0, 0.0, 0.0]]
    rows, found = [], []
    if model is not None:
        field = an.fit_jacobian_field(traj)
        for g in guesses:
            fp = an.find_fixed_point(model, g, args.eps0, args.n0, field=field)
            rows.append((f"P{len(rows) + 1}", fp.point, fp.eigenvalues))
            found.append(fp.as_dict())
    elif jac is not None:
        for g in guesses:
            sol = root(sysm.rhs, np.asarray(g, dtype=float), jac=sysm.jacobian, tol=1e-13)
            if not sol.success:
                from .errors import ConvergenceError
                raise ConvergenceError(f"no equilibrium near {g}: {sol.message}")
            eig = an.eigen3(sysm.jacobian(sol.x))
            rows.append((f"P{len(rows) + 1}", sol.x, eig))
            found.append({"point": sol.x.tolist(),
                          "eigenvalues": [[v.real, v.imag] for v in eig]})
    else:
        raise UsageError("--fixed-points needs --model or an analytic --system")
    write_fixed_point_table(rows, out / "fixed_points.csv")
    report["fixed_points"] = found


def cmd_analyze(args):
    import numpy as np

    from . import analysis as an
    from . import systems
    from .experiments import ExperimentSpec

    selected = [k for k in ("lyapunov", "wolf", "clv_angles", "fixed_points", "upo_shadow",
                            "poincare", "density", "laminar") if getattr(args, k)]
    if not selected:
        raise UsageError("choose at least one analysis selector")
    if args.upo_shadow and (args.model is None or args.system is None):
        raise UsageError("--upo-shadow needs --model and --system")
    ExperimentSpec(system=args.system or "external-csv", input_csv=args.input,
                   free_T=args.T, seed=_seed(args), params={"selected": selected})
    out = _out(args)
    traj, jac, model, sysm = _analysis_source(args)
    report = {"source": {"input": str(args.input) if args.input else None,
                         "system": args.system, "model": str(args.model) if args.model else None,
                         "samples": len(traj), "dt": traj.dt}}
    needs_jac = args.lyapunov or args.clv_angles
    if needs_jac and jac is None:
        field = an.fit_jacobian_field(traj)
        jac = field.jacobian
        report["jacobian_field_residual"] = field.fit_residual
    if args.lyapunov:
        rep = an.lyapunov_spectrum(traj, jac, renorm_interval=args.renorm)
        report["lyapunov"] = rep.as_dict()
    if args.wolf:
        res_w = an.wolf_lambda1(traj.component(args.component), args.wolf_params, detail=True)
        report["wolf"] = {"lambda1": res_w.lambda1, "iterations": res_w.iterations,
                          "kept_neighbor": res_w.kept_neighbor, "params": list(args.wolf_params)}
    if args.clv_angles:
        clvs = an.covariant_lyapunov_vectors(traj, jac, renorm_interval=args.renorm)
        h = an.angle_distribution(clvs, args.bins or 90)
        h.to_csv(out / "angles.csv")
        report["clv_angles"] = {"count": h.count, "mass_below_5": h.mass_below(5.0),
                                "min_angle": float(an.clv_angles(clvs).min())}
    if args.fixed_points:
        _fixed_points(args, traj, jac, model, sysm, out, report)
    if args.upo_shadow:
        from .experiments import generate

        series = generate(args.system, args.upo_T, seed=_seed(args) + 2000)
        upos = systems.find_upos(sysm, series, *args.period_range, max_orbits=args.max_orbits)
        deltas = np.array([an.shadow_periodic_orbit(model, o) for o in upos])
        np.savetxt(out / "upo_shadow.csv",
                   np.column_stack([[o.period for o in upos], deltas]).reshape(-1, 2),
                   delimiter=",", header="period,delta_p", comments="", fmt="%.17g")
        report["upo_shadow"] = {"count": len(upos),
                                "frac_below_0.1": float(np.mean(deltas < 0.1)) if len(upos) else 0.0,
                                "max_delta_p": float(deltas.max()) if len(upos) else None}
    if args.poincare:
        pts = an.poincare_like_section(traj, args.eps_p)
        an.write_section_csv(pts, out / "section.csv")
        report["poincare"] = {"eps_p": args.eps_p, "count": len(pts)}
    if args.density:
        h = an.density_histogram(traj.component(args.component), args.bins or 100)
        h.to_csv(out / "density.csv")
        report["density"] = {"component": args.component, "mean": h.mean, "sd": h.std}
    if args.laminar:
        scalar = traj.component(args.component) if traj.dim > 1 else traj
        dist = an.laminar_lasting_times(scalar, args.threshold, args.bins or 30)
        np.savetxt(out / "laminar_durations.csv", dist.durations, header="duration",
                   comments="", fmt="%.17g")
        if dist.histogram is not None:
            dist.histogram.to_csv(out / "laminar.csv")
        report["laminar"] = {"threshold": args.threshold, "count": dist.count,
                             "mean_duration": float(dist.durations.mean()) if dist.count else None}
    _write_json(report, out / "report.json")
    log.info("analysis report -> %s", out / "report.json")
    return EXIT_OK


def cmd_reproduce(args):
    from . import reservoir as res
    from .experiments import Context, reproduce

    ids = list(IDENTIFIERS) if args.identifier == ["all"] else args.identifier
    bad = [i for i in ids if i not in IDENTIFIERS]
    if bad:
        raise UsageError(f"unknown identifier {', '.join(bad)}; valid identifiers: "
                         f"{', '.join(IDENTIFIERS)}, all")
    out = _out(args)
    configs = {}
    if args.config is not None:
        if not args.config.is_file():
            raise FileNotFoundError(f"config not found: {args.config}")
        cfg = res.ReservoirConfig.load(args.config)
        configs = {name: cfg for name in SYSTEM_CHOICES}
    ctx = Context(out, seed=_seed(args), quick=args.quick, configs=configs)
    ok = True
    for ident in ids:
        summary = reproduce(ident, out, seed=_seed(args), quick=args.quick, ctx=ctx)
        n_pass = sum(c["passed"] for c in summary["checks"])
        print(f"{ident}: {'PASS' if summary['passed'] else 'FAIL'} "
              f"({n_pass}/{len(summary['checks'])} checks)"
              + (f" error: {summary['error']}" if summary["error"] else ""))
        ok &= summary["passed"]
    return EXIT_OK if ok else EXIT_TOLERANCE


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "predict": cmd_predict,
            "analyze": cmd_analyze, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rcdyn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        print(f"rcdyn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        from .errors import NumericalError

        if isinstance(exc, NumericalError):
            print(f"rcdyn: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        raise


if __name__ == "__main__":
    sys.exit(main())

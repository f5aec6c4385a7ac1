"""Reproduction recipes: generate -> train -> analyze -> compare.

Each recipe fills a flat ``measured`` dict and writes plot-ready CSVs; the
comparison against ``data/expected.json`` is shared. Run lengths live in
``data/recipes.json``.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis as an
from . import reservoir as res
from . import systems
from .errors import NotAFixedPointError, NumericalError
from .timeseries import TimeSeries, write_csv

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
IDENTIFIERS = ("table2", "table3", "table4", "table5", "fig1", "fig2", "fig4", "fig5",
               "fig6", "fig8")
SYSTEMS = ("lorenz28", "lorenz60", "rossler")
FIG4_PERIOD = 5.9973192969
FIG6_PERIOD = 35.06122601174815
SYNC_SAMPLES = 2000


def load_json(name):
    return json.loads((DATA_DIR / name).read_text())


@dataclass
class ExperimentSpec:
    """What to run: system, model config, lengths, analysis parameters, output."""

    system: str = "lorenz28"
    config: res.ReservoirConfig | None = None
    input_csv: Path | None = None
    train_T: float | None = None
    L0: int | None = None
    free_T: float | None = None
    noise_rel: float | None = None
    out: Path = Path("out")
    seed: int = 0
    quick: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.system == "external-csv":
            if self.input_csv is None:
                raise ValueError("system external-csv needs an input CSV")
            if not Path(self.input_csv).is_file():
                raise FileNotFoundError(f"input CSV not found: {self.input_csv}")
        elif self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}; choose from "
                             f"{', '.join(SYSTEMS + ('external-csv',))}")
        for name in ("train_T", "free_T"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.L0 is not None and self.L0 < 0:
            raise ValueError("L0 must be >= 0")
        self.out = Path(self.out)


def initial_state(system: systems.FlowSystem, seed: int):
    """Default start shifted by a seed-dependent offset in [-1, 1]^3."""
    rng = np.random.default_rng(seed)
    return np.asarray(system.default_start, dtype=float) + rng.uniform(-1.0, 1.0, 3)


def generate(name: str, T: float, seed: int = 0, dt=None, transient=None) -> TimeSeries:
    """``round(T/dt)`` samples of the named system after a transient."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    sysm = systems.get_system(name)
    dt = dt or sysm.default_dt
    settings = load_json("recipes.json")["systems"].get(name, {})
    transient = settings.get("transient", 100.0) if transient is None else transient
    n = int(round(T / dt))
    return systems.integrate(sysm, initial_state(sysm, seed), dt, n,
                             n_transient=int(round(transient / dt)))


class Context:
    """Caches series and models shared between the stages of one run."""

    def __init__(self, out: Path, seed=0, quick=False, configs=None):
        self.out = Path(out)
        self.seed = seed
        self.quick = quick
        self.recipes = load_json("recipes.json")
        self.configs = configs or {}
        self._actual = {}
        self._models = {}
        self._runs = {}
        self.timings = {}  # seconds spent training / free-running, by name

    def length(self, key):
        T = self.recipes["lengths"][key]
        return T * self.recipes["quick"]["scale"] if self.quick else T

    def settings(self, name):
        s = dict(self.recipes["systems"][name])
        if self.quick:
            s["train_T"] *= self.recipes["quick"]["scale"] * 10
        return s

    def actual(self, name, T):
        """Actual trajectory of at least duration T (cached, longest kept)."""
        have = self._actual.get(name)
        dt = systems.get_system(name).default_dt
        n = int(round(T / dt))
        if have is None or len(have) < n:
            have = generate(name, T, seed=self.seed + 1000)
            self._actual[name] = have
        return have.slice(0, n)

    def config(self, name):
        cfg = self.configs.get(name) or res.load_preset(name)
        if self.quick:
            cfg = cfg.replace(N=min(cfg.N, self.recipes["quick"]["N"]))
        return cfg.replace(seed=self.seed)

    def model(self, name):
        if name not in self._models:
            s = self.settings(name)
            cfg = self.config(name)
            train = generate(name, s["train_T"] + SYNC_SAMPLES * cfg.dt, seed=self.seed)
            data = train.slice(0, len(train) - SYNC_SAMPLES)
            t0 = time.time()
            model = res.train(cfg, data, L0=s["L0"],
                              noise_amplitude=s["noise_rel"] * data.samples.std(axis=0))
            self.timings[f"train.{name}"] = time.time() - t0
            log.info("trained %s model (N=%d, T=%g) in %.1fs", name, cfg.N, s["train_T"],
                     self.timings[f"train.{name}"])
            res.save_model(model, self.out / "models" / name)
            self._models[name] = (model, data, train.slice(len(train) - SYNC_SAMPLES))
        return self._models[name]

    def run(self, name, T):
        """Model free run of duration T synchronized on held-out data."""
        model, _, tail = self.model(name)
        n = int(round(T / model.config.dt))
        have = self._runs.get(name)
        if have is None or len(have) < n:
            t0 = time.time()
            have = res.free_run(model, tail, n)
            self.timings[f"run.{name}"] = time.time() - t0
            log.info("free run %s: %d steps in %.1fs", name, n, self.timings[f"run.{name}"])
            self._runs[name] = have
        return have.slice(0, n)


# --- helpers -------------------------------------------------------------------

def _eig_entries(measured, prefix, eig):
    for i, v in enumerate(eig, 1):
        measured[f"{prefix}.l{i}.re"] = float(v.real)
        measured[f"{prefix}.l{i}.im"] = float(v.imag)
        measured[f"{prefix}.l{i}.abs"] = float(abs(v))
        measured[f"{prefix}.l{i}.re_sign"] = float(np.sign(v.real))


def _point_entries(measured, prefix, p):
    for c, v in zip("xyz", p):
        measured[f"{prefix}.{c}"] = float(v)


def _lyap_entries(measured, prefix, rep):
    for i, v in enumerate(rep.exponents, 1):
        measured[f"{prefix}.lambda{i}"] = float(v)
    measured[f"{prefix}.ky"] = rep.ky_dimension
    measured[f"{prefix}.trace_mean"] = rep.trace_mean


def actual_lyapunov(ctx, name):
    sysm = systems.get_system(name)
    return an.lyapunov_spectrum(ctx.actual(name, ctx.length("actual_lyapunov_T")),
                                sysm.jacobian)


def model_field_run(ctx, name, key="model_T"):
    run = ctx.run(name, ctx.length(key))
    return run, an.fit_jacobian_field(run)


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    raise TypeError(type(v))


# --- recipes -----------------------------------------------------------------

def recipe_table2(ctx, d, m):
    rows, failed = [], []
    sysm = systems.lorenz(28.0)
    pts = systems.lorenz_fixed_points(28.0)
    for label, p in (("O_actual", pts[0]), ("R_actual", pts[1]), ("L_actual", pts[2])):
        eig = an.eigen3(sysm.jacobian(p))
        _point_entries(m, label, p)
        _eig_entries(m, label, eig)
        rows.append((label, p, eig))
    run, fld = model_field_run(ctx, "lorenz28")
    c = math.sqrt(systems.LORENZ_BETA * 27.0)
    guesses = {"L_res": ((-c, -c, 27.0), 0.01, 10_000), "R_res": ((c, c, 27.0), 0.01, 10_000),
               "O_res": ((0.0, 0.0, 0.0), 1.0, 30)}
    model = ctx.model("lorenz28")[0]
    for label, (g, eps0, n0) in guesses.items():
        try:
            fp = an.find_fixed_point(model, g, eps0, n0, field=fld)
        except NotAFixedPointError as exc:
            # keep going so the other points are still measured
            m[f"{label}.delta"] = exc.delta
            rows.append((label, exc.point, None))
            failed.append(f"{label}: {exc}")
            continue
        _point_entries(m, label, fp.point)
        _eig_entries(m, label, fp.eigenvalues)
        m[f"{label}.delta"] = fp.delta
        rows.append((label, fp.point, fp.eigenvalues))
    write_fixed_point_table(rows, d / "fixed_points.csv")
    if failed:
        raise NumericalError("; ".join(failed))


def write_fixed_point_table(rows, path):
    """``name,x,y,z`` plus real/imaginary parts of the three eigenvalues per row."""
    lines = ["name,x,y,z,l1_re,l1_im,l2_re,l2_im,l3_re,l3_im"]
    for label, p, eig in rows:
        vals = [repr(float(v)) for v in p]
        for v in (eig if eig is not None else [complex("nan")] * 3):
            vals += [repr(float(v.real)), repr(float(v.imag))]
        lines.append(",".join([label] + vals))
    Path(path).write_text("\n".join(lines) + "\n")


def recipe_table3(ctx, d, m):
    for name, r in (("lorenz28", "r28"), ("lorenz60", "r60")):
        _lyap_entries(m, f"{r}.actual", actual_lyapunov(ctx, name))
        run, fld = model_field_run(ctx, name)
        _lyap_entries(m, f"{r}.model", an.lyapunov_spectrum(run, fld.jacobian))
    wt = ctx.length("wolf_T")
    m["r28.actual.wolf"] = an.wolf_lambda1(ctx.actual("lorenz28", wt).component(0))
    m["r28.model.wolf"] = an.wolf_lambda1(ctx.run("lorenz28", wt).component(0))


def recipe_table4(ctx, d, m):
    sysm = systems.rossler()
    p = systems.rossler_fixed_points()[0]
    _point_entries(m, "F_actual", p)
    eig_a = an.eigen3(sysm.jacobian(p))
    _eig_entries(m, "F_actual", eig_a)
    run, fld = model_field_run(ctx, "rossler", "rossler_model_T")
    fp = an.find_fixed_point(ctx.model("rossler")[0], (0.0, 0.0, 0.0), 0.01, 800, field=fld)
    _point_entries(m, "F_res", fp.point)
    _eig_entries(m, "F_res", fp.eigenvalues)
    m["F_res.delta"] = fp.delta
    write_fixed_point_table([("F_actual", p, eig_a), ("F_res", fp.point, fp.eigenvalues)],
                             d / "fixed_points.csv")
    write_csv(run.slice(0, int(round(2500 / run.dt))), d / "model_trajectory.csv")


def recipe_table5(ctx, d, m):
    _lyap_entries(m, "actual", actual_lyapunov(ctx, "rossler"))
    run, fld = model_field_run(ctx, "rossler", "rossler_model_T")
    _lyap_entries(m, "model", an.lyapunov_spectrum(run, fld.jacobian))
    wt = ctx.length("rossler_wolf_T")
    m["actual.wolf"] = an.wolf_lambda1(ctx.actual("rossler", wt).component(0))
    m["model.wolf"] = an.wolf_lambda1(ctx.run("rossler", wt).component(0))


def recipe_fig1(ctx, d, m, eps_p=0.05, radius=0.5):
    T = ctx.length("section_T")
    for name, r in (("lorenz28", "r28"), ("lorenz60", "r60")):
        act = an.poincare_like_section(ctx.actual(name, T), eps_p)
        mod = an.poincare_like_section(ctx.run(name, T), eps_p)
        tra = an.poincare_like_section(ctx.model(name)[1], eps_p)
        for label, pts in (("actual", act), ("model", mod), ("training", tra)):
            an.write_section_csv(pts, d / f"{r}_section_{label}.csv")
        m[f"{r}.count_actual"] = len(act)
        m[f"{r}.count_model"] = len(mod)
        m[f"{r}.count_ratio"] = len(mod) / max(1, len(act))
        m[f"{r}.model_coverage"] = an.section_coverage(act, mod, radius)
        m[f"{r}.train_uncovered"] = 1.0 - an.section_coverage(act, tra, radius)


def recipe_fig2(ctx, d, m, bins=100):
    for name, r in (("lorenz28", "r28"), ("lorenz60", "r60")):
        act = ctx.actual(name, ctx.length("density_actual_T")).component(0)
        ha = an.density_histogram(act, bins)
        rng_ = (ha.edges[0], ha.edges[-1])
        hm = an.density_histogram(ctx.run(name, ctx.length("density_model_T")).component(0),
                                  bins, rng_)
        ht = an.density_histogram(ctx.model(name)[1].component(0), bins, rng_)
        for label, h in (("actual", ha), ("model", hm), ("training", ht)):
            h.to_csv(d / f"{r}_density_{label}.csv")
            m[f"{r}.{label}.mean"] = h.mean
            m[f"{r}.{label}.sd"] = h.std
        l1_m, l1_t = an.density_l1(hm, ha), an.density_l1(ht, ha)
        m[f"{r}.l1_model"] = l1_m
        m[f"{r}.l1_training"] = l1_t
        m[f"{r}.l1_ratio"] = l1_m / l1_t if l1_t > 0 else float("inf")


def recipe_fig4(ctx, d, m, max_orbits=50):
    sysm = systems.lorenz(28.0)
    series = ctx.actual("lorenz28", ctx.length("upo_series_T"))
    model = ctx.model("lorenz28")[0]
    cands = systems.find_upos(sysm, series, FIG4_PERIOD - 0.05, FIG4_PERIOD + 0.05,
                              threshold=0.3, max_orbits=8)
    if not cands:
        raise RuntimeError("no periodic orbit found near the target period")
    orbit = min(cands, key=lambda o: abs(o.period - FIG4_PERIOD))
    m["orbit.period"] = orbit.period
    m["orbit.delta_p"] = an.shadow_periodic_orbit(model, orbit)
    write_csv(TimeSeries(orbit.dt, orbit.points), d / "orbit_actual.csv")
    write_csv(_shadow_run(model, orbit), d / "orbit_model.csv")
    upos = systems.find_upos(sysm, series, 1.0, 6.0, threshold=0.5, max_orbits=max_orbits)
    deltas = np.array([an.shadow_periodic_orbit(model, o) for o in upos])
    np.savetxt(d / "batch_delta_p.csv", np.column_stack([[o.period for o in upos], deltas]),
               delimiter=",", header="period,delta_p", comments="", fmt="%.17g")
    m["batch.count"] = len(upos)
    m["batch.frac_below_0.1"] = float(np.mean(deltas < 0.1)) if len(deltas) else 0.0
    m["batch.max_delta_p"] = float(deltas.max()) if len(deltas) else float("inf")


def _shadow_run(model, orbit, warmup=res.DEFAULT_WARMUP):
    dt = model.config.dt
    k = model.config.delay
    n_p = math.ceil(orbit.period / dt - 1e-9)
    hist = orbit.states_at(dt * np.arange(-(warmup + k), 1))
    st = res.synchronize(model, hist)
    return res.predict_autonomous(model, st, n_p, t0=dt)


def recipe_fig5(ctx, d, m, bins=90):
    T = ctx.length("clv_T")
    hists = {}
    for name, r in (("lorenz28", "r28"), ("lorenz60", "r60")):
        sysm = systems.get_system(name)
        clv_a = an.covariant_lyapunov_vectors(ctx.actual(name, T), sysm.jacobian)
        run = ctx.run(name, T)
        clv_m = an.covariant_lyapunov_vectors(run, an.fit_jacobian_field(run).jacobian)
        for label, c in (("actual", clv_a), ("model", clv_m)):
            h = an.angle_distribution(c, bins)
            h.to_csv(d / f"{r}_angles_{label}.csv")
            m[f"{r}.{label}.mass_below_5"] = h.mass_below(5.0)
            m[f"{r}.{label}.min_angle"] = float(an.clv_angles(c).min())
            hists[(r, label)] = h
    m["r28.l1_model_actual"] = an.density_l1(hists[("r28", "model")], hists[("r28", "actual")])
    (d / "l1_distance.txt").write_text(f"r28 L1(model, actual) = {m['r28.l1_model_actual']!r}\n")


def recipe_fig6(ctx, d, m):
    sysm = systems.rossler()
    series = ctx.actual("rossler", max(ctx.length("rossler_wolf_T"), 2500.0))
    cands = systems.find_upos(sysm, series, FIG6_PERIOD - 0.5, FIG6_PERIOD + 0.5,
                              threshold=0.5, max_orbits=6)
    if not cands:
        raise RuntimeError("no periodic orbit found near the target period")
    orbit = min(cands, key=lambda o: abs(o.period - FIG6_PERIOD))
    model = ctx.model("rossler")[0]
    m["orbit.period"] = orbit.period
    m["orbit.delta_p"] = an.shadow_periodic_orbit(model, orbit)
    write_csv(TimeSeries(orbit.dt, orbit.points), d / "orbit_actual.csv")
    write_csv(_shadow_run(model, orbit), d / "orbit_model.csv")


def recipe_fig8(ctx, d, m, bins=90):
    T = ctx.length("clv_T") * 5
    sysm = systems.rossler()
    clv_a = an.covariant_lyapunov_vectors(ctx.actual("rossler", T), sysm.jacobian)
    run = ctx.run("rossler", T)
    clv_m = an.covariant_lyapunov_vectors(run, an.fit_jacobian_field(run).jacobian)
    ha, hm = an.angle_distribution(clv_a, bins), an.angle_distribution(clv_m, bins)
    ha.to_csv(d / "angles_actual.csv")
    hm.to_csv(d / "angles_model.csv")
    m["l1_model_actual"] = an.density_l1(hm, ha)


RECIPES = {k: globals()[f"recipe_{k}"] for k in IDENTIFIERS}


# --- comparison ---------------------------------------------------------------

def check(rule, measured):
    """Evaluate one fixture rule; returns a result record."""
    name = rule["name"]
    value = measured.get(name)
    rec = {"name": name, "value": value, **{k: v for k, v in rule.items() if k != "name"}}
    if value is None or (isinstance(value, float) and math.isnan(value)):
        rec["passed"] = False
        rec["note"] = "not measured"
        return rec
    if "rel_tol" in rule:
        ok = abs(value - rule["expected"]) <= rule["rel_tol"] * abs(rule["expected"])
    elif "abs_tol" in rule:
        ok = abs(value - rule["expected"]) <= rule["abs_tol"]
    elif "upper" in rule:
        ok = value < rule["upper"]
    elif "lower" in rule:
        ok = value > rule["lower"]
    elif "min" in rule:
        ok = value >= rule["min"]
    elif "max" in rule:
        ok = value <= rule["max"]
    else:
        raise ValueError(f"malformed rule {rule}")
    rec["passed"] = bool(ok)
    return rec


def _describe(rec):
    if "rel_tol" in rec:
        return f"expected {rec['expected']} +/- {100 * rec['rel_tol']:g}%"
    if "abs_tol" in rec:
        return f"expected {rec['expected']} +/- {rec['abs_tol']}"
    for key, op in (("upper", "<"), ("lower", ">"), ("min", ">="), ("max", "<=")):
        if key in rec:
            return f"required {op} {rec[key]}"
    return ""


def reproduce(identifier, out, seed=0, quick=False, ctx=None):
    """Run one recipe and compare against the fixture; returns the summary dict."""
    if identifier not in RECIPES:
        raise KeyError(identifier)
    ctx = ctx or Context(out, seed=seed, quick=quick)
    d = Path(out) / identifier
    d.mkdir(parents=True, exist_ok=True)
    measured = {}
    error = None
    t0 = time.time()
    try:
        RECIPES[identifier](ctx, d, measured)
    except Exception as exc:  # recorded; remaining checks report "not measured"
        log.exception("recipe %s failed", identifier)
        error = f"{type(exc).__name__}: {exc}"
    checks = [check(rule, measured) for rule in load_json("expected.json")[identifier]]
    summary = {"identifier": identifier, "seed": seed, "quick": quick, "error": error,
               "elapsed_s": round(time.time() - t0, 1), "measured": measured,
               "checks": checks, "passed": error is None and all(c["passed"] for c in checks)}
    write_json(summary, d / "summary.json")
    lines = [f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} = {c['value']!r} ({_describe(c)})"
             + (f" [{c['note']}]" if "note" in c else "") for c in checks]
    if error:
        lines.append(f"ERROR {error}")
    (d / "summary.txt").write_text("\n".join(lines) + "\n")
    return summary

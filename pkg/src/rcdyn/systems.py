"""Reference flows, RK4 integration and unstable periodic orbits.

The Lorenz and Rössler flows have compiled fast paths; any other vector
field can be passed as a plain callable (``rhs(s) -> ds``, vectorised over
the last axis) and goes through the numpy RK4 loop.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import ConvergenceError, IntegrationError
from .timeseries import TimeSeries

log = logging.getLogger(__name__)

LORENZ_SIGMA = 10.0
LORENZ_BETA = 8.0 / 3.0
ROSSLER_ABC = (0.2, 0.2, 5.7)


def lorenz_rhs(s, r=28.0):
    s = np.asarray(s, dtype=float)
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    return np.stack([LORENZ_SIGMA * (y - x), r * x - y - x * z, x * y - LORENZ_BETA * z], axis=-1)


def lorenz_jacobian(s, r=28.0):
    s = np.asarray(s, dtype=float)
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    jac = np.zeros(s.shape[:-1] + (3, 3))
    jac[..., 0, 0] = -LORENZ_SIGMA
    jac[..., 0, 1] = LORENZ_SIGMA
    jac[..., 1, 0] = r - z
    jac[..., 1, 1] = -1.0
    jac[..., 1, 2] = -x
    jac[..., 2, 0] = y
    jac[..., 2, 1] = x
    jac[..., 2, 2] = -LORENZ_BETA
    return jac


def lorenz_fixed_points(r=28.0):
    """The origin and the two symmetric equilibria C+ and C-."""
    c = math.sqrt(LORENZ_BETA * (r - 1.0))
    return np.array([[0.0, 0.0, 0.0], [c, c, r - 1.0], [-c, -c, r - 1.0]])


def rossler_rhs(s, a=0.2, b=0.2, c=5.7):
    s = np.asarray(s, dtype=float)
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    return np.stack([-y - z, x + a * y, b + (x - c) * z], axis=-1)


def rossler_jacobian(s, a=0.2, b=0.2, c=5.7):
    s = np.asarray(s, dtype=float)
    x, z = s[..., 0], s[..., 2]
    jac = np.zeros(s.shape[:-1] + (3, 3))
    jac[..., 0, 1] = -1.0
    jac[..., 0, 2] = -1.0
    jac[..., 1, 0] = 1.0
    jac[..., 1, 1] = a
    jac[..., 2, 0] = z
    jac[..., 2, 2] = x - c
    return jac


def rossler_fixed_points(a=0.2, b=0.2, c=5.7):
    disc = math.sqrt(c * c - 4 * a * b)
    pts = []
    for sign in (-1.0, 1.0):
        x = (c + sign * disc) / 2.0
        pts.append([x, -x / a, x / a])
    return np.array(pts)


@dataclass(frozen=True)
class FlowSystem:
    """A named autonomous ODE with its Jacobian.

    ``kernel_id`` selects the compiled integrator; ``None`` means the
    generic numpy path.
    """

    name: str
    rhs: Callable
    jacobian: Callable | None = None
    dim: int = 3
    kernel_id: int | None = None
    params: tuple = ()
    default_dt: float = 0.01
    default_start: tuple = (1.0, 1.0, 1.0)
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, s):
        return self.rhs(s)


def lorenz(r=28.0) -> FlowSystem:
    return FlowSystem(
        name=f"lorenz{r:g}",
        rhs=lambda s: lorenz_rhs(s, r),
        jacobian=lambda s: lorenz_jacobian(s, r),
        kernel_id=kernels.LORENZ,
        params=(LORENZ_SIGMA, float(r), LORENZ_BETA),
        default_dt=0.01,
        meta={"r": r},
    )


def rossler(a=0.2, b=0.2, c=5.7) -> FlowSystem:
    return FlowSystem(
        name="rossler",
        rhs=lambda s: rossler_rhs(s, a, b, c),
        jacobian=lambda s: rossler_jacobian(s, a, b, c),
        kernel_id=kernels.ROSSLER,
        params=(float(a), float(b), float(c)),
        default_dt=0.025,
        default_start=(1.0, 1.0, 0.0),
    )


def get_system(name: str) -> FlowSystem:
    """``lorenz28``, ``lorenz60``, ``lorenz<r>`` or ``rossler``."""
    if name == "rossler":
        return rossler()
    if name.startswith("lorenz"):
        try:
            return lorenz(float(name[len("lorenz"):] or 28))
        except ValueError:
            pass
    raise ValueError(f"unknown system {name!r}")


def rk4_step(rhs, s, dt):
    """One classical RK4 step of ``ds/dt = rhs(s)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    s = np.asarray(s, dtype=float)
    # overflow is reported below as a blow-up, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = np.asarray(rhs(s), dtype=float)
        k2 = np.asarray(rhs(s + 0.5 * dt * k1), dtype=float)
        k3 = np.asarray(rhs(s + 0.5 * dt * k2), dtype=float)
        k4 = np.asarray(rhs(s + dt * k3), dtype=float)
        out = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationError(0, "RK4 step produced a non-finite state")
    return out


def _integrate_array(system, s0, dt, n_steps, n_transient, backend=None):
    s0 = np.array(s0, dtype=float)
    kid = getattr(system, "kernel_id", None)
    if kid is not None:
        impl = kernels.get_backend(backend)
        out, bad = impl.rk4_run(kid, np.array(system.params, dtype=float), s0,
                                float(dt), int(n_steps), int(n_transient))
        if bad >= 0:
            raise IntegrationError(bad)
        return out
    rhs = system.rhs if isinstance(system, FlowSystem) else system
    s = s0
    for k in range(n_transient):
        try:
            s = rk4_step(rhs, s, dt)
        except IntegrationError:
            raise IntegrationError(k + 1) from None
    out = np.empty((n_steps,) + s.shape)
    out[0] = s
    for i in range(1, n_steps):
        try:
            s = rk4_step(rhs, s, dt)
        except IntegrationError:
            raise IntegrationError(n_transient + i) from None
        out[i] = s
    return out


def integrate(system, s0, dt, n_steps, n_transient=0, backend=None) -> TimeSeries:
    """Discard ``n_transient`` RK4 steps, then record ``n_steps`` samples.

    The first recorded sample is the state after the transient (``s0``
    itself when ``n_transient == 0``).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if n_transient < 0:
        raise ValueError("n_transient must be non-negative")
    out = _integrate_array(system, s0, dt, n_steps, n_transient, backend)
    return TimeSeries(dt, out.reshape(n_steps, -1), t0=n_transient * dt)


def iter_integrate(system, s0, dt, n_steps, n_transient=0, chunk=1_000_000):
    """Yield consecutive chunks of a long run without holding it all."""
    s = np.array(s0, dtype=float)
    if n_transient:
        s = _integrate_array(system, s, dt, 1, n_transient)[0]
    done = 0
    first = True
    while done < n_steps:
        m = min(chunk, n_steps - done)
        if first:
            block = _integrate_array(system, s, dt, m, 0)
            first = False
        else:
            block = _integrate_array(system, s, dt, m + 1, 0)[1:]
        s = block[-1]
        yield TimeSeries(dt, block, t0=(n_transient + done) * dt)
        done += m


def _rk4_batch(rhs, states, h, n):
    """n RK4 steps on a batch; ``h`` may be a per-row array."""
    s = np.array(states, dtype=float)
    h = np.asarray(h, dtype=float)
    if h.ndim:
        h = h[:, None]
    for _ in range(n):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        s = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return s


def _flow_variational(system, states, duration, n):
    """Flow a batch for ``duration`` with n RK4 steps, plus the Jacobian of the map."""
    m, d = states.shape
    h = duration / n
    if system.kernel_id is not None:
        return kernels.backend.rk4_variational(
            system.kernel_id, np.array(system.params, dtype=float),
            np.ascontiguousarray(states, dtype=float), float(h), int(n))
    x = np.array(states, dtype=float)
    phi = np.broadcast_to(np.eye(d), (m, d, d)).copy()
    rhs, jac = system.rhs, system.jacobian

    def aug(xx, pp):
        return rhs(xx), jac(xx) @ pp

    for _ in range(n):
        k1x, k1p = aug(x, phi)
        k2x, k2p = aug(x + 0.5 * h * k1x, phi + 0.5 * h * k1p)
        k3x, k3p = aug(x + 0.5 * h * k2x, phi + 0.5 * h * k2p)
        k4x, k4p = aug(x + h * k3x, phi + h * k3p)
        x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        phi = phi + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return x, phi


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    """A periodic solution: ``points[i]`` is the state at ``i * dt``."""

    points: np.ndarray
    period: float
    residual: float
    dt: float
    system: FlowSystem | None = None
    max_step: float = 1e-3

    @property
    def start(self):
        return self.points[0]

    def dense(self, n=None):
        """States on a uniform grid of ``n`` intervals over one period (n+1 points)."""
        if self.system is None:
            raise ValueError("orbit has no attached system")
        n = n or max(1, math.ceil(self.period / self.max_step))
        return _integrate_array(self.system, self.points[0], self.period / n, n + 1, 0)

    def states_at(self, times):
        """States at arbitrary times (modulo the period), cubic Hermite on a fine grid."""
        n = max(1, math.ceil(self.period / self.max_step))
        grid = self.dense(n)
        h = self.period / n
        vel = np.asarray(self.system.rhs(grid))
        tau = np.mod(np.asarray(times, dtype=float), self.period) / h
        i = np.minimum(np.floor(tau).astype(int), n - 1)
        u = (tau - i)[:, None]
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        return h00 * grid[i] + h10 * h * vel[i] + h01 * grid[i + 1] + h11 * h * vel[i + 1]

    def as_series(self) -> TimeSeries:
        return TimeSeries(self.dt, self.points)


def find_upo(system: FlowSystem, seed_segment: TimeSeries, tp_guess=None, tol=1e-9,
             n_shoot=None, max_step=1e-3, max_iter=60) -> PeriodicOrbit:
    """Multiple-shooting Newton search for a periodic orbit.

    Unknowns are the shooting points and the period; the phase is pinned by
    the plane through the first seed point normal to the flow there. Steps
    come from a least-squares solve, so continuous families (e.g. a linear
    center) are handled too.
    """
    # rejected trial steps may overflow; they are caught by the residual test
    with np.errstate(over="ignore", invalid="ignore"):
        return _find_upo(system, seed_segment, tp_guess, tol, n_shoot, max_step, max_iter)


def _find_upo(system, seed_segment, tp_guess, tol, n_shoot, max_step, max_iter):
    if not tol > 0:
        raise ValueError("tol must be positive")
    if system.jacobian is None:
        raise ValueError("find_upo needs a system with a Jacobian")
    seed = seed_segment.samples
    d = seed.shape[1]
    period = float(tp_guess if tp_guess is not None else (len(seed) - 1) * seed_segment.dt)
    if n_shoot is None:
        n_shoot = int(min(max(4, round(period / 0.5)), 64, len(seed) - 1 if len(seed) > 1 else 1))
    n_shoot = max(1, n_shoot)
    # shooting points spread evenly in time along the seed
    idx = (np.arange(n_shoot) * period / n_shoot / seed_segment.dt).round().astype(int)
    pts = seed[np.clip(idx, 0, len(seed) - 1)].astype(float)
    anchor = pts[0].copy()
    normal = np.asarray(system.rhs(anchor), dtype=float)
    normal /= np.linalg.norm(normal)

    def n_sub_for(T):
        return max(1, math.ceil(T / n_shoot / max_step))

    def residual(points, T):
        n = n_sub_for(T)
        ends = _rk4_batch(system.rhs, points, T / n_shoot / n, n)
        f = (ends - np.roll(points, -1, axis=0)).ravel()
        return np.append(f, (points[0] - anchor) @ normal)

    spread0 = np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1))
    norm_hist = []
    for it in range(max_iter):
        n = n_sub_for(period)
        ends, phi = _flow_variational(system, pts, period / n_shoot, n)
        f = np.append((ends - np.roll(pts, -1, axis=0)).ravel(), (pts[0] - anchor) @ normal)
        fnorm = np.linalg.norm(f)
        norm_hist.append(fnorm)
        if fnorm < tol * 1e-2:
            break
        big = np.zeros((n_shoot * d + 1, n_shoot * d + 1))
        vel = system.rhs(ends) / n_shoot
        for i in range(n_shoot):
            j = (i + 1) % n_shoot
            rows = slice(i * d, (i + 1) * d)
            big[rows, i * d:(i + 1) * d] += phi[i]
            big[rows, j * d:(j + 1) * d] -= np.eye(d)
            big[rows, -1] = vel[i]
        big[-1, :d] = normal
        # truncated SVD: near-null directions (e.g. a family of orbits) are not stepped along
        step = np.linalg.lstsq(big, -f, rcond=1e-6)[0]
        lam = 1.0
        while True:
            trial_pts = pts + lam * step[:-1].reshape(n_shoot, d)
            trial_T = period + lam * step[-1]
            if trial_T > 0:
                trial = residual(trial_pts, trial_T)
                if np.all(np.isfinite(trial)) and np.linalg.norm(trial) < fnorm or lam < 1.0 / 64:
                    break
            lam /= 2.0
            if lam < 1.0 / 1024:
                break
        if not trial_T > 0 or not np.all(np.isfinite(trial_pts)):
            raise ConvergenceError("shooting iterate left the admissible region", fnorm)
        pts, period = trial_pts, trial_T
        if np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1)) < 1e-6 * spread0:
            raise ConvergenceError("shooting points collapsed onto an equilibrium", fnorm)
    else:
        raise ConvergenceError(f"no convergence after {max_iter} Newton steps", norm_hist[-1])

    n_total = n_shoot * n_sub_for(period)
    closure = _integrate_array(system, pts[0], period / n_total, n_total + 1, 0)[-1]
    res = float(np.linalg.norm(closure - pts[0]))
    if res > tol:
        raise ConvergenceError(f"closure residual {res:.3g} above tol {tol:.3g}", res)
    dt = seed_segment.dt
    n_pts = max(1, math.ceil(period / dt - 1e-9))
    sub = max(1, math.ceil(dt / max_step))
    samples = _integrate_array(system, pts[0], dt / sub, (n_pts - 1) * sub + 1, 0)[::sub]
    return PeriodicOrbit(samples, float(period), max(res, 1e-300), dt, system, max_step)


def recurrence_seeds(series: TimeSeries, t_min, t_max, threshold=0.5, min_gap=None):
    """Near-returns ``|x(t+T) - x(t)| < threshold`` with ``T`` in ``[t_min, t_max]``.

    Returns ``(start_index, lag)`` pairs, best first, one per local minimum
    and at most one per ``min_gap`` samples of start time.
    """
    x = series.samples
    n = len(x)
    k_lo = max(1, int(math.floor(t_min / series.dt)))
    k_hi = min(n - 1, int(math.ceil(t_max / series.dt)))
    if k_hi < k_lo:
        return []
    best = np.full(n, np.inf)
    best_k = np.zeros(n, dtype=int)
    for k in range(k_lo, k_hi + 1):
        dist = np.linalg.norm(x[k:] - x[:-k], axis=1)
        m = len(dist)
        better = dist < best[:m]
        best[:m][better] = dist[better]
        best_k[:m][better] = k
    ok = np.flatnonzero(best < threshold)
    if min_gap is None:
        min_gap = k_lo
    seeds = []
    taken = np.zeros(n, dtype=bool)
    for i in ok[np.argsort(best[ok])]:
        if taken[max(0, i - min_gap):i + min_gap + 1].any():
            continue
        taken[i] = True
        seeds.append((int(i), int(best_k[i])))
    return seeds


def _prime_period(orbit: PeriodicOrbit, max_div=8, tol=1e-4):
    """Smallest T/j (j <= max_div) at which the orbit already closes."""
    for j in range(max_div, 1, -1):
        back = orbit.states_at([orbit.period / j])[0]
        if np.linalg.norm(back - orbit.start) < tol:
            return j
    return 1


def same_orbit(a: PeriodicOrbit, b: PeriodicOrbit, period_tol=1e-6, dist_tol=0.5):
    """Equal periods and ``a`` passes through ``b`` (catches phase-shifted copies)."""
    if abs(a.period - b.period) > period_tol * max(1.0, a.period):
        return False
    dense = b.dense()
    return float(np.min(np.linalg.norm(dense - a.start, axis=1))) < dist_tol


def find_upos(system: FlowSystem, series: TimeSeries, t_min, t_max, threshold=0.5,
              max_orbits=50, tol=1e-9, max_seeds=None):
    """Seed from recurrences in ``series`` and collect distinct prime orbits."""
    found: list[PeriodicOrbit] = []
    seeds = recurrence_seeds(series, t_min, t_max, threshold)
    if max_seeds is not None:
        seeds = seeds[:max_seeds]
    for i, k in seeds:
        seg = series.slice(i, i + k + 1)
        try:
            orb = find_upo(system, seg, k * series.dt, tol=tol)
        except ConvergenceError as exc:
            log.debug("seed %d (lag %d) failed: %s", i, k, exc)
            continue
        if not (t_min * 0.5 <= orb.period <= t_max * 1.5):
            continue
        if _prime_period(orb) > 1:
            continue
        if any(same_orbit(orb, other) for other in found):
            continue
        found.append(orb)
        if len(found) >= max_orbits:
            break
    return sorted(found, key=lambda o: o.period)

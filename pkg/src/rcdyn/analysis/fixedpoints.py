"""Fixed points of a trained model and shadowing of periodic orbits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .. import reservoir as res
from ..errors import ConvergenceError, NotAFixedPointError
from ..systems import PeriodicOrbit
from ..timeseries import TimeSeries
from .jacobian import JacobianField, eigen3

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedPointResult:
    point: np.ndarray
    delta: float
    eigenvalues: np.ndarray | None
    newton_residual: float = float("nan")

    def as_dict(self):
        eig = None if self.eigenvalues is None else [[float(v.real), float(v.imag)]
                                                     for v in self.eigenvalues]
        return {"point": [float(v) for v in self.point], "delta": self.delta,
                "eigenvalues": eig, "newton_residual": self.newton_residual}


def one_step_displacement(model, x, tol=1e-13):
    """``psi_x(dt) - x`` where psi starts from the state synchronized on constant x."""
    st = res.synchronize_constant(model, x, tol=tol)
    y = model.denormalize(model.W_out[:model.dim] @ st.r)
    return y - np.asarray(x, dtype=float)


def fixed_point_delta(model, point, n0):
    """Largest drift ``max_{0<=n<=n0} |x* - psi_{x*}(n dt)|`` of the closed loop."""
    st = res.synchronize_constant(model, point)
    out = res.predict_autonomous(model, st, n0).samples
    return float(np.max(np.linalg.norm(out - np.asarray(point), axis=1)))


def find_fixed_point(model, guess, eps0=0.01, n0=10_000, field: JacobianField | None = None,
                     max_iter=50, fd_step=1e-6, tol=1e-10) -> FixedPointResult:
    """Damped quasi-Newton on ``g(x) = psi_x(dt) - x``, then the drift test over n0 steps.

    The Jacobian of g is estimated by forward differences at the first
    iterate and updated with Broyden's rule; it is re-estimated whenever a
    step fails to reduce |g|.
    """
    x = np.array(guess, dtype=float)
    d = len(x)

    def fd_jac(x, g):
        jac = np.empty((d, d))
        for j in range(d):
            h = fd_step * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += h
            jac[:, j] = (one_step_displacement(model, xp) - g) / h
        return jac

    g = one_step_displacement(model, x)
    jac = fd_jac(x, g)
    for _ in range(max_iter):
        if np.linalg.norm(g) < tol:
            break
        step = -np.linalg.lstsq(jac, g, rcond=None)[0]
        lam = 1.0
        while lam > 1e-4:
            x_new = x + lam * step
            g_new = one_step_displacement(model, x_new)
            if np.linalg.norm(g_new) < np.linalg.norm(g):
                break
            lam *= 0.5
        else:
            jac = fd_jac(x, g)
            continue
        s = x_new - x
        jac = jac + np.outer(g_new - g - jac @ s, s) / (s @ s)
        x, g = x_new, g_new
    resid = float(np.linalg.norm(g))
    if not np.all(np.isfinite(x)):
        raise ConvergenceError("fixed-point iteration diverged", resid)
    delta = fixed_point_delta(model, x, n0)
    if not delta < eps0:
        raise NotAFixedPointError(x, delta, eps0)
    eig = eigen3(field.jacobian(x)) if field is not None else None
    return FixedPointResult(x, delta, eig, resid)


def shadow_trajectory(model, history, segment) -> float:
    """Sup-norm gap between ``segment`` and the model run synchronized on ``history``.

    ``history`` ends with the state at the same instant as ``segment[0]``;
    the model output is compared with ``segment[1:]``.
    """
    hist = history.samples if isinstance(history, TimeSeries) else np.asarray(history)
    seg = segment.samples if isinstance(segment, TimeSeries) else np.asarray(segment)
    st = res.synchronize(model, hist)
    out = res.predict_autonomous(model, st, len(seg) - 1).samples if len(seg) > 1 else seg[:0]
    gaps = np.linalg.norm(out - seg[1:], axis=1)
    gap0 = float(np.linalg.norm(hist[-1] - seg[0]))
    return float(max(gap0, gaps.max(initial=0.0)))


def shadow_periodic_orbit(model, orbit: PeriodicOrbit, warmup=res.DEFAULT_WARMUP) -> float:
    """delta_p = max over n = 0..n_p of |x(n dt) - psi_{x(0)}(n dt)|, n_p dt >= Tp.

    The reservoir is synchronized on ``warmup`` samples of the orbit before
    x(0) (the orbit repeated backwards in time).
    """
    dt = model.config.dt
    n_p = math.ceil(orbit.period / dt - 1e-9)
    k = model.config.delay
    times = dt * np.arange(-(warmup + k), n_p + 1)
    states = orbit.states_at(times)
    split = warmup + k + 1
    return shadow_trajectory(model, states[:split], states[split - 1:])

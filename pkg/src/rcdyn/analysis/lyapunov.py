"""Lyapunov spectrum, Kaplan-Yorke dimension and covariant Lyapunov vectors.

Tangent vectors follow dv/dt = J(x(t)) v along a sampled orbit. RK4 runs at
twice the sampling step so every stage lands on a sample: J at the
half-step is taken at the odd sample in between, no interpolation needed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import NumericalError
from ..timeseries import TimeSeries
from .distributions import Histogram, _from_counts

log = logging.getLogger(__name__)

_CHUNK_STEPS = 50_000


@dataclass(frozen=True)
class LyapunovReport:
    exponents: np.ndarray
    ky_dimension: float
    trace_mean: float
    n_steps: int
    renorm_interval: int

    def as_dict(self):
        return {
            "exponents": [float(v) for v in self.exponents],
            "ky_dimension": self.ky_dimension,
            "trace_mean": self.trace_mean,
            "n_steps": self.n_steps,
            "renorm_interval": self.renorm_interval,
        }


def kaplan_yorke(exponents) -> float:
    """``j + sum(l_1..l_j) / |l_{j+1}|`` with j the last nonnegative partial sum."""
    lam = np.sort(np.asarray(exponents, dtype=float))[::-1]
    if lam.size == 0 or lam[0] < 0:
        return 0.0
    partial = np.cumsum(lam)
    j = int(np.max(np.flatnonzero(partial >= 0))) + 1
    if j == lam.size:
        return float(lam.size)
    return float(j + partial[j - 1] / abs(lam[j]))


def _orbit_array(orbit):
    if isinstance(orbit, TimeSeries):
        return orbit.samples, orbit.dt
    raise TypeError("orbit must be a TimeSeries")


def _tangent_pass(x, dt, jac, renorm, q, store=False, backend=None):
    """Run the QR-stabilized tangent integration over the whole orbit.

    Returns (log-diagonal sums per block, trace sum, n_samples_used, Q, R).
    """
    impl = kernels.get_backend(backend)
    h = 2.0 * dt
    n_steps = (len(x) - 1) // 2
    block = 2 * renorm
    n_blocks = n_steps // renorm
    per_chunk = max(1, _CHUNK_STEPS // renorm)
    logs, qs, rs = [], [], []
    trace_sum = 0.0
    for b0 in range(0, n_blocks, per_chunk):
        nb = min(per_chunk, n_blocks - b0)
        lo = b0 * block
        pts = x[lo:lo + nb * block + 1]
        jacs = np.ascontiguousarray(jac(pts), dtype=float)
        trace_sum += float(np.trace(jacs[:-1], axis1=1, axis2=2).sum())
        q_store = np.empty((nb, 3, 3)) if store else None
        r_store = np.empty((nb, 3, 3)) if store else None
        logs.append(impl.tangent_blocks(jacs, q, h, renorm, q_store, r_store))
        if store:
            qs.append(q_store)
            rs.append(r_store)
    n_used = n_blocks * block
    logs = np.concatenate(logs) if logs else np.empty((0, 3))
    if not np.all(np.isfinite(logs)):
        raise NumericalError("tangent vectors collapsed (non-finite R diagonal); "
                             "use a smaller renormalization interval")
    if store:
        return logs, trace_sum, n_used, np.concatenate(qs), np.concatenate(rs)
    return logs, trace_sum, n_used, None, None


def lyapunov_spectrum(orbit: TimeSeries, jac, renorm_interval=5, transient=0.0,
                      backend=None) -> LyapunovReport:
    """Exponents per unit time from QR re-orthonormalization every ``renorm_interval`` steps.

    ``jac`` maps an (n, 3) array of states to (n, 3, 3) Jacobians.
    ``transient`` (time units) is excluded from the averages.
    """
    if renorm_interval < 1:
        raise ValueError("renorm_interval must be >= 1")
    x, dt = _orbit_array(orbit)
    if x.shape[1] != 3:
        raise ValueError("lyapunov_spectrum works on 3-D orbits")
    if (len(x) - 1) // 2 < renorm_interval:
        raise ValueError("orbit too short for one renormalization block")
    q = np.eye(3)
    logs, trace_sum, n_used, _, _ = _tangent_pass(x, dt, jac, renorm_interval, q,
                                                  backend=backend)
    block_time = 2 * dt * renorm_interval
    skip = min(int(round(transient / block_time)), len(logs) - 1)
    kept = logs[skip:]
    exps = kept.sum(axis=0) / (len(kept) * block_time)
    trace_mean = trace_sum / n_used
    if skip:
        lo = skip * 2 * renorm_interval
        trace_mean = float(np.trace(jac(x[lo:n_used]), axis1=1, axis2=2).mean())
    exps = np.sort(exps)[::-1]
    return LyapunovReport(exps, kaplan_yorke(exps), float(trace_mean),
                          (n_used // 2), renorm_interval)


@dataclass(frozen=True)
class CLVSet:
    """CLVs on the retained segment: ``vectors[k][:, i]`` is v_{i+1} at ``indices[k]``."""

    vectors: np.ndarray
    indices: np.ndarray
    points: np.ndarray
    dt: float
    renorm_interval: int
    q: np.ndarray | None = None
    r: np.ndarray | None = None

    def __len__(self):
        return len(self.indices)

    @property
    def times(self):
        return self.indices * self.dt


def covariant_lyapunov_vectors(orbit: TimeSeries, jac, renorm_interval=5, discard=0.2,
                               seed=0, keep_factors=False, backend=None) -> CLVSet:
    """Ginelli's method: forward QR pass, backward iteration of upper-triangular C.

    The first and last ``discard`` fractions of blocks serve as forward and
    backward transients and are dropped.
    """
    x, dt = _orbit_array(orbit)
    impl = kernels.get_backend(backend)
    renorm = renorm_interval
    while True:
        q = np.eye(3)
        _, _, _, qs, rs = _tangent_pass(x, dt, jac, renorm, q, store=True, backend=backend)
        diag = np.abs(np.diagonal(rs, axis1=1, axis2=2))
        cond = diag.max(axis=1) / diag.min(axis=1)
        if np.all(cond < 1e12):
            break
        if renorm == 1:
            raise NumericalError(f"ill-conditioned R factors (condition {cond.max():.3g}) "
                                 "even at renormalization interval 1")
        renorm = max(1, renorm // 2)
        log.warning("R condition %.3g too large, reducing interval to %d", cond.max(), renorm)
    n_blocks = len(rs)
    cut = int(discard * n_blocks)
    if n_blocks - 2 * cut < 1:
        raise ValueError("orbit too short for the forward and backward transients")
    rng = np.random.default_rng(seed)
    c_last = np.triu(rng.uniform(0.5, 1.0, (3, 3)))
    c_last /= np.linalg.norm(c_last, axis=0)
    cs = impl.clv_backward(np.ascontiguousarray(rs), c_last)
    keep = slice(cut, n_blocks - cut)
    vectors = np.einsum("kij,kjl->kil", qs[keep], cs[keep])
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    idx = (np.arange(n_blocks)[keep] + 1) * 2 * renorm
    return CLVSet(vectors, idx, x[idx], dt, renorm,
                  qs[keep] if keep_factors else None, rs[keep] if keep_factors else None)


def clv_angles(clvs: CLVSet, mode="vector") -> np.ndarray:
    """Angle in degrees in (0, 90] between the unstable and stable directions.

    ``vector``: between v1 and v3. ``subspace``: between span(v1, v2) and v3.
    """
    v1, v2, v3 = clvs.vectors[:, :, 0], clvs.vectors[:, :, 1], clvs.vectors[:, :, 2]
    if mode == "vector":
        c = np.abs(np.sum(v1 * v3, axis=1))
        ang = np.degrees(np.arccos(np.clip(c, 0.0, 1.0)))
    elif mode == "subspace":
        n = np.cross(v1, v2)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        s = np.abs(np.sum(n * v3, axis=1))
        ang = np.degrees(np.arcsin(np.clip(s, 0.0, 1.0)))
    else:
        raise ValueError(f"mode must be 'vector' or 'subspace', got {mode!r}")
    return np.maximum(ang, np.finfo(float).tiny)


def angle_distribution(clvs: CLVSet, bins=90, mode="vector") -> Histogram:
    if len(clvs) == 0:
        raise ValueError("empty CLV set")
    ang = clv_angles(clvs, mode)
    edges = np.linspace(0.0, 90.0, bins + 1)
    counts, _ = np.histogram(ang, bins=edges)
    return _from_counts(edges, counts, ang.size, ang.mean(), ang.std())

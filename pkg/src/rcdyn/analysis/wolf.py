"""Largest Lyapunov exponent of a scalar series by Wolf's fixed-evolution-time method."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..timeseries import TimeSeries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WolfParams:
    DIM: int = 3
    TAU: int = 11
    SCALMX: float = 0.1
    SCALMN: float = 0.001
    EVOLV: int = 600
    ANGLMX: float = 0.013  # radians

    def __post_init__(self):
        for name in ("DIM", "TAU", "SCALMX", "SCALMN", "EVOLV", "ANGLMX"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.SCALMN >= self.SCALMX:
            raise ValueError("SCALMN must be smaller than SCALMX")

    @classmethod
    def from_tuple(cls, values):
        dim, tau, scalmx, scalmn, evolv, anglmx = values
        return cls(int(dim), int(tau), float(scalmx), float(scalmn), int(evolv), float(anglmx))


@dataclass(frozen=True)
class WolfResult:
    lambda1: float
    iterations: int
    replacements_widened: int
    kept_neighbor: int


def _embed(x, dim, tau):
    n = len(x) - (dim - 1) * tau
    if n <= 0:
        raise ValueError("series too short for the embedding")
    return np.column_stack([x[k * tau:k * tau + n] for k in range(dim)])


def wolf_lambda1(series, params=None, max_zmult=5, theiler=None, detail=False):
    """Fixed-evolution-time estimate of the largest exponent (natural log, per time unit).

    A fiducial trajectory and one neighbor are evolved ``EVOLV`` steps, the
    log stretch is accumulated, and the neighbor is replaced by the point in
    ``(SCALMN, ZMULT*SCALMX)`` whose separation is best aligned (angle
    <= ANGLMX) with the evolved separation. If none qualifies the search
    radius grows (ZMULT up to ``max_zmult``), then ANGLMX doubles; past pi
    the evolved neighbor is kept.
    """
    p = params if isinstance(params, WolfParams) else (
        WolfParams() if params is None else WolfParams.from_tuple(params))
    if isinstance(series, TimeSeries):
        if series.dim != 1:
            raise ValueError("wolf_lambda1 expects a scalar series")
        x, dt = series.samples[:, 0], series.dt
    else:
        x, dt = np.asarray(series, dtype=float).ravel(), 1.0
    emb = _embed(x, p.DIM, p.TAU)
    npt = len(emb)
    evolv = p.EVOLV
    if npt <= 2 * evolv:
        raise ValueError(f"series too short: {npt} embedded points for EVOLV={evolv}")
    window = evolv if theiler is None else int(theiler)
    usable = npt - evolv
    tree = cKDTree(emb[:usable])

    def candidates(i, radius):
        idx = np.asarray(tree.query_ball_point(emb[i], radius), dtype=np.int64)
        if idx.size == 0:
            return idx, idx
        idx = idx[np.abs(idx - i) > window]
        d = np.linalg.norm(emb[idx] - emb[i], axis=1)
        ok = d > p.SCALMN
        return idx[ok], d[ok]

    # initial neighbor: nearest admissible point
    i = 0
    j = -1
    radius = p.SCALMX
    while j < 0:
        idx, d = candidates(i, radius)
        if idx.size:
            j = int(idx[np.argmin(d)])
        else:
            radius *= 2
            if radius > 1e6 * p.SCALMX:
                raise ValueError("no admissible neighbor for the first point")
    total = 0.0
    its = widened = kept = 0
    while i < usable and j < usable:
        di = np.linalg.norm(emb[j] - emb[i])
        sep = emb[j + evolv] - emb[i + evolv]
        df = np.linalg.norm(sep)
        if df > 0 and di > 0:
            total += math.log(df / di)
            its += 1
        i += evolv
        if i >= usable:
            break
        angmax = p.ANGLMX
        zmult = 1
        best = -1
        while True:
            idx, d = candidates(i, zmult * p.SCALMX)
            if idx.size and df > 0:
                cth = np.abs((emb[idx] - emb[i]) @ sep) / (d * df)
                th = np.arccos(np.minimum(cth, 1.0))
                k = int(np.argmin(th))
                if th[k] <= angmax:
                    best = int(idx[k])
                    break
            zmult += 1
            if zmult > max_zmult:
                zmult = 1
                angmax *= 2
                widened += 1
                if angmax >= math.pi:
                    break
        if best < 0:
            kept += 1
            best = j + evolv
        j = best
    if its == 0:
        raise ValueError("no evolution step completed")
    if kept:
        log.warning("wolf: %d of %d replacements found no admissible neighbor", kept, its)
    lam = total / (its * evolv * dt)
    if detail:
        return WolfResult(lam, its, widened, kept)
    return lam

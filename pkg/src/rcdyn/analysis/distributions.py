"""Histograms, section plots and run-length statistics of scalar series."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from ..timeseries import TimeSeries


def _values(series):
    if isinstance(series, TimeSeries):
        if series.dim != 1:
            raise ValueError(f"expected a scalar series, got dimension {series.dim}")
        return series.samples[:, 0]
    return np.asarray(series, dtype=float).ravel()


@dataclass(frozen=True)
class Histogram:
    """Normalized histogram: ``sum(density * widths) == 1`` when ``count > 0``."""

    edges: np.ndarray
    density: np.ndarray
    count: int
    mean: float = float("nan")
    std: float = float("nan")

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def integral(self) -> float:
        return float(np.sum(self.density * self.widths))

    def mass_below(self, x) -> float:
        """Probability mass in bins lying entirely below ``x``."""
        keep = self.edges[1:] <= x
        return float(np.sum(self.density[keep] * self.widths[keep]))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "density"])
            for lo, hi, d in zip(self.edges[:-1], self.edges[1:], self.density):
                w.writerow([repr(float(lo)), repr(float(hi)), repr(float(d))])
        return path

    @classmethod
    def from_csv(cls, path) -> Histogram:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        edges = np.append(data[:, 0], data[-1, 1])
        return cls(edges, data[:, 2], 0)


# Aliases matching the three uses of the same structure.
DensityHistogram = AngleHistogram = Histogram


def _from_counts(edges, counts, n, mean=float("nan"), std=float("nan")):
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    widths = np.diff(edges)
    density = counts / (total * widths) if total > 0 else np.zeros_like(counts)
    return Histogram(np.asarray(edges, dtype=float), density, int(n), float(mean), float(std))


def uniform_edges(lo, hi, bins):
    if not hi - lo > 1e-12 * max(1.0, abs(lo), abs(hi)):
        # (numerically) a single repeated value: a unit-scale window around it
        mid = 0.5 * (lo + hi)
        half = 0.5 * max(1.0, abs(mid))
        lo, hi = mid - half, mid + half
    return np.linspace(lo, hi, bins + 1)


class DensityAccumulator:
    """Streaming histogram on a fixed grid with running mean and variance.

    Partial accumulators over disjoint chunks merge exactly (counts add;
    moments combine by Chan's formula).
    """

    def __init__(self, edges):
        self.edges = np.asarray(edges, dtype=float)
        self.counts = np.zeros(len(self.edges) - 1, dtype=np.int64)
        self.n = 0
        self._mean = 0.0
        self._m2 = 0.0
        self.outside = 0

    def update(self, values):
        v = _values(values)
        if v.size == 0:
            return self
        idx = np.searchsorted(self.edges, v, side="right") - 1
        idx[v == self.edges[-1]] = len(self.counts) - 1
        ok = (idx >= 0) & (idx < len(self.counts))
        self.outside += int(np.count_nonzero(~ok))
        self.counts += np.bincount(idx[ok], minlength=len(self.counts))
        m, mean, m2 = v.size, float(v.mean()), float(np.sum((v - v.mean()) ** 2))
        delta = mean - self._mean
        tot = self.n + m
        self._mean += delta * m / tot
        self._m2 += m2 + delta * delta * self.n * m / tot
        self.n = tot
        return self

    def merge(self, other: DensityAccumulator):
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge accumulators with different bin grids")
        self.counts += other.counts
        self.outside += other.outside
        tot = self.n + other.n
        if tot:
            delta = other._mean - self._mean
            self._mean += delta * other.n / tot
            self._m2 += other._m2 + delta * delta * self.n * other.n / tot
        self.n = tot
        return self

    def result(self) -> Histogram:
        std = np.sqrt(self._m2 / self.n) if self.n else float("nan")
        mean = self._mean if self.n else float("nan")
        return _from_counts(self.edges, self.counts, self.n, mean, std)


def density_histogram(series, bins=100, value_range=None) -> Histogram:
    """Normalized density over ``value_range`` (default: data min/max), with mean and sd."""
    v = _values(series)
    if v.size == 0:
        raise ValueError("density_histogram needs at least one value")
    lo, hi = value_range if value_range is not None else (v.min(), v.max())
    return DensityAccumulator(uniform_edges(lo, hi, bins)).update(v).result()


def density_l1(phi_a: Histogram, phi_b: Histogram) -> float:
    """``sum |phi_a - phi_b| * width`` on a shared grid."""
    if phi_a.edges.shape != phi_b.edges.shape or not np.allclose(phi_a.edges, phi_b.edges,
                                                                   rtol=0, atol=1e-12):
        raise ValueError("histograms are on different bin grids")
    return float(np.sum(np.abs(phi_a.density - phi_b.density) * phi_a.widths))


def poincare_like_section(trajectory, eps_p=0.05) -> np.ndarray:
    """(x, z) of the samples with ``|x - y| < eps_p`` (strict)."""
    s = trajectory.samples if isinstance(trajectory, TimeSeries) else np.asarray(trajectory)
    s = np.atleast_2d(s)
    keep = np.abs(s[:, 0] - s[:, 1]) < eps_p
    return s[keep][:, [0, 2]]


def write_section_csv(points, path) -> Path:
    path = Path(path)
    np.savetxt(path, np.asarray(points).reshape(-1, 2), delimiter=",", header="x,z",
               comments="", fmt="%.17g")
    return path


def read_section_csv(path) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # an empty section is valid
        return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2).reshape(-1, 2)


def section_coverage(reference, candidate, radius) -> float:
    """Fraction of ``reference`` points within ``radius`` of some ``candidate`` point."""
    from scipy.spatial import cKDTree

    if len(reference) == 0:
        return 1.0
    if len(candidate) == 0:
        return 0.0
    dist, _ = cKDTree(candidate).query(reference, k=1, distance_upper_bound=radius)
    return float(np.mean(dist < radius))


@dataclass(frozen=True)
class LaminarDistribution:
    durations: np.ndarray
    histogram: Histogram | None

    @property
    def count(self):
        return len(self.durations)


def laminar_runs(values, threshold):
    """(start, length) of maximal runs with ``|values| < threshold``."""
    inside = np.abs(np.asarray(values, dtype=float)) < threshold
    padded = np.concatenate([[False], inside, [False]])
    change = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = change[0::2], change[1::2]
    return starts, stops - starts


def log_edges(durations, bins):
    lo, hi = float(np.min(durations)), float(np.max(durations))
    if hi <= lo:
        return np.array([lo / 1.05, lo * 1.05])
    return np.geomspace(lo, hi * (1 + 1e-12), bins + 1)


def laminar_lasting_times(series, threshold=1.8, bins=30) -> LaminarDistribution:
    """Durations of maximal intervals where the standardized series stays in (-thr, thr).

    Runs touching either end of the series are included (they are lower
    bounds on the true durations).
    """
    v = _values(series)
    dt = series.dt if isinstance(series, TimeSeries) else 1.0
    sd = v.std()
    e = (v - v.mean()) / sd if sd > 0 else v - v.mean()
    _, lengths = laminar_runs(e, threshold)
    durations = lengths * dt
    if durations.size == 0:
        return LaminarDistribution(durations, None)
    edges = log_edges(durations, bins)
    counts, _ = np.histogram(durations, bins=edges)
    return LaminarDistribution(durations, _from_counts(edges, counts, durations.size,
                                                       durations.mean(), durations.std()))


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(stats.ks_2samp(np.ravel(a), np.ravel(b)).statistic)

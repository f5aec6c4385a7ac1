"""Uniformly sampled vector time series and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled trajectory.

    ``samples`` has shape ``(n, M)``; sample ``i`` sits at ``t0 + i * dt``.
    A 1-D array is accepted and promoted to a single column.
    """

    dt: float
    samples: np.ndarray
    t0: float = 0.0
    labels: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D, got shape {samples.shape}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if samples.shape[0] < 1:
            raise ValueError("a time series needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("time series contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self):
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (self.dt == other.dt and self.t0 == other.t0
                and np.array_equal(self.samples, other.samples))

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def duration(self) -> float:
        return self.dt * len(self)

    def component(self, index: int) -> TimeSeries:
        """Scalar series of one coordinate."""
        return TimeSeries(self.dt, self.samples[:, index], self.t0)

    def slice(self, start: int = 0, stop: int | None = None) -> TimeSeries:
        stop = len(self) if stop is None else stop
        return TimeSeries(self.dt, self.samples[start:stop], self.t0 + start * self.dt)

    def shifted(self, offset: float) -> TimeSeries:
        """Same samples, time axis moved by ``offset``."""
        return TimeSeries(self.dt, self.samples, self.t0 + offset, self.labels)

    def column_names(self) -> list[str]:
        if self.labels is not None and len(self.labels) == self.dim:
            return list(self.labels)
        if self.dim == 3:
            return ["x", "y", "z"]
        return [f"c{i + 1}" for i in range(self.dim)]


def write_csv(series: TimeSeries, path) -> Path:
    """Write ``t,<columns>`` with 17 significant digits (lossless)."""
    path = Path(path)
    header = ",".join(["t"] + series.column_names())
    data = np.column_stack([series.times, series.samples])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
    return path


def read_csv(path) -> TimeSeries:
    """Read a series written by :func:`write_csv` (or any uniform ``t,...`` CSV)."""
    path = Path(path)
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    if not header or header[0].strip() != "t":
        raise ValueError(f"{path}: first column must be 't', got {header[:1]}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] < 1:
        raise ValueError(f"{path}: no samples")
    t = data[:, 0]
    if len(t) > 1:
        steps = np.diff(t)
        dt = (t[-1] - t[0]) / (len(t) - 1)
        if not np.allclose(steps, dt, rtol=1e-6, atol=1e-12):
            raise ValueError(f"{path}: samples are not uniformly spaced")
        # snap to the decimal step that was written (0.01, not 0.010000000000000002)
        dt = float(f"{dt:.12g}")
    else:
        dt = 1.0
    labels = tuple(h.strip() for h in header[1:])
    return TimeSeries(dt, data[:, 1:], t[0], labels)

"""Polynomial vector-field regression and the Jacobian it implies.

A trajectory is differentiated with a sixth-order central stencil and each
derivative component is regressed on the 20 monomials of total degree at
most three. Differentiating the fitted polynomials gives J(x) anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import RankDeficiencyError
from ..timeseries import TimeSeries

_STENCIL = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])

# Graded lexicographic order: 1; x, y, z; x², xy, xz, y², yz, z²; x³, x²y, ...
MONOMIALS = tuple(
    (l, m, n)
    for deg in range(4)
    for l in range(deg, -1, -1)
    for m in range(deg - l, -1, -1)
    for n in (deg - l - m,)
)


def monomial_names():
    names = []
    for exps in MONOMIALS:
        parts = []
        for var, e in zip("xyz", exps):
            if e == 1:
                parts.append(var)
            elif e > 1:
                parts.append(f"{var}^{e}")
        names.append("*".join(parts) or "1")
    return names


def derivative6(series: TimeSeries, component=None) -> TimeSeries:
    """Sixth-order central difference; three samples are lost at each end."""
    if len(series) < 7:
        raise ValueError(f"derivative6 needs at least 7 samples, got {len(series)}")
    x = series.samples if component is None else series.samples[:, [component]]
    n = len(x)
    d = np.zeros((n - 6, x.shape[1]))
    for j, c in enumerate(_STENCIL):
        if c:
            d += c * x[j:n - 6 + j]
    return TimeSeries(series.dt, d / series.dt, series.t0 + 3 * series.dt)


def design_matrix(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    pw = [[np.ones_like(v), v, v * v, v * v * v] for v in (x, y, z)]
    return np.stack([pw[0][l] * pw[1][m] * pw[2][n] for l, m, n in MONOMIALS], axis=-1)


def _gradient_design(points):
    """d(monomial)/d(x, y, z), shape (..., 3, 20)."""
    p = np.asarray(points, dtype=float)
    pw = [[np.ones_like(p[..., i]), p[..., i], p[..., i] ** 2, p[..., i] ** 3] for i in range(3)]
    out = np.zeros(p.shape[:-1] + (3, len(MONOMIALS)))
    for k, exps in enumerate(MONOMIALS):
        for var in range(3):
            e = exps[var]
            if e == 0:
                continue
            term = e * pw[var][e - 1]
            for other in range(3):
                if other != var:
                    term = term * pw[other][exps[other]]
            out[..., var, k] = term
    return out


@dataclass(frozen=True)
class JacobianField:
    """Fitted field ``dx_i/dt = sum_k coeffs[i, k] * monomial_k(x)``."""

    coeffs: np.ndarray
    fit_residual: np.ndarray

    def rhs(self, points):
        return design_matrix(points) @ self.coeffs.T

    def jacobian(self, points):
        """J(x) with J[i, j] = d f_i / d x_j; vectorised over leading axes."""
        g = _gradient_design(points)
        return np.einsum("ik,...jk->...ij", self.coeffs, g)

    __call__ = jacobian

    def coefficient(self, component: int, monomial: str) -> float:
        return float(self.coeffs[component, monomial_names().index(monomial)])

    @classmethod
    def zero(cls):
        return cls(np.zeros((3, len(MONOMIALS))), np.zeros(3))


_CHUNK = 100_000


def fit_jacobian_field(trajectory: TimeSeries, derivatives=None, rcond=1e-13) -> JacobianField:
    """Least-squares fit of each derivative component on the 20 monomials.

    Without ``derivatives`` they are estimated with :func:`derivative6` and
    the three boundary samples at each end are dropped from the fit.
    """
    if trajectory.dim != 3:
        raise ValueError(f"a 3-D trajectory is required, got dimension {trajectory.dim}")
    if derivatives is None:
        deriv = derivative6(trajectory).samples
        pts = trajectory.samples[3:-3]
    else:
        deriv = derivatives.samples if isinstance(derivatives, TimeSeries) else np.asarray(derivatives)
        pts = trajectory.samples
        if deriv.shape != pts.shape:
            raise ValueError(f"derivatives shape {deriv.shape} does not match {pts.shape}")
    n = len(pts)
    chunks = [slice(a, a + _CHUNK) for a in range(0, n, _CHUNK)]
    # monomials up to z^3 differ by orders of magnitude; scale columns to unit RMS
    col = np.sqrt(sum((design_matrix(pts[c]) ** 2).sum(axis=0) for c in chunks) / n)
    if np.any(col == 0):
        dead = [monomial_names()[k] for k in np.flatnonzero(col == 0)]
        raise RankDeficiencyError(f"design matrix has all-zero columns {dead}", dead)
    # R factor of [scaled design | derivatives], accumulated chunk by chunk so
    # long trajectories never materialize the full design matrix
    k = len(MONOMIALS)
    r = np.zeros((0, k + 3))
    for c in chunks:
        block = np.hstack([design_matrix(pts[c]) / col, deriv[c]])
        r = np.linalg.qr(np.vstack([r, block]), mode="r")
    r11, r12, r22 = r[:k, :k], r[:k, k:], r[k:, k:]
    _, sv, vt = np.linalg.svd(r11)
    rank = int(np.sum(sv > sv[0] * max(n, k) * np.finfo(float).eps))
    if rank < k or sv[-1] < rcond * sv[0]:
        null = vt[sv < max(rcond * sv[0], sv[-1] * (1 + 1e-12))]
        names = monomial_names()
        dirs = [" + ".join(f"{v:.2g}*{names[j]}" for j, v in enumerate(vec) if abs(v) > 0.1)
                for vec in null]
        raise RankDeficiencyError(
            f"degenerate trajectory: design matrix rank {rank} < {k}; "
            f"null directions {dirs}", dirs)
    sol = np.linalg.solve(r11, r12)
    coeffs = (sol / col[:, None]).T
    resid = np.sqrt(np.sum(r22 ** 2, axis=0) / n)
    return JacobianField(coeffs, resid)


def field_from_rhs(rhs, points) -> JacobianField:
    """Fit on exact derivatives of a known vector field."""
    pts = np.asarray(points, dtype=float)
    return fit_jacobian_field(TimeSeries(1.0, pts), np.asarray(rhs(pts)))


def jacobian_at(field: JacobianField, p) -> np.ndarray:
    return field.jacobian(np.asarray(p, dtype=float))


def eigen3(matrix) -> np.ndarray:
    """Eigenvalues sorted by descending real part, conjugate pairs made exact.

    Within a pair the positive imaginary part comes first.
    """
    a = np.asarray(matrix, dtype=float)
    if a.shape != (3, 3) or not np.all(np.isfinite(a)):
        raise ValueError("eigen3 expects a finite 3x3 matrix")
    w = np.linalg.eigvals(a).astype(complex)
    scale = max(1.0, np.max(np.abs(w)))
    real = [v for v in w if abs(v.imag) <= 1e-12 * scale]
    cplx = sorted((v for v in w if abs(v.imag) > 1e-12 * scale), key=lambda v: v.imag)
    out = [complex(v.real, 0.0) for v in real]
    if len(cplx) == 2:
        re = 0.5 * (cplx[0].real + cplx[1].real)
        im = 0.5 * (abs(cplx[0].imag) + abs(cplx[1].imag))
        out += [complex(re, im), complex(re, -im)]
    return np.array(sorted(out, key=lambda v: (-v.real, -v.imag)))

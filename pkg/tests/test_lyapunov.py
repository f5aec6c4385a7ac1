import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcdyn import analysis as an
from rcdyn import kernels, systems
from rcdyn.experiments import generate
from rcdyn.timeseries import TimeSeries


@pytest.fixture(scope="module")
def r28():
    return generate("lorenz28", 1e4, seed=5)


@pytest.fixture(scope="module")
def r60():
    return generate("lorenz60", 1e4, seed=5)


@pytest.fixture(scope="module")
def clv28(r28):
    return an.covariant_lyapunov_vectors(r28, systems.lorenz(28.0).jacobian, keep_factors=True)


def test_kaplan_yorke_examples():
    assert abs(an.kaplan_yorke([0.902, 0.0, -14.570]) - 2.062) < 1e-3
    assert an.kaplan_yorke([-1, -2, -3]) == 0.0
    assert an.kaplan_yorke([1, 0, -2]) == 2.5
    assert an.kaplan_yorke([1, 0.5, 0.1]) == 3.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=3, max_size=3), st.floats(1e-3, 1e3))
def test_kaplan_yorke_scale_invariant(lams, c):
    lams = sorted(lams, reverse=True)
    d = an.kaplan_yorke(lams)
    assert 0.0 <= d <= 3.0
    assert abs(an.kaplan_yorke([c * v for v in lams]) - d) < 1e-9


def _const_jac(mat):
    return lambda pts: np.broadcast_to(mat, np.shape(pts)[:-1] + (3, 3))


def test_linear_system_exponents_and_clvs():
    orbit = TimeSeries(0.01, np.zeros((20_001, 3)))
    jac = _const_jac(np.diag([1.0, -1.0, -2.0]))
    rep = an.lyapunov_spectrum(orbit, jac)
    assert np.allclose(rep.exponents, [1, -1, -2], atol=1e-8)
    clv = an.covariant_lyapunov_vectors(orbit, jac)
    assert np.allclose(np.abs(clv.vectors), np.eye(3), atol=1e-8)


def test_non_normal_linear_clvs():
    # CLVs are the eigenvectors of a constant non-symmetric Jacobian, not the QR axes
    mat = np.array([[1.0, 2.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -2.0]])
    orbit = TimeSeries(0.01, np.zeros((20_001, 3)))
    clv = an.covariant_lyapunov_vectors(orbit, _const_jac(mat))
    w, v = np.linalg.eig(mat)
    v = v[:, np.argsort(-w.real)]
    for i in range(3):
        cos = np.abs(clv.vectors[:, :, i] @ v[:, i]) / np.linalg.norm(v[:, i])
        assert np.all(cos > 1 - 1e-10)


def test_trace_identity_lorenz(r28):
    rep = an.lyapunov_spectrum(r28, systems.lorenz(28.0).jacobian)
    assert abs(rep.trace_mean + 41 / 3) < 1e-12
    assert abs(rep.exponents.sum() - rep.trace_mean) <= 0.02 * abs(rep.exponents.sum())
    assert np.all(np.diff(rep.exponents) <= 0)
    assert rep.renorm_interval == 5 and rep.n_steps == (len(r28) - 1) // 2 // 5 * 5


def test_trace_identity_fitted_field(r28):
    field = an.fit_jacobian_field(r28)
    rep = an.lyapunov_spectrum(r28, field.jacobian)
    assert abs(rep.exponents.sum() - rep.trace_mean) <= 0.02 * abs(rep.exponents.sum())


def test_lyapunov_rejects_bad_arguments(r28):
    with pytest.raises(ValueError):
        an.lyapunov_spectrum(r28, systems.lorenz().jacobian, renorm_interval=0)
    with pytest.raises(ValueError):
        an.lyapunov_spectrum(r28.slice(0, 5), systems.lorenz().jacobian)


def test_qr_orthonormality(clv28):
    q = clv28.q
    err = np.abs(np.einsum("kji,kjl->kil", q, q) - np.eye(3)).max()
    assert err <= 1e-12


def test_tangent_backends_agree(r28):
    if not kernels.have_compiled():
        pytest.skip("compiled kernels not built")
    orbit = r28.slice(0, 20_001)
    jac = systems.lorenz(28.0).jacobian
    a = an.lyapunov_spectrum(orbit, jac, backend="cython").exponents
    b = an.lyapunov_spectrum(orbit, jac, backend="python").exponents
    assert np.allclose(a, b, rtol=0, atol=1e-10)
    ca = an.covariant_lyapunov_vectors(orbit, jac, backend="cython").vectors
    cb = an.covariant_lyapunov_vectors(orbit, jac, backend="python").vectors
    assert np.allclose(ca, cb, rtol=0, atol=1e-8)


def test_clvs_unit_norm(clv28):
    assert np.allclose(np.linalg.norm(clv28.vectors, axis=1), 1.0, atol=1e-9)


def test_v2_is_the_flow_direction(r28, clv28):
    flow = systems.lorenz(28.0).rhs(clv28.points)
    flow /= np.linalg.norm(flow, axis=1, keepdims=True)
    cos = np.abs(np.sum(flow * clv28.vectors[:, :, 1], axis=1))
    ang = np.degrees(np.arccos(np.clip(cos, 0, 1)))
    assert np.percentile(ang, 99) < 1.0


def _propagate(jac, pts, v, h):
    """RK4 tangent step of size h using J at pts[0], pts[1] (midpoint) and pts[2]."""
    j0, j1, j2 = jac(pts[0]), jac(pts[1]), jac(pts[2])
    k1 = j0 @ v
    k2 = j1 @ (v + 0.5 * h * k1)
    k3 = j1 @ (v + 0.5 * h * k2)
    k4 = j2 @ (v + h * k3)
    return v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def test_clv_covariance(r28, clv28):
    jac = systems.lorenz(28.0).jacobian
    x = r28.samples
    steps = 2 * clv28.renorm_interval
    worst = 0.0
    for k in range(0, len(clv28) - 1, 37):
        i0 = clv28.indices[k]
        assert clv28.indices[k + 1] == i0 + steps
        for i in range(3):
            v = clv28.vectors[k, :, i]
            for s in range(0, steps, 2):
                v = _propagate(jac, x[i0 + s:i0 + s + 3], v, 2 * r28.dt)
            v /= np.linalg.norm(v)
            c = abs(v @ clv28.vectors[k + 1, :, i])
            worst = max(worst, np.degrees(np.arccos(min(c, 1.0))))
    assert worst <= 0.5


@pytest.mark.xfail(strict=True, reason="actual r=28 minimum v1-v3 angle is about 6 degrees, "
                                       "not above 10 (see decisions ledger)")
def test_r28_minimum_angle_above_ten_degrees(clv28):
    assert an.clv_angles(clv28).min() > 10.0


def test_r28_minimum_angle_above_five_degrees(clv28):
    assert an.clv_angles(clv28).min() > 5.0


def test_r60_has_near_tangencies(r60):
    clv = an.covariant_lyapunov_vectors(r60, systems.lorenz(60.0).jacobian)
    assert an.clv_angles(clv).min() < 2.0
    assert an.angle_distribution(clv).mass_below(5.0) > 0


def test_angle_histograms(clv28):
    h = an.angle_distribution(clv28, 90)
    assert abs(h.integral() - 1) < 1e-9 and np.all(h.density >= 0)
    assert h.mass_below(5.0) == 0.0
    assert len(h.edges) == 91 and h.edges[0] == 0 and h.edges[-1] == 90
    sub = an.clv_angles(clv28, "subspace")
    assert np.all((sub > 0) & (sub <= 90))
    with pytest.raises(ValueError):
        an.clv_angles(clv28, "other")


def test_orthogonal_vectors_point_mass():
    vec = np.broadcast_to(np.eye(3), (10, 3, 3)).copy()
    clv = an.CLVSet(vec, np.arange(10), np.zeros((10, 3)), 0.01, 5)
    h = an.angle_distribution(clv, 90)
    assert h.density[-1] * h.widths[-1] == pytest.approx(1.0)
    assert np.all(an.clv_angles(clv) == 90.0)

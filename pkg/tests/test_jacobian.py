import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rcdyn import analysis as an
from rcdyn import systems
from rcdyn.errors import RankDeficiencyError
from rcdyn.experiments import generate
from rcdyn.timeseries import TimeSeries


@pytest.fixture(scope="module")
def lorenz_run():
    return generate("lorenz28", 200.0, seed=3)


def test_monomial_order():
    names = an.monomial_names()
    assert names[:10] == ["1", "x", "y", "z", "x^2", "x*y", "x*z", "y^2", "y*z", "z^2"]
    assert names[10:] == ["x^3", "x^2*y", "x^2*z", "x*y^2", "x*y*z", "x*z^2", "y^3", "y^2*z",
                          "y*z^2", "z^3"]


def test_derivative6_polynomials_exact():
    t = np.arange(40) * 0.1
    d = an.derivative6(TimeSeries(0.1, t**3))
    assert len(d) == 34 and abs(d.t0 - 0.3) < 1e-15
    assert np.max(np.abs(d.samples[:, 0] - 3 * d.times**2)) <= 1e-12


def test_derivative6_sine():
    t = np.arange(2000) * 0.01
    d = an.derivative6(TimeSeries(0.01, np.sin(t)))
    assert np.max(np.abs(d.samples[:, 0] - np.cos(d.times))) <= 1e-11


def test_derivative6_constant_and_short():
    d = an.derivative6(TimeSeries(0.5, np.full((10, 2), 4.2)))
    assert np.all(np.abs(d.samples) < 1e-12)
    with pytest.raises(ValueError):
        an.derivative6(TimeSeries(0.5, np.zeros(6)))


def test_fit_exact_lorenz_derivatives(lorenz_run):
    f = an.field_from_rhs(systems.lorenz(28.0).rhs, lorenz_run.samples)
    assert abs(f.coefficient(0, "y") - 10) < 1e-8
    assert abs(f.coefficient(0, "x") + 10) < 1e-8
    assert abs(f.coefficient(1, "x") - 28) < 1e-8
    assert abs(f.coefficient(1, "x*z") + 1) < 1e-8
    assert abs(f.coefficient(2, "x*y") - 1) < 1e-8
    assert abs(f.coefficient(2, "z") + 8 / 3) < 1e-8
    assert np.max(np.abs(f.coeffs[:, 10:])) <= 1e-8


def test_fit_with_stencil_derivatives():
    # stencil truncation error scales as dt^6; at dt=0.01 the largest
    # coefficient error is ~2e-3 (on the coefficient 28), at dt=0.005 ~1e-4
    run = generate("lorenz28", 200.0, seed=3, dt=0.005)
    f = an.fit_jacobian_field(run)
    exact = an.field_from_rhs(systems.lorenz(28.0).rhs, run.samples)
    assert np.max(np.abs(f.coeffs - exact.coeffs)) < 1e-4


def test_fit_rossler():
    ros = generate("rossler", 1000.0, seed=2)
    f = an.fit_jacobian_field(ros)
    assert abs(f.coefficient(2, "x*z") - 1) < 1e-3
    assert abs(f.coefficient(2, "1") - 0.2) < 1e-3


def test_jacobian_at_origin_and_zero(lorenz_run):
    f = an.field_from_rhs(systems.lorenz(28.0).rhs, lorenz_run.samples)
    expected = [[-10, 10, 0], [28, -1, 0], [0, 0, -8 / 3]]
    assert np.allclose(an.jacobian_at(f, [0, 0, 0]), expected, atol=1e-6)
    assert np.all(an.jacobian_at(an.JacobianField.zero(), [1, 2, 3]) == 0)


def test_jacobian_vectorized_matches_pointwise(lorenz_run):
    f = an.fit_jacobian_field(lorenz_run)
    pts = lorenz_run.samples[:7]
    batch = f.jacobian(pts)
    assert batch.shape == (7, 3, 3)
    for p, j in zip(pts, batch):
        assert np.array_equal(j, f.jacobian(p))


def test_degenerate_trajectory_is_rejected():
    t = np.arange(500) * 0.01
    line = TimeSeries(0.01, np.column_stack([t, 2 * t, np.zeros_like(t)]))
    with pytest.raises(RankDeficiencyError) as info:
        an.fit_jacobian_field(line)
    assert "z" in str(info.value)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (3, 20), elements=st.floats(-2, 2)))
def test_fit_recovers_any_cubic_field(coeffs):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, (400, 3))
    truth = an.JacobianField(coeffs, np.zeros(3))
    f = an.field_from_rhs(truth.rhs, pts)
    assert np.max(np.abs(f.coeffs - coeffs)) < 1e-6


def test_eigen3_lorenz_table_values():
    lor = systems.lorenz(28.0)
    o = an.eigen3(lor.jacobian(np.zeros(3)))
    assert np.allclose(o.real, [11.83, -2.67, -22.83], atol=0.01)
    assert np.all(o.imag == 0)
    c = systems.lorenz_fixed_points(28.0)[2]
    l = an.eigen3(lor.jacobian(c))
    assert abs(l[0] - complex(0.09, 10.20)) < 0.01 and abs(l[1] - complex(0.09, -10.20)) < 0.01
    assert abs(l[2] - (-13.85)) < 0.01
    assert l[0] == np.conj(l[1])


def test_eigen3_identity_and_order(rng):
    assert np.array_equal(an.eigen3(np.eye(3)), np.ones(3, dtype=complex))
    for _ in range(50):
        w = an.eigen3(rng.normal(size=(3, 3)))
        assert np.all(np.diff(w.real) <= 1e-15)
        cplx = w[w.imag != 0]
        if len(cplx):
            assert cplx[0] == np.conj(cplx[1])


def test_eigen3_rejects_bad_input():
    with pytest.raises(ValueError):
        an.eigen3(np.full((3, 3), np.nan))

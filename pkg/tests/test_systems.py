import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcdyn import systems
from rcdyn.errors import ConvergenceError, IntegrationError
from rcdyn.timeseries import TimeSeries, read_csv, write_csv


def test_lorenz_rhs_values():
    assert np.allclose(systems.lorenz_rhs(np.zeros(3)), 0.0)
    c = math.sqrt(72.0)
    assert np.allclose(systems.lorenz_rhs(np.array([c, c, 27.0])), 0.0, atol=1e-12)
    assert np.allclose(systems.lorenz_rhs(np.array([1.0, 2.0, 3.0])), [10.0, 23.0, -6.0])


@pytest.mark.parametrize("r", [28.0, 60.0, 13.5])
def test_lorenz_fixed_points_are_exact(r):
    for p in systems.lorenz_fixed_points(r):
        assert np.max(np.abs(systems.lorenz_rhs(p, r))) < 1e-12


def test_rossler_rhs_values():
    assert np.allclose(systems.rossler_rhs(np.zeros(3)), [0.0, 0.0, 0.2])
    assert np.allclose(systems.rossler_rhs(np.ones(3)), [-2.0, 1.2, -4.5])
    p = systems.rossler_fixed_points()[0]
    assert np.allclose(p, [0.0070, -0.0351, 0.0351], atol=1e-4)
    assert np.max(np.abs(systems.rossler_rhs(p))) < 1e-12


def test_jacobians_match_finite_differences(rng):
    for sysm in (systems.lorenz(28.0), systems.rossler()):
        x = rng.normal(size=3) * 3
        h = 1e-6
        fd = np.column_stack([(sysm.rhs(x + h * e) - sysm.rhs(x - h * e)) / (2 * h)
                              for e in np.eye(3)])
        assert np.allclose(sysm.jacobian(x), fd, atol=1e-6)


def test_rk4_linear_decay():
    out = systems.rk4_step(lambda x: -x, np.array([1.0]), 0.01)
    assert abs(out[0] - math.exp(-0.01)) < 1e-10


def test_rk4_zero_field_is_identity():
    s = np.array([1.0, -2.0, 3.5])
    assert np.array_equal(systems.rk4_step(lambda x: 0 * x, s, 0.3), s)


def test_rk4_order():
    err = [abs(systems.rk4_step(lambda x: -x, np.array([1.0]), h)[0] - math.exp(-h))
           for h in (0.1, 0.05)]
    assert 28 <= err[0] / err[1] <= 36


def test_rk4_rejects_bad_dt():
    with pytest.raises(ValueError):
        systems.rk4_step(lambda x: x, np.ones(1), 0.0)


def test_integrate_constant_and_start():
    zero = systems.FlowSystem("zero", lambda s: 0 * s)
    ts = systems.integrate(zero, (1.0, 2.0, 3.0), 0.1, 50)
    assert np.all(ts.samples == [1.0, 2.0, 3.0])
    lor = systems.lorenz()
    s0 = np.array([1.0, 1.0, 1.0])
    assert np.array_equal(systems.integrate(lor, s0, 0.01, 10).samples[0], s0)


def test_integrate_length_and_blowup():
    ts = systems.integrate(systems.lorenz(), (1, 1, 1), 0.01, 500_000)
    assert len(ts) == 500_000 and ts.dt == 0.01
    explode = systems.FlowSystem("explode", lambda s: s * s)
    with pytest.raises(IntegrationError) as info:
        systems.integrate(explode, (1.0,), 0.5, 100)
    assert info.value.step > 0


def test_lorenz_bounding_box():
    ts = systems.integrate(systems.lorenz(), (1, 1, 1), 0.01, 1_000_000)
    x, y, z = ts.samples.T
    assert np.abs(x).max() <= 25 and np.abs(y).max() <= 35
    assert z.min() >= 0 and z.max() <= 60


def test_backends_agree_on_integration():
    from rcdyn import kernels

    if not kernels.have_compiled():
        pytest.skip("compiled kernels not built")
    for sysm in (systems.lorenz(60.0), systems.rossler()):
        a = systems.integrate(sysm, (1, 1, 1), 0.01, 2000, 100, backend="cython").samples
        b = systems.integrate(sysm, (1, 1, 1), 0.01, 2000, 100, backend="python").samples
        assert np.allclose(a, b, rtol=0, atol=1e-9)


def test_iter_integrate_matches_integrate():
    lor = systems.lorenz()
    whole = systems.integrate(lor, (1, 2, 3), 0.01, 1000, 50).samples
    parts = np.vstack([c.samples for c in systems.iter_integrate(lor, (1, 2, 3), 0.01, 1000,
                                                                  50, chunk=300)])
    assert np.array_equal(whole, parts)


def _center():
    rhs = lambda s: np.stack([-s[..., 1], s[..., 0]], axis=-1)  # noqa: E731
    jac = lambda s: np.broadcast_to(np.array([[0.0, -1.0], [1.0, 0.0]]),  # noqa: E731
                                    np.shape(s)[:-1] + (2, 2))
    return systems.FlowSystem("center", rhs, jac, dim=2)


def test_find_upo_linear_center():
    t = np.arange(0, 629) * 0.01
    seg = TimeSeries(0.01, np.column_stack([np.cos(t), np.sin(t)]))
    orb = systems.find_upo(_center(), seg, 6.28, tol=1e-12)
    assert orb.residual <= 1e-12
    assert abs(orb.period - 2 * math.pi) < 1e-9


def test_find_upo_lorenz_fig4_orbit():
    lor = systems.lorenz()
    series = systems.integrate(lor, (1, 1, 1), 0.01, 200_000, 10_000)
    orbs = systems.find_upos(lor, series, 5.95, 6.05, threshold=0.3, max_orbits=8)
    best = min(orbs, key=lambda o: abs(o.period - 5.9973192969))
    assert abs(best.period - 5.9973192969) < 1e-6
    # re-integration (at the locator's step size) closes within 10x the residual
    n = math.ceil(best.period / best.max_step)
    back = systems.integrate(lor, best.start, best.period / n, n + 1).samples[-1]
    assert np.linalg.norm(back - best.start) <= 10 * best.residual + 1e-9
    assert abs(best.period - len(best.points) * best.dt) <= best.dt


def test_find_upo_rossler_orbit():
    ros = systems.rossler()
    series = systems.integrate(ros, (1, 1, 0), 0.025, 100_000, 8_000)
    orbs = systems.find_upos(ros, series, 34.5, 35.5, threshold=0.5, max_orbits=6)
    best = min(orbs, key=lambda o: abs(o.period - 35.06122601174815))
    assert abs(best.period - 35.06122601174815) < 1e-5


def test_find_upo_failure_is_reported():
    lor = systems.lorenz()
    seg = systems.integrate(lor, (1, 1, 1), 0.01, 150, 1000)
    with pytest.raises(ConvergenceError) as info:
        systems.find_upo(lor, seg, 1.49, max_iter=2)
    assert info.value.residual is not None


def test_get_system():
    assert systems.get_system("lorenz60").meta["r"] == 60.0
    with pytest.raises(ValueError):
        systems.get_system("duffing")


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=30),
       st.floats(1e-4, 10.0), st.floats(-100, 100))
def test_csv_round_trip(tmp_path_factory, values, dt, t0):
    ts = TimeSeries(dt, np.array(values).reshape(-1, 1), t0)
    path = write_csv(ts, tmp_path_factory.mktemp("csv") / "s.csv")
    back = read_csv(path)
    assert np.array_equal(back.samples, ts.samples)
    assert back.t0 == ts.t0


def test_csv_header_and_lossless(tmp_path):
    ts = systems.integrate(systems.lorenz(), (1, 1, 1), 0.01, 100)
    path = write_csv(ts, tmp_path / "l.csv")
    assert path.read_text().splitlines()[0] == "t,x,y,z"
    back = read_csv(path)
    assert back == ts

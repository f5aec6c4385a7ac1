import json

import numpy as np
import pytest

from rcdyn import analysis as an
from rcdyn import reservoir as res
from rcdyn.errors import NotAFixedPointError


@pytest.fixture(scope="module")
def r28_field(ctx):
    return an.fit_jacobian_field(ctx.run("lorenz28", 1e4))


def test_not_a_fixed_point_carries_delta(small_model):
    with pytest.raises(NotAFixedPointError) as info:
        an.find_fixed_point(small_model, (15.0, -5.0, 40.0), eps0=1e-3, n0=100, max_iter=0)
    assert info.value.delta >= 1e-3


def test_result_json(small_model):
    r = an.FixedPointResult(np.array([1.0, 2.0, 3.0]), 1e-9,
                            np.array([1 + 2j, 1 - 2j, -3 + 0j]), 1e-12)
    d = json.loads(json.dumps(r.as_dict()))
    assert d["eigenvalues"] == [[1.0, 2.0], [1.0, -2.0], [-3.0, 0.0]]


def test_self_shadowing_is_zero(small_model, lorenz28_series):
    run = res.free_run(small_model, lorenz28_series.slice(100_000, 101_100), 3000)
    gap = an.shadow_trajectory(small_model, run.slice(0, 2000), run.slice(1999, 2600))
    assert gap < 1e-6


def test_r28_right_equilibrium(ctx, r28_field):
    model = ctx.model("lorenz28")[0]
    fp = an.find_fixed_point(model, (8.49, 8.49, 27.0), 0.01, 10_000, field=r28_field)
    assert np.allclose(fp.point, (8.50, 8.50, 27.01), atol=0.05)
    assert fp.delta < 0.01
    eig = fp.eigenvalues
    assert eig[0] == np.conj(eig[1]) and eig[0].real > 0 and eig[2].real < 0
    assert abs(eig[0]) == pytest.approx(abs(complex(0.09, 10.20)), rel=0.1)
    assert abs(eig[2]) == pytest.approx(13.85, rel=0.1)


def test_r28_origin(ctx, r28_field):
    model = ctx.model("lorenz28")[0]
    fp = an.find_fixed_point(model, (0.0, 0.0, 0.0), 1.0, 30, field=r28_field)
    assert np.allclose(fp.point, (0.04, 0.02, 0.54), atol=0.5)
    assert np.allclose(fp.eigenvalues.real, (11.67, -2.66, -22.68), atol=0.5)


def test_rossler_equilibrium(ctx):
    model = ctx.model("rossler")[0]
    field = an.fit_jacobian_field(ctx.run("rossler", 5e4))
    fp = an.find_fixed_point(model, (0.0, 0.0, 0.0), 0.01, 800, field=field)
    assert np.allclose(fp.point, (0.0015, -0.0315, 0.0317), atol=0.02)
    assert fp.eigenvalues[0].real > 0 and fp.eigenvalues[2].real < 0

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisotv.analytic import disc_calibration
from anisotv.exceptions import EmptyRegionError, InvalidInputError
from anisotv.grid import (GridSpec, ScalarField, VectorField, ball_average, cylinder_average,
                          divergence, gradient, inner, sample_field, unit_ball_volume)
from oracles import loop_divergence, loop_gradient


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(np.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * np.pi / 3)


@pytest.mark.parametrize("kwargs", [
    dict(shape=(8,), spacing=0.1),
    dict(shape=(8, 8), spacing=0.0),
    dict(shape=(8, 8), spacing=0.1, mask=np.zeros((8, 8), bool)),
    dict(shape=(8, 8), spacing=0.1, mask=np.ones((4, 4), bool)),
    dict(shape=(8, 8), spacing=0.1, origin=(0.0,)),
])
def test_invalid_grids(kwargs):
    with pytest.raises(InvalidInputError):
        GridSpec(**kwargs)


def test_field_validation():
    g = GridSpec.regular(4)
    with pytest.raises(InvalidInputError):
        ScalarField(g, np.full((4, 4), np.nan))
    with pytest.raises(InvalidInputError):
        VectorField(g, np.zeros((3, 4, 4)))
    # values outside the domain may be anything
    mask = np.ones((4, 4), bool)
    mask[0, 0] = False
    vals = np.zeros((4, 4))
    vals[0, 0] = np.nan
    ScalarField(g.with_mask(mask), vals)


def test_gradient_examples():
    g = GridSpec.regular(16)
    assert np.all(gradient(ScalarField(g, np.full(g.shape, 3.0))).values == 0)
    lin = sample_field(g, lambda p: p[..., 0])
    gr = gradient(lin).values
    np.testing.assert_allclose(gr[0, :-1, :], 1.0)
    np.testing.assert_allclose(gr[1], 0.0)


def test_gradient_matches_loop_oracle(rng):
    g = GridSpec.regular(8)
    u = rng.standard_normal(g.shape)
    np.testing.assert_allclose(gradient(ScalarField(g, u)).values, loop_gradient(u, g.spacing), rtol=1e-14)
    mask = rng.random(g.shape) > 0.2
    gm = g.with_mask(mask)
    np.testing.assert_allclose(gradient(ScalarField(gm, u)).values, loop_gradient(u, g.spacing, mask),
                               rtol=1e-14)
    z = rng.standard_normal((2,) + g.shape)
    np.testing.assert_allclose(divergence(VectorField(gm, z)).values, loop_divergence(z, g.spacing, mask),
                               rtol=1e-12, atol=1e-12)


def test_divergence_examples():
    g = GridSpec.regular(16)
    const = VectorField(g, np.ones((2,) + g.shape))
    d = divergence(const).values
    np.testing.assert_allclose(d[1:-1, 1:-1], 0.0, atol=1e-12)
    ramp = sample_field(g, lambda p: np.stack([p[..., 0], 0 * p[..., 0]], axis=-1))
    np.testing.assert_allclose(divergence(ramp).values[1:-1, 1:-1], 1.0, rtol=1e-12)


@pytest.mark.parametrize("shape", [(16, 16), (64, 64), (32, 32, 32), (13, 7)])
def test_adjointness(shape, rng):
    g = GridSpec(shape, 1.0 / shape[0])
    u = ScalarField(g, rng.standard_normal(shape))
    z = VectorField(g, rng.standard_normal((len(shape),) + shape))
    lhs, rhs = inner(divergence(z), u), -inner(z, gradient(u))
    assert abs(lhs - rhs) <= 1e-12 * u.norm() * np.sqrt(inner(z, z))


def test_adjointness_masked(rng):
    g = GridSpec.regular(32, mask=rng.random((32, 32)) > 0.3)
    u = ScalarField(g, np.where(g.mask, rng.standard_normal(g.shape), 0.0))
    z = VectorField(g, rng.standard_normal((2, 32, 32)))
    lhs = float(np.sum((divergence(z).values * u.values)[g.mask]) * g.cell_volume)
    rhs = -float(np.sum(z.values * gradient(u).values) * g.cell_volume)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 2**31))
def test_linearity(a, b, seed):
    r = np.random.default_rng(seed)
    g = GridSpec.regular(12)
    u, v = r.standard_normal(g.shape), r.standard_normal(g.shape)
    lhs = gradient(ScalarField(g, a * u + b * v)).values
    rhs = a * gradient(ScalarField(g, u)).values + b * gradient(ScalarField(g, v)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(a) + abs(b)) * 12)


def test_ball_average_examples():
    g = GridSpec((64, 64), 1 / 32, (-1.0, -1.0))
    c = ScalarField(g, np.full(g.shape, 2.5))
    assert ball_average(c, [0.1, 0.2], 0.3) == pytest.approx(2.5)
    lin = sample_field(g, lambda p: p[..., 0])
    assert abs(ball_average(lin, [0.0, 0.0], 0.5)) <= g.spacing
    with pytest.raises(EmptyRegionError):
        ball_average(c, [5.0, 5.0], 0.1)


def test_ball_average_linear_field_analytic():
    # mean of a linear field over a ball is its value at the centre
    g = GridSpec.regular(256)
    lin = sample_field(g, lambda p: 2 * p[..., 0] - 3 * p[..., 1])
    x = np.array([0.4, 0.55])
    assert abs(ball_average(lin, x, 0.2) - (2 * 0.4 - 3 * 0.55)) <= 2 * g.spacing


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), r=st.floats(0.05, 0.5))
def test_ball_average_bounded_by_max_norm(seed, r):
    rng = np.random.default_rng(seed)
    g = GridSpec.regular(32)
    z = VectorField(g, rng.standard_normal((2, 32, 32)))
    avg = ball_average(z, [0.5, 0.5], r)
    assert np.linalg.norm(avg) <= z.max_norm() + 1e-12


def test_cylinder_average_examples():
    g = GridSpec((64, 64), 1 / 32, (-1.0, -1.0))
    c = VectorField(g, np.stack([np.full(g.shape, 0.3), np.full(g.shape, -0.7)]))
    assert cylinder_average(c, [0.0, 0.0], [0.0, 1.0], 0.1, 0.3) == pytest.approx(-0.7)
    e = VectorField(g, np.stack([np.zeros(g.shape), np.ones(g.shape)]))
    assert cylinder_average(e, [0.2, 0.1], [0.0, 1.0], 0.05, 0.5) == pytest.approx(1.0)
    with pytest.raises(EmptyRegionError):
        cylinder_average(e, [5.0, 5.0], [0.0, 1.0], 0.05, 0.1)


def test_cylinder_average_on_disc_calibration():
    g = GridSpec.regular(256)
    z = disc_calibration(g, 0.25)
    h = g.spacing
    for t in np.linspace(0, 2 * np.pi, 12, endpoint=False):
        nu = -np.array([np.cos(t), np.sin(t)])
        x = 0.5 - 0.25 * nu
        assert abs(cylinder_average(z, x, nu, 2 * h, 16 * h) - 1.0) <= 0.05


def test_grid_geometry_helpers():
    g = GridSpec.regular(10)
    assert g.index_of([0.05, 0.95]) == (0, 9)
    assert g.boundary_layer.sum() == 36
    assert g.describe()["masked_cells"] == 100
    assert g.points.shape == (10, 10, 2)

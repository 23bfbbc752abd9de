import json

import numpy as np

from ambiflow import io as aio
from ambiflow.ambiguity import AmbiguityBall
from ambiflow.cdf_core import SupportInterval, from_samples
from ambiflow.envelope import band_from_ball
from ambiflow.propagation import PhysicsModel, SpaceTimeGrid, solve_cdf_pde, solve_w1_pde
from ambiflow.scenario import true_input_cdf_u0

S = SupportInterval(0.0, 2.0)


def test_fmt_round_trips_doubles(rng):
    for v in rng.normal(size=200) * 10.0 ** rng.integers(-20, 20, 200):
        assert float(aio.fmt(v)) == v
    assert aio.fmt(float("inf")) == "inf"


def test_cdf_json_round_trip(rng):
    F = from_samples(rng.random(9) * 2, S)
    G = aio.cdf_from_json(json.loads(json.dumps(aio.cdf_to_json(F))))
    np.testing.assert_array_equal(G.locations, F.locations)
    np.testing.assert_array_equal(G.masses, F.masses)
    tri = true_input_cdf_u0()
    T = aio.cdf_from_json(aio.cdf_to_json(tri))
    u = np.linspace(-0.1, 2.1, 99)
    np.testing.assert_array_equal(T(u), tri(u))


def test_ball_and_band_round_trip(rng):
    ball = AmbiguityBall(from_samples(rng.random(6) * 2, S), 0.07, S)
    back = aio.ball_from_json(aio.ball_to_json(ball))
    assert back.radius == ball.radius and back.support == ball.support
    band = band_from_ball(ball)
    again = aio.band_from_json(json.loads(json.dumps(aio.band_to_json(band))))
    u = np.linspace(0, 2, 301)
    np.testing.assert_array_equal(again.upper(u), band.upper(u))
    np.testing.assert_array_equal(again.lower(u), band.lower(u))
    assert again.rho == band.rho and again.uninformative == band.uninformative


def test_scalar_field_csv_round_trip():
    grid = SpaceTimeGrid(np.linspace(0, 2, 7), np.linspace(0, 2, 5))
    w = solve_w1_pde(PhysicsModel.linear_model(-1.0), lambda x: 0.1 * (1 + x), lambda t: 0.3, grid)
    text = aio.scalar_field_csv(w)
    assert text.splitlines()[0] == "x,t,w"
    back = aio.scalar_field_from_csv(text)
    np.testing.assert_array_equal(back.values, w.values)
    np.testing.assert_array_equal(back.grid.xs, grid.xs)


def test_cdf_field_csv_round_trip():
    tri = true_input_cdf_u0()
    grid = SpaceTimeGrid([0.5, 1.0], [0.0, 0.7, 1.3], np.linspace(0, 2, 9))
    field = solve_cdf_pde(PhysicsModel.linear_model(-1.0), lambda x: tri, lambda t: tri, grid)
    text = aio.cdf_field_csv(field)
    lines = text.splitlines()
    assert lines[0] == "x,t,U,F"
    # t outer, x middle, U inner
    assert lines[1].startswith("0.5,0,0,") and lines[10].startswith("1,0,0,")
    g, vals = aio.cdf_field_values_from_csv(text)
    np.testing.assert_array_equal(vals, field.values)
    np.testing.assert_array_equal(g.Us, grid.Us)

import math

import numpy as np
import pytest
from scipy.optimize import brentq, linprog

from ambiflow.ambiguity import (
    ParameterModel,
    RadiusSpec,
    ambiguity_radius,
    build_input_ball,
    h_function,
    h_inverse,
    input_support,
    radius_ratio,
)
from ambiflow.cdf_core import SteppedCdf, SupportInterval, w1_distance
from ambiflow.errors import DomainError, InvalidConstantsError, UnsupportedBranchError
from ambiflow.scenario import example_model


def test_relative_low_branch_value():
    spec = RadiusSpec(p=1, n=3, mode="relative", K=1.0)
    assert spec.branch == "low"
    assert ambiguity_radius(spec, 100, 0.5) == pytest.approx(0.10772173450159418, rel=1e-14)


def test_absolute_high_branch_value():
    # ln(C / beta) = 1 with C = e/2, beta = 1/2, so the radius is rho / sqrt(N)
    spec = RadiusSpec(p=1, n=1, beta=0.5, C=math.e / 2, c=1.0, mode="absolute")
    assert spec.branch == "high"
    assert ambiguity_radius(spec, 4, 1.0) == pytest.approx(0.5, rel=1e-14)


def test_beta_one_is_rejected():
    with pytest.raises(DomainError):
        RadiusSpec(p=1, n=1, beta=1.0, C=math.e, c=1.0, mode="absolute")


def test_invalid_constants():
    spec = RadiusSpec(p=1, n=3, beta=0.05, C=0.01, c=1.0, mode="absolute")
    with pytest.raises(InvalidConstantsError, match="invalid concentration constants"):
        ambiguity_radius(spec, 10, 1.0)


def test_quadrupling_samples_low_branch():
    spec = RadiusSpec(p=1, n=3)
    r1, r4 = ambiguity_radius(spec, 50, 0.5), ambiguity_radius(spec, 200, 0.5)
    assert r1 / r4 == pytest.approx(4 ** (1 / 3), rel=1e-14)


def test_critical_branch_against_root_finder():
    spec = RadiusSpec(p=1, n=2, beta=0.1, C=3.0, c=0.5, mode="absolute")
    assert spec.branch == "critical"
    N, rho = 40, 0.7
    v = math.log(3.0 / 0.1) / (0.5 * N)
    x = brentq(lambda s: s * s / math.log(2 + 1 / s) ** 2 - v, 1e-12, 1e6, xtol=1e-15, rtol=1e-15)
    assert ambiguity_radius(spec, N, rho) == pytest.approx(x * rho, rel=1e-10)


@pytest.mark.parametrize("p,n", [(1, 1), (2, 1), (1, 2), (1, 3), (1.5, 5)])
def test_radius_monotonicity(p, n):
    spec = RadiusSpec(p=p, n=n, beta=0.05, C=2.0, c=0.8, mode="absolute")
    tighter = RadiusSpec(p=p, n=n, beta=0.2, C=2.0, c=0.8, mode="absolute")
    Ns = [1, 2, 5, 10, 100, 1000]
    vals = [ambiguity_radius(spec, N, 1.0) for N in Ns]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert ambiguity_radius(spec, 10, 2.0) > ambiguity_radius(spec, 10, 1.0)
    assert ambiguity_radius(spec, 10, 1.0) > ambiguity_radius(tighter, 10, 1.0)


def test_radius_ratio_examples():
    assert radius_ratio(RadiusSpec(p=1, n=3), 25, 100) == pytest.approx(1.5874010519681994, abs=1e-12)
    assert radius_ratio(RadiusSpec(p=1, n=3), 7, 7) == 1.0
    assert radius_ratio(RadiusSpec(p=2, n=1), 1, 16) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(UnsupportedBranchError):
        radius_ratio(RadiusSpec(p=1, n=2), 1, 4)


@pytest.mark.parametrize("x", [1.0, 0.1, 10.0, 1e-4, 3e3])
def test_h_inverse_round_trip(x):
    v = float(h_function(x))
    assert abs(float(h_function(h_inverse(v))) - v) <= 1e-12 * max(1.0, v)
    assert h_inverse(v) == pytest.approx(x, rel=1e-9)


def test_h_one():
    assert float(h_function(1.0)) == pytest.approx(1 / math.log(3) ** 2, rel=1e-15)


def test_input_support_example():
    _, par, pm = example_model()
    S0 = input_support(par, pm, ("initial", 0.3))
    assert S0.lo == pytest.approx(1 - math.sqrt(6) / 2, abs=1e-14)
    assert S0.hi == pytest.approx(1 + math.sqrt(6) / 2, abs=1e-14)
    Sb = input_support(par, pm, ("boundary", 0.0, 0.25))
    half = math.sqrt(3) * math.sqrt(6) * 0.5
    assert (Sb.lo, Sb.hi) == pytest.approx((1.25 - half, 1.25 + half), abs=1e-14)
    assert Sb.lo == pytest.approx(-0.8713, abs=1e-4)


def test_input_support_zero_lipschitz():
    _, par, pm = example_model()
    flat = type(par)(u0=par.u0, ub=par.ub, L0=lambda x: 0.0, Lb=par.Lb)
    S = input_support(flat, pm, ("initial", 0.0))
    assert S.lo == S.hi == 1.0


def test_parameter_model_defaults():
    pm = ParameterModel(np.array([[0, 1], [0, 3]]))
    np.testing.assert_allclose(pm.a_bar, [0.5, 1.5])
    assert pm.rho_a == 1.5
    with pytest.raises(DomainError):
        ParameterModel(np.array([[0, 1]]), a_bar=[0.0], rho_a=0.5)


def test_build_input_ball():
    S = SupportInterval(-1, 3)
    ball = build_input_ball([0.5, 1.0], S, math.sqrt(2), 0.107722)
    assert ball.radius == pytest.approx(0.152341, abs=1e-6)
    assert build_input_ball([0.5], S, 2.0, 0.0).radius == 0.0
    assert build_input_ball([0.5], S, 0.0, 0.3).radius == 0.0


def _w1_lp(xs, ps, ys, qs):
    """Discrete W1 in R^n by the transport linear program (Euclidean cost)."""
    m, k = len(ps), len(qs)
    cost = np.linalg.norm(xs[:, None, :] - ys[None, :, :], axis=2).ravel()
    A_eq, b_eq = [], []
    for i in range(m):
        row = np.zeros(m * k)
        row[i * k:(i + 1) * k] = 1
        A_eq.append(row)
        b_eq.append(ps[i])
    for j in range(k):
        row = np.zeros(m * k)
        row[j::k] = 1
        A_eq.append(row)
        b_eq.append(qs[j])
    res = linprog(cost, A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=(0, None), method="highs")
    return res.fun


def _pushforward(vals, probs):
    S = SupportInterval(float(vals.min()) - 1, float(vals.max()) + 1)
    order = np.argsort(vals)
    v, p = vals[order], probs[order]
    uniq, inv = np.unique(v, return_inverse=True)
    return SteppedCdf(uniq, np.bincount(inv, weights=p), S)


def test_lipschitz_transfer_against_lp(rng):
    for _ in range(40):
        n = int(rng.integers(1, 4))
        m, k = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        xs, ys = rng.normal(size=(m, n)), rng.normal(size=(k, n))
        ps, qs = rng.random(m) + 0.1, rng.random(k) + 0.1
        ps, qs = ps / ps.sum(), qs / qs.sum()
        w = rng.normal(size=n)
        L = float(np.linalg.norm(w))
        shift = rng.normal()
        lhs = w1_distance(_pushforward(xs @ w + shift, ps), _pushforward(ys @ w + shift, qs))
        assert lhs <= L * _w1_lp(xs, ps, ys, qs) + 1e-9


def test_example_lipschitz_constants_statistically(rng):
    _, par, _ = example_model()
    a = rng.random((10_000, 3))
    b = rng.random((10_000, 3))
    dist = np.linalg.norm(a - b, axis=1)
    assert np.all(np.abs(par.u0(0.0, a) - par.u0(0.0, b)) <= par.L0(0.0) * dist + 1e-12)
    for t in rng.random(25) * 2:
        diff = np.abs(par.ub(0.0, t, a) - par.ub(0.0, t, b))
        assert np.all(diff <= par.Lb(0.0, t) * dist + 1e-12)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambiflow.cdf_core import (
    PiecewiseCdf,
    Segment,
    SteppedCdf,
    SupportInterval,
    eval_cdf,
    from_samples,
    generalized_inverse,
    integrate,
    left_inverse,
    reflect,
    scale,
    w1_distance,
    w1_quadrature,
)
from ambiflow.envelope import upper_envelope_discrete, lower_envelope_discrete
from ambiflow.errors import DomainError, EmptySampleError
from gen import random_piecewise_linear, random_stepped

S02 = SupportInterval(0.0, 2.0)


def two_atoms():
    return from_samples([1.0, 0.0, 1.0], S02)


# --- construction and evaluation -------------------------------------------------

def test_single_sample():
    F = from_samples([0.5], S02)
    assert F.atoms == [(0.5, 1.0)]


def test_duplicates_merge():
    F = two_atoms()
    np.testing.assert_allclose(F.locations, [0.0, 1.0])
    np.testing.assert_allclose(F.masses, [1 / 3, 2 / 3])


def test_out_of_support_and_empty():
    with pytest.raises(DomainError):
        from_samples([2.5], S02)
    with pytest.raises(EmptySampleError):
        from_samples([], S02)


def test_stepped_validation():
    with pytest.raises(DomainError):
        SteppedCdf([0.5, 0.2], [0.5, 0.5], S02)
    with pytest.raises(DomainError):
        SteppedCdf([0.5], [0.9], S02)
    with pytest.raises(DomainError):
        SteppedCdf([0.5, 1.0], [1.2, -0.2], S02)


def test_eval_right_continuous():
    F = from_samples([0.5], S02)
    assert eval_cdf(F, 0.5) == 1.0
    assert eval_cdf(F, 0.49) == 0.0
    assert eval_cdf(two_atoms(), 0.2) == pytest.approx(1 / 3)
    assert eval_cdf(two_atoms(), -5.0) == 0.0
    assert eval_cdf(two_atoms(), 7.0) == 1.0


def test_piecewise_validation_rejects_decrease():
    S = SupportInterval(0.0, 1.0)
    with pytest.raises(DomainError):
        PiecewiseCdf.from_finite([Segment("linear", 0.0, 1.0, (0.6, 0.4))], S)
    with pytest.raises(DomainError):
        PiecewiseCdf([Segment("linear", 0.0, 1.0, (0.0, 1.0))], S)  # no constant tail


def test_hyperbolic_pole_must_be_outside():
    with pytest.raises(DomainError):
        Segment("hyperbolic", 0.0, 1.0, (0.0, 0.1, 0.5))


# --- inverses ------------------------------------------------------------------

def test_generalized_inverse_examples():
    F = two_atoms()
    assert generalized_inverse(F, 1 / 3) == 1.0
    assert generalized_inverse(F, 0.2) == 0.0
    assert generalized_inverse(from_samples([0.5], S02), 0.0) == 0.5
    with pytest.raises(DomainError):
        generalized_inverse(F, 1.0)


def test_left_inverse_examples():
    F = two_atoms()
    assert left_inverse(F, 1 / 3) == 0.0
    assert left_inverse(F, 0.34) == 1.0
    assert left_inverse(from_samples([0.5], S02), 1.0) == 0.5
    with pytest.raises(DomainError):
        left_inverse(F, 0.0)


def test_inverses_agree_for_strictly_increasing():
    S = SupportInterval(0.0, 1.0)
    U = PiecewiseCdf.from_finite([Segment("linear", 0.0, 1.0, (0.0, 1.0))], S)
    for y in (0.1, 0.37, 0.9):
        assert generalized_inverse(U, y) == pytest.approx(y, abs=1e-14)
        assert left_inverse(U, y) == pytest.approx(y, abs=1e-14)


def _cdf_pool(rng, count=30):
    pool = []
    for k in range(count):
        F = random_stepped(rng, 12, grid=25 if k % 2 else None)
        pool.append(F)
        if k % 3 == 0:
            pool.append(upper_envelope_discrete(F, 0.3 * float(np.dot(F.locations, F.masses))))
        if k % 5 == 0:
            pool.append(random_piecewise_linear(rng))
    return pool


def test_inverse_bracketing_randomized(rng):
    pool = _cdf_pool(rng)
    for _ in range(1000):
        F = pool[rng.integers(len(pool))]
        y = rng.uniform(0.0, 1.0)
        t, t1, t2 = np.sort(rng.uniform(-0.1, 1.1, 3))[[1, 0, 2]]
        inv = generalized_inverse(F, y)
        if F(t) < y:                       # below the level: left of the inverse
            assert t < inv
        if t < inv:                        # left of the inverse: below the level
            assert F(t) < y
        if F(t1) <= y <= F(t2):            # bracketing levels bracket the inverse
            assert t1 - 1e-12 <= inv <= t2 + 1e-12


def test_inverse_ties_on_flat_regions():
    """At y equal to a plateau level the two inverses split the bracketing properties."""
    F = two_atoms()  # plateau 1/3 on [0, 1)
    y = 1 / 3
    t1, t2 = 0.0, 0.5
    assert F(t1) <= y <= F(t2)
    # the upper bracket only holds for the left inverse at this tie
    assert generalized_inverse(F, y) == 1.0 > t2
    assert t1 <= left_inverse(F, y) <= t2
    # left of the inverse: below the level likewise: t < F^-1(y) only forces F(t) <= y
    assert 0.5 < generalized_inverse(F, y) and F(0.5) == y
    assert not (0.5 < left_inverse(F, y))


def test_inverse_jumps_over_flat_regions(rng):
    for _ in range(200):
        F = random_stepped(rng, 10, grid=30)
        if F.locations.size < 2:
            continue
        k = int(rng.integers(F.locations.size - 1))
        t1, t2 = F.locations[k], F.locations[k + 1]
        lo, hi = F(t1), F(t2)
        y = rng.uniform(lo, hi)
        if lo < y < hi:
            assert generalized_inverse(F, y) == t2
        assert left_inverse(F, hi) == t2          # tie y = F(t2): only the left inverse lands on t2


def test_reflection_swaps_inverses(rng):
    for F in _cdf_pool(rng, 20):
        a, b = F.support.lo, F.support.hi
        R = reflect(F, F.support)
        for y in rng.uniform(1e-6, 1 - 1e-6, 25):
            lhs = generalized_inverse(F, 1.0 - y)
            rhs = a + b - left_inverse(R, y)
            assert lhs == pytest.approx(rhs, abs=1e-12)


def test_inverse_choice_does_not_change_area(rng):
    for F in _cdf_pool(rng, 20):
        for _ in range(20):
            y = rng.uniform(0.0, 1.0)
            t = rng.uniform(-0.1, 1.1)
            ql, qg = left_inverse(F, max(y, 1e-300)), generalized_inverse(F, min(y, 1 - 1e-16))
            lhs = y * (ql - t) - integrate(F, t, ql)
            rhs = y * (qg - t) - integrate(F, t, qg)
            assert lhs == pytest.approx(rhs, abs=1e-12)


# --- reflection, scaling ----------------------------------------------------------

def test_reflect_examples():
    R = reflect(from_samples([0.5], S02), S02)
    assert R.atoms == [(1.5, 1.0)]
    sym = from_samples([0.0, 2.0], S02)
    assert reflect(sym, S02).atoms == sym.atoms
    S = SupportInterval(0.0, 1.0)
    U = PiecewiseCdf.from_finite([Segment("linear", 0.0, 1.0, (0.0, 1.0))], S)
    t = np.linspace(-0.2, 1.2, 57)
    np.testing.assert_allclose(reflect(U, S)(t), U(t), atol=1e-15)


def test_reflect_involution(rng):
    for F in _cdf_pool(rng, 15):
        RR = reflect(reflect(F, F.support), F.support)
        jumps = set(np.round(F.breakpoints(), 12))
        t = np.array([s for s in rng.uniform(-0.1, 1.1, 300) if round(s, 12) not in jumps])
        np.testing.assert_allclose(RR(t), F(t), atol=1e-12)


def test_reflect_is_right_continuous():
    F = from_samples([0.25, 0.5], SupportInterval(0.0, 1.0))
    R = reflect(F)
    assert R(0.5) == 1.0 - 0.5  # jump at the mirrored atom is attained at the atom
    assert R(0.75) == 1.0


def test_scale_moves_atoms():
    F = from_samples([0.5, 1.0], S02)
    G = scale(F, 2.0)
    np.testing.assert_allclose(G.locations, [1.0, 2.0])
    assert G.support.hi == 4.0


# --- W1 ------------------------------------------------------------------------

def test_w1_examples():
    F = from_samples([0.0], S02)
    G = from_samples([0.75], S02)
    assert w1_distance(F, F) == 0.0
    assert w1_distance(F, G) == pytest.approx(0.75, abs=1e-15)
    A = from_samples([0.0, 1.0], S02)
    B = from_samples([0.5, 1.5], S02)
    assert w1_distance(A, B) == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 2.0), min_size=1, max_size=15),
       st.lists(st.floats(0.0, 2.0), min_size=1, max_size=15))
def test_w1_equal_size_sorted_formula(xs, ys):
    n = min(len(xs), len(ys))
    xs, ys = sorted(xs[:n]), sorted(ys[:n])
    expected = float(np.mean(np.abs(np.array(xs) - np.array(ys))))
    assert w1_distance(from_samples(xs, S02), from_samples(ys, S02)) == pytest.approx(expected, abs=1e-12)


def test_w1_matches_quadrature(rng):
    pool = _cdf_pool(rng, 24)
    for _ in range(60):
        F, G = pool[rng.integers(len(pool))], pool[rng.integers(len(pool))]
        assert w1_distance(F, G) == pytest.approx(w1_quadrature(F, G), abs=1e-9)


def test_w1_hyperbolic_pair():
    S = SupportInterval(0.0, 2.0)
    up = upper_envelope_discrete(from_samples([1.0], S), 0.5)
    low = lower_envelope_discrete(from_samples([1.0], S), 0.5)
    # each envelope is at distance rho from the atom: int_0^0.5 0.5/(1-t) dt + 0.5
    expected_up = 0.5 * math.log(2.0) + 0.5
    assert w1_distance(up, from_samples([1.0], S)) == pytest.approx(expected_up, abs=1e-13)
    assert w1_distance(up, low) == pytest.approx(2 * expected_up, abs=1e-13)


def test_w1_symmetry_and_triangle(rng):
    pool = _cdf_pool(rng, 18)
    for _ in range(80):
        F, G, H = (pool[rng.integers(len(pool))] for _ in range(3))
        fg, gh, fh = w1_distance(F, G), w1_distance(G, H), w1_distance(F, H)
        assert fg == pytest.approx(w1_distance(G, F), abs=1e-12)
        assert fh <= fg + gh + 1e-12
        assert fg >= 0.0


def test_w1_many_atoms_against_piecewise(rng):
    S = SupportInterval(0.0, 2.0)
    tri = PiecewiseCdf.from_finite([Segment("quadratic", 0.0, 1.0, (0.0, 0.0, 0.5)),
                                    Segment("quadratic", 1.0, 2.0, (0.5, 1.0, -0.5))], S)
    F = from_samples(rng.random(500) + rng.random(500), S)
    assert w1_distance(F, tri) == pytest.approx(w1_quadrature(F, tri), abs=1e-9)

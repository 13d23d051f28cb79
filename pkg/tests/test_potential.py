import math

import pytest
from hypothesis import given, settings, strategies as st

from armchair.potential import Delta, Potential, PotentialError, make_delta_family, parse_potential


def test_parse_zero():
    q = parse_potential("zero")
    assert q.is_zero
    assert q.deltas == ()
    assert len(q.segments) == 1 and q.segments[0].coeffs == (0.0,)


def test_parse_delta():
    q = parse_potential("delta g=10 a=0.5")
    assert [(d.g, d.a) for d in q.deltas] == [(10.0, 0.5)]
    assert q.density(0.3) == 0.0


def test_parse_poly_unicode_minus():
    q = parse_potential("poly [0,1] 1 0 −1")
    assert q.segments[0].coeffs == (1.0, 0.0, -1.0)
    assert q.density(0.5) == pytest.approx(0.75)


def test_multi_segment_and_semicolons():
    q = parse_potential("poly [0,0.5] 1; poly [0.5,1] 2\ndelta g=1 a=0.25")
    assert q.density(0.25) == 1.0 and q.density(0.75) == 2.0
    assert 0.5 in q.breakpoints


@pytest.mark.parametrize("text", [
    "bogus", "delta g=1", "delta g=1 a=1.5", "delta g=1 a=0", "poly [0,0.5] 1",
    "poly [0,0.6] 1; poly [0.5,1] 1", "zero x", "delta g=abc a=0.5",
    "delta g=1 a=0.5; delta g=2 a=0.5", "zero; poly [0,1] 1",
])
def test_parse_errors(text):
    with pytest.raises(PotentialError):
        parse_potential(text)


def test_error_has_position():
    with pytest.raises(PotentialError) as exc:
        parse_potential("zero\n  wobble")
    assert exc.value.line == 2 and exc.value.column == 3


def test_delta_family_examples():
    q = make_delta_family(0.01, 0.0, 1, 4)
    assert q.deltas[0].g == pytest.approx(100) and q.deltas[0].a == 0.5
    q = make_delta_family(0.01, 0.01, 1, 4)
    assert q.deltas[0].a == pytest.approx(0.5 + math.sqrt(2) / 2 * 0.01 + 1e-4, abs=1e-15)
    q = make_delta_family(-0.01, -0.01, 1, 4)
    assert q.deltas[0].g == pytest.approx(-100)
    assert q.deltas[0].a == pytest.approx(0.5 - math.sqrt(2) / 2 * 0.01 + 1e-4, abs=1e-15)


def test_delta_family_errors():
    with pytest.raises(PotentialError):
        make_delta_family(0.0, 0.1, 1, 4)
    with pytest.raises(PotentialError):
        make_delta_family(0.1, 0.9, 0, 4)
    with pytest.raises(PotentialError):
        make_delta_family(0.1, 0.1, 4, 4)


def test_delta_family_directive():
    q = parse_potential("delta_family v=0.01 eps=0.01 k=1 N=4")
    assert q.deltas == make_delta_family(0.01, 0.01, 1, 4).deltas


@pytest.mark.parametrize("text,even", [
    ("zero", True), ("delta g=10 a=0.5", True), ("delta g=5 a=0.3", False),
    ("delta g=5 a=0.3; delta g=5 a=0.7", True), ("delta g=5 a=0.3; delta g=4 a=0.7", False),
    ("poly [0,1] 1 0 -1", False), ("poly [0,1] 0 1 -1", True),
    ("poly [0,0.5] 1; poly [0.5,1] 1", True), ("poly [0,0.5] 1; poly [0.5,1] 2", False),
])
def test_is_even(text, even):
    assert parse_potential(text).is_even() is even


def test_spectral_lower_bound():
    assert parse_potential("poly [0,1] 1 0 -1").spectral_lower_bound() <= 0.0
    assert parse_potential("delta g=-50 a=0.5").spectral_lower_bound() < -100


_coef = st.floats(-5, 5, allow_nan=False).map(lambda x: round(x, 6))


@st.composite
def potentials(draw):
    n = draw(st.integers(1, 3))
    cuts = sorted(draw(st.sets(st.integers(1, 99), min_size=n - 1, max_size=n - 1)))
    bounds = [0.0] + [c / 100 for c in cuts] + [1.0]
    text = [f"poly [{a!r},{b!r}] " + " ".join(repr(c) for c in draw(st.lists(_coef, min_size=1, max_size=4)))
            for a, b in zip(bounds, bounds[1:])]
    pos = draw(st.sets(st.integers(1, 99), max_size=3))
    text += [f"delta g={draw(_coef)!r} a={p / 100!r}" for p in sorted(pos)]
    return parse_potential("\n".join(text))


@settings(max_examples=60, deadline=None)
@given(potentials())
def test_text_and_json_round_trip(q):
    assert parse_potential(q.to_text()) == q
    assert Potential.from_json(q.to_json()) == q


def test_direct_construction():
    q = Potential.delta(3.0, 0.25).with_deltas((1.0, 0.75))
    assert [d.a for d in q.deltas] == [0.25, 0.75]
    assert isinstance(q.deltas[0], Delta)
    assert Potential.polynomial([1, 2]).density(0.5) == pytest.approx(2.0)

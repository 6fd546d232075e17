import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from oracles import cutoff_linear
from periodic_ch.perturbations import (
    CutoffPerturbation,
    LipschitzPerturbation,
    Primitive,
    linear,
    make_perturbation,
    primitive_of,
    zero,
)

reals = st.floats(-6.0, 6.0, allow_nan=False)


def test_cutoff_examples():
    p = CutoffPerturbation(linear(1.0), -1.0, 1.0)
    assert p(0.5) == -0.5
    assert p(2.5) == 0.0
    assert p(1.5) == pytest.approx(-0.5, abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(r=reals, a=st.floats(0.0, 3.0))
def test_cutoff_matches_piecewise_linear_oracle(r, a):
    p = CutoffPerturbation(linear(a), -1.0, 1.0)
    assert p(r) == pytest.approx(float(cutoff_linear(a, r)), abs=1e-14)


@settings(max_examples=300, deadline=None)
@given(r=reals, s=reals, a=st.floats(0.0, 3.0))
def test_cutoff_is_lipschitz_and_bounded(r, s, a):
    p = CutoffPerturbation(linear(a), -1.0, 1.0)
    assert abs(p(r) - p(s)) <= p.lipschitz_const * abs(r - s) + 1e-14
    assert abs(p(r)) <= p.sup_abs + 1e-15


def test_cutoff_support_and_continuity():
    p = CutoffPerturbation(LipschitzPerturbation(np.sin, 1.0, name="sin"), -0.5, 2.0)
    assert p(-1.5) == 0.0 and p(3.0) == 0.0
    for knot in (-1.5, -0.5, 2.0, 3.0):
        assert abs(p(knot - 1e-12) - p(knot + 1e-12)) < 1e-10
    assert p.sup_abs == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        CutoffPerturbation(linear(1.0), -1.0, math.inf)


def test_primitive_examples():
    prim = Primitive(CutoffPerturbation(zero(), -1.0, 1.0))
    r = np.linspace(-5, 5, 11)
    assert np.all(prim(r) == prim(0.0)) and prim(0.0) >= 0.0
    prim = Primitive(CutoffPerturbation(linear(1.0), -1.0, 1.0))
    assert prim(0.0) - prim(-0.0) == 0.0
    expected, _ = quad(lambda x: -x, 0.0, 1.0)
    assert prim(1.0) - prim(0.0) == pytest.approx(expected, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(r=reals, a=st.floats(0.1, 3.0))
def test_primitive_is_nonnegative_antiderivative(r, a):
    cut = CutoffPerturbation(linear(a), -1.0, 1.0)
    prim = Primitive(cut)
    assert prim(r) >= -1e-15
    expected, _ = quad(lambda x: float(cutoff_linear(a, x)), 0.0, r, points=[-2, -1, 1, 2], epsabs=1e-13)
    assert prim(r) - prim(0.0) == pytest.approx(expected, abs=1e-11)


def test_tabulated_primitive_matches_closed_form():
    base = linear(0.7)
    untabulated = LipschitzPerturbation(base.fn, 0.7, name="no_antiderivative")
    exact = Primitive(CutoffPerturbation(base, -1.0, 1.0))
    tab = Primitive(CutoffPerturbation(untabulated, -1.0, 1.0))
    r = np.linspace(-3, 3, 61)
    assert np.allclose(exact(r), tab(r), atol=1e-7)


def test_cutoff_derivative():
    p = CutoffPerturbation(linear(2.0), -1.0, 1.0)
    r = np.array([-2.5, -1.5, 0.3, 1.5, 2.5])
    assert np.allclose(p.derivative(r), [0.0, 2.0, -2.0, 2.0, 0.0])
    assert p.lipschitz_const == 2.0


def test_raw_perturbation_and_factory():
    p = make_perturbation({"kind": "linear", "alpha": 0.9})
    assert p(2.0) == pytest.approx(-1.8)
    assert p.derivative(5.0) == -0.9
    assert p.sup_abs == math.inf
    assert primitive_of(p)(2.0) == pytest.approx(-1.8)
    assert make_perturbation({"kind": "zero"})(3.0) == 0.0
    with pytest.raises(ValueError):
        make_perturbation({"kind": "quadratic"})
    with pytest.raises(ValueError):
        LipschitzPerturbation(np.sin, -1.0)
    with pytest.raises(NotImplementedError):
        LipschitzPerturbation(np.sin, 1.0).primitive(0.0)
    fd = LipschitzPerturbation(np.sin, 1.0)
    assert fd.derivative(0.3) == pytest.approx(math.cos(0.3), abs=1e-8)

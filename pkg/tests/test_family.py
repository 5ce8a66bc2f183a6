import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from unialign.grid import ScalarField, make_grid
from unialign.moc.family import Moc, MocPair, admissible_lambda, log_admissible_lambda
from unialign.moc.scan import scan_breakthrough

mus = st.floats(0.05, 0.95)
log_lams = st.floats(-8, 2)


def test_branch_values_meet_at_lambda():
    m = Moc.with_lambda(2.0, 0.5, 0.1)
    assert m(0.1) == pytest.approx(1.5, rel=1e-14)
    assert m(0.1 * (1 + 1e-12)) == pytest.approx(1.5, rel=1e-10)
    assert m(0.1 * math.e**2) == pytest.approx(2.0 * (0.75 + 1.0), rel=1e-14)


def test_slope_at_origin_and_kink():
    m = Moc.with_lambda(1.0, 0.3, 0.01)
    assert float(m.deriv(1e-40)) == pytest.approx(100.0, rel=1e-9)
    left = float(m.deriv(0.01))
    right = float(m.deriv(0.01 * (1 + 1e-9)))
    # concave kink: the slope drops across lambda
    assert left == pytest.approx(100 * (1 - 1.3 / 4))
    assert right == pytest.approx(50.0, rel=1e-6) and right < left


def test_astronomically_small_lambda():
    m = Moc(1.0, 0.5, -1e4)
    assert m(1.0) == pytest.approx(0.75 + 0.5e4, rel=1e-14)
    assert m.lam == 0.0


def test_validation():
    for kw in ({"delta": 0.0, "mu": 0.5, "log_lam": 0.0}, {"delta": 1.0, "mu": 1.0, "log_lam": 0.0},
               {"delta": 1.0, "mu": 0.5, "log_lam": math.inf}):
        with pytest.raises(ValueError):
            Moc(**kw)
    with pytest.raises(ValueError):
        Moc.with_lambda(1.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        Moc(1.0, 0.5, 0.0)(0.0)


@given(st.floats(0.1, 5), mus, log_lams, st.floats(-6, 3), st.floats(-0.999, 3))
def test_inc_matches_difference(delta, mu, log_lam, log_base, frac):
    m = Moc(delta, mu, log_lam)
    base = math.exp(log_lam + log_base)
    h = frac * base
    assume(abs(h) > 1e-3 * base)
    direct = m(base + h) - m(base)
    assert float(m.inc(base, h)) == pytest.approx(direct, rel=1e-9, abs=1e-12 * delta)


@given(st.floats(0.1, 5), mus, log_lams, st.floats(-6, 3), st.floats(0.0, 1.0))
def test_second_diff_nonnegative_and_accurate(delta, mu, log_lam, log_xi, frac):
    m = Moc(delta, mu, log_lam)
    xi = math.exp(log_lam + log_xi)
    h = frac * xi
    sd = float(m.second_diff(xi, h))
    assert sd >= 0.0
    if 1e-2 < frac < 0.999:
        direct = 2 * m(xi) - m(xi + h) - m(xi - h)
        assert sd == pytest.approx(direct, rel=1e-7, abs=1e-13 * delta)


@given(st.floats(0.1, 5), mus, log_lams)
def test_small_increment_no_cancellation(delta, mu, log_lam):
    m = Moc(delta, mu, log_lam)
    xi = 0.5 * m.lam
    h = 1e-9 * xi
    assert float(m.inc(xi, h)) == pytest.approx(float(m.deriv(xi)) * h, rel=1e-6)
    assert float(m.second_diff(xi, h)) == pytest.approx(-float(m.deriv2(xi)) * h * h, rel=1e-5)


def test_pair_scales():
    p = MocPair.build(0.5, 0.4, 0.5, math.log(1e-3), rho_bar=2.0, V0=1.5)
    assert p.omega1.delta == pytest.approx(0.2)
    assert p.omega1(p.Xi1) == pytest.approx(2.0, rel=1e-12)
    assert p.omega2(p.Xi2) == pytest.approx(1.5, rel=1e-12)
    assert p.omega2_at(0.0) == p.omega2
    p = MocPair.build(0.5, 0.4, 0.5, math.log(1e-3), c0=2.0)
    assert p.omega2_at(1.0).delta == pytest.approx(0.5 * math.exp(-2.0))


def test_pair_validation():
    w = Moc(1.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        MocPair(w, Moc(1.0, 0.5, 1.0), 1.0)
    with pytest.raises(ValueError):
        MocPair(Moc(0.3, 0.5, 0.0), w, 0.5)
    with pytest.raises(ValueError):
        MocPair.build(1.0, 1.5, 0.5, 0.0)


@pytest.mark.parametrize("delta", [0.5, 2.0])
def test_admissible_lambda_makes_data_obey_modulus(delta):
    g = make_grid(1, 256)
    f = ScalarField.from_function(g, np.sin)
    lam = admissible_lambda(f, delta)
    assert math.log(lam) == pytest.approx(log_admissible_lambda(f, delta))
    assert scan_breakthrough(f, Moc.with_lambda(delta, 0.5, lam)).passed


def test_admissible_lambda_constant_field():
    g = make_grid(1, 32)
    assert admissible_lambda(ScalarField.constant(g, 1.0), 1.0) == math.inf

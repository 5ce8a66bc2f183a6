import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from unialign.moc.family import MocPair
from unialign.moc.lemmas import EmpiricalConstants
from unialign.moc.params import (MARGIN, InfeasibleError, Regime, SelectionInputs, certify,
                                 dissipation_coefficients, ratio_terms, select_parameters)

CONSTS = {
    0.5: EmpiricalConstants(0.5, 1, 3.580181618982746, 0.8590276457713896, 0.9396384886807613),
    1.0: EmpiricalConstants(1.0, 1, 3.965233675432495, 0.4626010350895746, 2.1138811291896342),
    1.5: EmpiricalConstants(1.5, 1, 4.071550917800365, 0.2562849958037605, 3.0840912274975394,
                            3.870720665673629, 0.36703484107170314, 2.150197476621),
}
REGIME = {0.5: Regime.Supercritical, 1.0: Regime.Critical, 1.5: Regime.Subcritical}


def inputs(alpha, **kw):
    base = dict(rho_lower=0.6, rho_upper=1.4, V0=1.0, F0_norm=0.8, gradF0_norm=3.0, H0_norm=5.0, c0=0.4)
    if alpha < 1:
        base.update(sigma=0.75, u_Csigma=2.0)
    base.update(kw)
    return SelectionInputs(**base)


def test_regime_for_alpha():
    assert [Regime.for_alpha(a) for a in (0.5, 1.0, 1.5)] == [Regime.Supercritical, Regime.Critical,
                                                               Regime.Subcritical]


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_selection_is_certified_in_closed_loop(alpha):
    inp = inputs(alpha)
    ch = select_parameters(REGIME[alpha], alpha, inp, CONSTS[alpha])
    assert ch.certificate.passed
    assert ch.delta1 == pytest.approx(ch.kappa * ch.delta2)
    # independent re-evaluation on a denser grid
    cert = certify(REGIME[alpha], alpha, inp, CONSTS[alpha], ch.pair, n_s=4000)
    assert cert.passed and max(cert.worst.values()) <= MARGIN
    # lambda below the threshold that keeps both outer scales under 1/2
    assert ch.log_lam <= math.log(0.5) - (2 * inp.rho_upper / ch.delta1 + 2 * inp.V0 / ch.delta2) + 1e-9


def test_mu_per_regime():
    assert select_parameters("Subcritical", 1.5, inputs(1.5), CONSTS[1.5]).mu == pytest.approx(0.75)
    assert select_parameters("Critical", 1.0, inputs(1.0), CONSTS[1.0]).mu == pytest.approx(0.5)
    assert select_parameters("Supercritical", 0.5, inputs(0.5), CONSTS[0.5]).mu == pytest.approx(0.125)


def test_subcritical_drift_dominated_by_dissipation():
    c = CONSTS[1.5]
    inp = inputs(1.5)
    ch = select_parameters("Subcritical", 1.5, inp, c)
    assert ch.kappa == 1.0
    assert c.C2 * ch.delta2 < c.C1 * 1.5 * inp.rho_lower / 16


@pytest.mark.parametrize("V0", [1.0, 50.0, 1e3])
def test_critical_kappa_controls_cross_term(V0):
    c = CONSTS[1.0]
    inp = inputs(1.0, V0=V0)
    ch = select_parameters("Critical", 1.0, inp, c)
    assert ch.kappa <= c.C1 * inp.rho_lower / (8 * c.C3 * (ch.delta2 + V0))
    assert ch.certificate.passed


@given(st.floats(0.1, 1e3), st.floats(-2000, -50), st.floats(0.55, 0.95))
def test_supercritical_lambda_scaling(u_sig, log_lam, sigma):
    # the u-increment ratio depends on (u_Csigma, lambda) through u_Csigma * lambda^(sigma - 1 + alpha)
    p = sigma - 0.5
    a = ratio_terms(Regime.Supercritical, 0.5, inputs(0.5, sigma=sigma, u_Csigma=u_sig), CONSTS[0.5],
                    0.01, 0.5, 0.5 * p, log_lam)
    b = ratio_terms(Regime.Supercritical, 0.5, inputs(0.5, sigma=sigma, u_Csigma=2 * u_sig), CONSTS[0.5],
                    0.01, 0.5, 0.5 * p, log_lam - math.log(2) / p)
    np.testing.assert_allclose(b["rho_inner"][1]["u_increment"], a["rho_inner"][1]["u_increment"],
                               rtol=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@given(shrink=st.floats(1.0, 1e4))
def test_smaller_lambda_stays_certified(alpha, shrink):
    inp = inputs(alpha)
    ch = select_parameters(REGIME[alpha], alpha, inp, CONSTS[alpha])
    p = ch.pair
    smaller = MocPair.build(p.omega2.delta, p.kappa, p.mu, p.log_lam - shrink)
    assert certify(REGIME[alpha], alpha, inp, CONSTS[alpha], smaller).passed


def test_too_large_lambda_fails_certificate():
    inp = inputs(1.0)
    ch = select_parameters("Critical", 1.0, inp, CONSTS[1.0])
    p = ch.pair
    big = MocPair.build(p.omega2.delta, p.kappa, p.mu, 0.0)
    assert not certify(Regime.Critical, 1.0, inp, CONSTS[1.0], big).passed


def test_infeasible_without_decay_rate():
    with pytest.raises(InfeasibleError) as ei:
        select_parameters("Critical", 1.0, inputs(1.0, c0=0.0), CONSTS[1.0])
    d = ei.value.as_dict()
    assert d["status"] == "infeasible" and d["binding"].startswith("rho_inner")


def test_no_H0_needs_no_decay_rate():
    ch = select_parameters("Critical", 1.0, inputs(1.0, c0=0.0, H0_norm=0.0), CONSTS[1.0])
    assert ch.certificate.passed


def test_regime_mismatch_and_missing_inputs():
    with pytest.raises(ValueError):
        select_parameters("Critical", 1.5, inputs(1.5), CONSTS[1.5])
    with pytest.raises(ValueError):
        select_parameters("Supercritical", 0.5, inputs(0.5, sigma=0.3), CONSTS[0.5])
    with pytest.raises(ValueError):
        select_parameters("Supercritical", 0.5, inputs(0.5, u_Csigma=None), CONSTS[0.5])
    with pytest.raises(ValueError):
        inputs(1.0, rho_lower=2.0)
    with pytest.raises(ValueError):
        inputs(1.0, V0=0.0)


def test_data_cap_applies():
    free = select_parameters("Subcritical", 1.5, inputs(1.5), CONSTS[1.5])
    capped = select_parameters("Subcritical", 1.5, inputs(1.5, u_half_osc=1.0, u_lip=1e6), CONSTS[1.5])
    assert capped.log_lam <= free.log_lam
    assert capped.log_lam <= math.log(2.0 / 1e6) - 4.0 / capped.delta2 + 1e-9


def test_dissipation_coefficients():
    inner, outer = dissipation_coefficients(1.0, 0.5, 2.0, 0.5)
    assert inner == pytest.approx(2.0 * 0.5 * 0.5 * 1.5 / 4.0)
    assert outer == pytest.approx(1.0)


def test_choice_serialises():
    import json

    ch = select_parameters("Critical", 1.0, inputs(1.0), CONSTS[1.0])
    d = json.loads(json.dumps(ch.as_dict(), default=float))
    assert d["regime"] == "Critical" and d["certificate"]["pass"]

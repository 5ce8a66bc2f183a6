import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from unialign.core import FlowState, extract_auxiliary
from unialign.diagnostics import (DiagnosticsRecord, check_apriori, criterion_bound_shape,
                                  criterion_monitor, decay_envelope_rate, fit_flocking, read_csv,
                                  record, write_csv)
from unialign.grid import ScalarField, make_grid
from unialign.moc.family import MocPair


def rec(t=0.0, **kw):
    base = dict(t=t, mass=2 * math.pi, momentum=1.0, G_integral=0.0, G_abs_integral=1.0, rho_min=0.8,
                rho_max=1.2, F_sup=1.0, G_sup=1.0, V=1.0, u_dev=0.5, lip_rho=1.0, lip_u=1.0,
                holder_u_sigma=1.0)
    base.update(kw)
    return DiagnosticsRecord(**base)


def sine_state(t=0.0):
    g = make_grid(1, 64)
    x = g.coords[0]
    return FlowState.from_arrays(g, 1.0 + 0.2 * np.cos(x), 0.3 * np.sin(x), t)


def test_record_fields():
    s = sine_state()
    r = record(s, extract_auxiliary(s, 1.0))
    assert r.mass == pytest.approx(2 * math.pi)
    assert r.momentum == pytest.approx(0.0, abs=1e-14)
    assert r.V == pytest.approx(0.6, rel=1e-3)
    assert r.lip_u == pytest.approx(0.3, rel=1e-12)
    assert math.isnan(r.moc_margin_rho) and r.events == []
    # G = d1(0.3 sin x) - Lambda(0.2 cos x) = 0.1 cos x
    assert r.G_sup == pytest.approx(0.1, rel=1e-12)


def test_record_with_pair_scans():
    s = sine_state()
    pair = MocPair.build(1.0, 0.5, 0.5, math.log(1e-3), c0=0.1)
    r = record(s, extract_auxiliary(s, 1.0), pair)
    assert r.moc_margin_rho > 0 and r.moc_margin_u > 0


def test_record_validation():
    with pytest.raises(ValueError):
        rec(V=-1.0)
    with pytest.raises(ValueError):
        rec(rho_min=2.0)


def test_csv_round_trip(tmp_path):
    series = [rec(0.0), rec(0.5, V=0.7, moc_margin_rho=0.3), rec(1.0, events=[{"event": "blowup"}])]
    back = read_csv(write_csv(series, tmp_path / "d.csv"))
    assert [r.t for r in back] == [0.0, 0.5, 1.0]
    assert back[1].moc_margin_rho == 0.3 and math.isnan(back[0].moc_margin_u)
    assert back[2].events == [{"event": "blowup"}]


def test_apriori_clean_series():
    assert check_apriori([rec(0.0), rec(1.0, V=0.9), rec(2.0, V=0.5)]) == []


@pytest.mark.parametrize("field,value,monitor", [
    ("mass", 2 * math.pi * (1 + 1e-8), "mass"),
    ("momentum", 1.0 + 1e-5, "momentum"),
    ("G_integral", 1e-6, "G_mass"),
    ("F_sup", 1.0 + 1e-5, "F_sup"),
    ("G_sup", 1.5, "G_sup"),
    ("V", 1.1, "V"),
    ("rho_min", 0.3, "rho_min"),
])
def test_apriori_flags_each_monitor(field, value, monitor):
    # the density floor is established over the first time unit, so violate later
    out = check_apriori([rec(0.0), rec(2.0, **{field: value})])
    assert monitor in {v["monitor"] for v in out}
    assert all({"monitor", "t", "detail"} <= set(v) for v in out)


def test_apriori_frozen_density_skips_transport_monitors():
    series = [rec(0.0), rec(1.0, momentum=2.0, F_sup=5.0, G_sup=9.0, G_integral=3.0)]
    assert check_apriori(series, frozen_density=True) == []


def test_apriori_reports_events():
    out = check_apriori([rec(0.0), rec(1.0, events=[{"event": "blowup"}])])
    assert out[0]["monitor"] == "lip_u"


def test_apriori_empty_rejected():
    with pytest.raises(ValueError):
        check_apriori([])


@given(st.floats(0.01, 3.0))
def test_decay_envelope_rate_exact_exponential(c):
    series = [rec(t, V=math.exp(-c * t)) for t in np.linspace(0, 5, 11)]
    assert decay_envelope_rate(series) == pytest.approx(c, rel=1e-9)


def test_decay_envelope_rate_is_worst_case():
    series = [rec(0.0, V=1.0), rec(1.0, V=math.exp(-2.0)), rec(2.0, V=math.exp(-2.5))]
    assert decay_envelope_rate(series) == pytest.approx(1.25)


def test_fit_flocking_exponential():
    ts = np.linspace(0, 10, 41)
    series = [rec(t, u_dev=0.5 * math.exp(-0.8 * t), momentum=2 * math.pi * 0.3) for t in ts]
    fl = fit_flocking(series)
    assert fl.decay_rate_fit == pytest.approx(0.8, rel=1e-9)
    assert fl.r_squared == pytest.approx(1.0)
    assert fl.e_foldings == pytest.approx(8.0) and fl.status == "flocking"
    assert fl.u_bar == pytest.approx(0.3)


def test_fit_flocking_profile_residual_comoving():
    # a profile translating at u_bar gives zero residual once shifted back
    g = make_grid(1, 64)
    ubar = 0.3
    states = [(t, ScalarField(g, 1 + 0.2 * np.cos(g.coords[0] - ubar * t))) for t in (0.0, 1.0, 2.0)]
    series = [rec(t, momentum=2 * math.pi * ubar, u_dev=math.exp(-t)) for t, _ in states]
    fl = fit_flocking(series, states)
    assert max(fl.profile_residual) < 1e-12 and fl.residual_decreasing
    with pytest.raises(ValueError):
        fit_flocking(series, beta=1.0)


def test_criterion_shape():
    assert criterion_bound_shape(16.0, 0.75, 0.5) == pytest.approx(1 + 16.0**4)
    with pytest.raises(ValueError):
        criterion_bound_shape(1.0, 0.4, 0.5)


def test_criterion_monitor_uses_running_sup():
    # holder norm rises then falls; lip_rho keeps the value it reached
    s0 = criterion_bound_shape(1.0, 0.75, 0.5)
    s1 = criterion_bound_shape(1.2, 0.75, 0.5)
    series = [rec(0.0, holder_u_sigma=1.0, lip_rho=s0), rec(1.0, holder_u_sigma=1.2, lip_rho=s1),
              rec(2.0, holder_u_sigma=0.1, lip_rho=s1)]
    out = criterion_monitor(series, 0.75, 0.5)
    assert out["pass"] and out["max_ratio"] == pytest.approx(1.0) and out["C"] == pytest.approx(1.0)
    bad = series + [rec(3.0, holder_u_sigma=0.1, lip_rho=3 * s1)]
    out = criterion_monitor(bad, 0.75, 0.5)
    assert not out["pass"] and out["t_max_ratio"] == 3.0

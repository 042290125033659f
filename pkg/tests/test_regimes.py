import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from ldos1d.errors import DomainError
from ldos1d.export import dumps
from ldos1d.oscillator import OscillatorSpec
from ldos1d.regimes import (
    NOTE_LOCALIZATION,
    NOTE_NO_WIGNER_BUMP,
    SCHEMA,
    classify,
    oscillator_scales,
    regime_rank,
    regime_report,
)
from ldos1d.ring import RingSpec, characteristic_scales

ELL = 2 * math.pi / 32


def disorder(factor=1.0, m=4000):
    tmpl = RingSpec.disorder(1.0, ELL, 0.0, m, seed=7)
    return tmpl.with_dx(factor * characteristic_scales(tmpl).dx_c)


def bump(factor=1.0, m=4000):
    tmpl = RingSpec.single_bump(1.0, ELL, 0.0, m)
    return tmpl.with_dx(factor * characteristic_scales(tmpl).dx_c)


@pytest.mark.parametrize("strength, regime", [(0.5, "fopt"), (2.0, "semiclassical"), (20.0, "semiclassical")])
def test_oscillator_examples(strength, regime):
    r = regime_report(OscillatorSpec.from_strength(strength, 100))
    assert r.regime == regime
    assert r.scales.b == 1 and r.scales.dx_c == r.scales.dx_prt
    assert not r.wigner_possible
    assert r.dx / r.scales.dx_c == pytest.approx(strength, rel=1e-12)


def test_disorder_example():
    r = regime_report(disorder(3.0))
    assert r.regime == "wigner"
    assert r.loc["caveat"] and not r.loc["fopt_safe"] and r.loc["born_valid"]
    assert NOTE_LOCALIZATION in r.notes
    sc = r.scales
    assert sc.dx_prt / sc.dx_c == pytest.approx(math.sqrt(32), rel=1e-12)
    assert all(v > 0 for v in (sc.delta, sc.delta_b, sc.sigma, sc.v_E, sc.k0, sc.dx_c))


@pytest.mark.parametrize("factor", [0.1, 1.0, 3.0, 10.0, 100.0])
def test_single_bump_never_wigner(factor):
    r = regime_report(bump(factor, m=200000))
    assert r.regime != "wigner" and not r.wigner_possible
    assert NOTE_NO_WIGNER_BUMP in r.notes


def test_ties_go_up():
    sc = characteristic_scales(disorder())
    assert classify(sc.dx_c, sc).regime == "wigner"
    assert classify(sc.dx_prt, sc).regime == "semiclassical"
    osc = oscillator_scales(OscillatorSpec.from_strength(1.0, 100))
    assert classify(osc.dx_c, osc).regime == "semiclassical"


def test_narrow_band_has_no_wigner():
    class Narrow:
        kind = "disorder"
        b = 2.0
        dx_c = 1.0
        dx_prt = math.sqrt(2.0)
        delta = 1.0
        L = 2 * math.pi
        ell = math.pi

        def to_dict(self):
            return {}
    assert classify(1.2, Narrow()).regime == "semiclassical"


def test_classify_rejects_nonpositive():
    with pytest.raises(DomainError):
        classify(0.0, characteristic_scales(disorder()))


@settings(max_examples=60, deadline=None)
@given(a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3), kind=st.sampled_from(["disorder", "bump", "osc"]))
def test_monotone_in_dx(a, b, kind):
    if kind == "osc":
        sc = oscillator_scales(OscillatorSpec.from_strength(1.0, 100))
    else:
        sc = characteristic_scales(disorder() if kind == "disorder" else bump())
    lo, hi = sorted((a, b))
    assert regime_rank(classify(lo * sc.dx_c, sc).regime) <= regime_rank(classify(hi * sc.dx_c, sc).regime)


def test_report_json():
    d = json.loads(dumps(regime_report(disorder(2.0)).to_dict()))
    assert d["schema"] == SCHEMA and d["regime"] == "wigner"
    assert d["loc"]["transfer"] == "inf"
    assert d["scales"]["b"] == pytest.approx(32)
    assert d["gamma"]["golden_rule"] == pytest.approx(2 * math.pi * d["gamma"]["flat_estimate"])

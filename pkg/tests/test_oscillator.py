import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from oracles import overlap_by_grid

from ldos1d.errors import ContractError
from ldos1d.numerics import bessel_j
from ldos1d.oscillator import (
    OscillatorSpec,
    classical_dispersion,
    default_window,
    dispersion,
    ldos_classical,
    ldos_exact,
    ldos_fopt,
    ldos_kernel,
    ldos_uniform,
)
from ldos1d.kernel import LdosKernel

M = 100


def spec_at(strength, m=M):
    return OscillatorSpec.from_strength(strength, m)


@pytest.mark.parametrize("kwargs", [dict(x0=0.0), dict(x0=1.0, dx=-1.0), dict(dx=0.5),
                                    dict(ref_level=-1), dict(ref_level=2.5)])
def test_spec_validation(kwargs):
    with pytest.raises(ContractError):
        OscillatorSpec(**kwargs)


def test_strength_round_trip():
    sp = spec_at(2.0)
    assert sp.strength == pytest.approx(2.0, rel=1e-14)
    assert sp.deformation == pytest.approx(sp.dx / sp.x0, rel=0.02)


# classical density

def test_classical_center_value():
    sp = spec_at(20.0)
    s = sp.deformation
    assert ldos_classical(sp, sp.ref_energy) == pytest.approx(1 / (40 * math.pi), rel=2 * s)
    assert ldos_classical(sp, sp.ref_energy, desymmetrized=True) == pytest.approx(
        ldos_classical(sp, sp.ref_energy) / 2)


def test_classical_outside_and_edges():
    sp = spec_at(20.0)
    e = sp.ref_energy
    assert ldos_classical(sp, e + 2.5 * 20) == 0.0
    lo, hi = e / sp.ratio ** 2, e * sp.ratio ** 2
    assert ldos_classical(sp, lo) == math.inf
    assert ldos_classical(sp, hi) == math.inf
    flat = OscillatorSpec(ref_level=M)
    assert ldos_classical(flat, e + 1) == 0.0


# exact, FOPT and uniform entries

def test_exact_trivial():
    flat = OscillatorSpec(ref_level=M)
    assert ldos_exact(flat, M) == pytest.approx(1.0)
    assert ldos_exact(flat, M + 2) == 0.0
    assert ldos_exact(spec_at(2.0), M + 3) == 0.0


def test_exact_neighbour_small_strength():
    sp = spec_at(0.5)
    ref = overlap_by_grid(M + 2, M, sp.x1, sp.x2) ** 2
    assert ldos_exact(sp, M + 2) == pytest.approx(ref, rel=1e-9)
    assert abs(ldos_exact(sp, M + 2) - bessel_j(1, 0.5) ** 2) < 5e-3
    assert abs(ldos_exact(sp, M - 2) - 0.0587) < 5e-3


def test_exact_sum_to_wide_window():
    for strength in (0.5, 2.0, 20.0):
        sp = spec_at(strength)
        window = 6 * math.ceil(strength) + 50
        assert abs(ldos_kernel(sp, "exact", window=window).total() - 1) < 1e-8


def test_fopt_entries():
    sp = spec_at(0.5)
    e = sp.ref_energy + 1
    assert ldos_fopt(sp, M) == 1.0
    assert ldos_fopt(sp, M + 4) == 0.0
    assert ldos_fopt(sp, M + 2) == pytest.approx(0.25 * sp.deformation ** 2 * (e * e - 0.25), rel=1e-15)
    assert ldos_fopt(sp, M + 2) == pytest.approx(0.0625, rel=0.03)


def test_uniform_entries():
    flat = OscillatorSpec(ref_level=M)
    assert ldos_uniform(flat, M) == 1.0
    assert ldos_uniform(flat, M + 2) == 0.0
    sp = spec_at(0.5)
    assert ldos_uniform(sp, M + 2, energy="reference") == pytest.approx(bessel_j(1, 0.5) ** 2, rel=1e-14)
    # the mean-energy argument is s (E_m -+ 1), so the entries straddle J_1(0.5)^2
    assert ldos_uniform(sp, M - 2) == pytest.approx(0.0587, abs=2e-3)
    assert ldos_uniform(sp, M + 2) == pytest.approx(0.0587, abs=2e-3)
    assert ldos_uniform(sp, M + 1) == 0.0


@pytest.mark.parametrize("strength", [0.5, 2.0, 20.0])
def test_uniform_reference_sum_is_bessel_identity(strength):
    sp = spec_at(strength)
    k = ldos_kernel(sp, "uniform", energy="reference")
    assert abs(k.metadata["raw_total"] - 1) < 1e-10


def test_uniform_mean_convention_is_renormalized():
    k = ldos_kernel(spec_at(20.0), "uniform")
    assert abs(k.total() - 1) < 1e-12
    assert k.metadata["raw_total"] > 1.01


# kernels

def test_window_contract():
    sp = spec_at(20.0)
    with pytest.raises(ContractError):
        ldos_kernel(sp, "exact", window=59)
    with pytest.raises(ContractError):
        ldos_kernel(sp, "wkb")
    assert default_window(sp) == 80


def test_truncation_flag():
    sp = spec_at(20.0)
    assert not ldos_kernel(sp, "exact").metadata["truncated"]
    # narrowest allowed window on a wider spread kernel loses weight
    wide = OscillatorSpec.from_strength(40.0, 400)
    k = ldos_kernel(wide, "classical", window=100)
    assert k.metadata["truncated"] == (k.total() < 1 - 1e-4)


@pytest.mark.parametrize("method", ["exact", "uniform", "fopt"])
def test_parity_and_normalization(method):
    k = ldos_kernel(spec_at(0.5 if method == "fopt" else 2.0), method)
    odd = k.offsets % 2 == 1
    assert np.all(k.weights[odd] == 0)
    assert abs(k.total() - 1) < 1e-6


def test_fopt_kernel_has_three_entries():
    k = ldos_kernel(spec_at(0.5), "fopt")
    assert np.count_nonzero(k.weights) == 3
    assert k.metadata["valid"]


def test_fopt_kernel_flags_breakdown():
    k = ldos_kernel(spec_at(20.0), "fopt")
    assert not k.metadata["valid"]


def test_uniform_envelope_reaches_classical_edges():
    sp = spec_at(20.0)
    k = ldos_kernel(sp, "uniform")
    lo, hi = sp.ref_energy / sp.ratio ** 2, sp.ref_energy * sp.ratio ** 2
    below = k.offsets[np.argmax(np.where(k.offsets < 0, k.weights, 0))]
    above = k.offsets[np.argmax(np.where(k.offsets > 0, k.weights, 0))]
    # the largest lobes sit just inside the classical turning points
    assert lo - sp.ref_energy - 1 < below < lo - sp.ref_energy + 8
    assert hi - sp.ref_energy - 8 < above < hi - sp.ref_energy + 1


def test_exact_vs_uniform_at_moderate_strength():
    sp = spec_at(2.0)
    diff = ldos_kernel(sp, "exact").weights - ldos_kernel(sp, "uniform").weights
    assert np.max(np.abs(diff)) < 1e-2


def test_classical_kernel_binning():
    sp = spec_at(20.0)
    desym = ldos_kernel(sp, "classical")
    plain = ldos_kernel(sp, "classical", desymmetrized=False)
    assert desym.desymmetrized and not plain.desymmetrized
    assert abs(desym.total() - 1) < 1e-12 and abs(plain.total() - 1) < 1e-12
    assert np.all(desym.weights[desym.offsets % 2 == 1] == 0)
    # away from the edges a width-2 bin is about twice a unit bin
    mid = np.abs(desym.offsets) <= 10
    ratio = desym.weights[mid & (desym.offsets % 2 == 0)] / plain.weights[mid & (plain.offsets % 2 == 0)]
    assert np.allclose(ratio, 2.0, rtol=1e-3)


# dispersion

def test_dispersion_trivial():
    k = LdosKernel(M, M + 0.5, [M], [M + 0.5], [1.0], "exact")
    assert dispersion(k) == 0.0
    with pytest.raises(ContractError):
        dispersion(LdosKernel(M, M + 0.5, [M], [M + 0.5], [0.5], "exact"))


@pytest.mark.parametrize("strength", [0.5, 2.0])
def test_restricted_qcc_exact(strength):
    sp = spec_at(strength)
    assert dispersion(ldos_kernel(sp, "exact")) == pytest.approx(classical_dispersion(sp), rel=0.01)


@pytest.mark.parametrize("strength, m", [(0.5, M), (2.0, M), (20.0, M), (40.0, 400)])
def test_exact_dispersion_closed_form(strength, m):
    # second moment of N2 in a squeezed number state, eta = ln(x2/x1)
    sp = spec_at(strength, m)
    eta = math.log(sp.ratio)
    e = sp.ref_energy
    d2 = (math.cosh(2 * eta) - 1) ** 2 * e * e + math.sinh(2 * eta) ** 2 * (e * e + 0.75) / 2
    k = ldos_kernel(sp, "exact", window=6 * math.ceil(strength) + 50)
    assert dispersion(k) ** 2 == pytest.approx(d2, rel=1e-12)


def test_fopt_dispersion():
    sp = spec_at(0.5)
    e, s = sp.ref_energy, sp.deformation
    # entries at E = E_m +- 1 give 2 s^2 E_m^2 (1 + 3/(4 E_m^2))
    expected = math.sqrt(2) * s * e * math.sqrt(1 + 0.75 / e ** 2)
    assert dispersion(ldos_kernel(sp, "fopt")) == pytest.approx(expected, rel=1e-12)


def test_classical_dispersion_values():
    assert classical_dispersion(OscillatorSpec(ref_level=M)) == 0.0
    assert classical_dispersion(spec_at(0.02 * 100.5)) == pytest.approx(2.8426, abs=1e-4)
    one, two = spec_at(3.0), spec_at(6.0)
    assert classical_dispersion(two) == pytest.approx(2 * classical_dispersion(one), rel=1e-14)


# invariants

@pytest.mark.parametrize("strength", [0.5, 1.5, 3.0])
@pytest.mark.parametrize("m", [50, 100, 200])
def test_restricted_qcc_small_deformation(strength, m):
    sp = OscillatorSpec.from_strength(strength, m)
    assert dispersion(ldos_kernel(sp, "exact")) == pytest.approx(classical_dispersion(sp), rel=0.01)


@pytest.mark.parametrize("strength", [10.0, 20.0, 40.0])
def test_detailed_qcc_cumulative(strength):
    # coarse-grained agreement: cumulative distributions of the classical and
    # uniform kernels over even offsets stay close everywhere
    sp = OscillatorSpec.from_strength(strength, 400)
    u = ldos_kernel(sp, "uniform").weights
    c = ldos_kernel(sp, "classical").weights
    assert np.max(np.abs(np.cumsum(u) - np.cumsum(c))) < 0.05


def _moving_mean_errors(strength):
    sp = OscillatorSpec.from_strength(strength, 400)
    un = ldos_kernel(sp, "uniform")
    cl = ldos_kernel(sp, "classical")
    even = un.offsets % 2 == 0
    u, c, off = un.weights[even], cl.weights[even], un.offsets[even]
    smooth = np.convolve(u, np.ones(5) / 5, mode="same")
    lo, hi = off[c > 0][[0, -1]]
    inner = np.abs(off - (lo + hi) / 2) <= 0.4 * (hi - lo)
    return np.abs(smooth[inner] - c[inner]) / c[inner]


@pytest.mark.xfail(strict=True, reason="5-point mean leaves ~20-30% of the Bessel oscillation near the inner-region edges")
@pytest.mark.parametrize("strength", [10.0, 20.0, 40.0])
def test_detailed_qcc_five_point_mean(strength):
    assert np.max(_moving_mean_errors(strength)) <= 0.15


@pytest.mark.parametrize("strength", [0.01, 0.05, 0.1])
def test_fopt_limit(strength):
    sp = spec_at(strength)
    for n in (M - 2, M + 2):
        assert abs(ldos_uniform(sp, n) - ldos_fopt(sp, n)) <= strength ** 4


@settings(max_examples=25, deadline=None)
@given(strength=st.floats(0.1, 25.0), c=st.floats(0.05, 20.0), method=st.sampled_from(["exact", "uniform", "classical"]))
def test_kernel_depends_on_ratio_only(strength, c, method):
    sp = spec_at(strength)
    scaled = OscillatorSpec(x0=c * sp.x0, dx=c * sp.dx, ref_level=M)
    a, b = ldos_kernel(sp, method), ldos_kernel(scaled, method)
    # adaptive truncation may differ by a level or two on rounding; compare on the union
    levels = np.union1d(a.levels, b.levels)
    diff = [abs(a.weight_of(int(n)) - b.weight_of(int(n))) for n in levels]
    assert max(diff) < 1e-10


@settings(max_examples=25, deadline=None)
@given(strength=st.floats(0.1, 25.0), n=st.integers(40, 160))
def test_exact_kernel_swap_symmetry(strength, n):
    sp = spec_at(strength)
    swapped_x = OscillatorSpec(x0=sp.x2, dx=sp.x1 - sp.x2, ref_level=n)
    assert abs(ldos_exact(sp, n) - ldos_exact(swapped_x, M)) < 1e-10

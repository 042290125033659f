"""
Regime classification: first-order (fopt), Wigner and semiclassical.

The borders are dx_c, where the first-order weights stop being small, and
dx_prt = sqrt(b) dx_c, where the core width reaches the bandwidth. They are
order-of-magnitude borders, so a value exactly on one is assigned to the
higher regime.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import DomainError
from .oscillator import OscillatorSpec
from .ring import RingSpec, characteristic_scales, localization_length, phase_variation

SCHEMA = "ldos1d.regime_report/1"
ORDER = ("fopt", "wigner", "semiclassical")

NOTE_NO_WIGNER_BUMP = "single-bump: no Lorentzian"
NOTE_NARROW_BAND = "b <= 2: dx_prt ~ dx_c, no Wigner regime"
NOTE_LOCALIZATION = ("dx >= dx_c in a disordered ring: eigenstates localize on L_loc < L, "
                     "which replaces L in the ergodic estimates")
NOTE_OSCILLATOR = "oscillator: b = 1 and dx_c = dx_prt = x/E; the border is a crossover at (dx/x)E ~ 1"
NOTE_RIGHT_MOVERS = "ring kernels keep right-moving states only; backscattering is not modelled"


@dataclass(frozen=True)
class OscillatorScales:
    """Oscillator scales: Delta = 1 (hbar omega), b = 1 and dx_c = dx_prt = x/E."""

    x: float
    E: float
    delta: float = 1.0
    b: float = 1.0
    kind: str = "oscillator"

    @property
    def dx_c(self):
        return self.x / self.E

    @property
    def dx_prt(self):
        return self.dx_c

    @property
    def delta_b(self):
        return self.delta * self.b

    def to_dict(self):
        return {"kind": self.kind, "x": self.x, "E": self.E, "delta": self.delta, "delta_b": self.delta_b,
                "b": self.b, "dx_c": self.dx_c, "dx_prt": self.dx_prt}


@dataclass(frozen=True)
class RegimeReport:
    scales: object
    dx: float
    regime: str
    wigner_possible: bool
    loc: Optional[dict] = None
    gamma: Optional[dict] = None
    phase: Optional[dict] = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"schema": SCHEMA, "regime": self.regime, "dx": self.dx, "dx_over_dx_c": self.dx / self.scales.dx_c,
                "wigner_possible": self.wigner_possible, "scales": self.scales.to_dict(),
                "loc": self.loc, "gamma": self.gamma, "phase_variation": self.phase, "notes": list(self.notes)}


def _wigner_possible(scales):
    if scales.kind == "bump":
        return False, NOTE_NO_WIGNER_BUMP
    if scales.b <= 2:
        return False, NOTE_NARROW_BAND
    return True, None


def classify(dx, scales, spec=None):
    """Regime of perturbation ``dx`` given ``scales``.

    Parameters
    ----------
    dx : float
        Positive perturbation strength (its magnitude is used for ring specs).
    scales : RingScales or OscillatorScales
    spec : RingSpec, optional
        Adds the localization estimates and the phase variations.
    """
    if not dx > 0:
        raise DomainError("dx must be positive")
    possible, reason = _wigner_possible(scales)
    if dx < scales.dx_c:
        regime = "fopt"
    elif possible and dx < scales.dx_prt:
        regime = "wigner"
    else:
        regime = "semiclassical"
    notes = [reason] if reason else []
    loc = gamma = phase = None
    if isinstance(scales, OscillatorScales):
        notes.append(NOTE_OSCILLATOR)
    else:
        notes.append(NOTE_RIGHT_MOVERS)
        est = localization_length(scales, dx)
        loc = est.to_dict()
        ratio = (dx / scales.dx_c) ** 2
        # the flat-band estimate and the value that normalizes the flat-band Lorentzian
        gamma = {"flat_estimate": ratio * scales.delta, "golden_rule": 2 * math.pi * ratio * scales.delta}
        if scales.kind == "disorder" and est.caveat:
            notes.append(NOTE_LOCALIZATION)
        if spec is not None:
            bump, dis = phase_variation(spec.with_dx(dx))
            phase = {"bump": bump, "disorder": dis}
    return RegimeReport(scales=scales, dx=float(dx), regime=regime, wigner_possible=possible,
                        loc=loc, gamma=gamma, phase=phase, notes=notes)


def oscillator_scales(spec):
    return OscillatorScales(x=spec.x0, E=spec.ref_energy)


def regime_report(spec):
    """Full report for an oscillator or ring spec. dx (the deformation s x0 for
    the oscillator) must be non-zero."""
    if isinstance(spec, OscillatorSpec):
        return classify(abs(spec.deformation) * spec.x0, oscillator_scales(spec))
    if isinstance(spec, RingSpec):
        return classify(abs(spec.dx), characteristic_scales(spec), spec=spec)
    raise TypeError(f"unsupported spec type {type(spec).__name__}")


def regime_rank(regime):
    return ORDER.index(regime)

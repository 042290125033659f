"""
LDOS kernels of the deformable harmonic oscillator H = (x P)^2/2 + (Q/x)^2/2.

Units: hbar = omega = 1, so E_n = n + 1/2 for every width x. The prepared
state is level m of width x1 = x0, the perturbed basis has width x2 = x0 + dx.

The approximate formulas (uniform, FOPT, classical dispersion, survival)
need a relative deformation "dx/x". We use

    s = (x2^2 - x1^2) / (x2^2 + x1^2) = tanh(ln(x2 / x1)),

which equals dx/x0 to first order. With this choice and E = (E_n + E_m)/2
the Bessel kernel reproduces the edges E_m (x1/x2)^2 and E_m (x2/x1)^2 of
the exact classical support.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .kernel import LdosKernel
from .numerics import bessel_j_pairs, hermite_gauss_overlap, overlap_column

logger = logging.getLogger(__name__)

METHODS = ("classical", "exact", "fopt", "uniform")
ENERGY_CONVENTIONS = ("mean", "reference")


@dataclass(frozen=True)
class OscillatorSpec:
    """Deformable oscillator: unperturbed width ``x0``, perturbation ``dx``, level ``ref_level``."""

    x0: float = 1.0
    dx: float = 0.0
    ref_level: int = 0

    def __post_init__(self):
        if not self.x0 > 0:
            raise ContractError("x0 must be positive")
        if not self.x0 + self.dx > 0:
            raise ContractError("x0 + dx must be positive")
        if abs(self.dx) / self.x0 >= 0.5:
            raise ContractError("|dx|/x0 must be below 0.5 (classically small deformation)")
        if int(self.ref_level) != self.ref_level or self.ref_level < 0:
            raise ContractError("ref_level must be a non-negative integer")
        object.__setattr__(self, "ref_level", int(self.ref_level))

    @classmethod
    def from_strength(cls, strength, ref_level, x0=1.0):
        """Spec whose deformation s satisfies s * E_m = ``strength``."""
        s = strength / (ref_level + 0.5)
        if abs(s) >= 0.6:
            raise ContractError("strength too large for a classically small deformation")
        ratio = math.sqrt((1 + s) / (1 - s))
        return cls(x0=x0, dx=x0 * (ratio - 1), ref_level=ref_level)

    @property
    def x1(self):
        return self.x0

    @property
    def x2(self):
        return self.x0 + self.dx

    @property
    def ratio(self):
        return self.x2 / self.x1

    @property
    def deformation(self):
        """Relative deformation s ~ dx/x (see module docstring)."""
        a, b = self.x1 ** 2, self.x2 ** 2
        return (b - a) / (b + a)

    @property
    def ref_energy(self):
        return self.ref_level + 0.5

    @property
    def strength(self):
        """s * E_m, the single parameter that controls the regime."""
        return self.deformation * self.ref_energy

    def to_dict(self):
        return {"model": "oscillator", "x0": self.x0, "dx": self.dx, "ref_level": self.ref_level,
                "deformation": self.deformation, "strength": self.strength}


def level_energy(n):
    return np.asarray(n) + 0.5


def _support(spec):
    em = spec.ref_energy
    a = em / spec.ratio ** 2
    b = em * spec.ratio ** 2
    return min(a, b), max(a, b)


def ldos_classical(spec, n_energy, desymmetrized=False):
    """Classical density of E_n given the prepared energy E_m.

    ``(1/pi) x1 x2 / sqrt((x2^2 E_n - x1^2 E_m)(x2^2 E_m - x1^2 E_n))`` inside
    the support, 0 outside, ``inf`` exactly on an edge. Halved when
    ``desymmetrized``.
    """
    lo, hi = _support(spec)
    e = float(n_energy)
    if e == lo or e == hi:
        return math.inf
    if not lo < e < hi:
        return 0.0
    density = 1.0 / (math.pi * math.sqrt((e - lo) * (hi - e)))
    return density / 2 if desymmetrized else density


def _classical_cdf(spec, e):
    lo, hi = _support(spec)
    e = np.asarray(e, dtype=float)
    if hi == lo:
        return np.where(e >= lo, 1.0, 0.0)
    u = np.clip((2 * e - lo - hi) / (hi - lo), -1.0, 1.0)
    return 0.5 + np.arcsin(u) / math.pi


def ldos_exact(spec, n):
    """|<n(x0+dx)|m(x0)>|^2."""
    if n < 0:
        raise DomainError("level must be non-negative")
    return hermite_gauss_overlap(n, spec.ref_level, spec.x1, spec.x2) ** 2


def ldos_fopt(spec, n):
    """First-order result delta_nm + (1/4) s^2 (E^2 - 1/4) delta_{|n-m|,2}."""
    m = spec.ref_level
    if n == m:
        return 1.0
    if abs(n - m) != 2:
        return 0.0
    e = 0.5 * (level_energy(n) + spec.ref_energy)
    return 0.25 * spec.deformation ** 2 * (e * e - 0.25)


def _uniform_args(spec, levels, energy):
    if energy == "mean":
        e = 0.5 * (level_energy(levels) + spec.ref_energy)
    elif energy == "reference":
        e = np.full(np.shape(levels), spec.ref_energy)
    else:
        raise ContractError(f"unknown energy convention {energy!r}")
    return spec.deformation * e


def ldos_uniform(spec, n, energy="mean"):
    """Uniform semiclassical kernel [J_{(m-n)/2}(s E)]^2.

    ``energy="mean"`` uses E = (E_n + E_m)/2, ``"reference"`` uses E = E_m.
    """
    diff = spec.ref_level - n
    if diff % 2:
        return 0.0
    z = _uniform_args(spec, np.array([n]), energy)
    return float(bessel_j_pairs([diff // 2], z)[0] ** 2)


def default_window(spec):
    return 2 * math.ceil(abs(spec.strength)) + 40


def ldos_kernel(spec, method, window=None, energy="mean", desymmetrized=True):
    """Tabulate P(n|m) for n in [m - window, m + window] (n >= 0).

    Parameters
    ----------
    method : {"classical", "exact", "fopt", "uniform"}
    window : int, optional
        Half-width in levels; defaults to 2 ceil(s E_m) + 40.
    energy : {"mean", "reference"}
        Energy used in the Bessel argument of the uniform kernel.
    desymmetrized : bool
        Classical kernel only. When true the classical probability is binned
        onto levels of the same parity as m with width-2 bins, which makes it
        comparable entry by entry with the parity-restricted quantum kernels.
        Otherwise unit bins are centered on every level.

    Notes
    -----
    The uniform kernel is renormalized; its raw total (which differs from 1
    at order s^2 with the "mean" convention) is kept in ``metadata["raw_total"]``.
    The FOPT diagonal is compensated to 1 - sum of the off-diagonal weights.
    """
    if method not in METHODS:
        raise ContractError(f"unknown method {method!r}; expected one of {METHODS}")
    strength = abs(spec.strength)
    if window is None:
        window = default_window(spec)
    if window < 2 * math.ceil(strength) + 20:
        raise ContractError(f"window {window} too small for strength {strength:.6g}")
    m = spec.ref_level
    levels = np.arange(max(0, m - window), m + window + 1)
    energies = level_energy(levels)
    meta = {"window": int(window), "strength": spec.strength, "deformation": spec.deformation}
    same_parity = (levels - m) % 2 == 0

    if method == "exact":
        col = overlap_column(spec.ratio, m, int(levels[-1]))
        weights = np.where(same_parity, col[levels] ** 2, 0.0)
    elif method == "uniform":
        meta["energy"] = energy
        orders = np.where(same_parity, (m - levels) // 2, 0)
        amp = bessel_j_pairs(orders, _uniform_args(spec, levels, energy))
        weights = np.where(same_parity, amp ** 2, 0.0)
    elif method == "fopt":
        weights = np.array([ldos_fopt(spec, int(n)) for n in levels])
        off = weights.sum() - 1.0
        meta["valid"] = bool(off <= 1.0)
        weights[levels == m] = max(0.0, 1.0 - off)
    else:
        if desymmetrized:
            half = np.where(same_parity, 1.0, 0.0)
        else:
            half = np.full(levels.shape, 0.5)
        weights = _classical_cdf(spec, energies + half) - _classical_cdf(spec, energies - half)
        weights = np.where(half > 0, weights, 0.0)

    total = float(weights.sum())
    meta["raw_total"] = total
    if method == "exact" or method == "classical":
        meta["truncated"] = bool(total < 1 - 1e-4)
        if meta["truncated"]:
            logger.warning("window %d captures only %.6f of the %s weight", window, total, method)
    kernel = LdosKernel(m, spec.ref_energy, levels, energies, weights, method,
                        desymmetrized=bool(desymmetrized and method == "classical"), metadata=meta)
    if method == "uniform":
        kernel = kernel.normalized()
    return kernel


def dispersion(kernel, tol=1e-6):
    """sqrt(sum_n P(n|m) (E_n - E_m)^2) of a normalized kernel."""
    kernel.require_normalized(tol)
    return math.sqrt(float(np.sum(kernel.weights * kernel.omega ** 2)))


def classical_dispersion(spec):
    """sqrt(2) s E_m."""
    return math.sqrt(2.0) * abs(spec.deformation) * spec.ref_energy

"""
Particle in a ring, H = P^2/2 + dx V(Q), with L = 2 pi, mass 1, hbar = 1.

Unperturbed levels are plane waves with p_n = n and E_n = n^2/2, so the
velocity at the reference level is v_E = m and the level spacing near it is
Delta = v_E. The potential is a sum of signed Gaussian bumps of height V0 and
width ell.

Fourier convention: V~(k) = int_0^L V(Q) exp(-i k Q) dQ, carried with its
sqrt(2 pi): a single bump at Q0 gives V0 ell sqrt(2 pi) exp(-(k ell)^2/2 - i k Q0).
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import linalg, optimize

from .errors import ContractError, DomainError, EvaluationError
from .kernel import LdosKernel

logger = logging.getLogger(__name__)

RING_LENGTH = 2 * math.pi
# Gaussian envelope exp(-(k ell)^2/2) is below 3e-16 beyond k ell = 8.5
_ENVELOPE_CUTOFF = 8.5
_GAP_WIDTHS = 4.0


def _circular_gaps(centers, length):
    c = np.sort(np.asarray(centers, dtype=float))
    if c.size < 2:
        return np.array([length])
    return np.diff(np.concatenate([c, [c[0] + length]]))


@dataclass(frozen=True)
class RingSpec:
    """Ring geometry, Gaussian bump potential and perturbation strength.

    ``bumps`` is a tuple of ``(center, sign)`` pairs. ``seed`` and
    ``realization`` record how a disordered configuration was drawn.
    """

    V0: float
    ell: float
    bumps: tuple
    dx: float
    ref_level: int
    seed: Optional[int] = None
    realization: Optional[int] = None
    L: float = field(default=RING_LENGTH, init=False)
    mass: float = field(default=1.0, init=False)
    hbar: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not self.V0 > 0:
            raise ContractError("V0 must be positive")
        if not 0 < self.ell < self.L / 8:
            raise ContractError("ell must lie in (0, L/8)")
        if int(self.ref_level) != self.ref_level or self.ref_level < 1:
            raise ContractError("ref_level must be a positive integer")
        object.__setattr__(self, "ref_level", int(self.ref_level))
        bumps = tuple((float(c), int(s)) for c, s in self.bumps)
        if not bumps:
            raise ContractError("at least one bump is required")
        for c, s in bumps:
            if not 0 <= c < self.L:
                raise ContractError(f"bump center {c} outside [0, L)")
            if s not in (-1, 1):
                raise ContractError("bump signs must be +1 or -1")
        object.__setattr__(self, "bumps", bumps)
        if len(bumps) > 1:
            gaps = _circular_gaps(self.centers, self.L)
            if np.min(gaps) < _GAP_WIDTHS * self.ell * (1 - 1e-12):
                raise ContractError("bump centers must be separated by at least 4 ell")
        if abs(self.dx) * self.V0 > 0.1 * self.ref_energy:
            raise ContractError("dx V0 must not exceed 0.1 E_m (classically small perturbation)")

    # construction

    @classmethod
    def single_bump(cls, V0, ell, dx, ref_level, center=math.pi, sign=1):
        return cls(V0, ell, ((center, sign),), dx, ref_level)

    @classmethod
    def disorder(cls, V0, ell, dx, ref_level, seed, index=0, n_bumps=None):
        """Random bumps with fair-coin signs and a minimum gap of 4 ell.

        The stream of realization ``index`` is ``default_rng([seed, index])``.
        """
        n_bumps = default_bump_count(ell) if n_bumps is None else int(n_bumps)
        centers, signs = draw_bumps(np.random.default_rng([int(seed), int(index)]), n_bumps, ell)
        return cls(V0, ell, tuple(zip(centers, signs)), dx, ref_level, seed=int(seed), realization=int(index))

    def with_dx(self, dx):
        return replace(self, dx=dx)

    def translated(self, shift):
        bumps = tuple(((c + shift) % self.L, s) for c, s in self.bumps)
        return replace(self, bumps=bumps)

    # derived quantities

    @property
    def kind(self):
        return "bump" if len(self.bumps) == 1 else "disorder"

    @property
    def centers(self):
        return np.array([c for c, _ in self.bumps])

    @property
    def signs(self):
        return np.array([s for _, s in self.bumps], dtype=float)

    @property
    def ref_energy(self):
        return 0.5 * self.ref_level ** 2

    @property
    def velocity(self):
        return float(self.ref_level)

    @property
    def bandwidth(self):
        return self.L / self.ell

    def to_dict(self):
        return {"model": "ring", "kind": self.kind, "V0": self.V0, "ell": self.ell, "dx": self.dx,
                "ref_level": self.ref_level, "L": self.L, "seed": self.seed,
                "realization": self.realization,
                "centers": self.centers.tolist(), "signs": [int(s) for s in self.signs]}

    def realization_record(self):
        """JSON-ready description of the bump configuration."""
        return {"seed": self.seed, "realization": self.realization,
                "centers": self.centers.tolist(), "signs": [int(s) for s in self.signs]}


def default_bump_count(ell, length=RING_LENGTH):
    return max(1, int(math.floor(length / (8 * ell))))


def draw_bumps(rng, n_bumps, ell, length=RING_LENGTH):
    """Uniform configuration of ``n_bumps`` centers on the ring with gaps >= 4 ell.

    Uniform points on the reduced ring of length L - n g are sorted, offset by
    i g, and rotated at random. This samples the same distribution as
    rejection sampling without its exponential cost at high density.
    """
    gap = _GAP_WIDTHS * ell
    spare = length - n_bumps * gap
    if spare < 0:
        raise ContractError(f"{n_bumps} bumps with gap {gap} do not fit on the ring")
    u = np.sort(rng.uniform(0.0, spare, n_bumps))
    centers = (u + gap * np.arange(n_bumps) + rng.uniform(0.0, length)) % length
    signs = rng.choice([-1, 1], size=n_bumps)
    return centers, signs


# potential

def potential_value(spec, Q):
    """V(Q), summing each bump over its nearest periodic images."""
    q = np.asarray(Q, dtype=float)
    d = q[..., None] - spec.centers
    total = np.zeros(q.shape)
    for image in (-spec.L, 0.0, spec.L):
        total += np.sum(spec.signs * np.exp(-((d + image) ** 2) / (2 * spec.ell ** 2)), axis=-1)
    out = spec.V0 * total
    return float(out) if np.ndim(Q) == 0 else out


def potential_fourier(spec, k):
    """Closed-form V~(k) for integer modes k (array or scalar); complex."""
    kk = np.asarray(k)
    if np.any(np.abs(kk) > 8 * spec.L / spec.ell):
        raise DomainError("|k| must not exceed 8 L / ell")
    kf = kk.astype(float)
    envelope = spec.V0 * spec.ell * math.sqrt(2 * math.pi) * np.exp(-0.5 * (kf * spec.ell) ** 2)
    phases = np.exp(-1j * np.multiply.outer(kf, spec.centers)) @ spec.signs
    out = envelope * phases
    return complex(out) if np.ndim(k) == 0 else out


def _potential_on_grid(spec, n_grid):
    """V(Q_j) on Q_j = j L / n_grid, adding each bump only where it exceeds ~1e-18."""
    h = spec.L / n_grid
    reach = int(math.ceil(9.2 * spec.ell / h))
    offsets = np.arange(-reach, reach + 1)
    v = np.zeros(n_grid)
    for c, s in spec.bumps:
        j0 = int(round(c / h))
        idx = j0 + offsets
        g = s * spec.V0 * np.exp(-((idx * h - c) ** 2) / (2 * spec.ell ** 2))
        np.add.at(v, idx % n_grid, g)
    return v


# matrices and scales

@dataclass(frozen=True, eq=False)
class BandedMatrix:
    """E + dx B restricted to ``levels`` with B stored in upper banded form.

    ``upper[half_bandwidth - d, j]`` holds ``B[j - d, j]`` (scipy's layout).
    B is Hermitian, B_nm = conj(B_mn); it is real symmetric only when the
    potential is symmetric about Q = 0.
    """

    levels: np.ndarray
    diagonal: np.ndarray
    half_bandwidth: int
    upper: np.ndarray

    @property
    def dimension(self):
        return int(self.levels.size)

    def element(self, n, m):
        i = int(n - self.levels[0])
        j = int(m - self.levels[0])
        if not (0 <= i < self.dimension and 0 <= j < self.dimension):
            raise ContractError("level outside the matrix window")
        if abs(i - j) > self.half_bandwidth:
            return 0.0j
        if i <= j:
            return complex(self.upper[self.half_bandwidth - (j - i), j])
        return complex(np.conj(self.upper[self.half_bandwidth - (i - j), i]))

    def dense(self):
        n = self.dimension
        out = np.zeros((n, n), dtype=complex)
        for d in range(self.half_bandwidth + 1):
            vals = self.upper[self.half_bandwidth - d, d:]
            out[np.arange(n - d), np.arange(d, n)] = vals
            if d:
                out[np.arange(d, n), np.arange(n - d)] = np.conj(vals)
        return out


def half_bandwidth(spec):
    """ceil(L/ell) plus a guard reaching k ell = 8.5 on the Gaussian envelope."""
    base = int(math.ceil(spec.L / spec.ell))
    guard = int(math.ceil((_ENVELOPE_CUTOFF - spec.L) / spec.ell))
    return base + max(guard, 0)


def coupling_row(spec, max_offset=None):
    """Offsets q = -K..K and B_{m+q, m} = V~(q)/L."""
    k = half_bandwidth(spec) if max_offset is None else int(max_offset)
    q = np.arange(-k, k + 1)
    return q, potential_fourier(spec, q) / spec.L


@dataclass(frozen=True)
class RingScales:
    """Characteristic scales at the reference level (hbar = mass = 1)."""

    delta: float
    delta_b: float
    b: float
    sigma: float
    v_E: float
    k0: float
    dx_c: float
    dx_prt: float
    kind: str
    ref_level: int
    L: float = RING_LENGTH
    ell: float = 0.0

    def to_dict(self):
        return {k: getattr(self, k) for k in ("delta", "delta_b", "b", "sigma", "v_E", "k0",
                                              "dx_c", "dx_prt", "kind", "ref_level", "L", "ell")}


def characteristic_scales(spec):
    """Delta, Delta_b, b, sigma and the borders dx_c = Delta/sigma, dx_prt = sqrt(b) dx_c.

    sigma follows the scaling formulas (ell/L) V0 for one bump and
    (ell/L)^(1/2) V0 for disorder; :func:`in_band_rms` measures it.
    """
    v = spec.velocity
    delta = 2 * math.pi * spec.hbar * v / spec.L
    delta_b = 2 * math.pi * spec.hbar * v / spec.ell
    b = spec.L / spec.ell
    ratio = spec.ell / spec.L
    sigma = ratio * spec.V0 if spec.kind == "bump" else math.sqrt(ratio) * spec.V0
    dx_c = delta / sigma
    return RingScales(delta=delta, delta_b=delta_b, b=b, sigma=sigma, v_E=v, k0=spec.V0 / (spec.hbar * v),
                      dx_c=dx_c, dx_prt=math.sqrt(b) * dx_c, kind=spec.kind, ref_level=spec.ref_level,
                      L=spec.L, ell=spec.ell)


def in_band_rms(spec):
    """RMS of |B_{m+q, m}| over 1 <= |q| <= b/2."""
    k = int(math.floor(spec.bandwidth / 2))
    q = np.concatenate([np.arange(-k, 0), np.arange(1, k + 1)])
    return float(np.sqrt(np.mean(np.abs(potential_fourier(spec, q) / spec.L) ** 2)))


def sigma_calibration(spec):
    """Prediction of :func:`in_band_rms` divided by the scaling formula for sigma.

    Random signs give <|V~(q)|^2> = N_b (V0 ell)^2 2 pi exp(-(q ell)^2), hence the
    constant sqrt(2 pi N_b ell/L <exp(-(q ell)^2)>), the mean taken over the window.
    """
    k = int(math.floor(spec.bandwidth / 2))
    q = np.arange(1, k + 1)
    mean_env = float(np.mean(np.exp(-(q * spec.ell) ** 2)))
    n_b = len(spec.bumps)
    if spec.kind == "bump":
        return math.sqrt(2 * math.pi * mean_env)
    return math.sqrt(2 * math.pi * n_b * spec.ell / spec.L * mean_env)


def spectral_width_levels(spec):
    """dx sqrt(sum_n |B_nm|^2) in units of Delta, the first-moment width of the LDOS."""
    _, row = coupling_row(spec)
    return abs(spec.dx) * math.sqrt(float(np.sum(np.abs(row) ** 2))) / characteristic_scales(spec).delta


def minimum_dimension(spec):
    return int(math.ceil(8 * spec.bandwidth + 4 * spectral_width_levels(spec)))


def default_dimension(spec):
    """max(8 b, 16 ceil(dE/Delta)) rounded up to satisfy the precondition."""
    n = max(8 * spec.bandwidth, 16 * math.ceil(spectral_width_levels(spec)), minimum_dimension(spec))
    return int(math.ceil(n))


def perturbation_matrix(spec, N, center=None):
    """Banded representation of E + dx B on levels center - N/2 .. center + N/2."""
    center = spec.ref_level if center is None else int(center)
    N = int(N)
    if N < minimum_dimension(spec):
        raise ContractError(f"N={N} below the required {minimum_dimension(spec)} levels")
    levels = np.arange(center - N // 2, center - N // 2 + N)
    k = min(half_bandwidth(spec), N - 1)
    vt = potential_fourier(spec, np.arange(-k, 1)) / spec.L
    upper = np.zeros((k + 1, N), dtype=complex)
    # B_{j-d, j} = V~(p_{j-d} - p_j)/L = V~(-d)/L
    for d in range(k + 1):
        upper[k - d, d:] = vt[k - d]
    return BandedMatrix(levels=levels, diagonal=0.5 * levels.astype(float) ** 2,
                        half_bandwidth=k, upper=upper)


# semiclassical overlaps

def phase_function(spec):
    """Callable phi(Q) = (dx/v_E) int_0^Q (V - <V>) dQ' (periodic) for quadrature checks."""
    k = half_bandwidth(spec)
    q = np.arange(1, k + 1)
    vt = potential_fourier(spec, q) / spec.L
    scale = spec.dx / spec.velocity

    def phi(Q):
        Q = np.asarray(Q, dtype=float)
        e = np.exp(1j * np.multiply.outer(Q, q))
        # V - <V> = 2 Re sum_{k>0} V~(k)/L e^{ikQ}
        series = 2 * np.real((e - 1) @ (vt / (1j * q)))
        return scale * series

    return phi


def _grid_size(spec):
    kv = _ENVELOPE_CUTOFF / spec.ell
    slope = abs(spec.dx) / spec.velocity * spec.V0 * max(1, _max_overlap(spec))
    n = 4 * (kv + slope) + 64
    return 1 << int(math.ceil(math.log2(n)))


def _max_overlap(spec):
    # dense configurations can stack shoulders of neighbouring bumps
    return 1.0 if spec.kind == "bump" else 1.1


def _phase_on_grid(spec, n_grid):
    v = _potential_on_grid(spec, n_grid)
    coeff = np.fft.rfft(v) / n_grid
    kk = np.arange(coeff.size)
    integ = np.zeros_like(coeff)
    integ[1:] = coeff[1:] / (1j * kk[1:])
    if n_grid % 2 == 0:
        integ[-1] = 0.0
    # periodic antiderivative of V - <V>; the constant offset is a global phase
    antideriv = np.fft.irfft(integ * n_grid, n=n_grid)
    return spec.dx / spec.velocity * antideriv, float(coeff[0].real)


def _kernel_on_grid(spec, n_grid):
    phase, mean_v = _phase_on_grid(spec, n_grid)
    amp = np.fft.fft(np.exp(1j * phase)) / n_grid
    return np.abs(amp) ** 2, mean_v


def semiclassical_weights(spec, n_levels, tol=1e-12):
    """Weights P(m+q|m) for q = -n_levels..n_levels, the grid doubled until converged."""
    n_grid = max(_grid_size(spec), 1 << int(math.ceil(math.log2(4 * n_levels + 8))))
    prev, mean_v = _kernel_on_grid(spec, n_grid)
    while True:
        cur, mean_v = _kernel_on_grid(spec, 2 * n_grid)
        q = np.arange(-n_levels, n_levels + 1)
        a, b = prev[q % n_grid], cur[q % (2 * n_grid)]
        if np.max(np.abs(a - b)) <= tol:
            return b, mean_v, 2 * n_grid
        n_grid *= 2
        if n_grid > 1 << 24:
            raise EvaluationError("semiclassical overlap grid did not converge")
        prev = cur


def default_levels(spec):
    """Half-width covering the phase slope plus the Gaussian band."""
    slope = abs(spec.dx) / spec.velocity * spec.V0 * _max_overlap(spec)
    return int(math.ceil(1.5 * slope + 10 / spec.ell)) + 20


def semiclassical_overlap_kernel(spec, n_levels=None):
    """|<n(x)|m(x0)>|^2 from the overlap of semiclassical plane-wave-like states.

    The phase is dx/v_E times the periodic antiderivative of V - <V>. The
    constant <V> is the first-order level shift dx B_mm, which is carried in
    the perturbed energies E_n + dx B_mm. The trapezoid sums for all shifts
    are one FFT of exp(i phi), and the grid is doubled until the tabulated
    weights change by less than 1e-12.
    """
    if spec.ref_level < 10:
        raise ContractError("semiclassical overlaps need p_m >= 10 (2 pi / L)")
    n_levels = default_levels(spec) if n_levels is None else int(n_levels)
    weights, mean_v, n_grid = semiclassical_weights(spec, n_levels)
    levels = spec.ref_level + np.arange(-n_levels, n_levels + 1)
    energies = 0.5 * levels.astype(float) ** 2 + spec.dx * mean_v
    total = float(np.sum(weights))
    meta = {"n_levels": n_levels, "grid": n_grid, "captured": total,
            "truncated": bool(total < 1 - 1e-4), "spec": spec.to_dict()}
    if meta["truncated"]:
        logger.warning("semiclassical kernel window captures %.6f of the weight", total)
    return LdosKernel(spec.ref_level, spec.ref_energy, levels, energies, weights, "semiclassical",
                      metadata=meta)


def fopt_overlap(spec, n):
    """First-order weight dx^2 |B_nm|^2 / (E_n - E_m)^2 for n != m."""
    m = spec.ref_level
    n = int(n)
    if n == m:
        raise ContractError("fopt_overlap is defined for n != m; the diagonal follows from normalization")
    q = n - m
    if abs(q) > 8 * spec.L / spec.ell:
        return 0.0
    b = abs(potential_fourier(spec, q)) / spec.L
    return float(spec.dx ** 2 * b ** 2 / (0.5 * n * n - spec.ref_energy) ** 2)


def fopt_kernel(spec, n_levels=None):
    n_levels = default_levels(spec) if n_levels is None else int(n_levels)
    levels = spec.ref_level + np.arange(-n_levels, n_levels + 1)
    w = np.array([0.0 if n == spec.ref_level else fopt_overlap(spec, n) for n in levels])
    off = float(w.sum())
    w[levels == spec.ref_level] = max(0.0, 1.0 - off)
    return LdosKernel(spec.ref_level, spec.ref_energy, levels, 0.5 * levels.astype(float) ** 2, w, "fopt",
                      metadata={"valid": bool(off <= 1.0), "spec": spec.to_dict()})


def phase_variation(spec):
    """(dphi_bump, dphi_disorder) = (dx k0 ell, dx sqrt(b) k0 ell)."""
    k0 = spec.V0 / (spec.hbar * spec.velocity)
    bump = abs(spec.dx) * k0 * spec.ell
    return bump, bump * math.sqrt(spec.bandwidth)


# disorder ensemble

def _realization_weights(args):
    template, seed, index, n_levels = args
    spec = RingSpec.disorder(template.V0, template.ell, template.dx, template.ref_level, seed,
                             index=index, n_bumps=len(template.bumps))
    weights, mean_v, _ = semiclassical_weights(spec, n_levels)
    return weights, mean_v


def lorentzian_kappa(spec):
    """Momentum half-width kappa = c_corr dx^2 k0^2 ell, c_corr = pi N_b ell / L.

    The Gaussian-bump correlation <V(Q)V(Q+r)> = (N_b/L) V0^2 sqrt(pi) ell exp(-r^2/4 ell^2)
    integrates to 2 pi (N_b/L) V0^2 ell^2, which fixes c_corr.
    """
    k0 = spec.V0 / spec.velocity
    c_corr = math.pi * len(spec.bumps) * spec.ell / spec.L
    return c_corr * spec.dx ** 2 * k0 ** 2 * spec.ell


def lorentzian_kernel(spec, n_levels):
    """Closed-form disorder average: (1/L) 2 kappa/(kappa^2 + q^2), normalized over the window."""
    q = np.arange(-n_levels, n_levels + 1)
    levels = spec.ref_level + q
    kappa = lorentzian_kappa(spec)
    if kappa == 0:
        w = (q == 0).astype(float)
    else:
        w = (2 * kappa / spec.L) / (kappa ** 2 + q.astype(float) ** 2)
    raw = float(w.sum())
    meta = {"kappa": kappa, "gamma": 2 * spec.velocity * kappa, "raw_total": raw,
            "c_corr": math.pi * len(spec.bumps) * spec.ell / spec.L}
    return LdosKernel(spec.ref_level, spec.ref_energy, levels, 0.5 * levels.astype(float) ** 2,
                      w / raw, "lorentzian", metadata=meta)


def disorder_averaged_ldos(spec, realizations, seed, n_levels=None, jobs=1, rtol=None):
    """Monte-Carlo mean of the semiclassical kernel over disorder, and its closed form.

    Realization ``i`` uses ``default_rng([seed, i])`` for its bump positions and
    signs. The kernels are collected in index order before reduction, so the
    result is bit-identical for any ``jobs``.

    Returns
    -------
    (LdosKernel, LdosKernel)
        The ensemble mean (with ``stderr``) and the Lorentzian closed form.
    """
    if spec.kind != "disorder":
        raise ContractError("disorder averaging needs a multi-bump template spec")
    realizations = int(realizations)
    if realizations < 100:
        raise ContractError("at least 100 realizations are required")
    n_levels = default_levels(spec) if n_levels is None else int(n_levels)
    tasks = [(spec, int(seed), i, n_levels) for i in range(realizations)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            results = list(pool.map(_realization_weights, tasks, chunksize=max(1, realizations // (4 * jobs))))
    else:
        results = [_realization_weights(t) for t in tasks]
    stack = np.stack([w for w, _ in results])
    mean = stack.mean(axis=0)
    stderr = stack.std(axis=0, ddof=1) / math.sqrt(realizations)
    mean_shift = float(np.mean([mv for _, mv in results]))
    levels = spec.ref_level + np.arange(-n_levels, n_levels + 1)
    energies = 0.5 * levels.astype(float) ** 2 + spec.dx * mean_shift
    closed = lorentzian_kernel(spec, n_levels)
    meta = {"realizations": realizations, "seed": int(seed), "n_bumps": len(spec.bumps),
            "n_levels": n_levels, "captured": float(mean.sum())}
    if rtol is not None:
        core = np.abs(levels - spec.ref_level) <= 3 * max(1.0, 2 * closed.metadata["kappa"])
        rel = np.max(stderr[core] / np.maximum(mean[core], 1e-300))
        meta["max_rel_stderr"] = float(rel)
        if rel > rtol:
            meta["warning"] = f"relative standard error {rel:.3g} exceeds {rtol:.3g}; add realizations"
    mc = LdosKernel(spec.ref_level, spec.ref_energy, levels, energies, mean, "disorder_mc",
                    stderr=stderr, metadata=meta)
    return mc, closed


# Wigner Lorentzian

def wigner_lorentzian(scales, dx, band_profile):
    """Core-tail kernel dx^2 |B_q|^2 / ((Gamma/2)^2 + (Delta q)^2), Gamma fixed by normalization.

    Parameters
    ----------
    scales : RingScales
    dx : float
    band_profile : array_like or callable
        |B_{m+q, m}|^2 for q = -K..K (odd-length array centred on q = 0) or a
        callable of the integer offset array.
    """
    if callable(band_profile):
        k = int(math.ceil(_ENVELOPE_CUTOFF * scales.b / (2 * math.pi))) if scales.b else 0
        q = np.arange(-k, k + 1)
        prof = np.asarray(band_profile(q), dtype=float)
    else:
        prof = np.asarray(band_profile, dtype=float)
        if prof.ndim != 1 or prof.size % 2 == 0:
            raise ContractError("band_profile must be an odd-length 1-d array centred on q = 0")
        k = prof.size // 2
        q = np.arange(-k, k + 1)
    if dx < scales.dx_c or dx > scales.dx_prt:
        logger.warning("dx=%g outside the Wigner window [%g, %g]", dx, scales.dx_c, scales.dx_prt)
    omega = scales.delta * q
    numer = dx ** 2 * prof

    def excess(log_gamma):
        g = math.exp(log_gamma)
        return float(np.sum(numer / ((g / 2) ** 2 + omega ** 2))) - 1.0

    lo, hi = math.log(1e-12 * scales.delta), math.log(1e3 * scales.delta)
    f_lo, f_hi = excess(lo), excess(hi)
    if not (f_lo > 0 > f_hi):
        raise ContractError("no Gamma in [1e-12, 1e3] Delta normalizes the Lorentzian")
    root = optimize.brentq(excess, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    gamma = math.exp(root)
    w = numer / ((gamma / 2) ** 2 + omega ** 2)
    levels = scales.ref_level + q
    return LdosKernel(scales.ref_level, 0.5 * scales.ref_level ** 2, levels,
                      0.5 * levels.astype(float) ** 2, w, "wigner",
                      metadata={"gamma": gamma, "dx": dx, "flat_estimate": (dx / scales.dx_c) ** 2 * scales.delta})


# diagonalization oracle

def diagonalization(spec, N=None):
    """Eigenvalues and eigenvectors of E + dx B on the default window."""
    N = default_dimension(spec) if N is None else int(N)
    mat = perturbation_matrix(spec, N)
    band = spec.dx * mat.upper.copy()
    band[-1] = band[-1] + mat.diagonal
    try:
        evals, evecs = linalg.eig_banded(band, lower=False, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        diag = {"dimension": mat.dimension, "half_bandwidth": mat.half_bandwidth,
                "max_abs": float(np.max(np.abs(band)))}
        raise EvaluationError(f"banded eigensolver failed: {exc}; {diag}") from exc
    return mat, evals, evecs


def diagonalization_kernel(spec, N=None):
    """P(n|m) = |<n(dx)|m(0)>|^2 from diagonalizing E + dx B.

    Perturbed states are labelled by energy order on the window; their
    energies are the eigenvalues.
    """
    mat, evals, evecs = diagonalization(spec, N)
    col = spec.ref_level - int(mat.levels[0])
    weights = np.abs(evecs[col, :]) ** 2
    edge = max(1, mat.dimension // 20)
    leaked = float(weights[:edge].sum() + weights[-edge:].sum())
    if leaked > 1e-6:
        logger.warning("diagonalization window leaks %.3g of the weight to its edges", leaked)
    meta = {"dimension": mat.dimension, "half_bandwidth": mat.half_bandwidth, "edge_weight": leaked,
            "spec": spec.to_dict()}
    return LdosKernel(spec.ref_level, spec.ref_energy, mat.levels, evals, weights, "diagonalization",
                      metadata=meta)


def participation_lengths(spec, N=None, count=5, n_grid=None):
    """Position-space participation lengths 1/int |psi|^4 of the eigenstates
    with the largest overlap on level m (plane-wave synthesis).

    An ergodic state on the ring gives L; localized states give less.
    """
    mat, evals, evecs = diagonalization(spec, N)
    col = spec.ref_level - int(mat.levels[0])
    order = np.argsort(-np.abs(evecs[col, :]))[:count]
    n = mat.dimension
    n_grid = n_grid or 1 << int(math.ceil(math.log2(4 * n)))
    out = []
    for k in order:
        c = np.zeros(n_grid, dtype=complex)
        # psi(Q) = L^{-1/2} sum_n c_n e^{i n Q}; shifting n by levels[0] is a pure phase
        c[:n] = evecs[:, k]
        psi = np.fft.ifft(c) * n_grid / math.sqrt(spec.L)
        dq = spec.L / n_grid
        out.append(1.0 / float(np.sum(np.abs(psi) ** 4) * dq))
    return np.array(out)


# Lorentzian fit

@dataclass(frozen=True)
class LorentzianFit:
    """Fit of A / (1 + (q/kappa)^2) to a kernel over |q| <= window_factor * 2 kappa."""

    amplitude: float
    kappa: float
    gamma: float
    r2: float
    points: int
    window: int


def _half_width_guess(q, w):
    peak = np.max(w)
    above = np.abs(q[w >= peak / 2])
    return max(0.5, float(above.max()) if above.size else 0.5)


def fit_lorentzian(kernel, velocity=None, window_factor=3.0, iterations=20):
    """Least-squares Lorentzian fit over the core |q| <= window_factor * Gamma.

    Gamma is the full width at half maximum in energy (2 v_E kappa); the
    window is re-centred on the fitted width until it stops changing.
    """
    q = kernel.offsets.astype(float)
    w = kernel.weights
    v = float(kernel.ref_level) if velocity is None else float(velocity)
    kappa = _half_width_guess(q, w)
    amp = float(np.max(w))

    def model(x, a, k):
        return a / (1 + (x / k) ** 2)

    window = None
    for _ in range(iterations):
        new_window = max(2, int(math.ceil(window_factor * 2 * kappa)))
        if new_window == window:
            break
        window = new_window
        sel = np.abs(q) <= window
        try:
            (amp, kappa), _ = optimize.curve_fit(model, q[sel], w[sel], p0=(amp, kappa),
                                                 bounds=([0, 1e-6], [np.inf, np.inf]), maxfev=20000)
        except RuntimeError as exc:
            raise EvaluationError(f"Lorentzian fit failed: {exc}") from exc
    sel = np.abs(q) <= window
    resid = w[sel] - model(q[sel], amp, kappa)
    tot = w[sel] - np.mean(w[sel])
    r2 = 1.0 - float(np.sum(resid ** 2) / np.sum(tot ** 2))
    return LorentzianFit(amplitude=float(amp), kappa=float(kappa), gamma=2 * v * float(kappa),
                         r2=r2, points=int(np.count_nonzero(sel)), window=int(window))


# localization

@dataclass(frozen=True)
class LocalizationEstimate:
    born: float
    transfer: float
    fopt_safe: bool
    born_valid: bool
    caveat: bool

    def to_dict(self):
        return {"born": _finite_or_marker(self.born), "transfer": _finite_or_marker(self.transfer),
                "fopt_safe": self.fopt_safe, "born_valid": self.born_valid, "caveat": self.caveat}


def _finite_or_marker(x):
    return x if math.isfinite(x) else "inf"


def localization_length(scales, dx, L=None, ell=None, g=1.0):
    """Born estimate L (dx_c/dx)^2 = ell (dx_prt/dx)^2 and transfer-matrix estimate ell/ln(1/g).

    The Born value is evaluated in whichever of its two equal forms is
    closer to its own crossover, so that born(dx_c) = L and born(dx_prt) = ell
    hold without rounding. ``caveat`` is set for dx >= dx_c, where L_loc < L
    and the ergodic (uniform in Q) semiclassical picture no longer applies.
    """
    L = scales.L if L is None else float(L)
    ell = scales.ell if ell is None else float(ell)
    if not dx > 0:
        raise DomainError("dx must be positive")
    if not 0 < g <= 1:
        raise DomainError("transmission g must lie in (0, 1]")
    if dx * dx > scales.dx_c * scales.dx_prt:
        born = ell * (scales.dx_prt / dx) ** 2
    else:
        born = L * (scales.dx_c / dx) ** 2
    transfer = math.inf if g == 1 else ell / math.log(1 / g)
    return LocalizationEstimate(born=born, transfer=transfer, fopt_safe=bool(dx < scales.dx_c),
                                born_valid=bool(dx < scales.dx_prt), caveat=bool(dx >= scales.dx_c))

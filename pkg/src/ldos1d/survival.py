"""
Survival probability P(t) = |<m(x0)| exp(-i H(x0 + dx) t) |m(x0)>|^2 of an
oscillator eigenstate after a sudden change of the width.

Four closed forms are provided alongside the Fourier route from any LDOS
kernel. Times are in units of 1/omega_osc; the revival period is pi because
the coupled levels are spaced by 2. All closed forms use E = E_m.
"""

import math

import numpy as np

from .errors import ContractError
from .kernel import SurvivalSeries
from .numerics import bessel_j_table, kernel_to_amplitude

METHODS = ("uniform", "perturbative", "classical_time", "classical_energy", "fourier_of_kernel")
DEFAULT_SAMPLES = 2048
SINGULAR_TOL = 1e-9 * math.pi


def default_times(samples=DEFAULT_SAMPLES):
    """``samples`` equally spaced times covering one revival period [0, pi]."""
    return np.linspace(0.0, math.pi, samples)


def _j0_squared(z):
    z = np.asarray(z, dtype=float)
    return bessel_j_table(0, z)[..., 0] ** 2


def _scalar_or_array(t, values):
    return float(values) if np.ndim(t) == 0 else values


def survival_uniform(spec, t):
    """[J_0(2 s E sin t)]^2, the Fourier transform of the uniform kernel."""
    t_arr = np.asarray(t, dtype=float)
    return _scalar_or_array(t, _j0_squared(2 * spec.strength * np.sin(t_arr)))


def survival_perturbative(spec, t):
    """1 - 2 s^2 E^2 sin^2 t, returned unclipped (negative once the expansion fails)."""
    t_arr = np.asarray(t, dtype=float)
    return _scalar_or_array(t, 1.0 - 2.0 * spec.strength ** 2 * np.sin(t_arr) ** 2)


def classical_time_singular(t):
    """True where t lies within 1e-9 pi of a multiple of pi."""
    t = np.asarray(t, dtype=float)
    frac = np.abs(t - math.pi * np.round(t / math.pi))
    return frac <= SINGULAR_TOL


def survival_classical_time(spec, t):
    """1/|2 pi s E sin t|; ``inf`` marks the caustics at multiples of pi."""
    t_arr = np.asarray(t, dtype=float)
    singular = classical_time_singular(t_arr)
    with np.errstate(divide="ignore"):
        values = 1.0 / np.abs(2 * math.pi * spec.strength * np.sin(t_arr))
    values = np.where(singular | ~np.isfinite(values), np.inf, values)
    return _scalar_or_array(t, values)


def survival_classical_energy(spec, t):
    """[J_0(2 s E t)]^2, the Fourier transform of the classical energy distribution."""
    t_arr = np.asarray(t, dtype=float)
    return _scalar_or_array(t, _j0_squared(2 * spec.strength * t_arr))


def survival_from_kernel(kernel, times=None, tol=1e-6):
    """P(t) = |sum_n P(n|m) exp(-i (E_n - E_m) t)|^2 for a normalized kernel."""
    times = default_times() if times is None else np.asarray(times, dtype=float)
    amp = kernel_to_amplitude(kernel, times, tol=tol)
    values = np.minimum(np.abs(amp) ** 2, 1.0)
    meta = {"kernel_method": kernel.method, "ref_level": int(kernel.ref_level)}
    return SurvivalSeries(times, values, "fourier_of_kernel", metadata=meta)


_CLOSED_FORMS = {
    "uniform": survival_uniform,
    "perturbative": survival_perturbative,
    "classical_time": survival_classical_time,
    "classical_energy": survival_classical_energy,
}


def survival_series(spec, method, times=None, kernel_method="uniform"):
    """Sample one of the survival methods on ``times`` (default: 2048 points on [0, pi]).

    For ``method="fourier_of_kernel"`` the oscillator kernel of ``kernel_method``
    is built with its default window and transformed.
    """
    if method not in METHODS:
        raise ContractError(f"unknown survival method {method!r}; expected one of {METHODS}")
    times = default_times() if times is None else np.asarray(times, dtype=float)
    meta = {"spec": spec.to_dict()}
    if method == "fourier_of_kernel":
        from .oscillator import ldos_kernel

        series = survival_from_kernel(ldos_kernel(spec, kernel_method), times)
        return SurvivalSeries(times, series.values, method, metadata={**meta, **series.metadata})
    values = np.asarray(_CLOSED_FORMS[method](spec, times), dtype=float)
    masked = None
    if method == "classical_time":
        masked = ~np.isfinite(values)
    elif method == "perturbative":
        meta["valid"] = bool(np.all(values >= 0))
    return SurvivalSeries(times, values, method, masked=masked, metadata=meta)


def _window_means(values, masked, width):
    """Centred running means over ``width`` samples; NaN wherever the window touches a masked sample."""
    n = values.size
    half = width // 2
    clean = np.where(masked, 0.0, values)
    csum = np.concatenate([[0.0], np.cumsum(clean)])
    cbad = np.concatenate([[0], np.cumsum(masked.astype(np.int64))])
    out = np.full(n, np.nan)
    idx = np.arange(half, n - half)
    lo, hi = idx - half, idx + half + 1
    ok = (cbad[hi] - cbad[lo]) == 0
    out[idx[ok]] = (csum[hi] - csum[lo])[ok] / (hi - lo)[ok]
    return out


def smoothed_compare(series_a, series_b, window, t_range=None, relative=False):
    """Largest deviation between the running means of two series on a common grid.

    Parameters
    ----------
    series_a, series_b : SurvivalSeries
    window : float
        Width of the centred moving average in time units; at least 5 grid steps.
    t_range : (float, float), optional
        Only window centres inside this interval are compared.
    relative : bool
        Divide each deviation by the smoothed magnitude of ``series_b``.

    Returns
    -------
    float
        Windows touching a masked sample of either series are skipped.
    """
    ta, tb = series_a.times, series_b.times
    if ta.shape != tb.shape or not np.array_equal(ta, tb):
        raise ContractError("series must share the same time grid")
    steps = np.diff(ta)
    if steps.size == 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ContractError("smoothed_compare needs a uniform time grid")
    width = int(round(window / steps[0]))
    if width < 5:
        raise ContractError(f"window {window} spans fewer than 5 grid steps")
    width += 1 - width % 2
    ma = _window_means(series_a.values, series_a.masked, width)
    mb = _window_means(series_b.values, series_b.masked, width)
    keep = np.isfinite(ma) & np.isfinite(mb)
    if t_range is not None:
        keep &= (ta >= t_range[0]) & (ta <= t_range[1])
    if not np.any(keep):
        raise ContractError("no comparable windows")
    dev = np.abs(ma[keep] - mb[keep])
    if relative:
        dev = dev / np.abs(mb[keep])
    return float(np.max(dev))

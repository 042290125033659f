"""
Special functions and quadrature used by the physics modules.

Contents
--------
bessel_j, bessel_j_table, bessel_j_pairs
    Integer-order Bessel functions of the first kind by Miller's backward
    recurrence, normalized with J_0 + 2 sum_k J_2k = 1.
hermite_gauss_overlap, overlap_column
    Overlaps <n(x2)|m(x1)> of eigenstates of two harmonic oscillators of
    different widths. Evaluated by a ladder-operator recurrence in extended
    precision; the derivation is in docs/hermite_overlap.md.
oscillatory_phase_integral
    (1/L) int_0^L exp[-i(k Q - phase(Q))] dQ by trapezoid rule with grid
    doubling.
kernel_to_amplitude
    F(t) = sum_n P(n|m) exp[-i (E_n - E_m) t].
"""

import math
from functools import lru_cache

import numpy as np

from .errors import ContractError, DomainError, EvaluationError

MAX_BESSEL_ORDER = 1000
MAX_BESSEL_ARG = 1000.0
MAX_OVERLAP_LEVEL = 1000

_RESCALE = 1e250
_TINY_ARG = 1e-8


# # Bessel functions

def _start_order(nmax, xmax):
    base = max(nmax, int(math.ceil(xmax)))
    start = base + 30 + int(math.sqrt(160.0 * max(base, 1)))
    return start + (start % 2)


def _miller(nmax, x):
    """J_0..J_nmax at positive arguments x (1-d array), shape (len(x), nmax+1)."""
    start = _start_order(nmax, float(np.max(x)))
    table = np.zeros((x.size, nmax + 1))
    j_next = np.zeros_like(x)
    j = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    two_over_x = 2.0 / x
    for k in range(start, 0, -1):
        # j holds J_k, j_next holds J_{k+1}; step down to J_{k-1}
        j_prev = k * two_over_x * j - j_next
        j_next, j = j, j_prev
        order = k - 1
        if order % 2 == 0:
            norm += j if order == 0 else 2.0 * j
        if order <= nmax:
            table[:, order] = j
        big = np.abs(j) > _RESCALE
        if np.any(big):
            j[big] /= _RESCALE
            j_next[big] /= _RESCALE
            norm[big] /= _RESCALE
            table[big] /= _RESCALE
    return table / norm[:, None]


def _series(nmax, x):
    # two leading terms of the ascending series, adequate for |x| < 1e-8
    n = np.arange(nmax + 1)
    half = x[:, None] / 2.0
    with np.errstate(divide="ignore", under="ignore"):
        lead = np.exp(n * np.log(half) - np.array([math.lgamma(k + 1) for k in n]))
    lead[:, 0] = 1.0
    return lead * (1.0 - half**2 / (n + 1))


def bessel_j_table(max_order, args):
    """Bessel functions J_0(z) ... J_max_order(z) for every z in ``args``.

    Parameters
    ----------
    max_order : int
        Highest order returned.
    args : array_like
        Real arguments, |z| <= 1000.

    Returns
    -------
    ndarray, shape ``np.shape(args) + (max_order + 1,)``
    """
    max_order = int(max_order)
    z = np.asarray(args, dtype=float)
    if max_order < 0 or max_order > MAX_BESSEL_ORDER:
        raise DomainError(f"Bessel order {max_order} outside [0, {MAX_BESSEL_ORDER}]")
    if not np.all(np.isfinite(z)) or np.any(np.abs(z) > MAX_BESSEL_ARG):
        raise DomainError(f"Bessel argument outside [-{MAX_BESSEL_ARG}, {MAX_BESSEL_ARG}]")
    flat = z.ravel()
    ax = np.abs(flat)
    out = np.zeros((flat.size, max_order + 1))
    zero = ax == 0.0
    out[zero, 0] = 1.0
    small = (~zero) & (ax < _TINY_ARG)
    if np.any(small):
        out[small] = _series(max_order, ax[small])
    regular = ax >= _TINY_ARG
    if np.any(regular):
        out[regular] = _miller(max_order, ax[regular])
    # J_n(-z) = (-1)^n J_n(z)
    neg = flat < 0
    if np.any(neg):
        out[neg, 1::2] *= -1.0
    return out.reshape(z.shape + (max_order + 1,))


def bessel_j(order, arg):
    """J_order(arg) for integer order, accurate to ~1e-13 absolute for |arg| <= 500.

    >>> bessel_j(0, 0.0)
    1.0
    """
    order = int(order)
    if abs(order) > MAX_BESSEL_ORDER:
        raise DomainError(f"Bessel order {order} outside [-{MAX_BESSEL_ORDER}, {MAX_BESSEL_ORDER}]")
    value = float(bessel_j_table(abs(order), float(arg))[abs(order)])
    if order < 0 and order % 2:
        value = -value
    return value


def bessel_j_pairs(orders, args):
    """Element-wise J_{orders[i]}(args[i]); negative orders allowed."""
    orders = np.asarray(orders, dtype=np.int64)
    z = np.broadcast_to(np.asarray(args, dtype=float), orders.shape)
    if orders.size == 0:
        return np.zeros(orders.shape)
    absord = np.abs(orders)
    if absord.max() > MAX_BESSEL_ORDER:
        raise DomainError(f"Bessel order outside [-{MAX_BESSEL_ORDER}, {MAX_BESSEL_ORDER}]")
    uniq, inverse = np.unique(z.ravel(), return_inverse=True)
    table = bessel_j_table(int(absord.max()), uniq)
    values = table[inverse, absord.ravel()].reshape(orders.shape)
    flip = (orders < 0) & (orders % 2 == 1)
    return np.where(flip, -values, values)


# # Harmonic-oscillator overlaps

_BIG = 1e300


def _squeeze_params(ratio):
    ld = np.longdouble
    r = ld(ratio)
    nu = (1 - r * r) / (2 * r)
    mu = np.sqrt(1 + nu * nu)
    return mu, nu


def _ld_sqrt(v):
    return np.sqrt(np.longdouble(v))


@lru_cache(maxsize=256)
def _overlap_column_cached(ratio, m, n_max):
    # <n(x2)|m(x1)> is the eigenvector of N1 = a1^+ a1 (eigenvalue m) in the
    # width-x2 basis; N1 is a three-term operator in steps of 2 in n.
    # Forward recurrence is stable below the classically allowed band,
    # backward recurrence above it; the two are matched inside the band.
    out = np.zeros(n_max + 1)
    if ratio == 1.0:
        if m <= n_max:
            out[m] = 1.0
        out.setflags(write=False)
        return out
    ld = np.longdouble
    mu, nu = _squeeze_params(ratio)
    big_r = max(ratio, 1 / ratio) ** 2
    p = m % 2
    lo = max(p, 2 * (math.floor((m + 0.5) / big_r - 0.5) // 2) + p)
    hi_tp = (m + 0.5) * big_r - 0.5
    hi = 2 * (math.ceil(hi_tp) // 2 + 1) + p
    # beyond the band the column first decays like an Airy tail, then
    # geometrically with ratio |nu/mu| per step of 2; cover both to ~1e-40
    geometric = 184.0 / abs(math.log(abs(float(nu / mu))))
    top = max(hi + 50 + 20 * int(math.ceil(hi_tp ** (1 / 3))) + int(geometric), n_max + 2)
    top += (top - p) % 2
    idx = np.arange(p, top + 1, 2)
    munu = mu * nu
    nu2 = nu * nu

    def coeffs(n):
        # A_n S_{n+2} + C_n S_{n-2} = diag_n S_n
        diag = ld(n - m) + nu2 * (2 * n + 1)
        return munu * _ld_sqrt((n + 1) * (n + 2)), munu * _ld_sqrt(n * (n - 1)), diag

    fwd = np.zeros(idx.size, dtype=ld)
    fwd[0] = 1
    stop_f = int(np.searchsorted(idx, hi))
    for i in range(stop_f):
        n = int(idx[i])
        a, c, d = coeffs(n)
        prev = fwd[i - 1] if i else ld(0)
        fwd[i + 1] = (d * fwd[i] - c * prev) / a
        if abs(fwd[i + 1]) > _BIG:
            fwd[:i + 2] /= _BIG

    bwd = np.zeros(idx.size, dtype=ld)
    bwd[-1] = 1
    start_b = int(np.searchsorted(idx, lo))
    for i in range(idx.size - 1, start_b, -1):
        n = int(idx[i])
        a, c, d = coeffs(n)
        nxt = bwd[i + 1] if i + 1 < idx.size else ld(0)
        bwd[i - 1] = (d * bwd[i] - a * nxt) / c
        if abs(bwd[i - 1]) > _BIG:
            bwd[i - 1:] /= _BIG

    band = slice(start_b, stop_f + 1)
    f, b = fwd[band], bwd[band]
    # rescale both so the products below cannot overflow
    f = f / np.max(np.abs(f))
    bmax = np.max(np.abs(b))
    scale = np.dot(f, b / bmax) / np.dot(b / bmax, b / bmax) / bmax
    fmax = np.max(np.abs(fwd[band]))
    col = np.empty(idx.size, dtype=ld)
    split = (start_b + stop_f + 1) // 2
    col[:split] = fwd[:split] / fmax
    col[split:] = bwd[split:] * scale
    col /= np.sqrt(np.sum(col * col))
    # sign convention: sign(S[p, m]) = sign(-nu)^(m // 2), from the ground-state column
    want = 1 if (nu < 0 or (m // 2) % 2 == 0) else -1
    if np.sign(col[0]) != want and col[0] != 0:
        col = -col
    keep = idx <= n_max
    out[idx[keep]] = np.asarray(col[keep], dtype=float)
    out.setflags(write=False)
    return out


def overlap_column(ratio, m, n_max):
    """Array of <n(x2)|m(x1)> for n = 0..n_max, where ratio = x2/x1.

    The overlap depends on x1, x2 only through their ratio.
    """
    if not ratio > 0 or not math.isfinite(ratio):
        raise DomainError("oscillator width ratio must be positive and finite")
    m, n_max = int(m), int(n_max)
    if m < 0 or n_max < 0:
        raise DomainError("levels must be non-negative")
    if max(m, n_max) > MAX_OVERLAP_LEVEL:
        raise DomainError(f"levels above {MAX_OVERLAP_LEVEL} are not supported")
    return _overlap_column_cached(float(ratio), m, n_max)


def hermite_gauss_overlap(n, m, x1, x2):
    """Overlap <n(x2)|m(x1)> of oscillator eigenfunctions of widths x2 and x1.

    The eigenfunctions are ``(pi x^2)^(-1/4) (2^n n!)^(-1/2) H_n(Q/x) exp(-(Q/x)^2/2)``.

    Parameters
    ----------
    n, m : int
        Levels, 0 <= n, m <= 1000.
    x1, x2 : float
        Positive widths.

    Returns
    -------
    float
        Exactly 0.0 when n - m is odd.
    """
    n, m = int(n), int(m)
    if n < 0 or m < 0:
        raise DomainError("levels must be non-negative")
    if not (x1 > 0 and x2 > 0):
        raise DomainError("oscillator widths must be positive")
    if (n - m) % 2:
        return 0.0
    # run the recurrence over the smaller index; <n(x2)|m(x1)> = <m(x1)|n(x2)>
    if m <= n:
        return float(overlap_column(x2 / x1, m, n)[n])
    return float(overlap_column(x1 / x2, n, m)[m])


# # Quadrature

def _trapezoid_mean(phase, shift, length, samples):
    q = np.linspace(0.0, length, samples + 1)
    ph = np.asarray(phase(q), dtype=float)
    if ph.shape != q.shape:
        ph = np.array([float(phase(v)) for v in q])
    bad = ~np.isfinite(ph)
    if np.any(bad):
        where = float(q[np.argmax(bad)])
        raise EvaluationError(f"non-finite phase at Q={where!r}", where=where)
    f = np.exp(-1j * (shift * q - ph))
    return (f[1:-1].sum() + 0.5 * (f[0] + f[-1])) / samples


def oscillatory_phase_integral(phase, wavenumber_shift, samples, length=2 * math.pi,
                               rtol=1e-6, max_samples=1 << 22):
    """(1/L) int_0^L exp[-i(k Q - phase(Q))] dQ.

    Trapezoid rule on ``samples`` intervals, doubled until two successive
    Richardson-extrapolated estimates agree to ``rtol`` (measured against the
    unit modulus of the integrand).

    Parameters
    ----------
    phase : callable
        Real phase function, vectorized over a numpy array of Q.
    wavenumber_shift : float
        k in physical units (2 pi / L per mode).
    samples : int
        Initial number of intervals, at least 64 (1 + |k| L / 2 pi).

    Returns
    -------
    complex
    """
    length = float(length)
    k = float(wavenumber_shift)
    need = 64 * (1 + abs(k) * length / (2 * math.pi))
    if samples < need:
        raise ContractError(f"samples={samples} below the required {math.ceil(need)}")
    n = int(samples)
    t_coarse = _trapezoid_mean(phase, k, length, n)
    while True:
        t_fine = _trapezoid_mean(phase, k, length, 2 * n)
        # |T_2n - T_n| bounds the Richardson error for smooth integrands and
        # the T_2n error for periodic ones (where T_n is spectrally accurate)
        if abs(t_fine - t_coarse) <= rtol:
            return complex((4 * t_fine - t_coarse) / 3)
        n *= 2
        if 2 * n > max_samples:
            raise EvaluationError(f"oscillatory integral not converged with {n} samples")
        t_coarse = t_fine


def kernel_to_amplitude(kernel, times, tol=1e-6):
    """Survival amplitude F(t) = sum_n P(n|m) exp[-i (E_n - E_m) t].

    Raises ContractError when the kernel weights do not sum to 1 within ``tol``.
    """
    kernel.require_normalized(tol)
    t = np.asarray(times, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ContractError("times must be finite")
    keep = kernel.weights > 0
    w = kernel.weights[keep]
    omega = kernel.omega[keep]
    flat = t.ravel()
    out = np.empty(flat.shape, dtype=complex)
    chunk = max(1, 2_000_000 // max(w.size, 1))
    for start in range(0, flat.size, chunk):
        tt = flat[start:start + chunk]
        out[start:start + chunk] = np.exp(-1j * np.outer(tt, omega)) @ w
    return out.reshape(t.shape)

"""Independent reference implementations used only by the tests."""

import math

import mpmath
import numpy as np


def hermite_functions(nmax, q):
    """Normalized Hermite functions phi_0..phi_nmax on q (standard three-term recurrence)."""
    out = np.zeros((nmax + 1, q.size))
    out[0] = np.pi ** -0.25 * np.exp(-q * q / 2)
    if nmax:
        out[1] = math.sqrt(2.0) * q * out[0]
    for n in range(2, nmax + 1):
        out[n] = math.sqrt(2.0 / n) * q * out[n - 1] - math.sqrt((n - 1) / n) * out[n - 2]
    return out


def overlap_by_grid(n, m, x1, x2, h=0.004):
    # trapezoid on a wide grid is spectrally accurate for these Gaussian-decaying integrands
    qmax = 1.2 * math.sqrt(2 * max(n, m) + 1) * max(x1, x2) + 12 * max(x1, x2)
    q = np.arange(-qmax, qmax + h / 2, h)
    a = hermite_functions(n, q / x2)[n] / math.sqrt(x2)
    b = hermite_functions(m, q / x1)[m] / math.sqrt(x1)
    return float(np.sum(a * b) * h)


def overlap_by_mpmath(n, m, x1, x2):
    with mpmath.workdps(40):
        def phi(k, x, q):
            u = q / x
            return (mpmath.hermite(k, u) * mpmath.exp(-u * u / 2)
                    / mpmath.sqrt(mpmath.sqrt(mpmath.pi) * x * 2 ** k * mpmath.factorial(k)))
        edge = 1.5 * math.sqrt(2 * max(n, m) + 1) * max(x1, x2) + 10
        pts = mpmath.linspace(-edge, edge, 2 * max(n, m) + 8)
        return float(mpmath.quad(lambda q: phi(n, x2, q) * phi(m, x1, q), pts))

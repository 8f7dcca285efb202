"""Scalar special functions feeding the moment closed forms.

MacDonald function K_nu, Gamma/Pochhammer, monic Laguerre polynomials and
their weighted overlap integrals.  K_nu is delegated to scipy's validated
implementation; the test suite cross-checks it against direct quadrature
of the cosh integral representation.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.special as sps


def bessel_k(nu: float, z: float) -> float:
    """MacDonald function K_nu(z) for real nu and z > 0.

    Even in nu, K_{-nu} = K_nu.
    """
    nu = float(nu)
    z = float(z)
    if not (np.isfinite(nu) and np.isfinite(z)):
        raise ValueError("bessel_k requires finite arguments")
    if z <= 0.0:
        raise ValueError(f"bessel_k requires z > 0, got {z}")
    return float(sps.kv(abs(nu), z))


def scalar_moment(sigma: float, s: float) -> float:
    """Deformed Laguerre moment ``int_0^inf x**(sigma-1) exp(-x - s/x) dx``.

    Equals ``2 s**(sigma/2) K_sigma(2 sqrt(s))`` for s > 0 and
    ``Gamma(sigma)`` at s = 0.
    """
    sigma = float(sigma)
    s = float(s)
    if sigma <= 0.0:
        raise ValueError(f"scalar_moment requires sigma > 0, got {sigma}")
    if s < 0.0:
        raise ValueError(f"scalar_moment requires s >= 0, got {s}")
    if s == 0.0:
        return math.gamma(sigma)
    return 2.0 * s ** (sigma / 2.0) * bessel_k(sigma, 2.0 * math.sqrt(s))


def pochhammer(a: float, k: int) -> float:
    """Rising factorial (a)_k."""
    return float(sps.poch(a, k))


def monic_laguerre(n: int, a: float) -> np.ndarray:
    """Coefficients (ascending in x) of the monic Laguerre polynomial.

    ``Lhat_n^(a) = (-1)**n n! L_n^(a)``; the leading coefficient is
    exactly 1.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    coeffs = np.empty(n + 1)
    # coefficient of x^k: (-1)^(n-k) * binom(n, k) * Gamma(n+a+1)/Gamma(k+a+1)
    for k in range(n + 1):
        c = math.comb(n, k) * pochhammer(a + k + 1, n - k)
        coeffs[k] = c if (n - k) % 2 == 0 else -c
    coeffs[n] = 1.0
    return coeffs


def laguerre_overlap(n: int, m: int, a1: float, a2: float, sigma: float) -> float:
    """``int_0^inf Lhat_n^(a1)(x) Lhat_m^(a2)(x) x**(sigma-1) exp(-x) dx``.

    Evaluated by the terminating Pochhammer double sum; valid for
    sigma > 0 and a1, a2 > -1.
    """
    if n < 0 or m < 0:
        raise ValueError("degrees must be nonnegative")
    if sigma <= 0.0:
        raise ValueError(f"laguerre_overlap requires sigma > 0, got {sigma}")
    if a1 <= -1.0 or a2 <= -1.0:
        raise ValueError("laguerre_overlap requires a1, a2 > -1")
    total = 0.0
    for i in range(n + 1):
        for j in range(m + 1):
            term = pochhammer(sigma, i + j) * pochhammer(-n, i) * pochhammer(-m, j)
            term /= pochhammer(a1 + 1.0, i) * pochhammer(a2 + 1.0, j)
            term /= math.factorial(i) * math.factorial(j)
            total += term
    front = math.gamma(sigma) * pochhammer(a1 + 1.0, n) * pochhammer(a2 + 1.0, m)
    if (n + m) % 2:
        front = -front
    return front * total

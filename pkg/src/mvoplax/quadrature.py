"""Double-exponential quadrature on the half line (0, inf).

The log substitution ``x = exp(t)`` turns the deformed-Laguerre integrands
``x**(sigma-1) exp(-x - s/x)`` into functions decaying doubly exponentially
at both ends (for s > 0; singly at the left end for s = 0), so the
trapezoid rule in t converges at spectral rate.  This module is the
independent oracle against which all closed-form moment routes are tested,
and the fallback path for weights without a polynomial T T* factor.
"""

from __future__ import annotations

import numpy as np

_TAIL_CUT = 1e-20  # relative integrand size below which the window stops growing
_T_MAX = 700.0     # hard window cap; exp underflows long before this


def _window(g, h: float) -> tuple[float, float, float]:
    """Expand the t-window until the integrand is negligible at both ends.

    Returns (t_lo, t_hi, peak) where peak is the largest entrywise magnitude
    seen on the coarse scan.
    """
    peak = float(np.max(np.abs(g(np.array([0.0])))))
    lo = hi = 0.0
    step = 1.0
    for sign in (-1.0, 1.0):
        t = 0.0
        quiet = 0
        while quiet < 3 and abs(t) < _T_MAX:
            t += sign * step
            val = float(np.max(np.abs(g(np.array([t])))))
            peak = max(peak, val)
            quiet = quiet + 1 if val <= _TAIL_CUT * (peak + 1e-300) else 0
        if sign < 0:
            lo = t
        else:
            hi = t
    return lo, hi, peak


def integrate_semiaxis(f, *, rtol: float = 1e-13, h0: float = 0.5,
                       max_level: int = 7):
    """Integrate ``f`` over (0, inf).

    Parameters
    ----------
    f : callable
        Vectorized integrand: given a 1-d array of x > 0 it returns an
        array of values with shape ``(len(x),)`` or ``(len(x), N, N)``.
    rtol : float
        Stop once successive step-halvings agree to this relative size.
    h0 : float
        Initial trapezoid step in the t = log x variable.
    max_level : int
        Maximum number of halvings of ``h0``.

    Returns
    -------
    float or complex or ndarray
        The integral, scalar for scalar integrands, (N, N) for matrix ones.
    """

    def g(t):
        x = np.exp(t)
        vals = np.asarray(f(x))
        if vals.ndim == 1:
            return vals * x
        return vals * x[(slice(None),) + (None,) * (vals.ndim - 1)]

    t_lo, t_hi, _ = _window(g, h0)
    prev = None
    h = h0
    for _ in range(max_level + 1):
        ts = np.arange(t_lo, t_hi + 0.5 * h, h)
        total = np.sum(g(ts), axis=0) * h
        if prev is not None:
            err = np.linalg.norm(np.atleast_1d(total - prev))
            scale = np.linalg.norm(np.atleast_1d(total))
            if err <= rtol * (1.0 + scale):
                return total
        prev = total
        h *= 0.5
    return prev

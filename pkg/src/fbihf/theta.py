"""Odd Jacobi theta function by truncated series.

theta1(z | tau) = 2 * sum_{n>=0} (-1)^n q^{(n+1/2)^2} sin((2n+1) z) with
q = exp(i pi tau).  For the hexagonal half-period ratio tau = exp(2i pi/3)
the nome has |q| ~ 0.066 and a dozen terms reach machine precision; the
series is truncated once the term magnitude drops below `tail`.
"""

from __future__ import annotations

import numpy as np

MAX_TERMS = 200


def theta1(z, tau: complex, tail: float = 1e-14):
    """Evaluate theta1(z | tau) elementwise; z may be any complex array.

    Raises RuntimeError if the series has not converged to `tail` within
    MAX_TERMS (cannot happen for Im(tau) bounded away from 0 and bounded z).
    """
    q = np.exp(1j*np.pi*tau)
    if abs(q) >= 1:
        raise ValueError("tau must lie in the upper half-plane")
    z = np.asarray(z, dtype=complex)
    total = np.zeros_like(z)
    scale = 0.0
    for n in range(MAX_TERMS):
        term = (-1)**n * q**((n + 0.5)**2) * np.sin((2*n + 1)*z)
        total = total + term
        tmax = float(np.max(np.abs(term))) if term.size else 0.0
        scale = max(scale, tmax)
        if tmax <= tail*max(scale, 1.0):
            return 2*total
    raise RuntimeError(f"theta series did not converge within {MAX_TERMS} terms")

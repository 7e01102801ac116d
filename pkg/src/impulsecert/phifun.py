"""Scalar phi functions used to evaluate exponential rate integrals.

phi1(x) = (e^x - 1)/x and phi2(x) = (e^x - 1 - x)/x^2 appear whenever an
exponential bound is integrated over a discretization interval.  Both have
removable singularities at 0; series fallbacks keep full accuracy where the
direct formulas cancel.
"""

from __future__ import annotations

import math

# Below this magnitude expm1-based formulas lose digits; the truncated series
# is exact to ~1e-16 here (next omitted term < 1e-19).
_SERIES_CUTOFF = 1e-3


def phi1(x: float) -> float:
    """(e^x - 1)/x, extended by continuity with phi1(0) = 1."""
    if abs(x) < _SERIES_CUTOFF:
        return 1.0 + x * (1.0 / 2 + x * (1.0 / 6 + x * (1.0 / 24 + x / 120.0)))
    return math.expm1(x) / x


def phi2(x: float) -> float:
    """(e^x - 1 - x)/x^2, extended by continuity with phi2(0) = 1/2."""
    if abs(x) < _SERIES_CUTOFF:
        return 0.5 + x * (1.0 / 6 + x * (1.0 / 24 + x * (1.0 / 120 + x / 720.0)))
    return (math.expm1(x) - x) / (x * x)


def phi1_deriv(x: float) -> float:
    """d/dx phi1(x) = phi1(x) - phi2(x); positive for all real x."""
    return phi1(x) - phi2(x)


def dd_phi1(x: float, y: float) -> float:
    """Divided difference (phi1(x) - phi1(y))/(x - y), stable for x near y.

    For arguments of magnitude <= 2 (the only regime the certifiers hit:
    rate times step length) the symmetric double series is used, which has
    no subtractive cancellation.  Larger arguments fall back to the direct
    formula, or to the midpoint derivative when x and y nearly coincide.
    """
    ax = max(abs(x), abs(y))
    if ax <= 2.0:
        total = 0.0
        fact = 2.0  # (k+1)! for k = 1
        term_scale = 1.0
        for k in range(1, 60):
            hom = 0.0
            for i in range(k):
                hom += x**i * y ** (k - 1 - i)
            total += hom / fact
            term_scale = max(term_scale, abs(hom) / fact)
            fact *= k + 2
            if ax ** k / fact < 1e-19 * term_scale:
                break
        return total
    if abs(x - y) > 1e-6 * ax:
        return (phi1(x) - phi1(y)) / (x - y)
    return phi1_deriv(0.5 * (x + y))

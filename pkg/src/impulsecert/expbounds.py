"""Exponential decay/growth envelopes ||e^{sA}|| <= amplitude * e^{rate*s}.

The envelope constants come from a resolvent-free bound built from the
spectral abscissa and the departure from normality: for an n x n matrix,

    ||e^{tA}|| <= e^{abscissa*t} * sum_{k=0}^{n-1} (dep*t)^k / (k!)^{3/2}

with dep^2 = tr(A A^T) - |tr A^2| (clamped at zero).  Normal matrices give
dep = 0 and the envelope (1, abscissa), which is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericsError
from .matrixcore import as_square, spectral_norm
from .phifun import phi1

__all__ = [
    "ExpBoundData",
    "DecayEnvelope",
    "gil_data",
    "envelope",
    "auto_envelope",
    "exp_diff_bound",
    "EPS_GRID",
]

FORWARD = "forward"
BACKWARD = "backward"

# Slack grid for the free parameter in auto_envelope, scaled by max(1, ||A||).
EPS_GRID = (0.01, 0.05, 0.1, 0.25, 0.5, 1.0)

# Departure values below this (times max(1, ||A||_F)) are roundoff from a
# normal matrix; treating them as zero keeps envelopes within the 1e-9
# domination slack used by the property suite.
_NORMALITY_TOL = 1e-12


@dataclass(frozen=True)
class ExpBoundData:
    """Ingredients of the envelope bound for one matrix."""

    spectral_abscissa: float  # max Re eigenvalue
    non_normality: float  # sqrt(tr(AA^T) - |tr A^2|), >= 0
    dim: int


@dataclass(frozen=True)
class DecayEnvelope:
    """Certifies ||e^{sA}|| <= amplitude * e^{rate*s} for all s >= 0.

    direction "forward" bounds e^{sA}; "backward" bounds e^{-sA}.
    """

    amplitude: float
    rate: float
    direction: str = FORWARD

    def __post_init__(self):
        if self.direction not in (FORWARD, BACKWARD):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")

    def bound(self, t: float) -> float:
        return self.amplitude * math.exp(self.rate * t)


def gil_data(a) -> ExpBoundData:
    m = as_square(a)
    try:
        abscissa = float(np.max(np.linalg.eigvals(m).real))
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericsError(f"eigenvalue iteration failed: {exc}") from exc
    g2 = float(np.trace(m @ m.T)) - abs(float(np.trace(m @ m)))
    dep = math.sqrt(max(g2, 0.0))
    if dep <= _NORMALITY_TOL * max(1.0, float(np.linalg.norm(m, "fro"))):
        dep = 0.0
    return ExpBoundData(abscissa, dep, m.shape[0])


def _amplitude_factor(t: float, dep: float, dim: int, eps: float) -> float:
    acc = 1.0
    term = 1.0
    for k in range(1, dim):
        term *= dep * t / k ** 1.5
        acc += term
    return math.exp(-eps * t) * acc


def _sup_amplitude(dep: float, dim: int, eps: float) -> float:
    """sup over t >= 0 of e^{-eps t} * sum (dep t)^k/(k!)^{3/2}.

    The function starts at 1 and decays to 0; a uniform scan over
    [0, 10(dim-1)/eps] followed by golden-section refinement around the best
    sample locates the maximum.  The horizon doubles if the endpoint still
    dominates (it never does for the polynomial-vs-exponential trade-off,
    but the guard is cheap).
    """
    f = lambda t: _amplitude_factor(t, dep, dim, eps)
    t_max = 10.0 * max(dim - 1, 1) / eps
    for _ in range(8):
        ts = np.linspace(0.0, t_max, 10001)
        vals = [f(t) for t in ts]
        i = int(np.argmax(vals))
        if i < len(ts) - 1:
            break
        t_max *= 2.0
    lo = ts[max(i - 1, 0)]
    hi = ts[min(i + 1, len(ts) - 1)]
    inv_gold = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - inv_gold * (hi - lo)
    d = lo + inv_gold * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(100):
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - inv_gold * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_gold * (hi - lo)
            fd = f(d)
        if hi - lo < 1e-14 * max(1.0, hi):
            break
    return max(vals[i], fc, fd)


def envelope(a, eps: float | None = None, direction: str = FORWARD) -> DecayEnvelope:
    """Envelope for e^{sA} (or e^{-sA}) with slack ``eps`` on the rate.

    Normal matrices give (1, abscissa) exactly and ignore ``eps``; otherwise
    ``eps > 0`` is required and the amplitude is the supremum of the bound
    factor, inflated by (1 + 1e-9) so roundoff cannot break domination.
    """
    m = as_square(a)
    signed = -m if direction == BACKWARD else m
    data = gil_data(signed)
    if data.non_normality == 0.0:
        return DecayEnvelope(1.0, data.spectral_abscissa, direction)
    if eps is None or eps <= 0:
        raise ValueError("eps > 0 required when the matrix is not normal")
    amp = _sup_amplitude(data.non_normality, data.dim, eps) * (1.0 + 1e-9)
    return DecayEnvelope(amp, data.spectral_abscissa + eps, direction)


def auto_envelope(a, direction: str = FORWARD, h_ref: float = 1.0) -> DecayEnvelope:
    """Grid-search the rate slack, minimizing the envelope at horizon h_ref."""
    m = as_square(a)
    signed = -m if direction == BACKWARD else m
    if gil_data(signed).non_normality == 0.0:
        return envelope(m, direction=direction)
    scale = max(1.0, spectral_norm(m))
    best = None
    for eps in EPS_GRID:
        cand = envelope(m, eps * scale, direction)
        if best is None or cand.bound(h_ref) < best.bound(h_ref):
            best = cand
    return best


def exp_diff_bound(env: DecayEnvelope, norm_a: float, t: float) -> float:
    """Upper bound on ||e^{tA} - I|| from an envelope on e^{sA}.

    Equals norm_a * amplitude * t * phi1(rate * t); the phi form covers the
    zero-rate limit without cancellation.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if norm_a < 0:
        raise ValueError("norm_a must be >= 0")
    return norm_a * env.amplitude * t * phi1(env.rate * t)

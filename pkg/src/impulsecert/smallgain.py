"""Comparison layer: averaged one-step certificates vs small-gain tests.

For rapidly varying couplings the one-step certificate consumes only the
period averages of the couplings and one uniform sup bound.  This module
also implements the classical small-gain inequality for the same data so
the two tests can be compared on equal footing, and a search for the
largest period the one-step conditions certify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DefinitenessError
from .matrixcore import (
    Block2x2,
    gen_sym_eig_max,
    mat_exp,
    solve_lyapunov,
    spectral_norm,
    spectral_radius,
    sym_eig_range,
    symmetrize,
)
from .periodic import (
    INCONCLUSIVE,
    Q_MARGIN,
    STABLE_CERTIFIED,
    CertificateReport,
    EnvelopeSet,
    StepRecord,
    _require_spd,
    certify_periodic,
    envelope_set,
    growth_bound,
    growth_inputs,
)
from .system import CoupledSystem, IntervalBoundTable, interval_bounds

__all__ = [
    "AveragedSystem",
    "SmallGainData",
    "lmi_feasible",
    "certify_averaged",
    "certify_small_period",
    "small_gain_check",
    "max_certifiable_period",
]

_ZERO_MEAN_TOL = 1e-12


@dataclass(frozen=True)
class AveragedSystem:
    """Period averages of the two coupling blocks."""

    ahat12: np.ndarray
    ahat21: np.ndarray

    @classmethod
    def from_system(cls, sys: CoupledSystem) -> "AveragedSystem":
        return cls(sys.a12.mean(), sys.a21.mean())


@dataclass(frozen=True)
class SmallGainData:
    """Per-subsystem Lyapunov data plus uniform coupling sup bounds."""

    p11: np.ndarray
    p22: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    coupling12: float
    coupling21: float

    @classmethod
    def from_system(cls, sys: CoupledSystem, q1=None, q2=None) -> "SmallGainData":
        """Solve the subsystem Lyapunov equations (identity right side by default)."""
        q1 = np.eye(sys.n1) if q1 is None else np.asarray(q1, dtype=float)
        q2 = np.eye(sys.n2) if q2 is None else np.asarray(q2, dtype=float)
        p11 = solve_lyapunov(sys.a11, q1)
        p22 = solve_lyapunov(sys.a22, q2)
        bounds = interval_bounds(sys, 1)
        return cls(p11, p22, q1, q2, bounds.coupling12[0], bounds.coupling21[0])


def lmi_feasible(sys: CoupledSystem, p0: Block2x2) -> bool:
    """Feasibility check of the one-period matrix inequality for a candidate.

    True iff p0 is positive definite and

        p0 - theta*(Ahat' p0 + p0 Ahat) - (B E)' p0 (B E)  is PD,

    with E = diag(e^{theta a11}, e^{theta a22}) and Ahat the averaged
    off-diagonal coupling matrix.  Strictness margin 1e-12 on eigenvalues.
    Candidates are checked, never synthesized.
    """
    theta = sys.period
    p0f = symmetrize(p0.full())
    if sym_eig_range(p0f)[0] <= Q_MARGIN:
        return False
    avg = AveragedSystem.from_system(sys)
    ahat = np.block(
        [
            [np.zeros((sys.n1, sys.n1)), avg.ahat12],
            [avg.ahat21, np.zeros((sys.n2, sys.n2))],
        ]
    )
    e_diag = np.block(
        [
            [mat_exp(sys.a11, theta), np.zeros((sys.n1, sys.n2))],
            [np.zeros((sys.n2, sys.n1)), mat_exp(sys.a22, theta)],
        ]
    )
    be = sys.jump.full() @ e_diag
    m = p0f - theta * (ahat.T @ p0f + p0f @ ahat) - be.T @ p0f @ be
    return sym_eig_range(symmetrize(m))[0] > Q_MARGIN


def certify_averaged(
    sys: CoupledSystem,
    p0: Block2x2,
    *,
    sups: tuple[float, float] | None = None,
    envelopes: EnvelopeSet | None = None,
    eps: float | None = None,
) -> CertificateReport:
    """One-step certificate over the whole period with averaged couplings.

    A single recurrence step integrates the couplings exactly over the
    period, which is the same as using their averages; this is the
    n_intervals = 1 specialization of the periodic certifier.  ``sups``
    overrides the coupling sup bounds, so a whole class of systems known
    only through (sup bound, mean) data can be certified at once.
    """
    bounds = None
    if sups is not None:
        g12, g21 = sups
        bounds = IntervalBoundTable(
            1, sys.period, (float(g12),), (float(g21),), (0.0,), (0.0,)
        )
    return certify_periodic(
        sys, p0, 1, envelopes=envelopes, eps=eps, sup_mode="global", bounds=bounds
    )


def _require_zero_mean(sys: CoupledSystem):
    for name, poly in (("a12", sys.a12), ("a21", sys.a21)):
        scale = max(1.0, spectral_norm(poly.constant) if poly.constant.size else 1.0)
        if spectral_norm(poly.mean()) > _ZERO_MEAN_TOL * scale:
            raise ValueError(f"{name} must have zero mean over one period")


def _small_period_budget(
    data: SmallGainData, a11, a22, jump_full, theta: float, envelopes: EnvelopeSet
):
    """Threshold quantities of the small-period certificate.

    Returns (margin_ok, budget, jump_log) where margin_ok is the dwell
    threshold condition and budget = growth/margin + jump_log.
    """
    p11 = symmetrize(data.p11)
    p22 = symmetrize(data.p22)
    n1, n2 = p11.shape[0], p22.shape[0]
    lam1 = sym_eig_range(p11)[0]
    lam2 = sym_eig_range(p22)[0]
    load = data.coupling12 * spectral_norm(p11) + data.coupling21 * spectral_norm(p22)
    if theta * load >= min(lam1, lam2):
        return False, None, None
    p_block = Block2x2.symmetric(p11, np.zeros((n1, n2)), p22)
    p_diag = p_block.full()
    # one-period decoupled update of the diagonal data
    e1 = mat_exp(a11, -theta)
    e2 = mat_exp(a22, -theta)
    p_next = np.block(
        [
            [e1.T @ p11 @ e1, np.zeros((n1, n2))],
            [np.zeros((n2, n1)), e2.T @ p22 @ e2],
        ]
    )
    try:
        contraction = gen_sym_eig_max(jump_full.T @ p_diag @ jump_full, p_next)
    except DefinitenessError:
        return False, None, None
    if contraction >= 1.0:
        # the decoupled impulse map does not contract; conditions inapplicable
        return False, None, None
    jump_log = math.log(contraction)
    growth = growth_bound(
        growth_inputs(
            p_block,
            (data.coupling12, data.coupling21),
            envelopes,
            spectral_norm(a11),
            spectral_norm(a22),
        ),
        theta,
    )
    margin = min(lam1, lam2) - theta * load
    return True, growth / margin + jump_log, jump_log


def certify_small_period(
    data: SmallGainData, sys: CoupledSystem, theta: float | None = None
) -> CertificateReport:
    """Small-period certificate from per-subsystem Lyapunov data.

    Requires zero-mean couplings.  Checks the dwell threshold
    theta * (c12*||P11|| + c21*||P22||) < min eig of the diagonal data and
    that the accumulated growth stays below the decoupled contraction
    margin of the impulse map.
    """
    _require_zero_mean(sys)
    if theta is None:
        theta = sys.period
    if theta <= 0:
        raise ValueError("theta must be positive")
    envelopes = envelope_set(sys, h_ref=theta)
    margin_ok, budget, jump_log = _small_period_budget(
        data, sys.a11, sys.a22, sys.jump.full(), theta, envelopes
    )
    diagnostics = {
        "theta": theta,
        "coupling12": data.coupling12,
        "coupling21": data.coupling21,
        "envelopes": envelopes.as_dict(),
    }
    if not margin_ok:
        diagnostics["failure"] = (
            "dwell threshold or decoupled contraction condition violated"
        )
        return CertificateReport(INCONCLUSIVE, None, None, (), diagnostics)
    verdict = STABLE_CERTIFIED if budget <= -Q_MARGIN else INCONCLUSIVE
    record = StepRecord(0, 0.0, budget - jump_log)
    return CertificateReport(verdict, budget, jump_log, (record,), diagnostics)


def small_gain_check(data: SmallGainData) -> bool:
    """Classical interconnection test on the same Lyapunov data (strict).

    c12 * c21 < (1/4) * min-eig(P11^{-1} Q1) * min-eig(P22^{-1} Q2).
    """
    lam1 = 1.0 / gen_sym_eig_max(symmetrize(data.p11), symmetrize(data.q1))
    lam2 = 1.0 / gen_sym_eig_max(symmetrize(data.p22), symmetrize(data.q2))
    return data.coupling12 * data.coupling21 < 0.25 * lam1 * lam2


def max_certifiable_period(
    data: SmallGainData, sys: CoupledSystem, *, cap: float = 10.0
) -> float:
    """Largest period in (0, cap] the small-period certificate accepts.

    Coarse scan, then bisection to 1e-6 against the first failure.  If the
    pass/fail profile is not a prefix (pass seen after a failure), a finer
    scan runs and the end of the verified passing prefix is returned.
    Returns 0.0 if even the smallest scanned period fails.
    """
    _require_zero_mean(sys)
    envelopes_cache: dict[float, EnvelopeSet] = {}

    def ok(theta: float) -> bool:
        env = envelopes_cache.get(theta)
        if env is None:
            env = envelope_set(sys, h_ref=theta)
            envelopes_cache[theta] = env
        margin_ok, budget, _ = _small_period_budget(
            data, sys.a11, sys.a22, sys.jump.full(), theta, env
        )
        return margin_ok and budget is not None and budget <= -Q_MARGIN

    grid = np.linspace(cap / 128.0, cap, 128)
    results = [ok(t) for t in grid]
    if all(results):
        return cap
    first_fail = results.index(False)
    if any(results[first_fail:]):
        # non-monotone profile: fall back to a fine scan, return the prefix end
        fine = np.linspace(cap / 2048.0, cap, 2048)
        last = 0.0
        for t in fine:
            if not ok(t):
                break
            last = t
        return float(last)
    lo = 0.0 if first_fail == 0 else float(grid[first_fail - 1])
    hi = float(grid[first_fail])
    if first_fail == 0 and not ok(lo + 1e-9):
        pass  # keep bisecting; lo = 0 acts as the trivially-passing end
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo

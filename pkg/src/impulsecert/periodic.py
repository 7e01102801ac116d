"""Certificate construction for the constant-dwell (periodic) case.

The quadratic-form table P^(0..N) is propagated across the period by a
backward-weighted recurrence with exact coupling integrals.  Each interval
contributes two audit quantities: the smallest eigenvalue of a constant
lower bracket matrix (positive definiteness of the time-varying form) and
an integrated growth bound on its derivative along solutions.  The verdict
adds the logarithmic jump factor at the period boundary: a negative total
budget certifies asymptotic stability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DefinitenessError, DimensionError
from .expbounds import BACKWARD, FORWARD, DecayEnvelope, auto_envelope, envelope
from .matrixcore import (
    Block2x2,
    gen_sym_eig_max,
    mat_exp,
    solve_lyapunov,
    spectral_norm,
    sym_eig_range,
)
from .phifun import dd_phi1, phi1_deriv, phi2
from .system import CoupledSystem, IntervalBoundTable, interval_bounds

__all__ = [
    "STABLE_CERTIFIED",
    "INCONCLUSIVE",
    "Q_MARGIN",
    "EnvelopeSet",
    "LyapunovTable",
    "SandwichPair",
    "GrowthBoundInputs",
    "StepRecord",
    "CertificateReport",
    "envelope_set",
    "default_p0",
    "advance_block",
    "build_table",
    "eval_interpolant",
    "sandwich_pair",
    "growth_inputs",
    "growth_bound",
    "lyapunov_value",
    "certify_periodic",
]

STABLE_CERTIFIED = "stable-certified"
INCONCLUSIVE = "inconclusive"

# Strict inequalities are certified only past this margin, so a verdict is
# never produced on roundoff.
Q_MARGIN = 1e-12

SUP_MODES = ("global", "per-interval")


@dataclass(frozen=True)
class EnvelopeSet:
    """Decay envelopes for both subsystems in both time directions."""

    fwd1: DecayEnvelope
    fwd2: DecayEnvelope
    bwd1: DecayEnvelope
    bwd2: DecayEnvelope

    def as_dict(self) -> dict:
        return {
            name: {"amplitude": env.amplitude, "rate": env.rate}
            for name, env in (
                ("fwd1", self.fwd1),
                ("fwd2", self.fwd2),
                ("bwd1", self.bwd1),
                ("bwd2", self.bwd2),
            )
        }


def envelope_set(sys: CoupledSystem, eps: float | None = None, h_ref: float = 1.0) -> EnvelopeSet:
    """Envelopes for e^{+-s a11}, e^{+-s a22}.

    ``eps`` fixes the rate slack for non-normal blocks; otherwise a small
    grid search picks it per block (see expbounds.auto_envelope).
    """
    if eps is not None:
        mk = lambda a, d: envelope(a, eps, d)
    else:
        mk = lambda a, d: auto_envelope(a, d, h_ref=h_ref)
    return EnvelopeSet(
        fwd1=mk(sys.a11, FORWARD),
        fwd2=mk(sys.a22, FORWARD),
        bwd1=mk(sys.a11, BACKWARD),
        bwd2=mk(sys.a22, BACKWARD),
    )


def default_p0(sys: CoupledSystem) -> Block2x2:
    """Block-diagonal start: Lyapunov solutions for Hurwitz blocks, else identity."""

    def block(a):
        if float(np.max(np.linalg.eigvals(a).real)) < 0:
            return solve_lyapunov(a, np.eye(a.shape[0]))
        return np.eye(a.shape[0])

    return Block2x2.symmetric(
        block(sys.a11), np.zeros((sys.n1, sys.n2)), block(sys.a22)
    )


def _advance(p: Block2x2, sys: CoupledSystem, t0: float, t1: float, e1, e2) -> Block2x2:
    """One backward-weighted update of the table block over [t0, t1]."""
    i12 = sys.a12.integral(t0, t1)
    i21 = sys.a21.integral(t0, t1)
    q11 = p.b11 - (p.b12 @ i21 + i21.T @ p.b21)
    q22 = p.b22 - (i12.T @ p.b12 + p.b21 @ i12)
    q12 = p.b12 - (p.b11 @ i12 + i21.T @ p.b22)
    return Block2x2.symmetric(e1.T @ q11 @ e1, e1.T @ q12 @ e2, e2.T @ q22 @ e2)


def _step_exps(sys: CoupledSystem, dt: float):
    return mat_exp(sys.a11, -dt), mat_exp(sys.a22, -dt)


def advance_block(p: Block2x2, sys: CoupledSystem, m: int, h: float) -> Block2x2:
    """Table entry for interval m+1 from the entry for interval m."""
    if h <= 0:
        raise ValueError("h must be positive")
    e1, e2 = _step_exps(sys, h)
    return _advance(p, sys, m * h, (m + 1) * h, e1, e2)


@dataclass(frozen=True)
class LyapunovTable:
    """Table entries P^(0..N) at the grid nodes of one period."""

    n_intervals: int
    h: float
    entries: tuple[Block2x2, ...]

    def __post_init__(self):
        if len(self.entries) != self.n_intervals + 1:
            raise DimensionError("table must hold n_intervals + 1 entries")

    def entry(self, m: int) -> Block2x2:
        return self.entries[m]


def build_table(sys: CoupledSystem, p0: Block2x2, n_intervals: int) -> LyapunovTable:
    h = sys.period / n_intervals
    e1, e2 = _step_exps(sys, h)
    entries = [p0.symmetrized()]
    for m in range(n_intervals):
        entries.append(_advance(entries[-1], sys, m * h, (m + 1) * h, e1, e2))
    return LyapunovTable(n_intervals, h, tuple(entries))


def eval_interpolant(t: float, table: LyapunovTable, sys: CoupledSystem) -> Block2x2:
    """The continuous-in-t quadratic-form matrix P(t) on (0, period].

    Left-continuous at grid nodes: the value at t = m*h is the table entry
    P^(m), and the right limit at m*h is P^(m) as well.
    """
    h = table.h
    period = h * table.n_intervals
    if not 0.0 < t <= period * (1.0 + 1e-12):
        raise ValueError(f"t = {t} outside (0, {period}]")
    m = min(table.n_intervals - 1, max(0, math.ceil(t / h - 1e-12) - 1))
    dt = t - m * h
    e1 = mat_exp(sys.a11, -dt)
    e2 = mat_exp(sys.a22, -dt)
    return _advance(table.entry(m), sys, m * h, t, e1, e2)


@dataclass(frozen=True)
class SandwichPair:
    """Constant matrices bracketing the quadratic form on one interval.

    ``lower`` and ``upper`` differ by a nonnegative multiple of the identity
    on each diagonal block, so upper - lower is positive semidefinite.
    """

    lower: Block2x2
    upper: Block2x2


def sandwich_pair(p: Block2x2, sups: tuple[float, float], h: float) -> SandwichPair:
    """Bracket matrices from a table entry and interval coupling bounds."""
    c12, c21 = sups
    p11n = spectral_norm(p.b11)
    p12n = spectral_norm(p.b12)
    p22n = spectral_norm(p.b22)
    shared = c12 * p11n + c21 * p22n
    shift1 = h * (2.0 * c21 * p12n + shared)
    shift2 = h * (2.0 * c12 * p12n + shared)
    i1 = np.eye(p.n1)
    i2 = np.eye(p.n2)
    lower = Block2x2(p.b11 - shift1 * i1, p.b12, p.b21, p.b22 - shift2 * i2)
    upper = Block2x2(p.b11 + shift1 * i1, p.b12, p.b21, p.b22 + shift2 * i2)
    return SandwichPair(lower, upper)


@dataclass(frozen=True)
class GrowthBoundInputs:
    """Scalar ingredients of the per-interval growth bound.

    weight1/weight2 aggregate the table-entry norms seen by each subsystem;
    cross12/cross21 do the same for the mixed terms.  Each drive couples a
    sup bound with the matching subsystem norm and envelope amplitudes.
    All values are nonnegative and recomputable from the table entry and
    the coupling bounds.
    """

    weight1: float
    weight2: float
    cross12: float
    cross21: float
    drive11: float
    drive12: float
    drive21: float
    drive22: float
    coupling12: float
    coupling21: float
    envelopes: EnvelopeSet


def growth_inputs(
    p: Block2x2,
    sups: tuple[float, float],
    envs: EnvelopeSet,
    norm_a11: float,
    norm_a22: float,
) -> GrowthBoundInputs:
    c12, c21 = sups
    p11n = spectral_norm(p.b11)
    p12n = spectral_norm(p.b12)
    p22n = spectral_norm(p.b22)
    weight1 = math.hypot(p11n, p12n) + p12n
    weight2 = math.hypot(p22n, p12n) + p12n
    shared = c12 * p11n + c21 * p22n
    cross12 = 0.5 * (shared + math.hypot(shared, 4.0 * c21 * p12n))
    cross21 = 0.5 * (shared + math.hypot(shared, 4.0 * c12 * p12n))
    nb1 = envs.bwd1.amplitude
    nb2 = envs.bwd2.amplitude
    return GrowthBoundInputs(
        weight1=weight1,
        weight2=weight2,
        cross12=cross12,
        cross21=cross21,
        drive11=c12 * norm_a22 * nb1 * envs.fwd2.amplitude * weight1,
        drive12=c12 * norm_a11 * nb1 * weight1,
        drive21=c21 * norm_a11 * nb2 * envs.fwd1.amplitude * weight2,
        drive22=c21 * norm_a22 * nb2 * weight2,
        coupling12=c12,
        coupling21=c21,
        envelopes=envs,
    )


def growth_bound(inputs: GrowthBoundInputs, h: float) -> float:
    """Integrated bound on the derivative of the quadratic form over one step.

    Every rate division is evaluated through phi functions (and a stable
    divided difference of phi1), so vanishing rates and cancelling rate sums
    are handled without loss of accuracy.  The result is O(h^2) as h -> 0
    and is clamped at zero.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    envs = inputs.envelopes
    mixed21 = (envs.fwd2.rate + envs.bwd1.rate) * h  # drives subsystem-1 error
    mixed12 = (envs.fwd1.rate + envs.bwd2.rate) * h  # drives subsystem-2 error
    back1 = envs.bwd1.rate * h
    back2 = envs.bwd2.rate * h
    h2 = h * h
    total = (
        inputs.drive11 * h2 * dd_phi1(mixed21, back1)
        + inputs.drive12 * h2 * phi2(back1)
        + inputs.drive21 * h2 * dd_phi1(mixed12, back2)
        + inputs.drive22 * h2 * phi2(back2)
        + 2.0
        * h2
        * (
            inputs.coupling12
            * inputs.cross12
            * envs.bwd1.amplitude
            * envs.fwd2.amplitude
            * phi1_deriv(mixed21)
            + inputs.coupling21
            * inputs.cross21
            * envs.bwd2.amplitude
            * envs.fwd1.amplitude
            * phi1_deriv(mixed12)
        )
    )
    return max(total, 0.0)


def lyapunov_value(t: float, x1, x2, table: LyapunovTable, sys: CoupledSystem) -> float:
    """Scalar quadratic form x1'P11(t)x1 + 2 x1'P12(t)x2 + x2'P22(t)x2."""
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x1.shape[0] != sys.n1 or x2.shape[0] != sys.n2:
        raise DimensionError(
            f"state split ({x1.shape[0]}, {x2.shape[0]}) != ({sys.n1}, {sys.n2})"
        )
    p = eval_interpolant(t, table, sys)
    return float(x1 @ p.b11 @ x1 + 2.0 * (x1 @ p.b12 @ x2) + x2 @ p.b22 @ x2)


@dataclass(frozen=True)
class StepRecord:
    """Audit row for one discretization interval."""

    index: int
    bracket_min: float
    growth: float


@dataclass(frozen=True)
class CertificateReport:
    verdict: str
    budget: float | None
    jump_log: float | None
    per_step: tuple[StepRecord, ...]
    diagnostics: dict
    table: LyapunovTable | None = field(default=None, repr=False, compare=False)

    @property
    def certified(self) -> bool:
        return self.verdict == STABLE_CERTIFIED

    def to_jsonable(self) -> dict:
        return {
            "verdict": self.verdict,
            "budget": self.budget,
            "jump_log": self.jump_log,
            "per_step": [
                {"m": r.index, "bracket_min": r.bracket_min, "growth": r.growth}
                for r in self.per_step
            ],
            "diagnostics": self.diagnostics,
        }


def _require_spd(p: Block2x2, name: str) -> Block2x2:
    sym = p.symmetrized()
    if float(np.max(np.abs(sym.full() - p.full()))) > 1e-8 * max(
        1.0, spectral_norm(p.full())
    ):
        raise DefinitenessError(f"{name} must be symmetric")
    smallest = sym_eig_range(sym.full())[0]
    if smallest <= 0:
        raise DefinitenessError(
            f"{name} must be positive definite (smallest eigenvalue {smallest:.6e})",
            offending_eigenvalue=smallest,
        )
    return sym


def certify_periodic(
    sys: CoupledSystem,
    p0: Block2x2 | None = None,
    n_intervals: int = 16,
    *,
    envelopes: EnvelopeSet | None = None,
    eps: float | None = None,
    sup_mode: str = "global",
    bounds: IntervalBoundTable | None = None,
) -> CertificateReport:
    """Run the discretized certificate over one period.

    Requires the periodic case (both dwell bounds equal to the period).
    ``sup_mode`` chooses how coupling sup bounds enter the arithmetic:
    "global" uses one uniform bound (the mode the reference results use),
    "per-interval" uses the tighter per-interval table.
    """
    if not sys.is_periodic:
        raise ValueError("certify_periodic requires dwell == (period, period)")
    if n_intervals < 1:
        raise ValueError("n_intervals must be >= 1")
    if sup_mode not in SUP_MODES:
        raise ValueError(f"sup_mode must be one of {SUP_MODES}")
    if p0 is None:
        p0 = default_p0(sys)
    p0 = _require_spd(p0, "p0")

    n = n_intervals
    h = sys.period / n
    if bounds is None:
        bounds = interval_bounds(sys, n)
    if sup_mode == "global":
        bounds = bounds.globalized()
    if envelopes is None:
        envelopes = envelope_set(sys, eps=eps, h_ref=h)
    norm_a11 = spectral_norm(sys.a11)
    norm_a22 = spectral_norm(sys.a22)

    table = build_table(sys, p0, n)
    diagnostics = {
        "n_intervals": n,
        "h": h,
        "sup_mode": sup_mode,
        "envelopes": envelopes.as_dict(),
        "coupling12": list(bounds.coupling12),
        "coupling21": list(bounds.coupling21),
        "strictness_margin": Q_MARGIN,
        "p0": p0.full().tolist(),
        "p_final": table.entry(n).full().tolist(),
    }

    records: list[StepRecord] = []
    accumulated = 0.0
    for m in range(n):
        sups = bounds.sup_at(m)
        entry = table.entry(m)
        lower = sandwich_pair(entry, sups, h).lower
        bracket_min = sym_eig_range(lower.full())[0]
        growth = growth_bound(
            growth_inputs(entry, sups, envelopes, norm_a11, norm_a22), h
        )
        records.append(StepRecord(m, bracket_min, growth))
        if bracket_min <= 0.0:
            diagnostics["failure"] = f"lower bracket not positive definite at interval {m}"
            diagnostics["failing_interval"] = m
            return CertificateReport(
                INCONCLUSIVE, None, None, tuple(records), diagnostics, table
            )
        accumulated += growth / bracket_min

    p_final = table.entry(n)
    b_full = sys.jump.full()
    try:
        jump_eig = gen_sym_eig_max(b_full.T @ p0.full() @ b_full, p_final.full())
    except DefinitenessError as exc:
        diagnostics["failure"] = f"final table entry not positive definite: {exc}"
        return CertificateReport(
            INCONCLUSIVE, None, None, tuple(records), diagnostics, table
        )
    jump_log = math.log(jump_eig)
    budget = accumulated + jump_log
    diagnostics["growth_sum"] = accumulated
    diagnostics["jump_eigenvalue"] = jump_eig
    diagnostics["bracket_min_overall"] = min(r.bracket_min for r in records)
    verdict = STABLE_CERTIFIED if budget <= -Q_MARGIN else INCONCLUSIVE
    return CertificateReport(verdict, budget, jump_log, tuple(records), diagnostics, table)

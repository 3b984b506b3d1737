"""Verification of the environment-dependence lower bound and its derivation steps.

Two runs share one mechanism and one initial environment but start from
different system states. After the same outcome, the final environments must
differ by at least ``||rho_S - rho_S'||_1 - 8 sqrt(delta)``. Each report keeps
the individual inequalities of the derivation so failures can be localized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .mechanism import (
    MeasurementScenario,
    MechanismOutput,
    OutcomeUnitary,
    apply_mechanism,
    residual_delta,
)
from .qcore import (
    PROJECTION_THRESHOLD,
    partial_trace,
    project_renormalize,
    trace_distance,
)
from .errors import DegenerateProjectionError

__all__ = [
    "BOUND_TOL",
    "BoundStep",
    "BoundReport",
    "gentle_check",
    "baseline_report",
    "appendix_chain",
    "auxiliary_states",
]

BOUND_TOL = 1e-9


class BoundStep(NamedTuple):
    """One inequality; ``kind`` is "le", "ge" or "eq"."""

    label: str
    lhs: float
    rhs: float
    kind: str
    holds: bool


def _step(label: str, lhs: float, rhs: float, kind: str, tol: float = BOUND_TOL) -> BoundStep:
    if kind == "le":
        ok = lhs <= rhs + tol
    elif kind == "ge":
        ok = lhs >= rhs - tol
    elif kind == "eq":
        ok = abs(lhs - rhs) <= tol
    else:
        raise ValueError(f"unknown inequality kind {kind!r}")
    return BoundStep(label, float(lhs), float(rhs), kind, bool(ok))


@dataclass
class BoundReport:
    lhs: float
    rhs: float
    slack: float
    delta_used: float
    steps: list[BoundStep] = field(default_factory=list)
    eta: float = 0.0
    gamma: float = 0.0
    tail_weight: float = 0.0

    @property
    def extrapolation(self) -> bool:
        """True when the environment had weight outside the dominant subspace."""
        return self.tail_weight > 1e-12

    @property
    def bound_holds(self) -> bool:
        return self.slack >= -BOUND_TOL

    @property
    def holds(self) -> bool:
        return self.bound_holds and all(s.holds for s in self.steps)

    def step(self, label: str) -> BoundStep:
        for s in self.steps:
            if s.label == label:
                return s
        raise KeyError(label)


def gentle_check(rho: np.ndarray, P: np.ndarray) -> tuple[float, float]:
    """``(||rho - P rho P / tr(P rho)||_1, 2 sqrt(1 - tr(P rho)))``."""
    rho = np.asarray(rho, dtype=complex)
    weight = float(np.real(np.trace(P @ rho)))
    post = project_renormalize(rho, P)
    lhs = trace_distance(rho, post)
    rhs = 2.0 * np.sqrt(max(0.0, 1.0 - weight))
    return lhs, float(rhs)


class _Run(NamedTuple):
    out: MechanismOutput
    delta: float


def _two_runs(U, rho_S, rho_S_prime, rho_E, sc):
    runs = []
    for r in (rho_S, rho_S_prime):
        out = apply_mechanism(U, r, rho_E, sc)
        runs.append(_Run(out, residual_delta(out.rho_SE, sc)))
    return runs


def _delta(runs, delta):
    if delta is not None:
        return float(delta)
    return max(r.delta for r in runs)


def baseline_report(
    U: OutcomeUnitary,
    rho_S: np.ndarray,
    rho_S_prime: np.ndarray,
    rho_E: np.ndarray,
    sc: MeasurementScenario,
    delta: float | None = None,
) -> BoundReport:
    """Check ``||rho_E^f - rho_E'^f||_1 >= ||rho_S - rho_S'||_1 - 8 sqrt(delta)``.

    ``delta`` defaults to the larger measured residual of the two runs; pass
    the mechanism's calibrated value to test its guarantee instead.
    """
    runs = _two_runs(U, rho_S, rho_S_prime, rho_E, sc)
    return _baseline_from_runs(runs, rho_S, rho_S_prime, _delta(runs, delta))


def _baseline_from_runs(runs, rho_S, rho_S_prime, delta) -> BoundReport:
    lhs = trace_distance(runs[0].out.rho_E, runs[1].out.rho_E)
    rhs = trace_distance(rho_S, rho_S_prime) - 8.0 * np.sqrt(delta)
    return BoundReport(
        lhs=lhs,
        rhs=float(rhs),
        slack=float(lhs - rhs),
        delta_used=delta,
        tail_weight=runs[0].out.tail_weight,
    )


def auxiliary_states(rho_SE: np.ndarray, sc: MeasurementScenario) -> tuple[np.ndarray, np.ndarray]:
    """``sigma_SE`` (outcome-projected, renormalized) and ``sigma_E = tr_S sigma_SE``."""
    try:
        sigma_SE = project_renormalize(rho_SE, sc.outcome_projector_S())
    except DegenerateProjectionError:
        raise DegenerateProjectionError(
            f"final system has weight below {PROJECTION_THRESHOLD:g} on the outcome"
        ) from None
    sigma_E = partial_trace(sigma_SE, (sc.fact.d_S, sc.fact.d_E), [1])
    return sigma_SE, sigma_E


def appendix_chain(
    U: OutcomeUnitary,
    rho_S: np.ndarray,
    rho_S_prime: np.ndarray,
    rho_E: np.ndarray,
    sc: MeasurementScenario,
    delta: float | None = None,
) -> BoundReport:
    """Baseline report plus the six intermediate steps (a)-(f).

    Steps (a) and (b) are evaluated for both runs and the one with the smaller
    margin is recorded.
    """
    runs = _two_runs(U, rho_S, rho_S_prime, rho_E, sc)
    d = _delta(runs, delta)
    report = _baseline_from_runs(runs, rho_S, rho_S_prime, d)
    root = np.sqrt(d)

    aux = [auxiliary_states(r.out.rho_SE, sc) for r in runs]
    gentle = [trace_distance(r.out.rho_SE, s[0]) for r, s in zip(runs, aux)]
    reduced = [trace_distance(r.out.rho_E, s[1]) for r, s in zip(runs, aux)]

    a_worst = int(np.argmax(gentle))
    b_worst = int(np.argmax([reduced[i] - gentle[i] for i in range(2)]))
    sigma_E_dist = trace_distance(aux[0][1], aux[1][1])
    sigma_SE_dist = trace_distance(aux[0][0], aux[1][0])
    rho_SE_dist = trace_distance(runs[0].out.rho_SE, runs[1].out.rho_SE)

    report.steps = [
        _step("a", gentle[a_worst], 2.0 * root, "le"),
        _step("b", reduced[b_worst], gentle[b_worst], "le"),
        _step("c", report.lhs, sigma_E_dist - 4.0 * root, "ge"),
        _step("d", sigma_E_dist, sigma_SE_dist, "eq"),
        _step("e", sigma_SE_dist, rho_SE_dist - 4.0 * root, "ge"),
        _step("f", rho_SE_dist, trace_distance(rho_S, rho_S_prime), "eq"),
    ]
    return report

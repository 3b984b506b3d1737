"""Seeded random trials for the dependence bounds.

Each trial is a pure function of ``(config, group, index)``. All randomness
comes from a per-trial seed derived with :class:`numpy.random.SeedSequence`,
so trials can run in any order or process and still reproduce exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import BoundReport, appendix_chain
from .config import ScenarioConfig
from .ensemble import (
    EnvironmentEnsemble,
    MechanismEnsemble,
    environment_ensemble_around,
    mechanism_ensemble_around,
    noisy_report,
)
from .mechanism import MeasurementScenario, build_perturbed_mechanism
from .qcore import dm, sample_pure, sample_state

__all__ = [
    "GroupParams",
    "trial_seed",
    "draw_system_pair",
    "draw_environment",
    "baseline_trial",
    "noisy_trial",
]


@dataclass(frozen=True)
class GroupParams:
    delta: float
    eta: float = 0.0
    gamma: float = 0.0
    noisy: bool = False


def trial_seed(seed: int, group: int, index: int) -> int:
    """Deterministic 63-bit seed for one trial."""
    state = np.random.SeedSequence([int(seed), int(group), int(index)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def _admissible(sc: MeasurementScenario, rho: np.ndarray) -> bool:
    return sc.outcome_weight(rho) > 1e-6


def draw_system_pair(sc: MeasurementScenario, kind: str, rng: np.random.Generator):
    """Two admissible system states.

    ``mixed``: random ranks; ``pure``: two random pure states; ``orthogonal``:
    two orthogonal pure states, both with weight on the outcome.
    """
    d_S = sc.fact.d_S
    for _ in range(100):
        if kind == "mixed":
            a = sample_state(d_S, int(rng.integers(1, d_S + 1)), rng)
            b = sample_state(d_S, int(rng.integers(1, d_S + 1)), rng)
        elif kind == "pure":
            a, b = dm(sample_pure(d_S, rng)), dm(sample_pure(d_S, rng))
        elif kind == "orthogonal":
            psi = sample_pure(d_S, rng)
            phi = sample_pure(d_S, rng)
            phi = phi - psi * (psi.conj() @ phi)
            phi /= np.linalg.norm(phi)
            a, b = dm(psi), dm(phi)
        else:
            raise ValueError(f"unknown system kind {kind!r}")
        if _admissible(sc, a) and _admissible(sc, b):
            return a, b
    raise RuntimeError("could not draw admissible system states")


def draw_environment(
    sc: MeasurementScenario,
    rng: np.random.Generator,
    tail_weight: float = 0.0,
    rank: int | None = None,
) -> np.ndarray:
    """Random environment with weight ``1 - tail_weight`` on the dominant subspace."""
    basis = sc.dominant_env_basis
    r = int(rng.integers(1, sc.D + 1)) if rank is None else min(rank, sc.D)
    rho = basis @ sample_state(sc.D, r, rng) @ basis.conj().T
    if tail_weight > 0:
        d_E = sc.fact.d_E
        if d_E == sc.D:
            raise ValueError("no room outside the dominant subspace for a tail")
        q, _ = np.linalg.qr(np.hstack([basis, np.eye(d_E)]), mode="complete")
        comp = q[:, sc.D : d_E]
        tail = comp @ sample_state(d_E - sc.D, d_E - sc.D, rng) @ comp.conj().T
        rho = (1.0 - tail_weight) * rho + tail_weight * tail
    return 0.5 * (rho + rho.conj().T)


def _setup(cfg: ScenarioConfig, seed: int, delta: float):
    sc = cfg.scenario(seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    return sc, rng, build_perturbed_mechanism(sc, delta)


def baseline_trial(cfg: ScenarioConfig, seed: int, delta: float) -> BoundReport:
    sc, rng, U = _setup(cfg, seed, delta)
    rho_S, rho_S_prime = draw_system_pair(sc, cfg.system, rng)
    rho_E = draw_environment(sc, rng, cfg.tail_weight, cfg.env_rank)
    use = U.delta_target if cfg.delta_source == "calibrated" else None
    return appendix_chain(U, rho_S, rho_S_prime, rho_E, sc, delta=use)


def _weights(spec, n):
    return None if spec == "uniform" else np.asarray(spec, dtype=float)


def noisy_trial(
    cfg: ScenarioConfig, seed: int, delta: float, eta: float, gamma: float
) -> BoundReport:
    """Ensembles of perturbed mechanisms and environments around one base each.

    ``gamma`` and ``eta`` set each non-base member's distance from its base; the
    spreads measured about the central members never exceed them.
    """
    sc, rng, base = _setup(cfg, seed, delta)
    ens = cfg.ensemble
    mech: MechanismEnsemble = mechanism_ensemble_around(
        base, sc, ens.mechanisms, gamma, rng, _weights(ens.mechanism_weights, ens.mechanisms)
    )
    rho_E = draw_environment(sc, rng, cfg.tail_weight, cfg.env_rank)
    env: EnvironmentEnsemble = environment_ensemble_around(
        rho_E, sc, ens.environments, eta, rng,
        _weights(ens.environment_weights, ens.environments),
    )
    rho_S, rho_S_prime = draw_system_pair(sc, cfg.system, rng)
    return noisy_report(mech, env, rho_S, rho_S_prime, sc)

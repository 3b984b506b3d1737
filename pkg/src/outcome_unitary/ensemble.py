"""Run-to-run fluctuations of the mechanism and of the initial environment.

Mechanism spread is measured in diamond distance about the central member and
environment spread in trace distance about its central member. The averaged
final environment then obeys the dependence bound weakened by
``2 (eta + gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
import scipy.linalg

from .bounds import BoundReport, BoundStep, _step
from .errors import InvalidStateError, NotUnitaryError
from .mechanism import (
    MeasurementScenario,
    OutcomeUnitary,
    apply_mechanism,
    environment_images,
)
from .qcore import check_density_matrix, sample_state, trace_distance

__all__ = [
    "MechanismEnsemble",
    "EnvironmentEnsemble",
    "NoiseBudget",
    "AveragedEnvironment",
    "hull_distance_from_origin",
    "diamond_distance_unitary",
    "diamond_distance_lower_bound",
    "central_member",
    "averaged_final_environment",
    "mechanism_ensemble_around",
    "environment_ensemble_around",
    "noisy_report",
]

UNITARY_ATOL = 1e-8
WEIGHT_ATOL = 1e-12
EXACT_AVERAGE_LIMIT = 10**4


def _check_weights(weights, n: int, what: str) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise InvalidStateError(f"{what} weights have shape {w.shape}, expected ({n},)")
    if np.any(w < 0):
        raise InvalidStateError(f"{what} weights must be non-negative")
    if abs(w.sum() - 1.0) > WEIGHT_ATOL:
        raise InvalidStateError(f"{what} weights sum to {w.sum():.15g}, not 1")
    return w


@dataclass(frozen=True, eq=False)
class MechanismEnsemble:
    members: tuple[OutcomeUnitary, ...]
    weights: np.ndarray

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise InvalidStateError("mechanism ensemble is empty")
        if len({m.theta for m in members}) != 1:
            raise InvalidStateError("all mechanisms in an ensemble must share theta")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", _check_weights(self.weights, len(members), "mechanism"))

    @classmethod
    def uniform(cls, members: Sequence[OutcomeUnitary]) -> "MechanismEnsemble":
        return cls(tuple(members), np.full(len(members), 1.0 / len(members)))

    @property
    def delta(self) -> float:
        return max(m.delta_target for m in self.members)

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True, eq=False)
class EnvironmentEnsemble:
    members: tuple[np.ndarray, ...]
    weights: np.ndarray

    def __post_init__(self):
        if len(self.members) == 0:
            raise InvalidStateError("environment ensemble is empty")
        # validate only; repair happens once, when a member is evolved
        members = tuple(check_density_matrix(m, repair=False) for m in self.members)
        object.__setattr__(self, "members", members)
        object.__setattr__(
            self, "weights", _check_weights(self.weights, len(members), "environment")
        )

    @classmethod
    def uniform(cls, members: Sequence[np.ndarray]) -> "EnvironmentEnsemble":
        return cls(tuple(members), np.full(len(members), 1.0 / len(members)))

    def mean(self) -> np.ndarray:
        return sum(v * m for v, m in zip(self.weights, self.members))

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class NoiseBudget:
    delta: float
    eta: float
    gamma: float

    def __post_init__(self):
        for name in ("delta", "eta", "gamma"):
            value = getattr(self, name)
            if not 0.0 <= value <= 2.0 + 1e-12:
                raise InvalidStateError(f"{name}={value} outside [0, 2]")

    @property
    def total(self) -> float:
        return 8.0 * np.sqrt(self.delta) + 2.0 * (self.eta + self.gamma)


class AveragedEnvironment(NamedTuple):
    rho: np.ndarray
    n_samples: int | None


def _widest_gap(points: np.ndarray) -> float:
    angles = np.sort(np.mod(np.angle(points), 2 * np.pi))
    return float(np.max(np.diff(np.append(angles, angles[0] + 2 * np.pi))))


def hull_distance_from_origin(points: np.ndarray) -> float:
    """Distance from 0 to the convex hull of points on the unit circle.

    With the points sorted by angle, the hull misses the origin exactly when
    some angular gap exceeds pi; the nearest hull point then lies on the chord
    closing that gap.
    """
    points = np.asarray(points, dtype=complex).ravel()
    if points.size == 0:
        raise ValueError("need at least one point")
    if np.any(np.abs(np.abs(points) - 1.0) > 1e-8):
        raise ValueError("points must lie on the unit circle")
    widest = _widest_gap(points)
    if widest <= np.pi:
        return 0.0
    return float(np.cos((2 * np.pi - widest) / 2))


def _check_unitary(u: np.ndarray, name: str) -> np.ndarray:
    u = np.asarray(u.matrix if isinstance(u, OutcomeUnitary) else u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NotUnitaryError(f"{name} must be square, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > UNITARY_ATOL:
        raise NotUnitaryError(f"{name} is not unitary (error {err:.2e})")
    return u


def diamond_distance_unitary(U, V) -> float:
    """Diamond-norm distance between the channels ``U . U^dagger`` and ``V . V^dagger``.

    Uses the eigenvalues of ``V^dagger U``: with ``d0`` the distance from the
    origin to their convex hull, the value is ``2 sqrt(1 - d0^2)``.
    """
    u = _check_unitary(U, "U")
    v = _check_unitary(V, "V")
    if u.shape != v.shape:
        raise InvalidStateError(f"dimension mismatch {u.shape} vs {v.shape}")
    eig = np.linalg.eigvals(v.conj().T @ u)
    widest = _widest_gap(eig / np.abs(eig))
    if widest <= np.pi:
        return 2.0
    # 2 sqrt(1 - cos^2(arc/2)) written as a sine to keep precision for tiny arcs
    return float(2.0 * np.sin((2 * np.pi - widest) / 2))


def diamond_distance_lower_bound(U, V, samples: int = 10_000, seed=0) -> float:
    """Monte Carlo lower bound on the diamond distance of two unitary channels.

    Every evaluation uses a pure input on the doubled space, whose output
    distance is ``2 sqrt(1 - |<psi|(U^dagger V (x) I)|psi>|^2)``. Half of the
    budget goes to random inputs, the rest to a shrinking random walk around
    the best one found.
    """
    u = _check_unitary(U, "U")
    v = _check_unitary(V, "V")
    w = u.conj().T @ v
    d = w.shape[0]
    rng = np.random.default_rng(seed)

    def values(psis: np.ndarray) -> np.ndarray:
        # psis: (n, d, d) with unit Frobenius norm; overlap = tr(Psi^dagger W Psi)
        ov = np.einsum("nij,ik,nkj->n", psis.conj(), w, psis)
        return 2.0 * np.sqrt(np.clip(1.0 - np.abs(ov) ** 2, 0.0, 1.0))

    def normalize(psis):
        return psis / np.linalg.norm(psis, axis=(1, 2), keepdims=True)

    def gaussian(n):
        return rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))

    n_random = max(1, samples // 2)
    best, best_psi = -1.0, None
    done = 0
    while done < n_random:
        n = min(1000, n_random - done)
        psis = normalize(gaussian(n))
        vals = values(psis)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, best_psi = float(vals[j]), psis[j]
        done += n
    step = 0.3
    batch = 50
    while done < samples:
        n = min(batch, samples - done)
        psis = normalize(best_psi[None] + step * gaussian(n))
        vals = values(psis)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, best_psi = float(vals[j]), psis[j]
        else:
            step *= 0.7
            if step < 1e-6:
                step = 0.3
        done += n
    return best


def _pairwise(ens) -> np.ndarray:
    n = len(ens)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if isinstance(ens, MechanismEnsemble):
                dij = diamond_distance_unitary(ens.members[i], ens.members[j])
            else:
                dij = trace_distance(ens.members[i], ens.members[j])
            dist[i, j] = dist[j, i] = dij
    return dist


def central_member(ens: Union[MechanismEnsemble, EnvironmentEnsemble]) -> tuple[int, float]:
    """Member minimizing the weighted average distance to all members.

    Returns its index (lowest on ties) and the attained minimum, which is the
    ensemble's spread (gamma for mechanisms, eta for environments).
    """
    if len(ens) == 0:
        raise InvalidStateError("ensemble is empty")
    scores = ens.weights @ _pairwise(ens)
    best = float(np.min(scores))
    index = int(np.flatnonzero(scores <= best + 1e-12)[0])
    return index, float(scores[index])


def _final_environment(U, rho_S, rho_E, sc) -> np.ndarray:
    return apply_mechanism(U, rho_S, rho_E, sc).rho_E


def averaged_final_environment(
    mech: MechanismEnsemble,
    env: EnvironmentEnsemble,
    rho_S: np.ndarray,
    sc: MeasurementScenario,
    *,
    samples: int = 10_000,
    seed=0,
) -> AveragedEnvironment:
    """Weighted average of final environments over mechanisms and environments.

    The double sum is exact when it has at most 10^4 terms; otherwise ``samples``
    independent (mechanism, environment) draws are averaged.
    """
    rho_S = check_density_matrix(rho_S)
    sc.check_admissible(rho_S)
    if len(mech) * len(env) <= EXACT_AVERAGE_LIMIT:
        # final environment is linear in rho_E: average the environments first
        rho_bar = env.mean()
        acc = np.zeros((sc.fact.d_E, sc.fact.d_E), dtype=complex)
        for w, U in zip(mech.weights, mech.members):
            if w == 0:
                continue
            acc = acc + w * _final_environment(U, rho_S, rho_bar, sc)
        return AveragedEnvironment(acc, None)
    rng = np.random.default_rng(seed)
    ls = rng.choice(len(mech), size=samples, p=mech.weights)
    ms = rng.choice(len(env), size=samples, p=env.weights)
    pairs, counts = np.unique(np.stack([ls, ms], axis=1), axis=0, return_counts=True)
    acc = np.zeros((sc.fact.d_E, sc.fact.d_E), dtype=complex)
    for (l, m), c in zip(pairs, counts):
        acc = acc + c * _final_environment(mech.members[l], rho_S, env.members[m], sc)
    return AveragedEnvironment(acc / samples, samples)


def _random_generator(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def mechanism_ensemble_around(
    base: OutcomeUnitary,
    sc: MeasurementScenario,
    size: int,
    distance: float,
    seed=0,
    weights=None,
) -> MechanismEnsemble:
    """``base`` plus ``size - 1`` members ``(I_SA (x) W_l) base`` at diamond distance
    ``distance`` from it.

    ``W_l = exp(i s H_l)`` with ``H_l`` a random Hermitian operator on the
    environment rescaled to eigenvalue spread 2, so its eigenphases span ``2s``
    and ``s = arcsin(distance / 2)``. Environment-side rotations keep every
    member mapping the dominant subspace onto the outcome with the same residual.
    """
    if size < 1:
        raise InvalidStateError("ensemble size must be at least 1")
    if not 0 <= distance <= 2:
        raise InvalidStateError(f"distance must lie in [0, 2], got {distance}")
    rng = _random_generator(seed)
    f = sc.fact
    s = float(np.arcsin(distance / 2.0))
    members = [base]
    for _ in range(size - 1):
        g = rng.standard_normal((f.d_E, f.d_E)) + 1j * rng.standard_normal((f.d_E, f.d_E))
        h = 0.5 * (g + g.conj().T)
        lam = np.linalg.eigvalsh(h)
        if f.d_E == 1 or lam[-1] - lam[0] < 1e-12:
            w_env = np.eye(f.d_E, dtype=complex)
        else:
            h = (h - 0.5 * (lam[-1] + lam[0]) * np.eye(f.d_E)) * (2.0 / (lam[-1] - lam[0]))
            w_env = scipy.linalg.expm(1j * s * h)
        matrix = np.kron(np.eye(f.d_S * f.d_A), w_env) @ base.matrix
        members.append(
            OutcomeUnitary(
                matrix=matrix,
                theta=base.theta,
                D=base.D,
                delta_target=base.delta_target,
                env_images=environment_images(matrix, sc),
                angle=base.angle,
                meta={**base.meta, "env_rotation": s},
            )
        )
    w = np.full(size, 1.0 / size) if weights is None else weights
    return MechanismEnsemble(tuple(members), w)


def environment_ensemble_around(
    base: np.ndarray,
    sc: MeasurementScenario,
    size: int,
    distance: float,
    seed=0,
    weights=None,
) -> EnvironmentEnsemble:
    """``base`` plus ``size - 1`` mixtures ``(1 - t) base + t sigma_m`` with random
    ``sigma_m`` on the dominant subspace, ``t`` chosen so each member sits at
    trace distance ``distance`` from ``base`` (or as close as ``t <= 1`` allows)."""
    if size < 1:
        raise InvalidStateError("ensemble size must be at least 1")
    if distance < 0:
        raise InvalidStateError(f"distance must be non-negative, got {distance}")
    base = check_density_matrix(base)
    rng = _random_generator(seed)
    basis = sc.dominant_env_basis
    members = [base]
    for _ in range(size - 1):
        rank = int(rng.integers(1, sc.D + 1))
        sigma = basis @ sample_state(sc.D, rank, rng) @ basis.conj().T
        gap = trace_distance(sigma, base)
        t = 0.0 if gap < 1e-14 else min(1.0, distance / gap)
        member = (1.0 - t) * base + t * sigma
        members.append(0.5 * (member + member.conj().T))
    w = np.full(size, 1.0 / size) if weights is None else weights
    return EnvironmentEnsemble(tuple(members), w)


def _worst(step_pairs: list[BoundStep]) -> BoundStep:
    """Of two evaluations of the same inequality keep the one with least margin."""

    def margin(s: BoundStep) -> float:
        if s.kind == "le":
            return s.rhs - s.lhs
        if s.kind == "ge":
            return s.lhs - s.rhs
        return -abs(s.lhs - s.rhs)

    return min(step_pairs, key=margin)


def noisy_report(
    mech: MechanismEnsemble,
    env: EnvironmentEnsemble,
    rho_S: np.ndarray,
    rho_S_prime: np.ndarray,
    sc: MeasurementScenario,
    delta: float | None = None,
) -> BoundReport:
    """Check ``||rho_bar_E(rho_S) - rho_bar_E(rho_S')||_1 >=
    ||rho_S - rho_S'||_1 - 8 sqrt(delta) - 2 (eta + gamma)``.

    ``delta`` defaults to the largest calibrated residual among the mechanisms.
    The recorded steps follow the derivation: convexity, the split through the
    central mechanism, the environment and mechanism spreads, the resulting
    noise bound, the triangle step, and the noiseless bound at the centre.
    """
    d = mech.delta if delta is None else float(delta)
    l0, gamma = central_member(mech)
    m0, eta = central_member(env)
    w, v = mech.weights, env.weights

    per_state = []
    for r in (rho_S, rho_S_prime):
        finals = [
            [apply_mechanism(U, r, rho_E, sc).rho_E for rho_E in env.members]
            for U in mech.members
        ]
        rho_bar = np.zeros_like(finals[0][0])
        for l, row in enumerate(finals):
            for m, rho in enumerate(row):
                rho_bar = rho_bar + (w[l] * v[m]) * rho
        per_state.append((finals, rho_bar))

    lhs = trace_distance(per_state[0][1], per_state[1][1])
    rhs = trace_distance(rho_S, rho_S_prime) - 8.0 * np.sqrt(d) - 2.0 * (eta + gamma)

    convexity, split, eta_steps, gamma_steps, noise = [], [], [], [], []
    for finals, rho_bar in per_state:
        center = finals[l0][m0]
        to_center = np.array([[trace_distance(rho, center) for rho in row] for row in finals])
        env_part = np.array(
            [[trace_distance(rho, row[m0]) for rho in row] for row in finals]
        )
        mech_part = np.array([trace_distance(center, row[m0]) for row in finals])
        weighted = float(w @ to_center @ v)
        env_avg = float(w @ env_part @ v)
        mech_avg = float(w @ mech_part)
        deviation = trace_distance(rho_bar, center)
        convexity.append(_step("convexity", deviation, weighted, "le"))
        split.append(_step("split", weighted, env_avg + mech_avg, "le"))
        eta_steps.append(_step("eta", env_avg, eta, "le"))
        gamma_steps.append(_step("gamma", mech_avg, gamma, "le"))
        noise.append(_step("noise", deviation, eta + gamma, "le"))

    centers = [finals[l0][m0] for finals, _ in per_state]
    center_dist = trace_distance(centers[0], centers[1])
    deviations = [s.lhs for s in noise]
    steps = [
        _worst(convexity),
        _worst(split),
        _worst(eta_steps),
        _worst(gamma_steps),
        _worst(noise),
        _step("triangle", lhs, center_dist - deviations[0] - deviations[1], "ge"),
        _step(
            "center-baseline",
            center_dist,
            trace_distance(rho_S, rho_S_prime) - 8.0 * np.sqrt(d),
            "ge",
        ),
    ]
    tail = max(sc.tail_weight(m) for m in env.members)
    return BoundReport(
        lhs=lhs,
        rhs=float(rhs),
        slack=float(lhs - rhs),
        delta_used=d,
        steps=steps,
        eta=eta,
        gamma=gamma,
        tail_weight=tail,
    )

"""Outcome-conditioned unitaries and the shared von Neumann coupling.

An outcome-``theta`` mechanism sends every ready-apparatus input whose
environment lies in the dominant subspace to ``|o_theta>|a_theta>`` times some
environment state. The outcome is carried by which unitary acts, never by a
nonlinearity: every mechanism built here is an ordinary unitary matrix.

Indexing: outcomes and pointer states are labelled ``1..d_S`` (pointer 0 is the
ready state); dominant environment vectors are labelled ``0..D-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    CalibrationError,
    InadmissibleStateError,
    InfeasibleConstructionError,
    InvalidStateError,
    RecoveryError,
)
from .qcore import (
    HilbertFactorization,
    check_density_matrix,
    dm,
    partial_trace,
    sample_unitary,
    unitarity_error,
)

__all__ = [
    "ADMISSIBILITY_THRESHOLD",
    "MeasurementScenario",
    "OutcomeUnitary",
    "MechanismOutput",
    "complete_unitary",
    "environment_images",
    "basis_residuals",
    "build_exact_mechanism",
    "build_perturbed_mechanism",
    "apply_mechanism",
    "residual_delta",
    "recover_superposition",
    "von_neumann_control",
    "definiteness",
]

ADMISSIBILITY_THRESHOLD = 1e-9
ORTHONORMAL_ATOL = 1e-10
MAX_BISECTION_STEPS = 200

# sub-stream tags for seeded draws
_IMAGES, _SCRAMBLE, _DIRECTIONS, _ANGLES, _VN_ENV = 1, 2, 3, 4, 5


def _substream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


def _check_orthonormal(cols: np.ndarray, what: str) -> None:
    gram = cols.conj().T @ cols
    if not np.allclose(gram, np.eye(gram.shape[0]), atol=ORTHONORMAL_ATOL, rtol=0):
        raise InvalidStateError(f"{what} are not orthonormal")


@dataclass(frozen=True, eq=False)
class MeasurementScenario:
    """Dimensions, bases and outcome label for one measurement setting.

    ``observable_basis`` holds ``|o_1>..|o_n>`` as columns,
    ``apparatus_states`` holds ``|a_0>`` (ready) then ``|a_1>..|a_n>``, and
    ``dominant_env_basis`` holds the ``D`` environment vectors spanning the
    range of the fixed dominant projector.
    """

    fact: HilbertFactorization
    theta: int
    D: int
    observable_basis: np.ndarray
    apparatus_states: np.ndarray
    dominant_env_basis: np.ndarray
    seed: int = 0

    def __post_init__(self):
        f = self.fact
        if not 1 <= self.theta <= f.d_S:
            raise InvalidStateError(f"theta must lie in 1..{f.d_S}, got {self.theta}")
        if not 1 <= self.D <= f.d_E:
            raise InvalidStateError(f"D must lie in 1..{f.d_E}, got {self.D}")
        if f.d_S * self.D > f.d_E:
            raise InfeasibleConstructionError(
                f"d_S*D = {f.d_S * self.D} exceeds d_E = {f.d_E}: "
                "no orthonormal environment images exist"
            )
        shapes = {
            "observable_basis": (f.d_S, f.d_S),
            "apparatus_states": (f.d_A, f.d_S + 1),
            "dominant_env_basis": (f.d_E, self.D),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != shape:
                raise InvalidStateError(f"{name} has shape {arr.shape}, expected {shape}")
            _check_orthonormal(arr, name)
            object.__setattr__(self, name, arr)

    @classmethod
    def standard(
        cls,
        d_S: int,
        d_A: int,
        d_E: int,
        D: int,
        theta: int = 1,
        seed: int = 0,
        random_bases: bool = False,
    ) -> "MeasurementScenario":
        """Scenario in computational bases, or in seeded random bases."""
        fact = HilbertFactorization(d_S, d_A, d_E)
        if random_bases:
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
            obs = sample_unitary(d_S, rng)
            app = sample_unitary(d_A, rng)[:, : d_S + 1]
            env = sample_unitary(d_E, rng)[:, :D]
        else:
            obs = np.eye(d_S, dtype=complex)
            app = np.eye(d_A, d_S + 1, dtype=complex)
            env = np.eye(d_E, D, dtype=complex)
        return cls(fact, theta, D, obs, app, env, seed)

    def with_theta(self, theta: int) -> "MeasurementScenario":
        return MeasurementScenario(
            self.fact, theta, self.D, self.observable_basis,
            self.apparatus_states, self.dominant_env_basis, self.seed,
        )

    def with_seed(self, seed: int) -> "MeasurementScenario":
        return MeasurementScenario(
            self.fact, self.theta, self.D, self.observable_basis,
            self.apparatus_states, self.dominant_env_basis, seed,
        )

    def o(self, i: int) -> np.ndarray:
        return self.observable_basis[:, i - 1]

    def a(self, j: int) -> np.ndarray:
        return self.apparatus_states[:, j]

    def e(self, k: int) -> np.ndarray:
        return self.dominant_env_basis[:, k]

    @property
    def o_theta(self) -> np.ndarray:
        return self.o(self.theta)

    @property
    def a_theta(self) -> np.ndarray:
        return self.a(self.theta)

    def dominant_inputs(self) -> np.ndarray:
        """Columns ``|o_i>|a_0>|e_k>``, column index ``(i-1)*D + k``."""
        a0 = self.a(0)
        cols = [
            np.kron(np.kron(self.o(i), a0), self.e(k))
            for i in range(1, self.fact.d_S + 1)
            for k in range(self.D)
        ]
        return np.column_stack(cols)

    def dominant_projector(self) -> np.ndarray:
        b = self.dominant_env_basis
        return b @ b.conj().T

    def outcome_projector_SA(self) -> np.ndarray:
        """``|o_theta a_theta><o_theta a_theta| (x) I_E`` on the joint space."""
        sa = np.kron(self.o_theta, self.a_theta)
        return np.kron(np.outer(sa, sa.conj()), np.eye(self.fact.d_E))

    def outcome_projector_S(self) -> np.ndarray:
        """``|o_theta><o_theta| (x) I_E`` on S (x) E."""
        return np.kron(dm(self.o_theta), np.eye(self.fact.d_E))

    def outcome_weight(self, rho_S: np.ndarray) -> float:
        return float(np.real(self.o_theta.conj() @ rho_S @ self.o_theta))

    def check_admissible(self, rho_S: np.ndarray) -> None:
        w = self.outcome_weight(rho_S)
        if w <= ADMISSIBILITY_THRESHOLD:
            raise InadmissibleStateError(
                f"<o_theta|rho_S|o_theta> = {w:.3e} is not above {ADMISSIBILITY_THRESHOLD:g}"
            )

    def tail_weight(self, rho_E: np.ndarray) -> float:
        """Environment weight outside the dominant subspace."""
        inside = np.real(np.trace(self.dominant_projector() @ rho_E))
        return float(max(0.0, 1.0 - inside))

    def initial_state(self, rho_S: np.ndarray, rho_E: np.ndarray) -> np.ndarray:
        return np.kron(np.kron(rho_S, dm(self.a(0))), rho_E)


@dataclass(frozen=True, eq=False)
class OutcomeUnitary:
    """A unitary on S (x) A (x) E realizing one outcome.

    ``env_images[:, (i-1)*D + k]`` is the normalized environment part of the
    image of ``|o_i>|a_0>|e_k>`` inside ``|o_theta>|a_theta>``.
    ``delta_target`` is the largest residual over dominant basis inputs.
    """

    matrix: np.ndarray
    theta: int
    D: int
    delta_target: float
    env_images: np.ndarray
    angle: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        err = unitarity_error(self.matrix)
        if err >= 1e-10:
            raise InvalidStateError(f"mechanism matrix is not unitary (error {err:.2e})")

    def image(self, i: int, k: int) -> np.ndarray:
        return self.env_images[:, (i - 1) * self.D + k]


class MechanismOutput(NamedTuple):
    rho_SAE: np.ndarray
    rho_SE: np.ndarray
    rho_E: np.ndarray
    rho_A: np.ndarray
    tail_weight: float


def _complement(cols: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the orthogonal complement of ``cols``."""
    d, r = cols.shape
    q, _ = np.linalg.qr(np.hstack([cols, np.eye(d, dtype=complex)]), mode="complete")
    comp = q[:, r:d]
    # re-orthogonalize against cols to kill QR rounding
    comp = comp - cols @ (cols.conj().T @ comp)
    q2, _ = np.linalg.qr(comp)
    return q2


def complete_unitary(inputs: np.ndarray, outputs: np.ndarray, scramble=None) -> np.ndarray:
    """Unitary sending each input column to the matching output column.

    Both column sets must be orthonormal. The complements are paired by a
    deterministic basis, optionally mixed by a Haar unitary drawn from
    ``scramble`` (a seed or generator).
    """
    inputs = np.asarray(inputs, dtype=complex)
    outputs = np.asarray(outputs, dtype=complex)
    if inputs.shape != outputs.shape:
        raise ValueError(f"shape mismatch {inputs.shape} vs {outputs.shape}")
    _check_orthonormal(inputs, "input columns")
    _check_orthonormal(outputs, "output columns")
    d, r = inputs.shape
    u = outputs @ inputs.conj().T
    if r < d:
        xc = _complement(inputs)
        yc = _complement(outputs)
        if scramble is not None:
            yc = yc @ sample_unitary(d - r, scramble)
        u = u + yc @ xc.conj().T
    return u


def environment_images(matrix: np.ndarray, sc: MeasurementScenario) -> np.ndarray:
    """Normalized ``<o_theta a_theta| U |o_i a_0 e_k>`` for every dominant input."""
    f = sc.fact
    out = matrix @ sc.dominant_inputs()
    sa = np.kron(sc.o_theta, sc.a_theta)
    # contract the S (x) A index with <o_theta a_theta|
    blocks = out.reshape(f.d_S * f.d_A, f.d_E, -1)
    env = np.einsum("s,sec->ec", sa.conj(), blocks)
    norms = np.linalg.norm(env, axis=0)
    safe = np.where(norms > 1e-15, norms, 1.0)
    return env / safe


def basis_residuals(matrix: np.ndarray, sc: MeasurementScenario) -> np.ndarray:
    """``1 - <o_theta| tr_AE(U |in><in| U^dagger) |o_theta>`` per dominant basis input."""
    f = sc.fact
    out = matrix @ sc.dominant_inputs()
    blocks = out.reshape(f.d_S, f.d_A * f.d_E, -1)
    on_theta = np.einsum("s,sxc->xc", sc.o_theta.conj(), blocks)
    return np.clip(1.0 - np.sum(np.abs(on_theta) ** 2, axis=0), 0.0, 1.0)


def build_exact_mechanism(
    sc: MeasurementScenario, *, scramble: bool = False, canonical_images: bool = False
) -> OutcomeUnitary:
    """Mechanism with zero residual on the dominant subspace.

    Environment images are a seeded Haar-random orthonormal family unless
    ``canonical_images`` is set, in which case the first ``d_S*D`` computational
    basis vectors are used.
    """
    f = sc.fact
    r = f.d_S * sc.D
    if r > f.d_E:
        raise InfeasibleConstructionError(f"d_S*D = {r} exceeds d_E = {f.d_E}")
    if canonical_images:
        images = np.eye(f.d_E, r, dtype=complex)
    else:
        images = sample_unitary(f.d_E, _substream(sc.seed, _IMAGES))[:, :r]
    sa = np.kron(sc.o_theta, sc.a_theta)
    outputs = np.kron(sa[:, None], images)
    matrix = complete_unitary(
        sc.dominant_inputs(),
        outputs,
        scramble=_substream(sc.seed, _SCRAMBLE) if scramble else None,
    )
    return OutcomeUnitary(
        matrix=matrix,
        theta=sc.theta,
        D=sc.D,
        delta_target=0.0,
        env_images=images,
        meta={"seed": sc.seed, "scramble": scramble},
    )


def _rotation_planes(sc: MeasurementScenario, images: np.ndarray):
    """Unit vectors paired for the perturbing rotation.

    ``v`` are the exact outputs ``|o_theta a_theta e~_j>``; ``w`` is a seeded
    orthonormal family in ``(1 - |o_theta><o_theta|) (x) |a_theta> (x) H_E``,
    so the rotation moves weight off ``|o_theta>`` while the apparatus stays on
    its pointer. ``scales`` (max 1) set the per-plane share of the angle.
    """
    f = sc.fact
    r = f.d_S * sc.D
    sa = np.kron(sc.o_theta, sc.a_theta)
    v = np.kron(sa[:, None], images)
    others = np.column_stack([sc.o(i) for i in range(1, f.d_S + 1) if i != sc.theta])
    sector = np.kron(np.kron(others, sc.a_theta[:, None]), np.eye(f.d_E))
    rng = _substream(sc.seed, _DIRECTIONS)
    mix = sample_unitary(sector.shape[1], rng)[:, :r]
    w = sector @ mix
    scales = _substream(sc.seed, _ANGLES).uniform(0.5, 1.0, size=r)
    scales[np.argmax(scales)] = 1.0
    return v, w, scales


def _rotation(v: np.ndarray, w: np.ndarray, angles: np.ndarray) -> np.ndarray:
    d = v.shape[0]
    c = np.cos(angles) - 1.0
    s = np.sin(angles)
    return (
        np.eye(d, dtype=complex)
        + (v * c) @ v.conj().T
        + (w * c) @ w.conj().T
        + (w * s) @ v.conj().T
        - (v * s) @ w.conj().T
    )


def build_perturbed_mechanism(
    sc: MeasurementScenario, delta: float, *, scramble: bool = False,
    canonical_images: bool = False,
) -> OutcomeUnitary:
    """Exact mechanism followed by a small seeded rotation off the outcome.

    The rotation angle is bisected until the worst dominant basis input has
    residual ``delta``; the result stays exactly unitary.
    """
    if not 0 <= delta < 0.25:
        raise InvalidStateError(f"delta must satisfy 0 <= delta < 0.25, got {delta}")
    base = build_exact_mechanism(sc, scramble=scramble, canonical_images=canonical_images)
    if delta == 0:
        return base
    if sc.fact.d_S < 2:
        raise InfeasibleConstructionError("a one-level system cannot leave its outcome")
    v, w, scales = _rotation_planes(sc, base.env_images)
    # residuals of the exact outputs after rotation, evaluated on v directly
    blocks_v = v.reshape(sc.fact.d_S, -1, v.shape[1])
    blocks_w = w.reshape(sc.fact.d_S, -1, w.shape[1])
    pv = np.einsum("s,sxc->xc", sc.o_theta.conj(), blocks_v)
    pw = np.einsum("s,sxc->xc", sc.o_theta.conj(), blocks_w)

    def worst(phi: float) -> float:
        ang = phi * scales
        on_theta = pv * np.cos(ang) + pw * np.sin(ang)
        return float(np.max(1.0 - np.sum(np.abs(on_theta) ** 2, axis=0)))

    lo, hi = 0.0, np.pi / 2
    for _ in range(MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if worst(mid) < delta:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    else:
        raise CalibrationError("angle bisection did not converge")
    phi = 0.5 * (lo + hi)
    if abs(worst(phi) - delta) > 1e-6:
        raise CalibrationError(f"calibrated residual {worst(phi):.3e} misses target {delta}")
    matrix = _rotation(v, w, phi * scales) @ base.matrix
    achieved = float(np.max(basis_residuals(matrix, sc)))
    return OutcomeUnitary(
        matrix=matrix,
        theta=sc.theta,
        D=sc.D,
        delta_target=achieved,
        env_images=environment_images(matrix, sc),
        angle=phi,
        meta={**base.meta, "delta_requested": delta},
    )


def apply_mechanism(
    U: OutcomeUnitary | np.ndarray,
    rho_S: np.ndarray,
    rho_E: np.ndarray,
    sc: MeasurementScenario,
    *,
    validate: bool = True,
) -> MechanismOutput:
    """Evolve ``rho_S (x) |a_0><a_0| (x) rho_E`` and return the reduced states."""
    if validate:
        rho_S = check_density_matrix(rho_S)
        rho_E = check_density_matrix(rho_E)
    sc.check_admissible(rho_S)
    mat = U.matrix if isinstance(U, OutcomeUnitary) else np.asarray(U)
    f = sc.fact
    # the input lives on |a_0>, so only U (I_S (x) |a_0> (x) I_E) is needed
    iso = np.einsum("xiaj,a->xij", mat.reshape(f.d, f.d_S, f.d_A, f.d_E), sc.a(0))
    iso = iso.reshape(f.d, f.d_S * f.d_E)
    rho_f = iso @ np.kron(rho_S, rho_E) @ iso.conj().T
    rho_f = 0.5 * (rho_f + rho_f.conj().T)
    return MechanismOutput(
        rho_SAE=rho_f,
        rho_SE=partial_trace(rho_f, f, "SE"),
        rho_E=partial_trace(rho_f, f, "E"),
        rho_A=partial_trace(rho_f, f, "A"),
        tail_weight=sc.tail_weight(rho_E),
    )


def residual_delta(rho_SE: np.ndarray, sc: MeasurementScenario) -> float:
    """``1 - <o_theta| tr_E(rho_SE) |o_theta>``, clamped to [0, 1]."""
    rho_S = partial_trace(rho_SE, (sc.fact.d_S, sc.fact.d_E), [0])
    return float(np.clip(1.0 - sc.outcome_weight(rho_S), 0.0, 1.0))


def recover_superposition(
    U: OutcomeUnitary, k: int, rho_E_f: np.ndarray, other: int
) -> tuple[complex, complex]:
    """Read ``(alpha, beta)`` of ``alpha|o_theta> + beta|o_other>`` off the final environment.

    The environment is compressed onto ``span{e~_(theta,k), e~_(other,k)}`` and
    its leading eigenvector returned, normalized, with the first non-negligible
    coefficient made real and non-negative.
    """
    if other == U.theta:
        raise ValueError("the second outcome label must differ from theta")
    basis = np.column_stack([U.image(U.theta, k), U.image(other, k)])
    block = basis.conj().T @ rho_E_f @ basis
    weight = float(np.real(np.trace(block)))
    if weight < 0.5:
        raise RecoveryError(f"only {weight:.3f} of the environment lies in the recovery span")
    vals, vecs = np.linalg.eigh(0.5 * (block + block.conj().T))
    c = vecs[:, -1]
    ref = c[0] if abs(c[0]) > 1e-12 else c[1]
    c = c * (abs(ref) / ref)
    return complex(c[0]), complex(c[1])


def _vn_environment(sc: MeasurementScenario) -> tuple[np.ndarray, np.ndarray]:
    f = sc.fact
    phi0 = sc.e(0)
    if f.d_E >= f.d_S:
        records = sample_unitary(f.d_E, _substream(sc.seed, _VN_ENV))[:, : f.d_S]
    else:
        records = np.repeat(phi0[:, None], f.d_S, axis=1)
    return phi0, records


def von_neumann_control(
    sc: MeasurementScenario, psi_S: np.ndarray | None = None
) -> tuple[np.ndarray, float]:
    """Shared coupling ``|o_i a_0 phi_0> -> |o_i a_i phi_i>`` and the apparatus
    definiteness it leaves for the system input ``psi_S`` (default ``|o_1>``).

    The environment records ``phi_i`` are orthonormal whenever ``d_E >= d_S``.
    """
    f = sc.fact
    phi0, records = _vn_environment(sc)
    inputs = np.column_stack(
        [np.kron(np.kron(sc.o(i), sc.a(0)), phi0) for i in range(1, f.d_S + 1)]
    )
    if f.d_E >= f.d_S:
        outputs = np.column_stack(
            [np.kron(np.kron(sc.o(i), sc.a(i)), records[:, i - 1]) for i in range(1, f.d_S + 1)]
        )
    else:
        outputs = np.column_stack(
            [np.kron(np.kron(sc.o(i), sc.a(i)), phi0) for i in range(1, f.d_S + 1)]
        )
    u_vn = complete_unitary(inputs, outputs)
    psi = sc.o(1) if psi_S is None else np.asarray(psi_S, dtype=complex)
    out = u_vn @ np.kron(np.kron(psi, sc.a(0)), phi0)
    rho_A = partial_trace(dm(out), f, "A")
    return u_vn, definiteness(rho_A, sc)


def definiteness(rho_A: np.ndarray, sc: MeasurementScenario) -> float:
    """Largest pointer occupation ``max_i <a_i|rho_A|a_i>``."""
    return float(
        max(np.real(sc.a(i).conj() @ rho_A @ sc.a(i)) for i in range(1, sc.fact.d_S + 1))
    )

"""Spectral conditions for a unitary to connect the initial and final joint states.

A final joint state with the apparatus fixed on one pointer has at least
``(d_S - 1) d_E`` negligible eigenvalues, so the initial environment must put
all but a small weight ``epsilon`` on a dominant subspace of rank
``D <= d_E / d_S``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError
from .qcore import HilbertFactorization, check_density_matrix

__all__ = [
    "FeasibilityReport",
    "dominant_epsilon",
    "check_feasibility",
    "spectra_compatible",
    "sorted_eigenbasis",
]

EPSILON_ATOL = 1e-10


@dataclass(frozen=True)
class FeasibilityReport:
    epsilon: float
    D: int
    dimension_ok: bool
    small_eigenvalue_count: int
    threshold: float
    max_rank: int
    observed_small: int

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "D": self.D,
            "dimension_ok": self.dimension_ok,
            "small_eigenvalue_count": self.small_eigenvalue_count,
            "threshold": self.threshold,
            "max_rank": self.max_rank,
            "observed_small": self.observed_small,
        }


def _phase_fixed(v: np.ndarray) -> np.ndarray:
    # first component with non-negligible modulus made real positive
    idx = int(np.argmax(np.abs(v) > 1e-12))
    c = v[idx]
    return v * (abs(c) / c) if abs(c) > 0 else v


def sorted_eigenbasis(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and phase-fixed eigenvectors of a Hermitian matrix.

    Ties are ordered lexicographically on the (real, imag) entries of the
    phase-fixed eigenvectors so that the result is deterministic.
    """
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    vecs = np.column_stack([_phase_fixed(vecs[:, j]) for j in range(vecs.shape[1])])

    def key(j):
        v = vecs[:, j]
        flat = tuple(x for c in v for x in (round(-c.real, 12), round(-c.imag, 12)))
        return (round(-vals[j], 12),) + flat

    order = sorted(range(len(vals)), key=key)
    return vals[order], vecs[:, order]


def dominant_epsilon(rho_E: np.ndarray, D: int) -> tuple[float, np.ndarray]:
    """Tail weight outside the best rank-``D`` projector, and that projector.

    The minimizing projector spans the ``D`` leading eigenvectors.
    """
    rho_E = check_density_matrix(rho_E)
    d_E = rho_E.shape[0]
    if not 1 <= D <= d_E:
        raise InvalidStateError(f"D must satisfy 1 <= D <= {d_E}, got {D}")
    vals, vecs = sorted_eigenbasis(rho_E)
    basis = vecs[:, :D]
    proj = basis @ basis.conj().T
    if D == d_E:
        return 0.0, proj
    # tail summed smallest-first keeps the sum exact for clean spectra
    tail = float(np.sum(np.sort(np.clip(vals[D:], 0.0, None))))
    return tail, proj


def check_feasibility(
    rho_E: np.ndarray, fact: HilbertFactorization, epsilon_max: float
) -> FeasibilityReport:
    """Smallest dominant rank meeting ``epsilon_max`` and whether it fits ``d_E/d_S``.

    Infeasibility is reported, never raised.
    """
    rho_E = check_density_matrix(rho_E)
    if rho_E.shape[0] != fact.d_E:
        raise InvalidStateError(
            f"environment state has dimension {rho_E.shape[0]}, expected {fact.d_E}"
        )
    vals = np.clip(np.sort(np.linalg.eigvalsh(rho_E))[::-1], 0.0, None)
    tails = [float(np.sum(np.sort(vals[D:]))) for D in range(1, fact.d_E + 1)]
    D = next(
        (i + 1 for i, t in enumerate(tails) if t <= epsilon_max + EPSILON_ATOL),
        fact.d_E,
    )
    max_rank = fact.d_E // fact.d_S
    threshold = epsilon_max / (fact.d_S * fact.d_E)
    return FeasibilityReport(
        epsilon=tails[D - 1],
        D=D,
        dimension_ok=D <= max_rank,
        small_eigenvalue_count=fact.d_S * (fact.d_E - D),
        threshold=threshold,
        max_rank=max_rank,
        observed_small=int(np.sum(vals < threshold)),
    )


def spectra_compatible(rho_i: np.ndarray, rho_f: np.ndarray, tol: float = 1e-9) -> bool:
    """Necessary condition for ``rho_f = U rho_i U^dagger``: equal spectra."""
    rho_i = np.asarray(rho_i)
    rho_f = np.asarray(rho_f)
    if rho_i.shape != rho_f.shape:
        raise InvalidStateError(f"dimension mismatch: {rho_i.shape} vs {rho_f.shape}")
    a = np.linalg.eigvalsh(0.5 * (rho_i + rho_i.conj().T))
    b = np.linalg.eigvalsh(0.5 * (rho_f + rho_f.conj().T))
    return bool(np.all(np.abs(a - b) <= tol))

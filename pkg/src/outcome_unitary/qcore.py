"""Dense linear algebra for finite-dimensional system/apparatus/environment models.

States and operators are plain complex numpy arrays. The joint space is always
ordered S (x) A (x) E, with S the slowest-varying index and E the fastest, so the
flat index of ``|i>_S |j>_A |k>_E`` is ``(i * d_A + j) * d_E + k``. Every
module goes through :class:`HilbertFactorization` for that mapping.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    DegenerateProjectionError,
    FactorOrderError,
    InvalidStateError,
)

__all__ = [
    "FACTOR_ORDER",
    "HERMITIAN_ATOL",
    "TRACE_ATOL",
    "PSD_ATOL",
    "PROJECTION_THRESHOLD",
    "HilbertFactorization",
    "ket",
    "dm",
    "tensor_product",
    "partial_trace",
    "trace_norm",
    "trace_distance",
    "project_renormalize",
    "check_density_matrix",
    "check_pure_state",
    "check_projector",
    "repair_psd",
    "projector_onto",
    "sample_state",
    "sample_pure",
    "sample_unitary",
    "unitarity_error",
]

FACTOR_ORDER = ("S", "A", "E")

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-10
PSD_ATOL = 1e-10
PROJECTION_THRESHOLD = 1e-12


@dataclass(frozen=True)
class HilbertFactorization:
    """Dimensions of the system, apparatus and environment factors.

    ``d_A`` must leave room for a ready state plus one pointer per outcome.
    """

    d_S: int
    d_A: int
    d_E: int

    def __post_init__(self):
        for name in ("d_S", "d_A", "d_E"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidStateError(f"{name} must be a positive integer, got {value!r}")
        if self.d_A < self.d_S + 1:
            raise InvalidStateError(
                f"d_A={self.d_A} cannot hold a ready state and {self.d_S} pointer states"
            )

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.d_S, self.d_A, self.d_E)

    @property
    def d(self) -> int:
        return self.d_S * self.d_A * self.d_E

    def index(self, i: int, j: int, k: int) -> int:
        """Flat index of the basis product ``|i>_S |j>_A |k>_E``."""
        if not (0 <= i < self.d_S and 0 <= j < self.d_A and 0 <= k < self.d_E):
            raise IndexError(f"({i}, {j}, {k}) outside {self.dims}")
        return (i * self.d_A + j) * self.d_E + k

    def unindex(self, flat: int) -> tuple[int, int, int]:
        if not 0 <= flat < self.d:
            raise IndexError(f"flat index {flat} outside dimension {self.d}")
        rest, k = divmod(flat, self.d_E)
        i, j = divmod(rest, self.d_A)
        return i, j, k


Dims = Union[HilbertFactorization, Sequence[int]]


def ket(dim: int, index: int) -> np.ndarray:
    """Computational basis vector."""
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def dm(psi: np.ndarray) -> np.ndarray:
    """Density matrix ``|psi><psi|`` of a state vector."""
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def tensor_product(*parts: np.ndarray, labels: Sequence[str] | None = None) -> np.ndarray:
    """Kronecker product of states or operators in S (x) A (x) E order.

    ``labels`` optionally names the factor of each part ("S", "A", "E", or a
    concatenation such as "SA"). Labels must appear in strictly increasing
    factor order, otherwise :class:`FactorOrderError` is raised.
    """
    if not parts:
        raise ValueError("tensor_product needs at least one operand")
    if labels is not None:
        if len(labels) != len(parts):
            raise FactorOrderError(f"{len(parts)} operands but {len(labels)} labels")
        flat = [c for label in labels for c in label]
        unknown = set(flat) - set(FACTOR_ORDER)
        if unknown:
            raise FactorOrderError(f"unknown factor labels {sorted(unknown)}")
        positions = [FACTOR_ORDER.index(c) for c in flat]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise FactorOrderError(
                f"factors {''.join(flat)} are not in S, A, E order"
            )
    arrays = [np.asarray(p, dtype=complex) for p in parts]
    ndims = {a.ndim for a in arrays}
    if len(ndims) != 1:
        raise ValueError("cannot mix state vectors and operators in one product")
    return reduce(np.kron, arrays)


def _resolve(dims: Dims, keep: Iterable) -> tuple[tuple[int, ...], list[int]]:
    if isinstance(dims, HilbertFactorization):
        shape = dims.dims
        names = FACTOR_ORDER
    else:
        shape = tuple(int(x) for x in dims)
        names = ()
    axes = []
    for item in keep:
        if isinstance(item, str):
            for c in item:
                if c not in names:
                    raise ValueError(f"unknown factor {c!r} for dims {shape}")
                axes.append(names.index(c))
        else:
            axes.append(int(item))
    axes = sorted(set(axes))
    if not axes:
        raise ValueError("partial_trace needs at least one factor to keep")
    if axes[0] < 0 or axes[-1] >= len(shape):
        raise ValueError(f"factor indices {axes} out of range for {len(shape)} factors")
    return shape, axes


def partial_trace(rho: np.ndarray, dims: Dims, keep: Iterable) -> np.ndarray:
    """Reduced operator on the factors listed in ``keep``.

    ``dims`` is a :class:`HilbertFactorization` (then ``keep`` may use the labels
    "S", "A", "E") or any sequence of factor dimensions (then ``keep`` holds
    factor positions).
    """
    shape, axes = _resolve(dims, keep)
    rho = np.asarray(rho)
    total = int(np.prod(shape))
    if rho.shape != (total, total):
        raise ValueError(f"operator of shape {rho.shape} does not match dims {shape}")
    n = len(shape)
    t = rho.reshape(shape + shape)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for ax in range(n):
        if ax not in axes:
            col[ax] = row[ax]
    out = [row[ax] for ax in axes] + [col[ax] for ax in axes]
    reduced = np.einsum("".join(row) + "".join(col) + "->" + "".join(out), t)
    kept = int(np.prod([shape[ax] for ax in axes]))
    return reduced.reshape(kept, kept)


def trace_norm(m: np.ndarray, hermitian: bool | None = None) -> float:
    """Sum of singular values, without the conventional factor 1/2.

    Distances between density matrices therefore lie in [0, 2].
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"trace_norm expects a square matrix, got shape {m.shape}")
    if hermitian is None:
        scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
        hermitian = bool(np.allclose(m, m.conj().T, atol=1e-12 * scale, rtol=0))
    if hermitian:
        herm = 0.5 * (m + m.conj().T)
        return float(np.sum(np.abs(np.linalg.eigvalsh(herm))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``||rho - sigma||_1`` for Hermitian arguments."""
    return trace_norm(np.asarray(rho) - np.asarray(sigma), hermitian=True)


def repair_psd(rho: np.ndarray, atol: float = PSD_ATOL) -> np.ndarray:
    """Hermitize, clamp eigenvalues in [-atol, 0) to zero, renormalize.

    More negative eigenvalues raise :class:`InvalidStateError`.
    """
    rho = np.asarray(rho, dtype=complex)
    herm = 0.5 * (rho + rho.conj().T)
    vals, vecs = np.linalg.eigh(herm)
    if vals[0] < -atol:
        raise InvalidStateError(f"eigenvalue {vals[0]:.3e} is below -{atol:g}")
    if vals[0] >= 0:
        return herm
    vals = np.clip(vals, 0.0, None)
    fixed = (vecs * vals) @ vecs.conj().T
    return fixed / np.trace(fixed).real


def check_density_matrix(rho: np.ndarray, *, repair: bool = True) -> np.ndarray:
    """Validate (and optionally repair) a density matrix.

    Returns the Hermitian, PSD, unit-trace version of ``rho``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=HERMITIAN_ATOL, rtol=0):
        raise InvalidStateError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_ATOL:
        raise InvalidStateError(f"density matrix has trace {tr:.12g}")
    if repair:
        return repair_psd(rho)
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -PSD_ATOL:
        raise InvalidStateError("density matrix is not positive semidefinite")
    return rho


def check_pure_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise InvalidStateError(f"state vector must be 1-d, got shape {psi.shape}")
    if abs(np.linalg.norm(psi) - 1) > 1e-12:
        raise InvalidStateError(f"state vector has norm {np.linalg.norm(psi):.15g}")
    return psi


def check_projector(p: np.ndarray, rank: int | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise InvalidStateError(f"projector must be square, got shape {p.shape}")
    if not np.allclose(p, p.conj().T, atol=1e-10, rtol=0):
        raise InvalidStateError("projector is not Hermitian")
    if not np.allclose(p @ p, p, atol=1e-10, rtol=0):
        raise InvalidStateError("projector is not idempotent")
    if rank is not None and abs(np.trace(p).real - rank) > 1e-8:
        raise InvalidStateError(f"projector trace {np.trace(p).real:.10g} != rank {rank}")
    return p


def projector_onto(vectors: np.ndarray) -> np.ndarray:
    """Projector onto the span of orthonormal columns."""
    v = np.asarray(vectors, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    return v @ v.conj().T


def project_renormalize(rho: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``P rho P / tr(P rho)``."""
    rho = np.asarray(rho, dtype=complex)
    p = np.asarray(p, dtype=complex)
    weight = np.real(np.trace(p @ rho))
    if weight < PROJECTION_THRESHOLD:
        raise DegenerateProjectionError(f"projection weight {weight:.3e} is too small")
    out = p @ rho @ p / weight
    return 0.5 * (out + out.conj().T)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def sample_unitary(dim: int, seed) -> np.ndarray:
    """Haar-random unitary: QR of a complex Gaussian matrix with the phases of
    R's diagonal divided out."""
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    q, r = np.linalg.qr(_ginibre(_rng(seed), dim, dim))
    diag = np.diag(r)
    phases = np.where(np.abs(diag) > 0, diag / np.abs(diag), 1.0)
    return q * phases


def sample_pure(dim: int, seed) -> np.ndarray:
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    v = _ginibre(_rng(seed), dim, 1)[:, 0]
    return v / np.linalg.norm(v)


def sample_state(dim: int, rank: int, seed) -> np.ndarray:
    """Random density matrix of the given rank from the induced measure
    (partial trace of a random pure state on ``dim x rank``)."""
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must satisfy 1 <= rank <= {dim}, got {rank}")
    g = _ginibre(_rng(seed), dim, rank)
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return 0.5 * (rho + rho.conj().T)


def unitarity_error(u: np.ndarray) -> float:
    """``max |U^dagger U - I|`` entrywise."""
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))

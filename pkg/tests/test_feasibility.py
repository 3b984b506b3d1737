import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outcome_unitary.errors import InvalidStateError
from outcome_unitary.feasibility import (
    check_feasibility,
    dominant_epsilon,
    sorted_eigenbasis,
    spectra_compatible,
)
from outcome_unitary.qcore import HilbertFactorization, dm, ket, sample_state, sample_unitary


def rotated(spectrum, seed=0):
    u = sample_unitary(len(spectrum), seed)
    return u @ np.diag(np.asarray(spectrum, dtype=complex)) @ u.conj().T


def cumulative_oracle(spectrum, epsilon_max):
    """Smallest D whose discarded tail is within epsilon_max, by plain summation."""
    vals = sorted(spectrum, reverse=True)
    for D in range(1, len(vals) + 1):
        if sum(vals[D:]) <= epsilon_max + 1e-10:
            return D
    return len(vals)


def test_dominant_epsilon_examples():
    eps, proj = dominant_epsilon(dm(ket(4, 2)), 1)
    assert eps == 0.0
    assert np.allclose(proj, dm(ket(4, 2)))
    eps, proj = dominant_epsilon(np.eye(4, dtype=complex) / 4, 2)
    assert eps == pytest.approx(0.5, abs=1e-12)
    assert np.trace(proj).real == pytest.approx(2)


def test_dominant_epsilon_tail_sum():
    rho = rotated([0.7, 0.2, 0.06, 0.04], seed=3)
    eps, proj = dominant_epsilon(rho, 2)
    assert eps == pytest.approx(0.10, abs=1e-12)
    # the projector captures exactly the two leading eigenvalues
    assert np.real(np.trace(proj @ rho)) == pytest.approx(0.9, abs=1e-12)


def test_dominant_epsilon_full_rank_is_exact_zero():
    rho = sample_state(5, 5, 1)
    assert dominant_epsilon(rho, 5)[0] == 0.0


def test_dominant_epsilon_range():
    with pytest.raises(InvalidStateError):
        dominant_epsilon(np.eye(3, dtype=complex) / 3, 0)
    with pytest.raises(InvalidStateError):
        dominant_epsilon(np.eye(3, dtype=complex) / 3, 4)


def test_tie_breaking_is_deterministic():
    rho = np.eye(4, dtype=complex) / 4
    a = sorted_eigenbasis(rho)[1]
    b = sorted_eigenbasis(rho.copy())[1]
    assert np.array_equal(a, b)


def test_check_feasibility_examples():
    f24 = HilbertFactorization(2, 3, 4)
    r = check_feasibility(dm(ket(4, 0)), f24, 0.01)
    assert (r.D, r.dimension_ok) == (1, True)
    r = check_feasibility(np.eye(4, dtype=complex) / 4, f24, 0.01)
    assert (r.D, r.dimension_ok) == (4, False)
    f28 = HilbertFactorization(2, 3, 8)
    spectrum = [0.5, 0.3, 0.15, 0.04, 0.01, 0, 0, 0]
    r = check_feasibility(rotated(spectrum, 5), f28, 0.05)
    assert r.D == cumulative_oracle(spectrum, 0.05) == 3
    assert r.dimension_ok
    assert r.small_eigenvalue_count == 2 * (8 - 3)
    assert r.threshold == pytest.approx(0.05 / 16)
    assert r.epsilon == pytest.approx(0.05, abs=1e-12)


def test_check_feasibility_reports_rather_than_raises():
    f = HilbertFactorization(3, 4, 4)
    r = check_feasibility(np.eye(4, dtype=complex) / 4, f, 0.0)
    assert not r.dimension_ok
    assert r.max_rank == 1


spectra = st.lists(st.floats(0, 1), min_size=2, max_size=8).filter(lambda v: sum(v) > 1e-3)


@settings(max_examples=60, deadline=None)
@given(spectra, st.floats(0, 0.5), st.floats(0, 0.5), st.integers(0, 1000))
def test_feasibility_monotone_in_epsilon(raw, e1, e2, seed):
    vals = np.asarray(raw) / sum(raw)
    rho = rotated(vals, seed)
    f = HilbertFactorization(2, 3, len(vals))
    lo, hi = sorted((e1, e2))
    assert check_feasibility(rho, f, hi).D <= check_feasibility(rho, f, lo).D


@settings(max_examples=40, deadline=None)
@given(spectra, st.integers(0, 1000))
def test_epsilon_non_increasing_in_D(raw, seed):
    vals = np.asarray(raw) / sum(raw)
    rho = rotated(vals, seed)
    eps = [dominant_epsilon(rho, D)[0] for D in range(1, len(vals) + 1)]
    assert all(b <= a + 1e-12 for a, b in zip(eps, eps[1:]))
    ordered = np.sort(vals)[::-1]
    for D, e in enumerate(eps, start=1):
        assert e == pytest.approx(1 - ordered[:D].sum(), abs=1e-10)


def test_spectra_compatible_examples():
    rho = sample_state(4, 2, 8)
    u = sample_unitary(4, 9)
    assert spectra_compatible(rho, u @ rho @ u.conj().T)
    assert not spectra_compatible(dm(ket(4, 0)), np.eye(4, dtype=complex) / 4)
    assert not spectra_compatible(rho, 0.9 * rho + 0.1 * np.eye(4) / 4)
    with pytest.raises(InvalidStateError):
        spectra_compatible(np.eye(2) / 2, np.eye(3) / 3)

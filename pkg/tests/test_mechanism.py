import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import embed_dominant
from outcome_unitary.errors import (
    InadmissibleStateError,
    InfeasibleConstructionError,
    InvalidStateError,
    RecoveryError,
)
from outcome_unitary.feasibility import spectra_compatible
from outcome_unitary.mechanism import (
    MeasurementScenario,
    apply_mechanism,
    basis_residuals,
    build_exact_mechanism,
    build_perturbed_mechanism,
    definiteness,
    recover_superposition,
    residual_delta,
    von_neumann_control,
)
from outcome_unitary.qcore import (
    check_density_matrix,
    dm,
    partial_trace,
    sample_pure,
    sample_state,
    trace_distance,
    unitarity_error,
)


def final_environment_vector(U, sc, psi_S, k):
    """Environment part of U |psi_S, a_0, e_k> on the outcome branch, by reshaping."""
    f = sc.fact
    out = U.matrix @ np.kron(np.kron(psi_S, sc.a(0)), sc.e(k))
    blocks = out.reshape(f.d_S * f.d_A, f.d_E)
    return np.kron(sc.o_theta, sc.a_theta).conj() @ blocks


def test_scenario_rejects_too_many_images():
    with pytest.raises(InfeasibleConstructionError):
        MeasurementScenario.standard(2, 3, 4, 3)


def test_scenario_rejects_non_orthonormal_basis():
    sc = MeasurementScenario.standard(2, 3, 4, 2)
    bad = sc.observable_basis.copy()
    bad[:, 1] = bad[:, 0]
    with pytest.raises(InvalidStateError):
        MeasurementScenario(sc.fact, 1, 2, bad, sc.apparatus_states, sc.dominant_env_basis, 0)


def test_exact_mechanism_basis_map(scenario):
    sc = scenario
    U = build_exact_mechanism(sc)
    assert unitarity_error(U.matrix) < 1e-10
    sa = np.kron(sc.o_theta, sc.a_theta)
    for i in range(1, sc.fact.d_S + 1):
        for k in range(sc.D):
            out = U.matrix @ np.kron(np.kron(sc.o(i), sc.a(0)), sc.e(k))
            assert np.allclose(out, np.kron(sa, U.image(i, k)), atol=1e-12)
    imgs = U.env_images
    assert np.allclose(imgs.conj().T @ imgs, np.eye(imgs.shape[1]), atol=1e-12)


def test_exact_mechanism_projection_weight_on_whole_subspace(scenario):
    sc = scenario
    U = build_exact_mechanism(sc, scramble=True)
    P = sc.outcome_projector_SA()
    rng = np.random.default_rng(0)
    for _ in range(20):
        c = rng.standard_normal(sc.fact.d_S * sc.D) + 1j * rng.standard_normal(sc.fact.d_S * sc.D)
        psi = sc.dominant_inputs() @ (c / np.linalg.norm(c))
        out = U.matrix @ psi
        assert np.real(out.conj() @ P @ out) == pytest.approx(1.0, abs=1e-10)


def test_superposition_transfers_to_environment(scenario):
    sc = scenario
    U = build_exact_mechanism(sc)
    other = 2 if sc.theta == 1 else 1
    alpha, beta = 0.6, 0.8j
    for k in range(sc.D):
        psi = alpha * sc.o(sc.theta) + beta * sc.o(other)
        env = final_environment_vector(U, sc, psi, k)
        assert np.allclose(env, alpha * U.image(sc.theta, k) + beta * U.image(other, k), atol=1e-9)


def test_perturbed_zero_delta_is_exact(scenario):
    a = build_perturbed_mechanism(scenario, 0.0)
    b = build_exact_mechanism(scenario)
    assert np.array_equal(a.matrix, b.matrix)


@pytest.mark.parametrize("delta", [0.0025, 0.01, 0.04, 0.2])
def test_perturbed_calibration(scenario, qutrit_scenario, delta):
    for sc in (scenario, qutrit_scenario):
        U = build_perturbed_mechanism(sc, delta)
        assert unitarity_error(U.matrix) < 1e-10
        # direct evaluation: reduce each basis output to S and read the outcome weight
        worst = 0.0
        for i in range(1, sc.fact.d_S + 1):
            for k in range(sc.D):
                out = U.matrix @ np.kron(np.kron(sc.o(i), sc.a(0)), sc.e(k))
                rho_S = partial_trace(dm(out), sc.fact, "S")
                worst = max(worst, 1 - np.real(sc.o_theta.conj() @ rho_S @ sc.o_theta))
        assert worst == pytest.approx(delta, abs=1e-6)
        assert np.max(basis_residuals(U.matrix, sc)) <= delta + 1e-6


def test_perturbed_disturbance_within_gentle_bound(scenario):
    sc = scenario
    U = build_perturbed_mechanism(sc, 0.01)
    P = sc.outcome_projector_SA()
    rng = np.random.default_rng(4)
    for _ in range(100):
        c = rng.standard_normal(sc.fact.d_S * sc.D) + 1j * rng.standard_normal(sc.fact.d_S * sc.D)
        out = dm(U.matrix @ (sc.dominant_inputs() @ (c / np.linalg.norm(c))))
        post = P @ out @ P / np.real(np.trace(P @ out))
        assert trace_distance(out, post) <= 2 * np.sqrt(U.delta_target) + 1e-9


def test_perturbed_rejects_large_delta(scenario):
    with pytest.raises(InvalidStateError):
        build_perturbed_mechanism(scenario, 0.25)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.0, 0.01, 0.04]))
def test_mechanism_is_linear(seed, delta):
    sc = MeasurementScenario.standard(2, 3, 4, 2, theta=2, seed=seed, random_bases=True)
    U = build_perturbed_mechanism(sc, delta)
    rng = np.random.default_rng(seed)
    p1, p2 = sample_pure(sc.fact.d, rng), sample_pure(sc.fact.d, rng)
    a, b = complex(rng.standard_normal()), complex(0, rng.standard_normal())
    lhs = U.matrix @ (a * p1 + b * p2)
    assert np.allclose(lhs, a * (U.matrix @ p1) + b * (U.matrix @ p2), atol=1e-10)


def test_apply_exact_gives_pointer_and_zero_residual(scenario):
    sc = scenario
    U = build_exact_mechanism(sc)
    rho_E = embed_dominant(sc, sample_state(sc.D, 2, 1))
    out = apply_mechanism(U, dm(sc.o_theta), rho_E, sc)
    assert np.allclose(out.rho_A, dm(sc.a_theta), atol=1e-9)
    assert residual_delta(out.rho_SE, sc) == pytest.approx(0.0, abs=1e-9)
    assert out.tail_weight == pytest.approx(0.0, abs=1e-12)


def test_apply_matches_full_conjugation(scenario):
    sc = scenario
    U = build_perturbed_mechanism(sc, 0.04)
    rho_S, rho_E = sample_state(2, 2, 3), sample_state(8, 8, 4)
    out = apply_mechanism(U, rho_S, rho_E, sc)
    full = U.matrix @ sc.initial_state(rho_S, rho_E) @ U.matrix.conj().T
    assert np.allclose(out.rho_SAE, full, atol=1e-13)
    assert spectra_compatible(sc.initial_state(rho_S, rho_E), out.rho_SAE, 1e-9)
    assert out.tail_weight > 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_apply_preserves_trace_and_positivity(seed):
    sc = MeasurementScenario.standard(3, 4, 6, 2, theta=3, seed=seed, random_bases=True)
    U = build_perturbed_mechanism(sc, 0.01)
    rng = np.random.default_rng(seed)
    rho_S = sample_state(3, 3, rng)
    out = apply_mechanism(U, rho_S, sample_state(6, 3, rng), sc)
    for rho in (out.rho_SAE, out.rho_SE, out.rho_E, out.rho_A):
        check_density_matrix(rho, repair=False)


def test_apply_rejects_inadmissible(scenario):
    sc = scenario
    other = 2 if sc.theta == 1 else 1
    with pytest.raises(InadmissibleStateError):
        apply_mechanism(build_exact_mechanism(sc), dm(sc.o(other)), dm(sc.e(0)), sc)


def test_residual_delta_definition():
    sc = MeasurementScenario.standard(2, 3, 4, 2, theta=1)
    rho_S = np.diag([0.97, 0.03]).astype(complex)
    rho_SE = np.kron(rho_S, np.eye(4) / 4)
    assert residual_delta(rho_SE, sc) == pytest.approx(0.03, abs=1e-15)


def test_residual_delta_worst_input_calibrated(scenario):
    sc = scenario
    U = build_perturbed_mechanism(sc, 0.04)
    res = basis_residuals(U.matrix, sc)
    j = int(np.argmax(res))
    i, k = divmod(j, sc.D)
    # the worst input may be inadmissible on its own, so evolve it directly
    out = U.matrix @ np.kron(np.kron(sc.o(i + 1), sc.a(0)), sc.e(k))
    rho_SE = partial_trace(dm(out), sc.fact, "SE")
    assert residual_delta(rho_SE, sc) == pytest.approx(0.04, abs=1e-6)


def test_recover_superposition_exact(scenario):
    sc = scenario
    U = build_exact_mechanism(sc)
    other = 2 if sc.theta == 1 else 1
    for alpha, beta in [(1.0, 0.0), (2**-0.5, 2**-0.5)]:
        psi = alpha * sc.o(sc.theta) + beta * sc.o(other)
        out = apply_mechanism(U, dm(psi), dm(sc.e(1)), sc)
        a, b = recover_superposition(U, 1, out.rho_E, other)
        assert abs(a - alpha) < 1e-9 and abs(b - beta) < 1e-9


def test_recover_superposition_perturbed(scenario):
    sc = scenario
    U = build_perturbed_mechanism(sc, 0.01)
    other = 2 if sc.theta == 1 else 1
    psi = 0.6 * sc.o(sc.theta) + 0.8 * sc.o(other)
    out = apply_mechanism(U, dm(psi), dm(sc.e(0)), sc)
    a, b = recover_superposition(U, 0, out.rho_E, other)
    assert abs(a - 0.6) <= 0.2 and abs(b - 0.8) <= 0.2


def test_recover_superposition_rejects_foreign_environment(scenario):
    sc = scenario
    U = build_exact_mechanism(sc)
    other = 2 if sc.theta == 1 else 1
    # the image for another k is orthogonal to both images read for k = 0
    foreign = dm(U.image(sc.theta, 1))
    with pytest.raises(RecoveryError):
        recover_superposition(U, 0, foreign, other)
    with pytest.raises(ValueError):
        recover_superposition(U, 0, foreign, sc.theta)


def test_von_neumann_control_examples():
    sc = MeasurementScenario.standard(2, 3, 4, 2, seed=2)
    u_vn, d1 = von_neumann_control(sc)
    assert unitarity_error(u_vn) < 1e-10
    assert d1 == pytest.approx(1.0, abs=1e-12)
    _, half = von_neumann_control(sc, (sc.o(1) + sc.o(2)) / np.sqrt(2))
    assert half == pytest.approx(0.5, abs=1e-9)
    _, d8 = von_neumann_control(sc, np.sqrt(0.8) * sc.o(1) + np.sqrt(0.2) * sc.o(2))
    assert d8 == pytest.approx(0.8, abs=1e-9)


def test_definiteness_reads_pointer_populations(scenario):
    sc = scenario
    rho_A = 0.3 * dm(sc.a(1)) + 0.7 * dm(sc.a(2))
    assert definiteness(rho_A, sc) == pytest.approx(0.7)

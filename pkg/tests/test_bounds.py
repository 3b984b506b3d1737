import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import embed_dominant
from outcome_unitary.bounds import (
    BoundReport,
    appendix_chain,
    auxiliary_states,
    baseline_report,
    gentle_check,
)
from outcome_unitary.mechanism import (
    MeasurementScenario,
    apply_mechanism,
    build_exact_mechanism,
    build_perturbed_mechanism,
    residual_delta,
)
from outcome_unitary.qcore import (
    dm,
    ket,
    projector_onto,
    sample_state,
    sample_unitary,
    trace_distance,
)
from outcome_unitary.trials import draw_environment, draw_system_pair


def orthogonal_pair(sc):
    other = 2 if sc.theta == 1 else 1
    plus = (sc.o(sc.theta) + sc.o(other)) / np.sqrt(2)
    minus = (sc.o(sc.theta) - sc.o(other)) / np.sqrt(2)
    return dm(plus), dm(minus)


def test_gentle_check_supported_state():
    rho = np.diag([0.6, 0.4, 0.0]).astype(complex)
    lhs, rhs = gentle_check(rho, np.diag([1.0, 1.0, 0.0]).astype(complex))
    assert lhs == pytest.approx(0.0, abs=1e-15)
    assert rhs == 0.0


@pytest.mark.parametrize("delta", [0.25, 0.04, 1e-4, 0.5])
def test_gentle_check_saturates_on_pure_states(delta):
    psi = np.sqrt(1 - delta) * ket(3, 0) + np.sqrt(delta) * ket(3, 2)
    lhs, rhs = gentle_check(dm(psi), dm(ket(3, 0)))
    # pure states: 2 sqrt(1 - |<0|psi>|^2) = 2 sqrt(delta)
    assert lhs == pytest.approx(2 * np.sqrt(delta), abs=1e-9)
    assert rhs == pytest.approx(2 * np.sqrt(delta), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gentle_check_random_rank_two(seed):
    rng = np.random.default_rng(seed)
    u = sample_unitary(5, rng)
    P = projector_onto(u[:, :2])
    # build a state with at least 0.9 weight inside P
    inside = u[:, :2] @ sample_state(2, 2, rng) @ u[:, :2].conj().T
    noise = sample_state(5, 3, rng)
    w = rng.uniform(0, 0.1)
    rho = (1 - w) * inside + w * noise
    lhs, rhs = gentle_check(rho, P)
    assert np.real(np.trace(P @ rho)) >= 0.9 - 1e-12
    assert lhs <= rhs + 1e-9
    assert lhs <= 2 * np.sqrt(0.1) + 1e-9


def test_baseline_identical_inputs(scenario):
    sc = scenario
    U = build_perturbed_mechanism(sc, 0.01)
    rho_S = sample_state(2, 2, 0)
    rho_E = embed_dominant(sc, sample_state(sc.D, 2, 1))
    r = baseline_report(U, rho_S, rho_S, rho_E, sc, delta=U.delta_target)
    assert r.lhs == pytest.approx(0.0, abs=1e-12)
    assert r.rhs == pytest.approx(-8 * np.sqrt(U.delta_target))
    assert r.holds


def test_baseline_exact_mechanism_preserves_distance(scenario):
    sc = scenario
    U = build_exact_mechanism(sc)
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = draw_system_pair(sc, "mixed", rng)
        rho_E = draw_environment(sc, rng)
        r = baseline_report(U, a, b, rho_E, sc)
        assert r.lhs == pytest.approx(trace_distance(a, b), abs=1e-9)


def test_baseline_orthogonal_pure_states(scenario):
    sc = scenario
    U = build_perturbed_mechanism(sc, 0.01)
    a, b = orthogonal_pair(sc)
    r = baseline_report(U, a, b, embed_dominant(sc, sample_state(sc.D, 1, 2)), sc,
                        delta=U.delta_target)
    assert trace_distance(a, b) == pytest.approx(2.0)
    assert r.rhs == pytest.approx(2 - 0.8, abs=1e-6)
    assert r.lhs >= 2 - 0.8
    assert r.slack == pytest.approx(r.lhs - r.rhs, abs=1e-12)


def test_baseline_measured_delta_uses_larger_run(scenario):
    sc = scenario
    U = build_perturbed_mechanism(sc, 0.04)
    a, b = orthogonal_pair(sc)
    rho_E = embed_dominant(sc, sample_state(sc.D, 3, 5))
    r = baseline_report(U, a, b, rho_E, sc)
    deltas = [residual_delta(apply_mechanism(U, x, rho_E, sc).rho_SE, sc) for x in (a, b)]
    assert r.delta_used == max(deltas)
    assert r.delta_used <= U.delta_target + 1e-12


def test_appendix_chain_exact_run(scenario):
    sc = scenario
    U = build_exact_mechanism(sc)
    rng = np.random.default_rng(8)
    a, b = draw_system_pair(sc, "pure", rng)
    r = appendix_chain(U, a, b, draw_environment(sc, rng), sc)
    assert [s.label for s in r.steps] == list("abcdef")
    assert r.holds
    assert abs(r.step("d").lhs - r.step("d").rhs) <= 1e-9
    assert abs(r.step("f").lhs - r.step("f").rhs) <= 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_appendix_chain_orthogonal_pure_large_delta(seed):
    sc = MeasurementScenario.standard(2, 3, 8, 4, theta=1 + seed % 2, seed=seed, random_bases=True)
    U = build_perturbed_mechanism(sc, 0.04)
    rng = np.random.default_rng(seed)
    a, b = draw_system_pair(sc, "orthogonal", rng)
    r = appendix_chain(U, a, b, draw_environment(sc, rng), sc)
    failed = [s.label for s in r.steps if not s.holds]
    assert failed == [] and r.bound_holds


def test_step_d_matches_tensor_factor(scenario):
    sc = scenario
    U = build_perturbed_mechanism(sc, 0.04)
    rng = np.random.default_rng(12)
    a, _ = draw_system_pair(sc, "mixed", rng)
    out = apply_mechanism(U, a, draw_environment(sc, rng), sc)
    sigma_SE, sigma_E = auxiliary_states(out.rho_SE, sc)
    assert np.allclose(sigma_SE, np.kron(dm(sc.o_theta), sigma_E), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(0, 2**31),
    st.sampled_from([0.0, 0.0025, 0.01, 0.04]),
    st.sampled_from(["mixed", "pure", "orthogonal"]),
    st.sampled_from([0.0, 0.005, 0.02]),
)
def test_baseline_bound_random_trials(seed, delta, kind, tail):
    d_S = 2 + seed % 2
    sc = MeasurementScenario.standard(d_S, d_S + 1, 8, 8 // d_S - (1 if tail else 0),
                                      theta=1 + seed % d_S, seed=seed, random_bases=True)
    U = build_perturbed_mechanism(sc, delta)
    rng = np.random.default_rng(seed)
    a, b = draw_system_pair(sc, kind, rng)
    rho_E = draw_environment(sc, rng, tail_weight=tail)
    r = appendix_chain(U, a, b, rho_E, sc)
    assert r.bound_holds, (r.lhs, r.rhs)
    assert r.extrapolation == (tail > 0)
    if tail == 0:
        assert r.holds


def test_bound_report_step_lookup():
    r = BoundReport(lhs=1.0, rhs=0.5, slack=0.5, delta_used=0.0)
    assert r.holds and not r.extrapolation
    with pytest.raises(KeyError):
        r.step("z")

"""
One shared unitary cannot give definite outcomes
================================================

A single linear coupling |o_i>|a_0> -> |o_i>|a_i> turns a superposed input
into an entangled state whose apparatus is maximally uncertain. An
outcome-conditioned mechanism picks one pointer instead.
"""

import numpy as np

from outcome_unitary import MeasurementScenario, apply_mechanism, build_perturbed_mechanism
from outcome_unitary.mechanism import definiteness, von_neumann_control
from outcome_unitary.qcore import dm

sc = MeasurementScenario.standard(2, 3, 4, D=2, seed=1)

for p in (0.5, 0.8, 1.0):
    psi = np.sqrt(p) * sc.o(1) + np.sqrt(1 - p) * sc.o(2)
    _, shared = von_neumann_control(sc, psi)
    print(f"|<o_1|psi>|^2 = {p}: shared-unitary definiteness {shared:.3f}")

# the same equal superposition through mechanisms conditioned on either outcome
psi = (sc.o(1) + sc.o(2)) / np.sqrt(2)
for theta in (1, 2):
    sc_t = sc.with_theta(theta)
    U = build_perturbed_mechanism(sc_t, 0.01)
    out = apply_mechanism(U, dm(psi), dm(sc.e(0)), sc_t)
    print(f"outcome {theta}: definiteness {definiteness(out.rho_A, sc_t):.4f} "
          f"(at least 1 - delta = {1 - U.delta_target:.4f})")

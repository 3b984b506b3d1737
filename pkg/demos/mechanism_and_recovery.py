"""
Building an outcome-conditioned unitary
=======================================

Every dominant input |o_i>|a_0>|e_k> is sent to |o_theta>|a_theta>|e~_ik>.
The system collapses onto o_theta, and its old amplitudes move into the
environment, where they can be read back.
"""

import numpy as np

from outcome_unitary import (
    MeasurementScenario,
    apply_mechanism,
    build_perturbed_mechanism,
    recover_superposition,
    residual_delta,
)
from outcome_unitary.qcore import dm, unitarity_error

sc = MeasurementScenario.standard(2, 3, 8, D=4, theta=1, seed=3, random_bases=True)

# an exact mechanism (delta = 0) and one that leaks 1% weight off the outcome
for delta in (0.0, 0.01):
    U = build_perturbed_mechanism(sc, delta)
    print(f"\ndelta = {delta}: unitarity error {unitarity_error(U.matrix):.1e}, "
          f"calibrated residual {U.delta_target:.6f}")

    # superpose the two outcomes and evolve with environment state e_2
    alpha, beta = 0.6, 0.8
    psi = alpha * sc.o(1) + beta * sc.o(2)
    out = apply_mechanism(U, dm(psi), dm(sc.e(2)), sc)
    print("  residual on the outcome:", round(residual_delta(out.rho_SE, sc), 6))
    print("  pointer occupation <a_1|rho_A|a_1>:",
          round(float(np.real(sc.a(1).conj() @ out.rho_A @ sc.a(1))), 6))

    # the superposition now lives in the environment
    a, b = recover_superposition(U, 2, out.rho_E, other=2)
    print(f"  recovered ({a.real:.4f}, {b.real:.4f}); "
          f"allowed error 2*sqrt(delta) = {2 * np.sqrt(U.delta_target):.3f}")

"""
Does the environment leave room for a definite outcome?
=======================================================

An outcome-conditioned unitary needs d_S * D orthonormal environment images,
so the environment's effective rank D must fit into d_E / d_S.
"""

import numpy as np

from outcome_unitary import HilbertFactorization, check_feasibility, dominant_epsilon

fact = HilbertFactorization(d_S=2, d_A=3, d_E=8)

# a thermal-looking spectrum: a few populated levels and an empty tail
spectrum = np.array([0.5, 0.3, 0.15, 0.04, 0.01, 0, 0, 0])
rho_E = np.diag(spectrum).astype(complex)

for D in range(1, 6):
    eps, _ = dominant_epsilon(rho_E, D)
    print(f"D = {D}: weight outside the top-{D} subspace = {eps:.3f}")

report = check_feasibility(rho_E, fact, epsilon_max=0.05)
print("\nwith epsilon_max = 0.05:", report.as_dict())

# the maximally mixed environment has no small eigenvalues to spare
report = check_feasibility(np.eye(8, dtype=complex) / 8, fact, epsilon_max=0.05)
print("maximally mixed:", "feasible" if report.dimension_ok else "infeasible",
      f"(needs D = {report.D}, room for {report.max_rank})")

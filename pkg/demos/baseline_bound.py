"""
Different system states force different final environments
===========================================================

With the same environment and mechanism, two runs that start from system
states rho_S and rho_S' end with environments at least
||rho_S - rho_S'||_1 - 8 sqrt(delta) apart.
"""

import numpy as np

from outcome_unitary import MeasurementScenario, appendix_chain, build_perturbed_mechanism
from outcome_unitary.trials import draw_environment, draw_system_pair

rng = np.random.default_rng(2024)
sc = MeasurementScenario.standard(3, 4, 8, D=2, theta=2, seed=11, random_bases=True)

for delta in (0.0, 0.01, 0.04):
    U = build_perturbed_mechanism(sc, delta)
    a, b = draw_system_pair(sc, "orthogonal", rng)
    report = appendix_chain(U, a, b, draw_environment(sc, rng), sc)
    print(f"\ndelta = {report.delta_used:.4f}: lhs {report.lhs:.4f} >= rhs {report.rhs:.4f} "
          f"(slack {report.slack:.4f})")
    # the intermediate inequalities behind the bound
    for step in report.steps:
        rel = {"le": "<=", "ge": ">=", "eq": "=="}[step.kind]
        print(f"  ({step.label}) {step.lhs:.4f} {rel} {step.rhs:.4f}  "
              f"{'ok' if step.holds else 'VIOLATED'}")

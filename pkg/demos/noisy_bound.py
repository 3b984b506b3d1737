"""
Run-to-run noise
================

Real experiments never repeat the same unitary or the same environment.
Averaging over ensembles costs at most 2 (eta + gamma) in the bound, where
gamma and eta are the spreads of the mechanisms and environments around
their central members.
"""

import numpy as np

from outcome_unitary import (
    MeasurementScenario,
    build_perturbed_mechanism,
    environment_ensemble_around,
    mechanism_ensemble_around,
    noisy_report,
)
from outcome_unitary.qcore import dm
from outcome_unitary.trials import draw_environment

rng = np.random.default_rng(7)
sc = MeasurementScenario.standard(2, 3, 8, D=4, theta=1, seed=5, random_bases=True)
base = build_perturbed_mechanism(sc, 0.01)
plus = dm((sc.o(1) + sc.o(2)) / np.sqrt(2))
minus = dm((sc.o(1) - sc.o(2)) / np.sqrt(2))

# widen both ensembles and watch the guaranteed separation shrink
for scale in (0.0, 0.05, 0.1, 0.2):
    mech = mechanism_ensemble_around(base, sc, 5, 2 * scale, rng)
    env = environment_ensemble_around(draw_environment(sc, rng), sc, 5, scale, rng)
    r = noisy_report(mech, env, plus, minus, sc)
    print(f"gamma {r.gamma:.3f}  eta {r.eta:.3f}  lhs {r.lhs:.4f}  rhs {r.rhs:.4f}  "
          f"deviation from centre {r.step('noise').lhs:.4f} <= {r.eta + r.gamma:.4f}")

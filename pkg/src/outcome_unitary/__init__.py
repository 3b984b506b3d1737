"""Finite-dimensional simulation of outcome-conditioned unitary measurements.

Builds unitaries that take every admissible input to a definite outcome,
simulates single runs, and checks the lower bounds on how much the final
environment must depend on the initial system state.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .qcore import (  # noqa: F401
    HilbertFactorization,
    partial_trace,
    project_renormalize,
    sample_pure,
    sample_state,
    sample_unitary,
    tensor_product,
    trace_distance,
    trace_norm,
)
from .feasibility import (  # noqa: F401
    FeasibilityReport,
    check_feasibility,
    dominant_epsilon,
    spectra_compatible,
)
from .mechanism import (  # noqa: F401
    MeasurementScenario,
    OutcomeUnitary,
    apply_mechanism,
    build_exact_mechanism,
    build_perturbed_mechanism,
    recover_superposition,
    residual_delta,
    von_neumann_control,
)
from .bounds import BoundReport, appendix_chain, baseline_report, gentle_check  # noqa: F401
from .ensemble import (  # noqa: F401
    EnvironmentEnsemble,
    MechanismEnsemble,
    NoiseBudget,
    averaged_final_environment,
    central_member,
    diamond_distance_lower_bound,
    diamond_distance_unitary,
    environment_ensemble_around,
    mechanism_ensemble_around,
    noisy_report,
)

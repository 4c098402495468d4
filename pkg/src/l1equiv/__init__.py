"""Simulation and verification tools for filtered adaptive control and its PI equivalent."""
from .analysis import (
    charpoly_a0,
    convergence_check,
    correspondence_violations,
    critical_gain,
    equivalence_check,
    fragility_demo,
    fragility_l1ac_pair,
    high_gain_limit_check,
    linf_condition_norm,
    stability_sweep,
)
from .errors import (
    BracketError,
    InvalidInputError,
    NoSolutionError,
    NotApplicableError,
    NumericalBlowup,
    OracleFailure,
)
from .models import (
    L1Config,
    L1State,
    PIGains,
    PIState,
    PlantParams,
    ReferenceModel,
    l1ac_rhs,
    perturbed_pi_rhs,
    pi_gains,
    pi_rhs,
    project_theta,
    theta_from,
)
from .poly_linalg import (
    Polynomial,
    Stability,
    StabilityVerdict,
    companion_char_poly,
    companion_matrix,
    poly_roots_oracle,
    routh_hurwitz,
    solve_lyapunov,
)
from .simulator import (
    InitialConditions,
    IntegratorConfig,
    RunOutcome,
    ScriptedEstimate,
    Trace,
    Verdict,
    integrate,
    run_closed_loop,
)

__version__ = "0.1.0"

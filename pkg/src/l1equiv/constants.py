"""Central record of numerical tolerances and defaults."""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # poly_linalg
    routh_zero: float = 1e-12          # relative cancellation level treated as an exact zero
    routh_epsilon: float = 1e-9        # replacement for a lone zero pivot
    lyap_residual: float = 1e-9        # relative to max|Q|
    symmetry: float = 1e-12
    roots_residual: float = 1e-10
    roots_max_iter: int = 500
    # simulator
    blowup_threshold: float = 1e6
    # analysis
    equivalence_gap: float = 1e-6
    tail_fraction: float = 0.1
    convergence_tail: float = 1e-3
    v_monotone_factor: float = 5.0
    linf_tail: float = 1e-6
    rk4_stability_limit: float = 2.8   # max k*dt for explicit RK4 on the filter pole


TOL = Tolerances()

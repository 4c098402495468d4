"""Verification layer.

Checks that the filtered adaptive controller is an implementable PI loop in
disguise: signal equivalence, decay of the perturbation, the closed-loop
characteristic polynomial identity, the critical PI gain, the induced-norm
condition, and the initial-condition fragility scenario.
"""
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _kernels as K
from .constants import TOL
from .errors import BracketError, InvalidInputError, NotApplicableError
from .models import L1Config, PlantParams, ReferenceModel, closed_loop_a0
from .poly_linalg import (
    Polynomial,
    Stability,
    char_poly,
    companion_char_poly,
    companion_matrix,
    routh_hurwitz,
)
from .simulator import (
    InitialConditions,
    IntegratorConfig,
    RunOutcome,
    ScriptedEstimate,
    Verdict,
    integrate,
    run_closed_loop,
    simulate_stacked,
)

__all__ = [
    "EquivalenceReport",
    "ConvergenceReport",
    "HighGainEntry",
    "SweepResult",
    "a0_matrix",
    "charpoly_a0",
    "equivalence_check",
    "convergence_check",
    "critical_gain",
    "linf_condition_norm",
    "stability_sweep",
    "correspondence_violations",
    "high_gain_limit_check",
    "fragility_demo",
    "fragility_l1ac_pair",
    "report_text",
]


def report_text(report) -> str:
    """Flat ``key = value`` rendering of a report dataclass."""
    lines = []
    for key, value in asdict(report).items():
        if isinstance(value, float):
            value = format(value, ".17g")
        elif isinstance(value, (list, tuple)):
            value = " ".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _a(obj):
    return obj.a if isinstance(obj, PlantParams) else np.atleast_1d(np.asarray(obj, dtype=float))


def _am(obj):
    return obj.a_m if isinstance(obj, ReferenceModel) else np.atleast_1d(np.asarray(obj, dtype=float))


def loop_polynomial(plant, ref, k) -> Polynomial:
    """``s * det(sI - A) + k * det(sI - A_m)``."""
    return companion_char_poly(_a(plant)).times_s() + k * companion_char_poly(_am(ref))


# ---------------------------------------------------------------- charpoly


def a0_matrix(plant, theta, k) -> np.ndarray:
    if not isinstance(plant, PlantParams):
        plant = PlantParams(plant)
    return closed_loop_a0(plant, theta, k)


def charpoly_a0(plant, ref, theta, k):
    """Both sides of the closed-loop characteristic polynomial identity.

    ``lhs`` is ``det(sI - A0)`` of the explicit block matrix, computed by
    Faddeev-LeVerrier; ``rhs`` is ``s p_A(s) + k p_Am(s)``.  ``plant`` and
    ``ref`` may be model objects or bare coefficient vectors.
    """
    a, a_m = _a(plant), _am(ref)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not (a.size == a_m.size == theta.size):
        raise InvalidInputError(f"dimension mismatch: a={a.size}, a_m={a_m.size}, theta={theta.size}")
    if not np.allclose(theta, a - a_m, rtol=1e-12, atol=1e-12):
        raise InvalidInputError("theta is not a - a_m for the given plant and reference")
    lhs = char_poly(a0_matrix(a, theta, k))
    rhs = loop_polynomial(a, a_m, k)
    return lhs, rhs


def polynomial_agreement(lhs: Polynomial, rhs: Polynomial) -> float:
    """Largest coefficient-wise relative discrepancy, ``|l - r| / max(|r|, 1)``."""
    m = max(lhs.coeffs.size, rhs.coeffs.size)
    l = np.pad(lhs.coeffs, (0, m - lhs.coeffs.size))
    r = np.pad(rhs.coeffs, (0, m - rhs.coeffs.size))
    return float(np.max(np.abs(l - r) / np.maximum(np.abs(r), 1.0)))


# ------------------------------------------------------------- equivalence


@dataclass
class EquivalenceReport:
    max_u_gap: float
    max_x_gap: float
    horizon: float
    dt: float
    tolerance: float
    estimator: str
    v0_consistent: bool
    truncated: bool
    passed: bool


def equivalence_check(
    plant: PlantParams,
    ref: ReferenceModel,
    cfg: L1Config,
    init: InitialConditions | None,
    int_cfg: IntegratorConfig,
    estimator: str = "true",
    script: ScriptedEstimate | None = None,
    tol: float = TOL.equivalence_gap,
) -> EquivalenceReport:
    """Co-simulate the adaptive loop and the perturbed PI loop.

    Both loops run in one stacked system and share a single estimator; the PI
    loop has its own plant copy and receives ``k (theta_hat - theta)^T x_pi``.
    Gaps are sup-norms over the sampled trace.  A diverged run is compared on
    its finite prefix and flagged ``truncated``.
    """
    init = init or InitialConditions()
    run = simulate_stacked(K.ARCH_EQUIV, plant, ref, cfg, init, int_cfg, estimator, script)
    tr = run.trace
    u_gap = float(np.max(np.abs(tr.u - tr.extra["u_pi"])))
    x_gap = float(np.max(np.abs(tr.x - tr.extra["x_pi"])))
    x0, u0, _, _, v0 = init.resolve(plant.n, cfg.k)
    consistent = bool(abs(v0 - (u0 + cfg.k * x0[-1])) <= 1e-12 * max(1.0, abs(v0)))
    return EquivalenceReport(
        max_u_gap=u_gap,
        max_x_gap=x_gap,
        horizon=float(tr.t[-1]),
        dt=float(int_cfg.dt),
        tolerance=float(tol),
        estimator=estimator,
        v0_consistent=consistent,
        truncated=not run.completed,
        passed=bool(u_gap <= tol and x_gap <= tol),
    )


# ------------------------------------------------------------- convergence


@dataclass
class ConvergenceReport:
    tail_sup: float
    bounded: bool
    v_nonincreasing: bool
    max_v_increase: float
    v_tolerance: float


def convergence_check(run: RunOutcome) -> ConvergenceReport:
    """Tail size of ``theta_tilde^T x`` and monotonicity of the Lyapunov function.

    The tail is the last 10% of the horizon.  ``V`` counts as nonincreasing
    when no sample-to-sample rise exceeds ``5 dt max|V'|``.
    """
    if not run.completed:
        raise NotApplicableError("run diverged; the bounded-trajectory hypothesis fails")
    tr = run.trace
    if tr.ttx is None or tr.V is None:
        raise NotApplicableError("run carries no estimator signals")
    tail_sup = float(np.max(np.abs(tr.ttx[tr.tail()])))
    rise = float(np.max(np.diff(tr.V), initial=0.0))
    vtol = TOL.v_monotone_factor * tr.dt * float(np.max(np.abs(tr.extra["Vdot"])))
    return ConvergenceReport(
        tail_sup=tail_sup,
        bounded=True,
        v_nonincreasing=bool(rise <= vtol),
        max_v_increase=rise,
        v_tolerance=vtol,
    )


# ----------------------------------------------------------- critical gain


def critical_gain(plant, ref, k_lo: float, k_hi: float, tol: float = 1e-9) -> float:
    """Bisect the PI gain at which ``s p_A + k p_Am`` turns Hurwitz.

    ``k_lo`` must give a non-Hurwitz verdict and ``k_hi`` a Hurwitz one.
    """
    if not (0 < k_lo < k_hi):
        raise InvalidInputError(f"need 0 < k_lo < k_hi, got {k_lo}, {k_hi}")

    def hurwitz(k):
        return routh_hurwitz(loop_polynomial(plant, ref, k)).is_hurwitz

    lo_h, hi_h = hurwitz(k_lo), hurwitz(k_hi)
    if lo_h == hi_h:
        word = "Hurwitz" if lo_h else "not Hurwitz"
        raise BracketError(f"loop polynomial is {word} at both k_lo={k_lo} and k_hi={k_hi}")
    if lo_h:
        raise BracketError(f"expected instability at k_lo={k_lo} and stability at k_hi={k_hi}")
    lo, hi = float(k_lo), float(k_hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if hurwitz(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ------------------------------------------------------------- induced norm


def _filtered_realisation(ref, theta, k):
    """State-space (Abar, Bbar, Cbar) of ``(sI - A_m)^-1 b theta^T s/(s+k)``.

    One filter state suffices because the scalar filter commutes with
    ``theta^T``: xi' = -k xi + theta^T w, sigma = theta^T w - k xi,
    z' = A_m z + b sigma, y = z.
    """
    a_m = _am(ref)
    n = a_m.size
    Am = companion_matrix(a_m)
    b = np.zeros(n)
    b[-1] = 1.0
    Abar = np.zeros((n + 1, n + 1))
    Abar[0, 0] = -k
    Abar[1:, 0] = -k * b
    Abar[1:, 1:] = Am
    Bbar = np.vstack((theta[None, :], np.outer(b, theta)))
    Cbar = np.hstack((np.zeros((n, 1)), np.eye(n)))
    return Abar, Bbar, Cbar


def linf_condition_norm(ref, theta, k: float, quad_dt: float = 1e-3, horizon: float | None = None) -> float:
    """L-infinity induced norm of ``(pI - A_m)^-1 b theta^T p/(p+k)``.

    Equals the largest row sum of the L1 norms of the impulse-response
    entries.  Responses are sampled exactly on a grid of step ``quad_dt``
    through the transition matrix, integrated with the trapezoid rule, and
    completed with an exponential tail estimate from the slowest mode.  The
    induced-norm condition holds when the returned value is below 1.
    """
    a_m = _am(ref)
    if not routh_hurwitz(companion_char_poly(a_m)).is_hurwitz:
        raise InvalidInputError("A_m must be Hurwitz; the impulse response is not integrable")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != a_m.size:
        raise InvalidInputError("theta and a_m differ in length")
    if not k > 0:
        raise InvalidInputError(f"k must be > 0, got {k}")
    if not np.any(theta):
        return 0.0
    alpha = min(k, -np.max(np.linalg.eigvals(companion_matrix(a_m)).real))
    if horizon is None:
        horizon = max(10.0, 40.0 / alpha)
    nsteps = int(np.ceil(horizon / quad_dt))
    Abar, Bbar, Cbar = _filtered_realisation(a_m, theta, k)
    Phi = expm(Abar * quad_dt)
    Z = Bbar.copy()
    H = np.empty((nsteps + 1,) + (Cbar.shape[0], Bbar.shape[1]))
    H[0] = Cbar @ Z
    for i in range(1, nsteps + 1):
        Z = Phi @ Z
        H[i] = Cbar @ Z
    absH = np.abs(H)
    integral = quad_dt * (absH.sum(axis=0) - 0.5 * (absH[0] + absH[-1]))
    window = absH[-max(2, nsteps // 20) :]
    tail = window.max(axis=0) / alpha
    if tail.max() > TOL.linf_tail:
        raise InvalidInputError(
            f"horizon {horizon:g} too short: tail estimate {tail.max():.2e} exceeds {TOL.linf_tail:g}"
        )
    return float(np.max((integral + tail).sum(axis=1)))


# ------------------------------------------------------------------- sweeps


@dataclass
class SweepResult:
    k_grid: list
    gamma_grid: list
    pi: list                      # Stability per k
    l1: list                      # Verdict per (k, gamma)
    decaying: list                # bool per (k, gamma): state settled at end of horizon
    diverged_at: list = field(default_factory=list)

    def to_csv(self) -> str:
        head = ["k", "pi"] + [format(g, ".17g") for g in self.gamma_grid]
        lines = [",".join(head)]
        for i, k in enumerate(self.k_grid):
            cells = [self.l1[i][j].value[0] for j in range(len(self.gamma_grid))]
            lines.append(",".join([format(k, ".17g"), self.pi[i].value[0]] + cells))
        return "\n".join(lines) + "\n"


def _sweep_point(args):
    plant, ref, k, g, int_cfg, init = args
    run = run_closed_loop("l1ac", plant, ref, L1Config(k, g), init, int_cfg)
    x = run.trace.x
    x0 = max(np.max(np.abs(x[0])), 1e-300)
    decaying = bool(run.completed and np.max(np.abs(x[run.trace.tail()])) <= 1e-3 * x0)
    return run.verdict, decaying, run.diverged_at


def stability_sweep(plant, ref, k_grid, gamma_grid, int_cfg, init=None, workers=None) -> SweepResult:
    """Run the adaptive loop on every ``(k, gamma)`` pair; record PI verdicts per ``k``.

    ``workers`` > 1 farms grid points to a process pool; the default reads
    ``L1EQUIV_THREADS`` and falls back to serial execution.
    """
    k_grid = [float(k) for k in k_grid]
    gamma_grid = [float(g) for g in gamma_grid]
    if not k_grid or not gamma_grid:
        raise InvalidInputError("sweep grids must be nonempty")
    if workers is None:
        workers = int(os.environ.get("L1EQUIV_THREADS", "1") or 1)
    pi = [routh_hurwitz(loop_polynomial(plant, ref, k)).tag for k in k_grid]
    jobs = [(plant, ref, k, g, int_cfg, init) for k in k_grid for g in gamma_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    m = len(gamma_grid)
    rows = [results[i * m : (i + 1) * m] for i in range(len(k_grid))]
    return SweepResult(
        k_grid=k_grid,
        gamma_grid=gamma_grid,
        pi=pi,
        l1=[[r[0] for r in row] for row in rows],
        decaying=[[r[1] for r in row] for row in rows],
        diverged_at=[[r[2] for r in row] for row in rows],
    )


def correspondence_violations(sweep: SweepResult):
    """Grid points contradicting the PI/adaptive stability correspondence.

    Returns ``(violations, exceptions)``.  A violation is a strictly unstable
    PI gain whose adaptive run completed with a settled state.  An exception
    is a Hurwitz PI gain for which every ``gamma`` diverged; these are data,
    not failures.  Marginal gains are excluded from both.
    """
    violations, exceptions = [], []
    for i, k in enumerate(sweep.k_grid):
        if sweep.pi[i] is Stability.UNSTABLE:
            for j, g in enumerate(sweep.gamma_grid):
                if sweep.l1[i][j] is Verdict.COMPLETED and sweep.decaying[i][j]:
                    violations.append((k, g))
        elif sweep.pi[i] is Stability.HURWITZ:
            if all(v is Verdict.DIVERGED for v in sweep.l1[i]):
                exceptions.append(k)
    return violations, exceptions


# ---------------------------------------------------------------- high gain


@dataclass
class HighGainEntry:
    k: float
    tail_sup: float
    bounded: bool


def high_gain_limit_check(plant, ref, gamma, k_list, int_cfg, init=None) -> list:
    """Tail sup of ``|u - theta_hat^T x|`` for each filter gain in ``k_list``.

    Diverged runs are kept with ``bounded=False`` and ``tail_sup = nan``.
    Raises if ``k * dt`` exceeds the explicit RK4 stability limit.
    """
    out = []
    for k in k_list:
        if k * int_cfg.dt > TOL.rk4_stability_limit:
            raise InvalidInputError(
                f"k*dt = {k * int_cfg.dt:g} exceeds the RK4 stability limit {TOL.rk4_stability_limit}; reduce dt"
            )
        run = run_closed_loop("l1ac", plant, ref, L1Config(k, gamma), init, int_cfg)
        if not run.completed:
            out.append(HighGainEntry(float(k), float("nan"), False))
            continue
        tr = run.trace
        gap = tr.u - np.einsum("ij,ij->i", tr.theta_hat, tr.x)
        out.append(HighGainEntry(float(k), float(np.max(np.abs(gap[tr.tail()]))), True))
    return out


# --------------------------------------------------------------- fragility

FRAGILE_PLANT = np.array([[-1.0, 0.0], [-1.0, 1.0]])


def _fragile_rhs(t, y):
    return FRAGILE_PLANT @ y


def fragility_demo(epsilon: float, int_cfg: IntegratorConfig, on_manifold=(1.0, 0.5)):
    """Two runs of ``x1' = -x1, x2' = x2 - x1``.

    The decaying eigendirection of this plant is ``x1 = 2 x2``.  Run (a)
    starts on it at ``on_manifold`` and decays like ``exp(-t)``; run (b) adds
    ``epsilon`` to ``x2``, which excites the growing mode exactly as
    ``epsilon * exp(t)``.
    """
    if not epsilon >= 0:
        raise InvalidInputError(f"epsilon must be >= 0, got {epsilon}")
    x0 = np.asarray(on_manifold, dtype=float)
    if abs(x0[0] - 2 * x0[1]) > 1e-15 * max(1.0, abs(x0[0])):
        raise InvalidInputError("on_manifold must satisfy x1 = 2 x2")
    a = integrate(_fragile_rhs, x0, int_cfg)
    b = integrate(_fragile_rhs, x0 + np.array([0.0, epsilon]), int_cfg)
    return a, b


def fragility_l1ac_pair(plant, ref, cfg, epsilon, int_cfg, init=None):
    """Adaptive runs with the predictor started on and off the plant state.

    Returns ``(matched, offset)`` where ``matched`` has ``x_hat(0) = x(0)`` and
    ``offset`` has ``x_hat(0) = x(0) + epsilon``.  Illustrative only.
    """
    init = init or InitialConditions()
    x0, u0, _, th0, _ = init.resolve(plant.n, cfg.k)
    matched = InitialConditions(x0, u0, x0.copy(), th0)
    offset = InitialConditions(x0, u0, x0 + epsilon, th0)
    return (
        run_closed_loop("l1ac", plant, ref, cfg, matched, int_cfg),
        run_closed_loop("l1ac", plant, ref, cfg, offset, int_cfg),
    )

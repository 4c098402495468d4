"""Fixed-step RK4 integration, closed-loop assembly and trace recording."""
import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba.core.registry import CPUDispatcher

from . import _kernels as K
from .constants import TOL
from .errors import InvalidInputError
from .models import L1Config, PlantParams, ReferenceModel, pi_gains, theta_from

__all__ = [
    "IntegratorConfig",
    "InitialConditions",
    "ScriptedEstimate",
    "Trace",
    "Verdict",
    "RunOutcome",
    "integrate",
    "run_closed_loop",
    "write_trace_csv",
    "read_trace_csv",
    "atomic_write_text",
]

ARCHITECTURES = ("l1ac", "pi", "perturbed-pi")
ESTIMATORS = {"true": K.EST_TRUE, "frozen": K.EST_FROZEN, "scripted": K.EST_SCRIPTED}


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    sample_every: int = 1
    blowup_threshold: float = TOL.blowup_threshold

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"dt must be > 0, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end >= self.dt):
            raise InvalidInputError(f"t_end must be >= dt, got t_end={self.t_end}, dt={self.dt}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise InvalidInputError(f"sample_every must be an integer >= 1, got {self.sample_every}")
        if not self.blowup_threshold > 0:
            raise InvalidInputError("blowup_threshold must be > 0")

    @property
    def nsteps(self) -> int:
        return int(np.ceil(self.t_end / self.dt - 1e-9))

    def with_dt(self, dt, sample_every=None) -> "IntegratorConfig":
        return IntegratorConfig(dt, self.t_end, sample_every or self.sample_every, self.blowup_threshold)


@dataclass(frozen=True, eq=False)
class InitialConditions:
    """Initial state; ``None`` entries take the documented defaults.

    Defaults: ``x0 = e_1``, ``u0 = 0``, ``xhat0 = 0``, ``thetahat0 = 0`` and
    ``v0 = u0 + k * x0[-1]``, the value that makes PI and filtered adaptive
    control signals agree from ``t = 0``.
    """

    x0: np.ndarray | None = None
    u0: float = 0.0
    xhat0: np.ndarray | None = None
    thetahat0: np.ndarray | None = None
    v0: float | None = None

    def resolve(self, n, k):
        def vec(v, default):
            v = default if v is None else np.atleast_1d(np.asarray(v, dtype=float))
            if v.shape != (n,):
                raise InvalidInputError(f"initial vector has shape {v.shape}, expected ({n},)")
            if not np.all(np.isfinite(v)):
                raise InvalidInputError("initial state must be finite")
            return v

        e1 = np.zeros(n)
        e1[0] = 1.0
        x0 = vec(self.x0, e1)
        xh = vec(self.xhat0, np.zeros(n))
        th = vec(self.thetahat0, np.zeros(n))
        u0 = float(self.u0)
        v0 = u0 + k * x0[-1] if self.v0 is None else float(self.v0)
        if not (np.isfinite(u0) and np.isfinite(v0)):
            raise InvalidInputError("initial state must be finite")
        return x0, u0, xh, th, v0


@dataclass(frozen=True, eq=False)
class ScriptedEstimate:
    """``theta_hat(t) = theta_hat(0) + amplitude * (sin(omega t + phase) - sin(phase))``."""

    amplitude: np.ndarray
    omega: float = 1.3
    phase: np.ndarray | None = None

    def arrays(self, n):
        amp = np.broadcast_to(np.asarray(self.amplitude, dtype=float), (n,)).copy()
        phase = np.linspace(0.0, 1.0, n) if self.phase is None else np.asarray(self.phase, dtype=float)
        return amp, float(self.omega), np.broadcast_to(phase, (n,)).copy()


class Verdict(str, Enum):
    COMPLETED = "Completed"
    DIVERGED = "Diverged"


@dataclass(eq=False)
class Trace:
    """Uniformly sampled signals of one run.

    ``y`` holds the raw stacked state; the named columns are filled by
    :func:`run_closed_loop` and left ``None`` where an architecture has no
    such signal.
    """

    t: np.ndarray
    y: np.ndarray
    x: np.ndarray | None = None
    u: np.ndarray | None = None
    x_hat: np.ndarray | None = None
    theta_hat: np.ndarray | None = None
    ttx: np.ndarray | None = None
    V: np.ndarray | None = None
    norminf: np.ndarray | None = None
    extra: dict = field(default_factory=dict)
    dt: float | None = None
    terminated_early: bool = False
    cause: str | None = None

    def __len__(self):
        return self.t.size

    @property
    def n(self):
        return None if self.x is None else self.x.shape[1]

    def tail(self, fraction=TOL.tail_fraction) -> slice:
        """Index slice covering the last ``fraction`` of the sampled horizon."""
        t0 = self.t[-1] - fraction * (self.t[-1] - self.t[0])
        return slice(int(np.searchsorted(self.t, t0 - 1e-12 * max(1.0, abs(t0)))), None)


@dataclass(eq=False)
class RunOutcome:
    trace: Trace
    verdict: Verdict
    diverged_at: float | None = None

    @property
    def completed(self) -> bool:
        return self.verdict is Verdict.COMPLETED


def _python_rk4(f, y0, dt, nsteps, sample_every, threshold, clamp, args):
    from .models import project_theta

    nsamp = nsteps // sample_every + 1
    out = np.empty((nsamp, y0.size))
    y = y0.copy()
    out[0] = y
    s = 1
    h2, h6 = 0.5 * dt, dt / 6.0
    for i in range(nsteps):
        t = i * dt
        k1 = np.asarray(f(t, y, *args), dtype=float)
        k2 = np.asarray(f(t + h2, y + h2 * k1, *args), dtype=float)
        k3 = np.asarray(f(t + h2, y + h2 * k2, *args), dtype=float)
        k4 = np.asarray(f(t + dt, y + dt * k3, *args), dtype=float)
        y = y + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if clamp is not None:
            lo, hi, radius = clamp
            y[lo:hi] = project_theta(y[lo:hi], radius)
        with np.errstate(invalid="ignore"):
            bad = not np.all(np.isfinite(y)) or np.max(np.abs(y)) > threshold
        if bad:
            return out, s, i + 1
        if (i + 1) % sample_every == 0:
            out[s] = y
            s += 1
    return out, s, -1


def integrate(rhs, x0, cfg: IntegratorConfig, args=(), clamp=None) -> RunOutcome:
    """Integrate ``y' = rhs(t, y, *args)`` with classical fixed-step RK4.

    Stops at the first step whose state is non-finite or exceeds
    ``cfg.blowup_threshold`` in max-norm, returning a ``Diverged`` outcome
    stamped with that step's time.  ``clamp=(lo, hi, radius)`` projects
    ``y[lo:hi]`` onto a ball after every step.  Numba-compiled right-hand
    sides run in compiled code; any other callable runs the same loop in
    Python.
    """
    y0 = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if not np.all(np.isfinite(y0)):
        raise InvalidInputError("initial state must be finite")
    nsteps, se = cfg.nsteps, int(cfg.sample_every)
    if isinstance(rhs, CPUDispatcher):
        lo, hi, radius = clamp if clamp is not None else (0, 0, -1.0)
        out, s, bad = K.rk4_loop(
            rhs, y0, float(cfg.dt), nsteps, se, float(cfg.blowup_threshold), lo, hi, float(radius), tuple(args)
        )
    else:
        out, s, bad = _python_rk4(rhs, y0, cfg.dt, nsteps, se, cfg.blowup_threshold, clamp, args)
    t = np.arange(s) * (se * cfg.dt)
    trace = Trace(t=t, y=out[:s].copy(), dt=float(cfg.dt))
    if bad >= 0:
        trace.terminated_early = True
        trace.cause = "state exceeded blow-up threshold or became non-finite"
        return RunOutcome(trace, Verdict.DIVERGED, bad * cfg.dt)
    return RunOutcome(trace, Verdict.COMPLETED)


def _field_args(arch_code, est_code, plant, ref, cfg, script):
    n = plant.n
    theta = theta_from(plant, ref)
    gains = pi_gains(cfg.k, ref)
    if script is None:
        script = ScriptedEstimate(np.ones(n))
    amp, omega, phase = script.arrays(n)
    return (
        arch_code, est_code, n, plant.a.copy(), ref.a_m.copy(), float(cfg.k), float(cfg.gamma),
        ref.Pb, theta, gains.K_I, gains.K_P, amp, omega, phase,
    )


def _estimator_signals(tr: Trace, n, plant, ref, cfg, x, xh, th):
    theta = theta_from(plant, ref)
    tt = th - theta
    xt = xh - x
    tr.x_hat, tr.theta_hat = xh, th
    tr.ttx = np.einsum("ij,ij->i", tt, x)
    tr.V = 0.5 * np.einsum("ij,jk,ik->i", xt, ref.P, xt) + np.einsum("ij,ij->i", tt, tt) / (2 * cfg.gamma)
    tr.extra["Vdot"] = -0.5 * np.einsum("ij,jk,ik->i", xt, ref.Q, xt)


def simulate_stacked(arch_code, plant, ref, cfg, init, int_cfg, estimator="true", script=None):
    """Build the stacked initial state for ``arch_code``, integrate and decode signals."""
    if plant.n != ref.n:
        raise InvalidInputError(f"plant order {plant.n} != reference order {ref.n}")
    try:
        est = ESTIMATORS[estimator]
    except KeyError:
        raise InvalidInputError(f"unknown estimator variant {estimator!r}") from None
    n = plant.n
    init = init or InitialConditions()
    x0, u0, xh0, th0, v0 = init.resolve(n, cfg.k)
    if arch_code == K.ARCH_L1AC:
        y0 = np.concatenate((x0, [u0], xh0, th0))
    elif arch_code == K.ARCH_PI:
        y0 = np.concatenate((x0, [v0]))
    elif arch_code == K.ARCH_PPI:
        y0 = np.concatenate((x0, [v0], xh0, th0))
    else:
        y0 = np.concatenate((x0, [u0], xh0, th0, x0, [v0]))
    clamp = None
    if cfg.projection_radius is not None and arch_code != K.ARCH_PI:
        clamp = (2 * n + 1, 3 * n + 1, float(cfg.projection_radius))
    args = _field_args(arch_code, est, plant, ref, cfg, script)
    run = integrate(K.closed_loop_field, y0, int_cfg, args=args, clamp=clamp)

    tr = run.trace
    Y = tr.y
    gains = pi_gains(cfg.k, ref)
    tr.x = Y[:, :n]
    if arch_code == K.ARCH_PI:
        tr.extra["v"] = Y[:, n]
        tr.u = Y[:, n] - tr.x @ gains.K_P
    else:
        xh, th = Y[:, n + 1 : 2 * n + 1], Y[:, 2 * n + 1 : 3 * n + 1]
        if arch_code == K.ARCH_PPI:
            tr.extra["v"] = Y[:, n]
            tr.u = Y[:, n] - tr.x @ gains.K_P
        else:
            tr.u = Y[:, n]
        _estimator_signals(tr, n, plant, ref, cfg, tr.x, xh, th)
    if arch_code == K.ARCH_EQUIV:
        o = 3 * n + 1
        tr.extra["x_pi"] = Y[:, o : o + n]
        tr.extra["v"] = Y[:, o + n]
        tr.extra["u_pi"] = Y[:, o + n] - tr.extra["x_pi"] @ gains.K_P
    tr.norminf = np.max(np.abs(Y), axis=1) if len(tr) else np.zeros(0)
    return run


def run_closed_loop(
    arch: str,
    plant: PlantParams,
    ref: ReferenceModel,
    cfg: L1Config,
    init: InitialConditions | None,
    int_cfg: IntegratorConfig,
    estimator: str = "true",
    script: ScriptedEstimate | None = None,
) -> RunOutcome:
    """Simulate one closed loop.

    ``arch`` is ``"l1ac"`` (filtered adaptive law), ``"pi"`` (implementable
    PI) or ``"perturbed-pi"`` (PI plus the estimator-driven perturbation,
    integrated together with the estimator in one system).  ``estimator``
    selects the estimate dynamics: ``"true"`` adaptation law, ``"frozen"``
    at its initial value, or ``"scripted"`` sinusoid from ``script``.
    """
    codes = {"l1ac": K.ARCH_L1AC, "pi": K.ARCH_PI, "perturbed-pi": K.ARCH_PPI}
    if arch not in codes:
        raise InvalidInputError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
    return simulate_stacked(codes[arch], plant, ref, cfg, init, int_cfg, estimator, script)


def atomic_write_text(path, text: str):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    return format(float(v), ".17g")


def trace_columns(trace: Trace):
    n = trace.n
    m = len(trace)
    nan = np.full(m, np.nan)

    def col(arr, j=None):
        if arr is None:
            return nan
        return arr if j is None else arr[:, j]

    cols = {"t": trace.t}
    for j in range(n):
        cols[f"x{j + 1}"] = col(trace.x, j)
    cols["u"] = col(trace.u)
    for j in range(n):
        cols[f"xhat{j + 1}"] = col(trace.x_hat, j)
    for j in range(n):
        cols[f"thhat{j + 1}"] = col(trace.theta_hat, j)
    cols["ttx"] = col(trace.ttx)
    cols["V"] = col(trace.V)
    cols["norminf"] = col(trace.norminf)
    return cols


def write_trace_csv(trace: Trace, path):
    """Serialise a closed-loop trace; floats carry 17 significant digits."""
    cols = trace_columns(trace)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols.keys())
    for row in zip(*cols.values()):
        w.writerow([_fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def read_trace_csv(path) -> dict:
    """Parse a trace CSV back into a ``{column: ndarray}`` mapping."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))
    return {name: data[:, j] for j, name in enumerate(header)}

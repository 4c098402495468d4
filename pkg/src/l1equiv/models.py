"""Plant, reference model and controller right-hand sides.

The plant is single-input in controllable canonical form with ``b = e_n``::

    x' = A x + b u,        A = companion(a)

Two controllers are modelled.  The filtered adaptive law

    u'      = -k (u - theta_hat^T x)
    x_hat'  = A_m x_hat - b (theta_hat^T x - u)
    theta_hat' = gamma x (x_hat - x)^T P b

and the state-feedback PI law ``v' = -K_I^T x``, ``u = v - K_P^T x`` with
``K_I = k a_m`` and ``K_P = k e_n``.  The perturbed PI adds
``k * (theta_hat - theta)^T x`` to ``v'``.

All functions here work on small explicit records and are meant for
inspection and testing; the simulator integrates an equivalent compiled
field over flat arrays.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalBlowup
from .poly_linalg import (
    Stability,
    char_poly,
    companion_char_poly,
    companion_matrix,
    routh_hurwitz,
    solve_lyapunov,
)

__all__ = [
    "PlantParams",
    "ReferenceModel",
    "L1Config",
    "PIGains",
    "L1State",
    "PIState",
    "theta_from",
    "pi_gains",
    "l1ac_rhs",
    "pi_rhs",
    "perturbed_pi_rhs",
    "project_theta",
    "closed_loop_a0",
    "pi_closed_loop_matrix",
]


def _vec(v, name):
    v = np.atleast_1d(np.asarray(v, dtype=float)).copy()
    if v.ndim != 1 or v.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return v


def _e(n):
    e = np.zeros(n)
    e[-1] = 1.0
    return e


@dataclass(frozen=True, eq=False)
class PlantParams:
    """Unknown plant coefficients ``a_1..a_n``; any sign, unstable plants allowed."""

    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a, "plant coefficients a"))

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def A(self) -> np.ndarray:
        return companion_matrix(self.a)

    @property
    def b(self) -> np.ndarray:
        return _e(self.n)


@dataclass(frozen=True, eq=False)
class ReferenceModel:
    """Designer coefficients ``a_m`` together with ``Q`` and its Lyapunov matrix ``P``."""

    a_m: np.ndarray
    Q: np.ndarray | None = None
    P: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a_m = _vec(self.a_m, "reference coefficients a_m")
        for i, ai in enumerate(a_m):
            if not ai > 0:
                raise InvalidInputError(
                    f"reference coefficients must satisfy a_m[i] > 0 for every i (a_m[{i}] = {ai:g})"
                )
        verdict = routh_hurwitz(companion_char_poly(a_m))
        if verdict.tag is not Stability.HURWITZ:
            raise InvalidInputError(
                f"companion(a_m) must be Hurwitz; Routh test says {verdict.tag.value}"
                + (f" ({verdict.witness})" if verdict.witness else "")
            )
        n = a_m.size
        Q = np.eye(n) if self.Q is None else np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape != (n, n):
            raise InvalidInputError(f"Q must be {n}x{n}, got {Q.shape}")
        object.__setattr__(self, "a_m", a_m)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "P", solve_lyapunov(companion_matrix(a_m), Q))

    @property
    def n(self) -> int:
        return self.a_m.size

    @property
    def A_m(self) -> np.ndarray:
        return companion_matrix(self.a_m)

    @property
    def Pb(self) -> np.ndarray:
        return self.P[:, -1].copy()


@dataclass(frozen=True)
class L1Config:
    k: float
    gamma: float
    projection_radius: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k > 0):
            raise InvalidInputError(f"filter gain k must be > 0, got {self.k}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidInputError(f"adaptation gain gamma must be > 0, got {self.gamma}")
        if self.projection_radius is not None and not self.projection_radius > 0:
            raise InvalidInputError(f"projection radius must be > 0, got {self.projection_radius}")


@dataclass(frozen=True, eq=False)
class PIGains:
    K_I: np.ndarray
    K_P: np.ndarray


@dataclass(eq=False)
class L1State:
    x: np.ndarray
    u: float
    x_hat: np.ndarray
    theta_hat: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.x_hat = np.atleast_1d(np.asarray(self.x_hat, dtype=float))
        self.theta_hat = np.atleast_1d(np.asarray(self.theta_hat, dtype=float))
        self.u = float(self.u)
        if not (self.x.shape == self.x_hat.shape == self.theta_hat.shape) or self.x.ndim != 1:
            raise InvalidInputError("x, x_hat and theta_hat must be vectors of equal length")

    @property
    def n(self) -> int:
        return self.x.size

    def to_array(self) -> np.ndarray:
        return np.concatenate((self.x, [self.u], self.x_hat, self.theta_hat))

    @classmethod
    def from_array(cls, y, n):
        y = np.asarray(y, dtype=float)
        return cls(y[:n], y[n], y[n + 1 : 2 * n + 1], y[2 * n + 1 : 3 * n + 1])


@dataclass(eq=False)
class PIState:
    x: np.ndarray
    v: float

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.v = float(self.v)

    @property
    def n(self) -> int:
        return self.x.size

    def output(self, gains: PIGains) -> float:
        """Control signal ``u = v - K_P^T x``."""
        return self.v - float(gains.K_P @ self.x)

    def to_array(self) -> np.ndarray:
        return np.concatenate((self.x, [self.v]))

    @classmethod
    def from_array(cls, y, n):
        y = np.asarray(y, dtype=float)
        return cls(y[:n], y[n])


def _check_dims(*pairs):
    sizes = {name: n for name, n in pairs}
    if len(set(sizes.values())) != 1:
        raise InvalidInputError(f"dimension mismatch: {sizes}")


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericalBlowup("non-finite state entry")


def theta_from(plant: PlantParams, ref: ReferenceModel) -> np.ndarray:
    """Unknown parameter vector ``theta = a - a_m``, so that ``A + b theta^T = A_m``."""
    _check_dims(("plant", plant.n), ("reference", ref.n))
    return plant.a - ref.a_m


def pi_gains(k: float, ref: ReferenceModel) -> PIGains:
    """PI gains ``K_I = k a_m``, ``K_P = k e_n``.

    Only designer data enters; plant coefficients are not an argument.
    """
    if not (np.isfinite(k) and k > 0):
        raise InvalidInputError(f"k must be > 0, got {k}")
    return PIGains(K_I=k * ref.a_m, K_P=k * _e(ref.n))


def project_theta(theta_hat, radius: float) -> np.ndarray:
    """Radial clamp of ``theta_hat`` onto the closed Euclidean ball of ``radius``."""
    if not radius > 0:
        raise InvalidInputError(f"projection radius must be > 0, got {radius}")
    theta_hat = np.asarray(theta_hat, dtype=float)
    norm = np.linalg.norm(theta_hat)
    if norm <= radius:
        return theta_hat.copy()
    return theta_hat * (radius / norm)


def l1ac_rhs(state: L1State, plant: PlantParams, ref: ReferenceModel, cfg: L1Config) -> L1State:
    """Time derivative of the plant under the filtered adaptive law.

    Projection, when configured, is applied by the integrator after each
    step and does not appear here.
    """
    _check_dims(("state", state.n), ("plant", plant.n), ("reference", ref.n))
    _check_finite(state.to_array())
    x, u, xh, th = state.x, state.u, state.x_hat, state.theta_hat
    b = plant.b
    thx = float(th @ x)
    dx = plant.A @ x + b * u
    du = -cfg.k * (u - thx)
    dxh = ref.A_m @ xh - b * (thx - u)
    dth = cfg.gamma * x * float((xh - x) @ ref.Pb)
    return L1State(dx, du, dxh, dth)


def pi_rhs(state: PIState, plant: PlantParams, gains: PIGains) -> PIState:
    _check_dims(("state", state.n), ("plant", plant.n), ("gains", gains.K_I.size))
    _check_finite(state.to_array())
    x = state.x
    dx = plant.A @ x + plant.b * state.output(gains)
    dv = -float(gains.K_I @ x)
    return PIState(dx, dv)


def perturbed_pi_rhs(
    state: PIState, plant: PlantParams, gains: PIGains, k: float, theta_tilde_dot_x: float
) -> PIState:
    """PI right-hand side with ``k * theta_tilde_dot_x`` added to the integrator."""
    d = pi_rhs(state, plant, gains)
    if not np.isfinite(theta_tilde_dot_x):
        raise NumericalBlowup("non-finite perturbation input")
    d.v += k * theta_tilde_dot_x
    return d


def closed_loop_a0(plant: PlantParams, theta, k: float) -> np.ndarray:
    """Block matrix ``[[A, b], [k theta^T, -k]]`` of the ``(x, u)`` loop with exact estimates."""
    theta = _vec(theta, "theta")
    _check_dims(("plant", plant.n), ("theta", theta.size))
    n = plant.n
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = plant.A
    M[:n, n] = plant.b
    M[n, :n] = k * theta
    M[n, n] = -k
    return M


def pi_closed_loop_matrix(plant: PlantParams, gains: PIGains) -> np.ndarray:
    """System matrix of ``(x, v)`` under the unperturbed PI law."""
    n = plant.n
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = plant.A - np.outer(plant.b, gains.K_P)
    M[:n, n] = plant.b
    M[n, :n] = -gains.K_I
    return M


def pi_closed_loop_char_poly(plant: PlantParams, gains: PIGains):
    return char_poly(pi_closed_loop_matrix(plant, gains))

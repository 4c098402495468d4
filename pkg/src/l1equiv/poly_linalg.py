"""Polynomial and small dense matrix kernels.

Polynomials are stored with coefficients in *ascending* degree order, so
``Polynomial([2, 3, 1])`` is ``s**2 + 3*s + 2``.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import TOL
from .errors import InvalidInputError, NoSolutionError, OracleFailure

__all__ = [
    "Polynomial",
    "Stability",
    "StabilityVerdict",
    "as_square",
    "companion_matrix",
    "companion_char_poly",
    "char_poly",
    "solve_lyapunov",
    "routh_hurwitz",
    "poly_roots_oracle",
]


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Real polynomial with ascending coefficients; trailing zeros trimmed."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy()
        if c.ndim != 1 or c.size == 0:
            raise InvalidInputError("polynomial needs a 1-D, non-empty coefficient vector")
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("polynomial coefficients must be finite")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:1]
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0.0

    @property
    def leading(self) -> float:
        return float(self.coeffs[-1])

    def monic(self) -> "Polynomial":
        if self.is_zero:
            raise InvalidInputError("the zero polynomial has no monic form")
        return Polynomial(self.coeffs / self.coeffs[-1])

    def __call__(self, s):
        # Horner, works for complex arguments and arrays
        s = np.asarray(s)
        acc = np.zeros_like(s, dtype=np.result_type(s, float))
        for c in self.coeffs[::-1]:
            acc = acc * s + c
        return acc

    def __add__(self, other: "Polynomial") -> "Polynomial":
        m = max(self.coeffs.size, other.coeffs.size)
        out = np.zeros(m)
        out[: self.coeffs.size] += self.coeffs
        out[: other.coeffs.size] += other.coeffs
        return Polynomial(out)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * float(other))

    __rmul__ = __mul__

    def times_s(self) -> "Polynomial":
        """Multiply by the indeterminate ``s``."""
        return Polynomial(np.concatenate(([0.0], self.coeffs)))

    def allclose(self, other: "Polynomial", rtol=1e-9) -> bool:
        a, b = _pad(self.coeffs, other.coeffs)
        return bool(np.all(np.abs(a - b) <= rtol * np.maximum(np.abs(b), 1.0)))

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"


def _pad(a, b):
    m = max(a.size, b.size)
    return np.pad(a, (0, m - a.size)), np.pad(b, (0, m - b.size))


class Stability(str, Enum):
    HURWITZ = "Hurwitz"
    MARGINAL = "Marginal"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class StabilityVerdict:
    tag: Stability
    witness: str | None = None

    @property
    def is_hurwitz(self) -> bool:
        return self.tag is Stability.HURWITZ


def as_square(M, name="matrix") -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return M


def _coeff_vector(a) -> np.ndarray:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.ndim != 1 or a.size == 0:
        raise InvalidInputError("coefficient vector must be 1-D and non-empty")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("coefficient vector has non-finite entries")
    return a


def companion_matrix(a) -> np.ndarray:
    """Companion matrix with ones on the superdiagonal and last row ``-a``."""
    a = _coeff_vector(a)
    n = a.size
    M = np.eye(n, k=1)
    M[-1, :] = -a
    return M


def companion_char_poly(a) -> Polynomial:
    """``s**n + a[n-1] s**(n-1) + ... + a[0]``, the char. poly of :func:`companion_matrix`."""
    a = _coeff_vector(a)
    return Polynomial(np.concatenate((a, [1.0])))


def char_poly(M) -> Polynomial:
    """Characteristic polynomial ``det(sI - M)`` by the Faddeev-LeVerrier recursion."""
    M = as_square(M)
    n = M.shape[0]
    c = np.zeros(n + 1)
    c[n] = 1.0
    Mk = np.zeros_like(M)
    eye = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ Mk + c[n - k + 1] * eye
        c[n - k] = -np.trace(M @ Mk) / k
    return Polynomial(c)


def routh_hurwitz(p: Polynomial) -> StabilityVerdict:
    """Classify a real polynomial with the Routh array.

    A first-column sign change means right half-plane roots (``Unstable``).
    A row that vanishes identically is replaced by the derivative of its
    auxiliary polynomial and a lone zero pivot by a small positive epsilon;
    either event marks imaginary-axis roots, so without a later sign change
    the verdict is ``Marginal``.
    """
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    if p.is_zero:
        raise InvalidInputError("routh_hurwitz: zero polynomial")
    if p.degree < 1:
        raise InvalidInputError("routh_hurwitz: degree must be >= 1")
    desc = p.monic().coeffs[::-1]
    N = p.degree
    width = N // 2 + 1
    rows = np.zeros((N + 1, width))
    mags = np.zeros((N + 1, width))
    rows[0, : desc[0::2].size] = desc[0::2]
    rows[1, : desc[1::2].size] = desc[1::2]
    mags[:2] = np.abs(rows[:2])
    marginal = None

    def rescale(i):
        # positive row scaling leaves every sign and zero test unchanged
        m = np.max(np.abs(rows[i]))
        if m > 0 and np.isfinite(m):
            rows[i] /= m
            mags[i] /= m

    rescale(0)

    def is_zero(i, j):
        return abs(rows[i, j]) <= TOL.routh_zero * max(mags[i, j], 1e-300)

    for i in range(1, N + 1):
        if i >= 2:
            piv = rows[i - 1, 0]
            for j in range(width - 1):
                t1 = piv * rows[i - 2, j + 1]
                t2 = rows[i - 2, 0] * rows[i - 1, j + 1]
                rows[i, j] = (t1 - t2) / piv
                mags[i, j] = (abs(t1) + abs(t2)) / abs(piv)
        zero_row = all(is_zero(i, j) or rows[i, j] == 0.0 for j in range(width))
        if zero_row:
            # auxiliary polynomial from row i-1 has degree N-i+1, powers step by 2
            order = N - i + 1
            aux = rows[i - 1]
            powers = order - 2 * np.arange(width)
            deriv = np.where(powers > 0, aux * powers, 0.0)
            rows[i] = deriv
            mags[i] = np.abs(deriv)
            marginal = marginal or f"vanishing row s^{N - i}; imaginary-axis roots"
        elif is_zero(i, 0):
            scale = np.max(np.abs(rows[i])) if np.any(rows[i]) else 1.0
            rows[i, 0] = TOL.routh_epsilon * scale
            mags[i, 0] = abs(rows[i, 0])
            marginal = marginal or f"zero pivot at row s^{N - i}"
        rescale(i)

    first = rows[:, 0]
    for i in range(1, N + 1):
        if np.sign(first[i]) != np.sign(first[i - 1]):
            return StabilityVerdict(Stability.UNSTABLE, f"sign change entering row s^{N - i}")
    if marginal:
        return StabilityVerdict(Stability.MARGINAL, marginal)
    return StabilityVerdict(Stability.HURWITZ)


def solve_lyapunov(A_m, Q) -> np.ndarray:
    """Solve ``P A_m + A_m^T P = -Q`` for symmetric positive definite ``P``.

    Uses the Kronecker-sum vectorisation and one dense LU solve followed by a
    single step of iterative refinement; intended for n up to about 10.
    """
    A = as_square(A_m, "A_m")
    Q = as_square(Q, "Q")
    n = A.shape[0]
    if Q.shape != A.shape:
        raise InvalidInputError(f"Q has shape {Q.shape}, expected {A.shape}")
    qmax = np.max(np.abs(Q))
    if np.max(np.abs(Q - Q.T)) > TOL.symmetry * max(qmax, 1.0):
        raise InvalidInputError("Q must be symmetric")
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise InvalidInputError("Q must be positive definite") from None
    verdict = routh_hurwitz(char_poly(A))
    if not verdict.is_hurwitz:
        raise NoSolutionError(f"A_m is not Hurwitz ({verdict.tag.value}); no positive definite solution")

    eye = np.eye(n)
    # column-major vec: vec(P A) = (A^T kron I) vec(P), vec(A^T P) = (I kron A^T) vec(P)
    K = np.kron(A.T, eye) + np.kron(eye, A.T)
    rhs = -Q.reshape(-1, order="F")
    vecP = np.linalg.solve(K, rhs)
    vecP += np.linalg.solve(K, rhs - K @ vecP)
    P = vecP.reshape(n, n, order="F")
    P = 0.5 * (P + P.T)

    residual = np.max(np.abs(P @ A + A.T @ P + Q))
    if residual > TOL.lyap_residual * qmax:
        raise NoSolutionError(f"Lyapunov residual {residual:.3e} exceeds tolerance")
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise NoSolutionError("computed Lyapunov solution is not positive definite") from None
    return P


def poly_roots_oracle(p: Polynomial, max_iter=None, tol=None) -> list:
    """All complex roots by Aberth-Ehrlich simultaneous iteration.

    Test oracle only.  Convergence requires
    ``|p(r)| <= tol * max(max_i |c_i|, sum_i |c_i| |r|^i)`` for every root of
    the monic polynomial; the second term is the scale at which double
    precision can resolve ``p(r)`` for large roots.  Roots are sorted by real part, then imaginary part.
    """
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    if p.degree < 1:
        raise InvalidInputError("poly_roots_oracle: degree must be >= 1")
    max_iter = TOL.roots_max_iter if max_iter is None else max_iter
    tol = TOL.roots_residual if tol is None else tol
    c = p.monic().coeffs
    # exact roots at the origin are deflated, not iterated
    nzero = int(np.argmax(c != 0.0))
    c = c[nzero:]
    N = c.size - 1
    zeros = [0j] * nzero
    if N == 0:
        return zeros
    if N == 1:
        return sorted(zeros + [complex(-c[0])], key=lambda r: (round(r.real, 10), r.imag))
    dc = c[1:] * np.arange(1, N + 1)
    absc = np.abs(c)

    def horner(coef, z):
        acc = np.zeros_like(z)
        for ci in coef[::-1]:
            acc = acc * z + ci
        return acc

    radius = 1.0 + np.max(absc[:-1])
    # tighter start radius keeps early Aberth steps well conditioned
    radius = min(radius, 2.0 * np.max(absc[:-1] ** (1.0 / (N - np.arange(N)))) + 1e-3)
    z = radius * np.exp(1j * (2 * np.pi * np.arange(N) / N + 0.4))

    def converged(z):
        r = np.abs(horner(c, z))
        scale = np.maximum(horner(absc, np.abs(z)), np.max(absc))
        return np.all(r <= tol * scale)

    for _ in range(max_iter):
        pz = horner(c, z)
        dpz = horner(dc, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = pz / dpz
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            w = ratio / (1.0 - ratio * inv.sum(axis=1))
        bad = ~np.isfinite(w)
        if np.any(bad):
            # coincident iterates or a critical point: nudge and retry
            w[bad] = 1e-8 * (1 + 1j) * (1 + np.abs(z[bad]))
        z = z - w
        if np.all(np.abs(w) <= 4 * np.finfo(float).eps * (1 + np.abs(z))) or (
            np.all(np.abs(w) <= 1e-13 * (1 + np.abs(z))) and converged(z)
        ):
            break
    if not converged(z):
        raise OracleFailure(f"Aberth iteration did not reach residual {tol:g} in {max_iter} steps")
    # real parts rounded in the key so conjugate pairs order by imaginary part
    return sorted(zeros + [complex(r) for r in z], key=lambda r: (round(r.real, 10), r.imag))

"""Directional derivatives of Q_alpha(x) = Tr[(x x*)^alpha] on the unit sphere.

Derivatives are taken along the normalized curve (x + t y) / sqrt(1 + t^2)
with y orthogonal to x.  The exact formulas need x in Schmidt form (diagonal,
non-negative); rectangular matrices are zero-padded to square.  Finite
differences provide the independent check.
"""

from dataclasses import dataclass

import numpy as np

from .entropy import q_alpha
from .errors import DegeneracyError, DimensionError, PreconditionError
from .hadamard import TAU_DEG, HadamardOperator, phi_table
from .matspace import hs_inner, orth_complement, pad_square, schmidt_align

# D^1_y Q = D1_SCALE * alpha * Tr(w x^(2 alpha - 1)); pinned against fd_oracle
# in tests/test_derivcalc.py.
D1_SCALE = 2.0

DIAG_TOL = 1e-12
ORTH_TOL = 1e-8
FD_STEP = 1e-3


@dataclass(frozen=True)
class HermitianPair:
    w: np.ndarray
    z: np.ndarray


@dataclass(frozen=True)
class TaylorCoeffs:
    c0: float
    c1: float
    c2: float
    holder_eps: float = 1.0

    def __call__(self, t):
        return self.c0 + self.c1 * t + self.c2 * t * t


@dataclass(frozen=True)
class DerivativeReport:
    order: int
    analytic: float
    oracle: float

    @property
    def abs_diff(self):
        return abs(self.analytic - self.oracle)


def curve_point(x, y, t, tol=1e-10):
    """(x + t y) / sqrt(1 + t^2) for orthonormal x, y."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if abs(hs_inner(x, y)) > tol:
        raise PreconditionError("y must be orthogonal to x")
    if abs(np.linalg.norm(x) - 1) > tol or abs(np.linalg.norm(y) - 1) > tol:
        raise PreconditionError("x and y must be normalized")
    return (x + t * y) / np.sqrt(1 + t * t)


def hermitian_parts(y):
    """w = (y + y*)/2 and z = (y - y*)/(2i), so that y = w + i z."""
    y = np.asarray(y, dtype=complex)
    if y.ndim != 2 or y.shape[0] != y.shape[1]:
        raise DimensionError(f"hermitian_parts needs a square matrix, got {y.shape}")
    yh = y.conj().T
    return HermitianPair(w=(y + yh) / 2, z=(y - yh) / 2j)


def phi_coefficients(p, alpha, sign, tau=TAU_DEG):
    """The 2-index table phi^{+-}_{jk} for eigenvalues p."""
    p = np.asarray(p, dtype=float)
    return HadamardOperator(phi_table(p[:, None], p[None, :], alpha, sign, tau), label=f"phi{sign}")


def _diagonal_spectrum(x):
    """Square-padded x and p = diag(x)^2 after checking x is Schmidt-form."""
    x = pad_square(x)
    d = np.diag(x)
    off = x - np.diag(d)
    scale = max(1.0, float(np.abs(d).max(initial=0.0)))
    if np.abs(off).max(initial=0.0) > DIAG_TOL * scale:
        raise PreconditionError("x must be diagonal; apply schmidt_align first")
    if np.abs(d.imag).max(initial=0.0) > DIAG_TOL or d.real.min(initial=0.0) < -DIAG_TOL:
        raise PreconditionError("diagonal of x must be real and non-negative")
    sigma = np.clip(d.real, 0.0, None)
    return x, sigma


def _check_orth(x, y):
    if abs(np.vdot(x, y)) > ORTH_TOL * max(1.0, np.linalg.norm(y)):
        raise PreconditionError("y must be orthogonal to x")


def _odd_power(sigma, e):
    out = np.zeros_like(sigma)
    pos = sigma > 0
    out[pos] = sigma[pos] ** e
    return out


def first_derivative(x_diag, y, alpha):
    """D^1_y Q_alpha(x) for diagonal non-negative x and y orthogonal to x."""
    x, sigma = _diagonal_spectrum(x_diag)
    y = pad_square(y)
    _check_orth(x, y)
    w = hermitian_parts(y).w
    return float(D1_SCALE * alpha * np.sum(np.diag(w).real * _odd_power(sigma, 2 * alpha - 1)))


@dataclass(frozen=True)
class SecondDerivativeForm:
    """Precomputed data for y -> D^2_y Q_alpha(x) at a fixed diagonal x.

    The form is homogeneous of degree two, so it can be polarized.
    """

    alpha: float
    q: float
    phi_minus: np.ndarray
    phi_plus: np.ndarray
    x: np.ndarray

    @classmethod
    def at(cls, x_diag, alpha):
        x, sigma = _diagonal_spectrum(x_diag)
        p = sigma**2
        q = float(np.sum(_odd_power(p, alpha)))
        return cls(
            alpha=alpha,
            q=q,
            phi_minus=phi_coefficients(p, alpha, "-").coeffs,
            phi_plus=phi_coefficients(p, alpha, "+").coeffs,
            x=x,
        )

    def value(self, y, check=True):
        y = pad_square(y)
        if check:
            _check_orth(self.x, y)
        hp = hermitian_parts(y)
        t = np.sum(self.phi_minus * np.abs(hp.w) ** 2 + self.phi_plus * np.abs(hp.z) ** 2)
        return float(2 * self.alpha * (-self.q * np.vdot(y, y).real + t))

    def phi_term(self, y):
        """Tr[w Phi^-(w) + z Phi^+(z)]."""
        hp = hermitian_parts(pad_square(y))
        return float(np.sum(self.phi_minus * np.abs(hp.w) ** 2 + self.phi_plus * np.abs(hp.z) ** 2))


def second_derivative(x_diag, y, alpha):
    """D^2_y Q_alpha(x) = 2 alpha (-Tr rho^alpha |y|^2 + Tr[w Phi^-(w) + z Phi^+(z)])."""
    return SecondDerivativeForm.at(x_diag, alpha).value(y)


def critical_residual(x, K, alpha):
    """max_i max(|Tr(y_i x^(2a-1))|, |Tr(y_i* x^(2a-1))|) over a basis of x-perp.

    x is rotated to Schmidt form first, with K carried along.
    """
    _, K_rot, x_rot = schmidt_align(K, x)
    perp = orth_complement(K_rot, x_rot)
    if perp.dim == 0:
        return 0.0
    xs = pad_square(x_rot)
    d = _odd_power(np.diag(xs).real, 2 * alpha - 1)
    best = 0.0
    for y in perp:
        yd = np.diag(pad_square(y))
        a = abs(np.sum(yd * d))
        b = abs(np.sum(yd.conj() * d))
        best = max(best, a, b)
    return float(best)


def is_critical(x, K, alpha, tol=1e-9):
    """Returns ``(critical, residual)``."""
    res = critical_residual(x, K, alpha)
    return res <= tol, res


def fd_oracle(x, y, alpha, order, h=FD_STEP):
    """Central differences of t -> q_alpha(curve_point(x, y, t)) at t = 0,
    with one level of Richardson extrapolation."""
    f = lambda t: q_alpha(curve_point(x, y, t), alpha)  # noqa: E731
    if order == 1:
        D = lambda s: (f(s) - f(-s)) / (2 * s)  # noqa: E731
    elif order == 2:
        f0 = f(0.0)
        D = lambda s: (f(s) - 2 * f0 + f(-s)) / (s * s)  # noqa: E731
    else:
        raise ValueError("order must be 1 or 2")
    return float((4 * D(h / 2) - D(h)) / 3)


def derivative_report(x_diag, y, alpha, order, h=FD_STEP):
    if order == 1:
        analytic = first_derivative(x_diag, y, alpha)
    else:
        analytic = second_derivative(x_diag, y, alpha)
    return DerivativeReport(order, analytic, fd_oracle(x_diag, y, alpha, order, h))


# ---------------------------------------------------------------- Taylor engine


def _check_diagonal(A):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError("A must be square")
    if np.abs(A - np.diag(np.diag(A))).max(initial=0.0) > DIAG_TOL:
        raise PreconditionError("A must be diagonal")
    return np.diag(A).real


def trace_taylor_coeffs(A, B, f, fp, fpp, tau=TAU_DEG, holder_eps=1.0):
    """Second-order Taylor coefficients of t -> Tr f(A + tB), A diagonal Hermitian."""
    lam = _check_diagonal(A)
    B = np.asarray(B, dtype=complex)
    c0 = float(np.sum(f(lam)))
    c1 = float(np.sum(fp(lam) * np.diag(B).real))
    d1 = fp(lam)
    diff = lam[:, None] - lam[None, :]
    near = np.abs(diff) < tau
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = (d1[:, None] - d1[None, :]) / diff
    mid = 0.5 * (lam[:, None] + lam[None, :])
    quot[near] = fpp(mid[near])
    c2 = float(np.sum(0.5 * quot * np.abs(B) ** 2))
    return TaylorCoeffs(c0, c1, c2, holder_eps)


def g_alpha(alpha):
    """x -> |x|^(2 alpha) with its first two derivatives."""

    def f(x):
        return np.abs(x) ** (2 * alpha)

    def fp(x):
        return 2 * alpha * np.sign(x) * np.abs(x) ** (2 * alpha - 1)

    def fpp(x):
        x = np.abs(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = 2 * alpha * (2 * alpha - 1) * x[pos] ** (2 * alpha - 2)
        if alpha == 1:
            out[~pos] = 2.0
        return out

    return f, fp, fpp


def holder_exponent(alpha):
    return min(1.0, 2 * (alpha - 1))


def trace_function(A, B, t, f):
    """Tr f(A + tB) by spectral calculus."""
    return float(np.sum(f(np.linalg.eigvalsh(np.asarray(A) + t * np.asarray(B)))))


def eigenvalue_perturbation(A, B, j, tau=TAU_DEG):
    """(mu0, mu1, mu2) in mu_j(t) = mu0 + mu1 t + mu2 t^2 + O(t^3); j is 0-based."""
    lam = _check_diagonal(A)
    B = np.asarray(B, dtype=complex)
    others = np.arange(len(lam)) != j
    gaps = lam[j] - lam[others]
    if np.any(np.abs(gaps) < tau):
        raise DegeneracyError(f"eigenvalue {j} is degenerate")
    mu2 = float(np.sum(np.abs(B[j, others]) ** 2 / gaps))
    return float(lam[j]), float(B[j, j].real), mu2


def linearize(x):
    """Hermitian [[0, x], [x*, 0]] for square x."""
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError("linearize needs a square matrix; pad first")
    n = x.shape[0]
    Z = np.zeros((n, n), dtype=complex)
    return np.block([[Z, x], [x.conj().T, Z]])


def hadamard_block_unitary(n):
    """(1/sqrt 2) [[I, I], [I, -I]]; diagonalizes linearize(x) for diagonal x."""
    eye = np.eye(n)
    return np.block([[eye, eye], [eye, -eye]]) / np.sqrt(2)


def g_trace(X, alpha):
    """Tr[X^(2 alpha)] = sum |lambda|^(2 alpha) for Hermitian X."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(X)) ** (2 * alpha)))

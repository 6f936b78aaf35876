"""Hadamard-product operators and the scalar inequalities behind Phi <= Psi.

Coefficient tables act entrywise.  A 2-index table ``c[j, k]`` scales entry
``(j, k)`` of an ``N x N`` matrix.  A 4-index table ``c[j, k, l, m]`` scales
entry ``((j, k), (l, m))`` of an ``(N1 N2) x (N1 N2)`` matrix, the same
lexicographic convention as :func:`numpy.kron`.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

TAU_DEG = 1e-8


@dataclass(frozen=True)
class HadamardOperator:
    coeffs: np.ndarray
    label: str = ""

    @property
    def arity(self):
        return self.coeffs.ndim

    @property
    def matrix_shape(self):
        c = self.coeffs
        if c.ndim == 2:
            return c.shape
        return (c.shape[0] * c.shape[1], c.shape[2] * c.shape[3])

    def __call__(self, y):
        return apply_hadamard(self, y)

    def matrix(self):
        """Coefficients laid out as a matrix of the operand's shape."""
        return self.coeffs.reshape(self.matrix_shape)

    def is_symmetric(self, tol=0.0):
        c = self.coeffs
        t = c.T if c.ndim == 2 else c.transpose(2, 3, 0, 1)
        return bool(np.abs(c - t).max(initial=0.0) <= tol)

    def __add__(self, other):
        return HadamardOperator(self.coeffs + other.coeffs)

    def scaled(self, s):
        return HadamardOperator(s * self.coeffs, self.label)


def apply_hadamard(op, y):
    y = np.asarray(y)
    if y.shape != op.matrix_shape:
        raise DimensionError(f"operator acts on {op.matrix_shape}, got {y.shape}")
    return op.coeffs.reshape(y.shape) * y


def quadratic_value(op, y):
    """Tr[y* op(y)] = sum c_I |y_I|^2 (real for real coefficients)."""
    return float(np.sum(op.matrix() * np.abs(y) ** 2))


# ---------------------------------------------------------------- quotients


def pow_diff_quotient(a, b, beta, tau=TAU_DEG):
    """(a^beta - b^beta) / (a - b) for a, b >= 0, with limit beta*m^(beta-1).

    Away from the diagonal the quotient is evaluated as
    ``hi^(beta-1) * expm1(beta L) / expm1(L)`` with ``L = log(lo/hi)``, which
    has no cancellation when lo/hi is close to 1.  The limit is used when the
    relative gap (hi - lo) / hi is below ``tau``; a relative window keeps
    pairs like (0, 1e-9) on the exact branch.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    out = np.empty(hi.shape)
    near = (hi - lo) <= tau * hi
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        m = 0.5 * (hi + lo)
        out[near] = _power_limit(m[near], beta)
        far = ~near
        h, lw = hi[far], lo[far]
        r = lw / h
        # log1p is accurate near ratio 1, plain log near ratio 0
        L = np.where(r > 0.5, np.log1p((lw - h) / h), np.log(r))
        out[far] = h ** (beta - 1) * np.expm1(beta * L) / np.expm1(L)
    return out


def pow_sum_quotient(a, b, beta):
    """(a^beta + b^beta) / (a + b) for a, b >= 0, with value 0^(beta-1) at a=b=0."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    s = a + b
    out = np.empty(s.shape)
    zero = s == 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out[zero] = _zero_power(beta - 1)
        out[~zero] = (a[~zero] ** beta + b[~zero] ** beta) / s[~zero]
    return out


def _zero_power(e):
    if e > 0:
        return 0.0
    if e == 0:
        return 1.0
    return np.inf


def _power_limit(m, beta):
    """beta * m^(beta-1) with 0^e handled for every sign of e."""
    out = np.empty(m.shape)
    pos = m > 0
    out[pos] = beta * m[pos] ** (beta - 1)
    out[~pos] = beta * _zero_power(beta - 1)
    return out


def _pairwise_power(p, e):
    """p^e elementwise with 0^e = 0 for e > 0."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] ** e
    if e <= 0:
        out[~pos] = _zero_power(e)
    return out


# ---------------------------------------------------------------- tables


def phi_table(p_row, p_col, alpha, sign, tau=TAU_DEG):
    """phi^{+-} for eigenvalue arrays broadcast against each other.

    ``(p_row^(a-1/2) +- p_col^(a-1/2)) / (p_row^(1/2) +- p_col^(1/2))``; when the
    square roots differ by less than ``tau`` the limits p^(a-1) (plus) and
    (2a-1) p^(a-1) (minus) are used, with p the mean of the pair.
    """
    pr, pc = np.broadcast_arrays(np.asarray(p_row, dtype=float), np.asarray(p_col, dtype=float))
    pr = np.clip(pr, 0.0, None)
    pc = np.clip(pc, 0.0, None)
    ar, ac = np.sqrt(pr), np.sqrt(pc)
    beta = 2 * alpha - 1
    near = np.abs(ar - ac) < tau
    pbar = 0.5 * (pr + pc)
    out = np.empty(pr.shape)
    limit = _pairwise_power(pbar[near], alpha - 1)
    if sign == "+":
        out[near] = limit
        out[~near] = pow_sum_quotient(ar[~near], ac[~near], beta)
    elif sign == "-":
        out[near] = beta * limit
        out[~near] = pow_diff_quotient(ar[~near], ac[~near], beta, tau=0.0)
    else:
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return out


def dq_table(p_row, p_col, alpha, tau=TAU_DEG):
    """(p_row^a - p_col^a) / (p_row - p_col), limit a p^(a-1)."""
    return pow_diff_quotient(np.clip(p_row, 0, None), np.clip(p_col, 0, None), alpha, tau=tau)


def phi_tensor_coefficients(p, q, alpha, sign, tau=TAU_DEG):
    """phi^{AB+-}_{jk,lm} on the products p_j q_k (4-index table)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pq = np.multiply.outer(p, q)  # [j, k]
    c = phi_table(pq[:, :, None, None], pq[None, None, :, :], alpha, sign, tau)
    return HadamardOperator(c, label=f"phiAB{sign}")


def psi_coefficients(p, q, alpha, tau=TAU_DEG):
    """psi_{jk,lm} = DQ(p_j, p_l) DQ(q_k, q_m) with DQ the alpha-power quotient."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dp = dq_table(p[:, None], p[None, :], alpha, tau)  # [j, l]
    dq = dq_table(q[:, None], q[None, :], alpha, tau)  # [k, m]
    c = np.einsum("jl,km->jklm", dp, dq)
    return HadamardOperator(c, label="psi")


# ---------------------------------------------------------------- Phi <= Psi


@dataclass
class InequalityReport:
    description: str
    min_slack: float = np.inf
    violation_count: int = 0
    checked: int = 0
    worst_case: dict = field(default_factory=dict)
    tol: float = 0.0

    @property
    def ok(self):
        return self.violation_count == 0

    def merge(self, other):
        """Associative combination of two reports."""
        out = InequalityReport(self.description, tol=max(self.tol, other.tol))
        out.checked = self.checked + other.checked
        out.violation_count = self.violation_count + other.violation_count
        better = self if self.min_slack <= other.min_slack else other
        out.min_slack = better.min_slack
        out.worst_case = dict(better.worst_case)
        return out

    def to_dict(self):
        return {
            "description": self.description,
            "min_slack": self.min_slack,
            "violation_count": self.violation_count,
            "checked": self.checked,
            "tol": self.tol,
            "worst_case": self.worst_case,
        }


def check_phi_le_psi(p, q, alpha, tol=1e-12):
    """Entrywise phi^{AB+-} <= psi over all index tuples and both signs."""
    psi = psi_coefficients(p, q, alpha).coeffs
    rep = InequalityReport(f"phi<=psi p={list(map(float, p))} q={list(map(float, q))} alpha={alpha}", tol=tol)
    for sign in ("-", "+"):
        phi = phi_tensor_coefficients(p, q, alpha, sign).coeffs
        slack = psi - phi
        rep.checked += slack.size
        rep.violation_count += int(np.count_nonzero(slack < -tol))
        idx = np.unravel_index(int(np.argmin(slack)), slack.shape)
        if slack[idx] < rep.min_slack:
            rep.min_slack = float(slack[idx])
            rep.worst_case = {
                "sign": sign,
                "index": [int(i) for i in idx],
                "phi": float(phi[idx]),
                "psi": float(psi[idx]),
            }
    return rep


def spectra_grid(step=0.1, levels=(2, 3)):
    """Probability vectors with entries on the grid {0, step, ..., 1}.

    Includes the boundary points (zeros and product spectra) on purpose.
    """
    k = int(round(1 / step))
    out = []
    if 2 in levels:
        for i in range(k + 1):
            out.append(np.array([i, k - i], dtype=float) / k)
    if 3 in levels:
        for i in range(k + 1):
            for j in range(k + 1 - i):
                out.append(np.array([i, j, k - i - j], dtype=float) / k)
    return out


def scan_phi_le_psi(alpha, step=0.1, levels=(2, 3), tol=1e-12):
    """check_phi_le_psi over every pair of grid spectra; merged report."""
    grid = spectra_grid(step, levels)
    total = InequalityReport(f"phi<=psi grid step={step} levels={list(levels)} alpha={alpha}", tol=tol)
    for p in grid:
        for q in grid:
            r = check_phi_le_psi(p, q, alpha, tol)
            if r.min_slack < total.min_slack:
                r.worst_case = dict(r.worst_case, p=p.tolist(), q=q.tolist())
            total = total.merge(r)
    total.description = f"phi<=psi grid step={step} levels={list(levels)} alpha={alpha}"
    return total


# ---------------------------------------------------------------- scalar inequalities


def lemma8_check(r, s, beta):
    """(r^b - s^b)/(r - s) >= (r^b + s^b)/(r + s) >= 0 for r, s >= 0, b >= 1.

    Returns ``(lhs, mid, holds)``.  r = s = 0 is read as 1 >= 1 >= 0.
    """
    r = float(r)
    s = float(s)
    if r == 0 and s == 0:
        return 1.0, 1.0, True
    lhs = float(pow_diff_quotient(r, s, beta))
    mid = float(pow_sum_quotient(r, s, beta))
    return lhs, mid, bool(lhs >= mid >= 0)


def power_chain_batch(r, s, beta):
    """Vectorized form of lemma8_check; returns (lhs, mid) arrays."""
    r, s, beta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, s, beta)))
    lhs = np.empty(r.shape)
    mid = np.empty(r.shape)
    for b in np.unique(beta):
        sel = beta == b
        lhs[sel] = pow_diff_quotient(r[sel], s[sel], b)
        mid[sel] = pow_sum_quotient(r[sel], s[sel], b)
    both0 = (r == 0) & (s == 0)
    lhs[both0] = 1.0
    mid[both0] = 1.0
    return lhs, mid


def proposition_terms(s, t, alpha):
    """lhs = f(st), rhs = g(s) g(t) with f(u) = (1-u^(a-1/2))/(1-u^(1/2)),
    g(u) = (1-u^a)/(1-u); limits taken where the denominators vanish."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    r = np.sqrt(s * t)
    lhs = pow_diff_quotient(r, np.ones_like(r), 2 * alpha - 1)
    rhs = pow_diff_quotient(s, np.ones_like(s), alpha) * pow_diff_quotient(t, np.ones_like(t), alpha)
    return lhs, rhs


def proposition_con(s, t, alpha):
    """Returns ``(lhs, rhs, strict)`` for the (st) inequality."""
    lhs, rhs = proposition_terms(s, t, alpha)
    return float(lhs), float(rhs), bool(lhs < rhs)


def upsilon(a, xi):
    """a^2 e^(a xi) / (e^(a xi) - 1)^2, written with expm1 for small a xi."""
    a = np.asarray(a, dtype=float)
    xi = np.asarray(xi, dtype=float)
    u = a * xi
    with np.errstate(over="ignore"):
        # e^u / (e^u - 1)^2 = e^-u / (1 - e^-u)^2, stable for large u
        em = np.exp(-np.abs(u))
        return a**2 * em / np.expm1(-np.abs(u)) ** 2


def h_second(xi, alpha):
    """Second derivative of h(xi) = ln((1 - e^(alpha xi)) / (1 - e^xi))."""
    return upsilon(1.0, xi) - upsilon(alpha, xi)


def chi(u):
    u = np.asarray(u, dtype=float)
    return (u - 2) * np.exp(u) + u + 2


def convexity_witness(xi, alpha):
    """Returns ``(h''(xi), chi(alpha xi))``."""
    return float(h_second(xi, alpha)), float(chi(alpha * xi))


def write_scan_csv(path, rows):
    """Rows of (alpha, param1, param2, lhs, rhs, slack), 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "param1", "param2", "lhs", "rhs", "slack"])
        for row in rows:
            w.writerow([f"{float(v):.17g}" for v in row])

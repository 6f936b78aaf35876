"""Local maxima of Q_alpha on subspaces and the tensor-product certificate.

A local maximum of Q_alpha (alpha > 1) in a subspace K is a local minimum of
the Renyi entropy of entanglement E_alpha.  The certificate checks that the
tensor product of two such points is again a local maximum in the tensor
product subspace, direction class by direction class.
"""

from dataclasses import dataclass, field

import numpy as np

from .derivcalc import SecondDerivativeForm, critical_residual
from .entropy import check_alpha, q_alpha
from .errors import (
    ConvergenceError,
    MembershipError,
    PreconditionError,
    UnsupportedCaseError,
)
from .hadamard import HadamardOperator, dq_table
from .matspace import (
    SubspaceBasis,
    hs_inner,
    orth_complement,
    pad_square,
    pad_subspace,
    schmidt_align,
    tensor_subspace,
)

ARMIJO_C = 1e-4
SHRINK = 0.5
MAX_ITERS = 5000
GRAD_TOL = 1e-9
RESTARTS = 16
TOL_EIG = 1e-7
HESSIAN_CRIT_TOL = 1e-8

NONDEGENERATE_MAX = "nondegenerate-max"
DEGENERATE_MAX = "degenerate-max-candidate"
NOT_A_MAX = "not-a-max"

CERT_NONDEGENERATE = "nondegenerate-local-min"
CERT_DEGENERATE = "local-min-degenerate-directions"
CERT_FAILED = "FAILED"


@dataclass
class CriticalPoint:
    x: np.ndarray
    q_value: float
    residual: float
    restarts_used: int
    iterations: int = 0


@dataclass
class HessianSpectrum:
    eigenvalues: np.ndarray  # non-increasing
    matrix: np.ndarray
    basis: np.ndarray  # real basis y_1..y_r, i y_1..i y_r in the aligned frame
    basis_labels: list

    def __len__(self):
        return len(self.eigenvalues)


@dataclass
class DirectionDecomposition:
    c1: float
    c2: float
    c3: float
    yB: np.ndarray
    yA: np.ndarray
    yprime: np.ndarray
    r: np.ndarray
    factorsA: np.ndarray  # (k, nA, mA)
    factorsB: np.ndarray  # (k, nB, mB)

    def reconstruct(self, xA, xB):
        return self.c1 * np.kron(xA, self.yB) + self.c2 * np.kron(self.yA, xB) + self.c3 * self.yprime


@dataclass
class AdditivityCertificate:
    alpha: float
    tol_eig: float
    verdict: str
    factor_verdicts: dict
    factor_residuals: dict
    tensor_residual: float
    tensor_eigenvalues: np.ndarray
    class_max: dict
    product_rule_error: float
    degenerate_class_weights: dict = field(default_factory=dict)

    @property
    def failed(self):
        return self.verdict == CERT_FAILED

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "tol_eig": self.tol_eig,
            "verdict": self.verdict,
            "factor_verdicts": dict(self.factor_verdicts),
            "factor_residuals": dict(self.factor_residuals),
            "tensor_residual": self.tensor_residual,
            "tensor_eigenvalues": [float(v) for v in self.tensor_eigenvalues],
            "class_max": dict(self.class_max),
            "product_rule_error": self.product_rule_error,
            "degenerate_class_weights": dict(self.degenerate_class_weights),
        }


# ---------------------------------------------------------------- optimizer


def _ambient_gradient(x, alpha):
    """2 alpha (x x*)^(alpha-1) x, via the SVD."""
    U, s, Vh = np.linalg.svd(x, full_matrices=False)
    sp = np.zeros_like(s)
    pos = s > 0
    sp[pos] = s[pos] ** (2 * alpha - 1)
    return 2 * alpha * (U * sp) @ Vh


def _ascend(K, alpha, c, max_iters, grad_tol):
    """Projected gradient ascent of Q_alpha on the unit sphere of span(K)."""
    flat = K.basis.reshape(K.dim, -1)

    def value(c):
        return q_alpha(K.combine(c), alpha)

    def tangent_grad(c):
        G = _ambient_gradient(K.combine(c), alpha).reshape(-1)
        g = flat.conj() @ G
        return g - np.vdot(c, g) * c

    q = value(c)
    g = tangent_grad(c)
    step = 1.0
    prev = None
    for it in range(max_iters):
        gn = np.linalg.norm(g)
        if gn / (2 * alpha) <= grad_tol:
            return c, q, it
        if prev is not None:
            # Barzilai-Borwein guess, kept positive for ascent
            dc, dg = c - prev[0], g - prev[1]
            denom = -np.vdot(dc, dg).real
            if denom > 0:
                step = np.vdot(dc, dc).real / denom
        step = min(max(step, 1e-8), 1e4)
        while True:
            cn = c + step * g
            cn = cn / np.linalg.norm(cn)
            qn = value(cn)
            if qn >= q + ARMIJO_C * step * gn * gn or step < 1e-14:
                break
            step *= SHRINK
        if qn < q:
            # no ascent possible at machine precision
            return c, q, it
        prev = (c, g)
        c, q = cn, qn
        g = tangent_grad(c)
    return c, q, max_iters


def maximize_q(K, alpha, seed=0, restarts=RESTARTS, max_iters=MAX_ITERS, grad_tol=GRAD_TOL):
    """Best-of-restarts local maximum of Q_alpha over unit vectors in span(K).

    Restart ``i`` starts from complex Gaussian coordinates drawn with seed
    ``seed + i``.  Criticality of each result is certified independently by
    :func:`ral.derivcalc.critical_residual`.
    """
    alpha = check_alpha(alpha)
    if alpha <= 1:
        raise PreconditionError("maximize_q requires alpha > 1")
    if K.dim == 1:
        x = K.basis[0]
        return CriticalPoint(x, q_alpha(x, alpha), 0.0, 1, 0)
    best = None
    best_res = np.inf
    for i in range(restarts):
        rng = np.random.default_rng(seed + i)
        c = rng.standard_normal(K.dim) + 1j * rng.standard_normal(K.dim)
        c /= np.linalg.norm(c)
        c, q, its = _ascend(K, alpha, c, max_iters, grad_tol)
        x = K.combine(c)
        res = critical_residual(x, K, alpha)
        best_res = min(best_res, res)
        if res <= grad_tol and (best is None or q > best.q_value):
            best = CriticalPoint(x, q_alpha(x, alpha), res, i + 1, its)
    if best is None:
        raise ConvergenceError(
            f"no restart reached residual {grad_tol:g} (best {best_res:.3e})", best_residual=best_res
        )
    best.restarts_used = restarts
    return best


# ---------------------------------------------------------------- Hessian


def _polarized_matrix(form, basis):
    r = len(basis)
    diag = np.array([form.value(e, check=False) for e in basis])
    H = np.diag(diag)
    for a in range(r):
        for b in range(a + 1, r):
            h = 0.5 * (form.value(basis[a] + basis[b], check=False) - diag[a] - diag[b])
            H[a, b] = H[b, a] = h
    return H


def _real_basis(perp):
    ys = [pad_square(y) for y in perp]
    return np.array(ys + [1j * y for y in ys]) if ys else np.zeros((0, 0, 0), dtype=complex)


def hessian_form(x, K, alpha, crit_tol=HESSIAN_CRIT_TOL):
    """Eigenvalues of y -> D^2_y Q_alpha(x) on the real basis {y_i, i y_i} of x-perp."""
    res = critical_residual(x, K, alpha)
    if res > crit_tol:
        raise PreconditionError(f"x is not critical (residual {res:.3e})")
    _, K_rot, x_rot = schmidt_align(K, x)
    perp = orth_complement(K_rot, x_rot)
    basis = _real_basis(perp)
    labels = [f"y{i}" for i in range(perp.dim)] + [f"i*y{i}" for i in range(perp.dim)]
    if perp.dim == 0:
        return HessianSpectrum(np.zeros(0), np.zeros((0, 0)), basis, labels)
    form = SecondDerivativeForm.at(x_rot, alpha)
    H = _polarized_matrix(form, basis)
    ev = np.sort(np.linalg.eigvalsh(H))[::-1]
    return HessianSpectrum(ev, H, basis, labels)


def classify(spectrum, tol_eig=TOL_EIG):
    ev = np.asarray(spectrum.eigenvalues if isinstance(spectrum, HessianSpectrum) else spectrum, dtype=float)
    if np.any(ev > tol_eig):
        return NOT_A_MAX
    if np.all(ev < -tol_eig):
        return NONDEGENERATE_MAX
    return DEGENERATE_MAX


# ---------------------------------------------------------------- directions


def decompose_direction(y, xA, KA, xB, KB, tol=1e-10):
    """Split y in (xA (x) xB)-perp into the three orthogonal direction classes."""
    y = np.asarray(y, dtype=complex)
    xA = np.asarray(xA, dtype=complex)
    xB = np.asarray(xB, dtype=complex)
    along = abs(hs_inner(y, np.kron(xA, xB)))
    if along > tol:
        raise PreconditionError(f"y has a component {along:.3e} along xA (x) xB")
    pA = orth_complement(KA, xA)
    pB = orth_complement(KB, xB)
    a = np.array([hs_inner(y, np.kron(xA, b)) for b in pB])
    b = np.array([hs_inner(y, np.kron(s, xB)) for s in pA])
    C = np.array([[hs_inner(y, np.kron(s, t)) for t in pB] for s in pA]).reshape(pA.dim, pB.dim)

    def unit(coeffs, basis):
        nrm = float(np.linalg.norm(coeffs))
        if nrm == 0:
            return 0.0, np.zeros(basis.shape, dtype=complex)
        return nrm, basis.combine(coeffs / nrm)

    c1, yB = unit(a, pB) if pB.dim else (0.0, np.zeros(KB.shape, dtype=complex))
    c2, yA = unit(b, pA) if pA.dim else (0.0, np.zeros(KA.shape, dtype=complex))
    c3 = float(np.linalg.norm(C))
    if c3 > 0:
        U, r, Vh = np.linalg.svd(C / c3, full_matrices=False)
        keep = r > 1e-15
        r = r[keep]
        fA = np.tensordot(U[:, keep].T, pA.basis, axes=(1, 0))
        fB = np.tensordot(Vh[keep], pB.basis, axes=(1, 0))
        yprime = sum(ri * np.kron(s, t) for ri, s, t in zip(r, fA, fB))
    else:
        r = np.zeros(0)
        fA = np.zeros((0,) + KA.shape, dtype=complex)
        fB = np.zeros((0,) + KB.shape, dtype=complex)
        yprime = np.zeros_like(y)
    dec = DirectionDecomposition(c1, c2, c3, yB, yA, yprime, r, fA, fB)
    err = np.linalg.norm(dec.reconstruct(xA, xB) - y)
    if err > 1e-8:
        raise MembershipError(f"y is not in KA (x) KB (reconstruction error {err:.3e})")
    return dec


@dataclass
class _AlignedPair:
    """Both factors in padded Schmidt form, with the maps carrying tensors along."""

    alpha: float
    xA: np.ndarray
    xB: np.ndarray
    KA: SubspaceBasis
    KB: SubspaceBasis
    formA: object
    formB: object
    shapeA: tuple
    shapeB: tuple

    @classmethod
    def build(cls, xA, KA, xB, KB, alpha):
        fA, KA_r, xA_r = schmidt_align(KA, xA)
        fB, KB_r, xB_r = schmidt_align(KB, xB)
        return cls(
            alpha,
            pad_square(xA_r),
            pad_square(xB_r),
            pad_subspace(KA_r),
            pad_subspace(KB_r),
            fA,
            fB,
            tuple(KA.shape),
            tuple(KB.shape),
        )

    @property
    def x(self):
        return np.kron(self.xA, self.xB)

    def factor_a(self, y):
        return pad_square(self.formA.u @ y @ self.formA.v)

    def factor_b(self, y):
        return pad_square(self.formB.u @ y @ self.formB.v)

    def tensor(self, y):
        """Map a matrix of the original KA (x) KB frame into the aligned frame."""
        nA, mA = self.shapeA
        nB, mB = self.shapeB
        y4 = np.asarray(y, dtype=complex).reshape(nA, nB, mA, mB)
        r = np.einsum(
            "aj,bk,jklm,lc,md->abcd", self.formA.u, self.formB.u, y4, self.formA.v, self.formB.v
        )
        NA, NB = self.xA.shape[0], self.xB.shape[0]
        out = np.zeros((NA, NB, NA, NB), dtype=complex)
        out[:nA, :nB, :mA, :mB] = r
        return out.reshape(NA * NB, NA * NB)

    def form(self):
        return SecondDerivativeForm.at(self.x, self.alpha)


def _check_factor_critical(xA, KA, xB, KB, alpha, tol):
    rA = critical_residual(xA, KA, alpha)
    rB = critical_residual(xB, KB, alpha)
    if rA > tol or rB > tol:
        raise PreconditionError(f"factors must be critical (residuals {rA:.3e}, {rB:.3e})")
    return rA, rB


def verify_lemma2(xA, KA, xB, KB, y, alpha, crit_tol=1e-9):
    """Compare D^2_y Q(xA (x) xB) with the c_j^2-weighted class derivatives.

    Returns ``(lhs, rhs, abs_diff)``; cross terms vanish at critical factors.
    """
    _check_factor_critical(xA, KA, xB, KB, alpha, crit_tol)
    dec = decompose_direction(y, xA, KA, xB, KB)
    al = _AlignedPair.build(xA, KA, xB, KB, alpha)
    form = al.form()
    lhs = form.value(al.tensor(y))
    rhs = 0.0
    if dec.c1:
        rhs += dec.c1**2 * form.value(al.tensor(np.kron(xA, dec.yB)))
    if dec.c2:
        rhs += dec.c2**2 * form.value(al.tensor(np.kron(dec.yA, xB)))
    if dec.c3:
        rhs += dec.c3**2 * form.value(al.tensor(dec.yprime))
    return lhs, rhs, abs(lhs - rhs)


def dq_operator(p, alpha):
    """(Phi^- + Phi^+)/2, i.e. the table (p_j^a - p_k^a)/(p_j - p_k)."""
    p = np.asarray(p, dtype=float)
    return HadamardOperator(dq_table(p[:, None], p[None, :], alpha), label="dq")


def _spectrum_of(rho):
    rho = np.asarray(rho)
    if rho.ndim == 1:
        return rho.astype(float)
    if np.abs(rho - np.diag(np.diag(rho))).max() > 1e-12:
        raise PreconditionError("rho must be diagonal (Schmidt-aligned frame)")
    return np.diag(rho).real


def ab_matrices(factorsA, factorsB, rhoA, rhoB, alpha):
    """A_{i'i} = Tr[yA_{i'}* D(yA_i)] and likewise B, with D = (Phi^- + Phi^+)/2.

    Factors must be in the frame where rhoA, rhoB are diagonal (or pass the
    spectra directly).
    """
    opA = dq_operator(_spectrum_of(rhoA), alpha)
    opB = dq_operator(_spectrum_of(rhoB), alpha)

    def gram(op, fs):
        fs = np.array([pad_square(f) for f in fs])
        k = len(fs)
        out = np.empty((k, k), dtype=complex)
        for i in range(k):
            Df = op(fs[i])
            for j in range(k):
                out[j, i] = np.vdot(fs[j], Df)
        return out

    return gram(opA, factorsA), gram(opB, factorsB)


def yprime_bounds(xA, KA, xB, KB, alpha, n_samples=50, seed=0):
    """Evaluate the y'-class bound chain on random y' in xA-perp (x) xB-perp.

    For each sample returns phi-term Tr[w Phi^-(w) + z Phi^+(z)] at the tensor
    point, Tr[y'* Psi(y')], the product Q(xA) Q(xB), and the largest
    eigenvalues of the A and B matrices of the Schmidt factors.
    """
    al = _AlignedPair.build(xA, KA, xB, KB, alpha)
    pA = orth_complement(al.KA, al.xA)
    pB = orth_complement(al.KB, al.xB)
    p = np.abs(np.diag(al.xA)) ** 2
    q = np.abs(np.diag(al.xB)) ** 2
    form = al.form()
    dA, dB = dq_operator(p, alpha), dq_operator(q, alpha)
    QA = float(np.sum(p[p > 0] ** alpha))
    QB = float(np.sum(q[q > 0] ** alpha))
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n_samples):
        C = rng.standard_normal((pA.dim, pB.dim)) + 1j * rng.standard_normal((pA.dim, pB.dim))
        C /= np.linalg.norm(C)
        U, r, Vh = np.linalg.svd(C, full_matrices=False)
        fA = np.tensordot(U.T, pA.basis, axes=(1, 0))
        fB = np.tensordot(Vh, pB.basis, axes=(1, 0))
        y = sum(ri * np.kron(s, t) for ri, s, t in zip(r, fA, fB))
        phi_term = form.phi_term(y)
        y4 = y.reshape(len(p), len(q), len(p), len(q))
        psi_term = float(np.einsum("jl,km,jklm->", dA.coeffs, dB.coeffs, np.abs(y4) ** 2))
        A, B = ab_matrices(fA, fB, p, q, alpha)
        rows.append(
            {
                "phi_term": phi_term,
                "psi_term": psi_term,
                "bound": QA * QB,
                "QA": QA,
                "QB": QB,
                "A_max": float(np.linalg.eigvalsh(A).max()),
                "B_max": float(np.linalg.eigvalsh(B).max()),
                "A_min": float(np.linalg.eigvalsh(A).min()),
                "B_min": float(np.linalg.eigvalsh(B).min()),
                "A_herm_err": float(np.abs(A - A.conj().T).max()),
                "B_herm_err": float(np.abs(B - B.conj().T).max()),
                "D2": form.value(y),
            }
        )
    return rows


# ---------------------------------------------------------------- tensor certificate


def verify_tensor_local_min(
    xA,
    KA,
    xB,
    KB,
    alpha,
    tol_eig=TOL_EIG,
    crit_tol=HESSIAN_CRIT_TOL,
    n_mixed=20,
    seed=0,
):
    """Certify that xA (x) xB is a local maximum of Q_alpha in KA (x) KB."""
    alpha = check_alpha(alpha)
    if alpha <= 1:
        raise PreconditionError("verify_tensor_local_min requires alpha > 1")
    rA, rB = _check_factor_critical(xA, KA, xB, KB, alpha, crit_tol)
    specA = hessian_form(xA, KA, alpha, crit_tol)
    specB = hessian_form(xB, KB, alpha, crit_tol)
    vA, vB = classify(specA, tol_eig), classify(specB, tol_eig)
    if NOT_A_MAX in (vA, vB):
        raise PreconditionError(f"factors must be local maxima of Q (got {vA}, {vB})")
    if vA == DEGENERATE_MAX and vB == DEGENERATE_MAX:
        raise UnsupportedCaseError("both factors degenerate: local additivity is not established for this case")

    al = _AlignedPair.build(xA, KA, xB, KB, alpha)
    x = al.x
    KAB = tensor_subspace(al.KA, al.KB)
    t_res = critical_residual(x, KAB, alpha)

    pA = orth_complement(al.KA, al.xA)
    pB = orth_complement(al.KB, al.xB)
    classes = (
        [("xA*yB", np.kron(al.xA, t)) for t in pB]
        + [("yA*xB", np.kron(s, al.xB)) for s in pA]
        + [("yA*yB", np.kron(s, t)) for s in pA for t in pB]
    )
    names = [c for c, _ in classes]
    ys = [y for _, y in classes]
    basis = np.array(ys + [1j * y for y in ys]) if ys else np.zeros((0,) + x.shape, dtype=complex)
    labels = np.array(names + names)

    form = al.form()
    H = _polarized_matrix(form, basis) if len(basis) else np.zeros((0, 0))
    ev, vecs = np.linalg.eigh(H) if len(basis) else (np.zeros(0), np.zeros((0, 0)))
    ev_sorted = np.sort(ev)[::-1]

    class_max = {}
    for name in ("xA*yB", "yA*xB", "yA*yB"):
        sel = labels == name
        if np.any(sel):
            class_max[name] = float(np.linalg.eigvalsh(H[np.ix_(sel, sel)]).max())
    if len(basis) and all(np.any(labels == n) for n in ("xA*yB", "yA*xB", "yA*yB")):
        rng = np.random.default_rng(seed)
        mixed = []
        for _ in range(n_mixed):
            coef = rng.standard_normal(len(basis))
            mixed.append(coef @ H @ coef / (coef @ coef))
        class_max["mixed"] = float(max(mixed))

    # the xA (x) yB class must factor as Q(xA) * D^2 in KB
    formB = SecondDerivativeForm.at(al.xB, alpha)
    formA = SecondDerivativeForm.at(al.xA, alpha)
    QA, QB = formA.q, formB.q
    prod_err = 0.0
    for t in pB:
        for s in (t, 1j * t):
            prod_err = max(prod_err, abs(form.value(np.kron(al.xA, s)) - QA * formB.value(s)))
    for t in pA:
        for s in (t, 1j * t):
            prod_err = max(prod_err, abs(form.value(np.kron(s, al.xB)) - QB * formA.value(s)))

    deg_weights = {}
    near0 = np.abs(ev) <= tol_eig
    if np.any(near0):
        w = np.sum(np.abs(vecs[:, near0]) ** 2, axis=1)
        for name in ("xA*yB", "yA*xB", "yA*yB"):
            deg_weights[name] = float(np.sum(w[labels == name]))

    tv = classify(ev_sorted, tol_eig)
    if tv == NOT_A_MAX or any(v > tol_eig for v in class_max.values()):
        verdict = CERT_FAILED
    elif tv == NONDEGENERATE_MAX:
        verdict = CERT_NONDEGENERATE
    else:
        verdict = CERT_DEGENERATE

    return AdditivityCertificate(
        alpha=alpha,
        tol_eig=tol_eig,
        verdict=verdict,
        factor_verdicts={"A": vA, "B": vB},
        factor_residuals={"A": rA, "B": rB},
        tensor_residual=t_res,
        tensor_eigenvalues=ev_sorted,
        class_max=class_max,
        product_rule_error=prod_err,
        degenerate_class_weights=deg_weights,
    )

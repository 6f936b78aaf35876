"""Complex matrix spaces: inner products, orthonormal bases, Schmidt alignment.

A bipartite pure state on C^n (x) C^m is stored as an ``n x m`` complex
matrix.  Subspaces are stored as a stack of Hilbert-Schmidt orthonormal
matrices with shape ``(d, n, m)``.  Tensor products use the lexicographic
convention of :func:`numpy.kron`: row index ``(j, k)`` and column index
``(l, m)`` of ``kron(a, b)`` hold ``a[j, l] * b[k, m]``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptySpanError, MembershipError

DROP_TOL = 1e-10
MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis (Hilbert-Schmidt) of a subspace of n x m matrices."""

    basis: np.ndarray  # shape (d, n, m)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.ndim != 3:
            raise DimensionError(f"basis must have shape (d, n, m), got {b.shape}")
        object.__setattr__(self, "basis", b)

    @property
    def shape(self):
        return self.basis.shape[1:]

    @property
    def dim(self):
        return self.basis.shape[0]

    def __len__(self):
        return self.dim

    def __iter__(self):
        return iter(self.basis)

    def __getitem__(self, i):
        return self.basis[i]

    def gram(self):
        flat = self.basis.reshape(self.dim, -1)
        return flat.conj() @ flat.T

    def coefficients(self, x):
        """Coordinates c with ``x ~ sum_i c_i basis[i]`` (exact when x in span)."""
        flat = self.basis.reshape(self.dim, -1)
        return flat.conj() @ np.asarray(x, dtype=complex).reshape(-1)

    def combine(self, coeffs):
        return np.tensordot(np.asarray(coeffs, dtype=complex), self.basis, axes=(0, 0))

    def project(self, x):
        if self.dim == 0:
            return np.zeros(self.shape, dtype=complex)
        return self.combine(self.coefficients(x))

    def residual(self, x):
        """Frobenius distance from x to span of the basis."""
        return float(np.linalg.norm(np.asarray(x) - self.project(x)))

    def projector(self):
        flat = self.basis.reshape(self.dim, -1)
        return flat.T @ flat.conj()

    def map(self, fn):
        """Apply a linear map matrix-by-matrix (it must preserve orthonormality)."""
        return SubspaceBasis(np.array([fn(b) for b in self.basis]))


@dataclass(frozen=True)
class SchmidtForm:
    """Unitaries with ``u @ x @ v == diag(sigma)`` (padded to x's shape)."""

    u: np.ndarray
    v: np.ndarray
    sigma: np.ndarray


def hs_inner(a, b):
    """Hilbert-Schmidt inner product Tr(a b*)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.vdot(b, a))


def fro_norm(a):
    return float(np.linalg.norm(a))


def normalize(x):
    x = np.asarray(x, dtype=complex)
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise EmptySpanError("cannot normalize the zero matrix")
    return x / nrm


def orthonormalize(vectors, drop_tol=DROP_TOL):
    """Gram-Schmidt with pivoting on the largest remaining residual.

    Vectors whose residual falls below ``drop_tol`` times the largest input
    norm are dropped.
    """
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    if not vecs:
        raise EmptySpanError("no vectors given")
    shape = vecs[0].shape
    if any(v.shape != shape for v in vecs):
        raise DimensionError("all vectors must share one shape")
    work = np.array([v.reshape(-1) for v in vecs])
    scale = np.linalg.norm(work, axis=1).max()
    if scale == 0:
        raise EmptySpanError("all input vectors are zero")
    out = []
    remaining = list(range(len(work)))
    while remaining:
        norms = np.linalg.norm(work[remaining], axis=1)
        k = int(np.argmax(norms))
        if norms[k] < drop_tol * scale:
            break
        idx = remaining.pop(k)
        q = work[idx] / norms[k]
        # second pass restores orthogonality lost to cancellation
        for prev in out:
            q = q - np.vdot(prev, q) * prev
        q = q / np.linalg.norm(q)
        out.append(q)
        for j in remaining:
            work[j] = work[j] - np.vdot(q, work[j]) * q
    return SubspaceBasis(np.array(out).reshape((len(out),) + shape))


def orth_complement(K, x, tol=MEMBERSHIP_TOL):
    """Orthonormal basis of {y in K : Tr(x y*) = 0}."""
    x = np.asarray(x, dtype=complex)
    if x.shape != K.shape:
        raise DimensionError(f"x has shape {x.shape}, subspace has {K.shape}")
    res = K.residual(x)
    if res > tol:
        raise MembershipError(f"x is not in the subspace (residual {res:.3e})")
    if K.dim == 1:
        return SubspaceBasis(np.zeros((0,) + K.shape, dtype=complex))
    c = K.coefficients(x)
    c = c / np.linalg.norm(c)
    _, _, vh = np.linalg.svd(c.conj()[None, :])
    comp = vh[1:].conj()  # rows orthonormal, each orthogonal to c
    return SubspaceBasis(np.tensordot(comp, K.basis, axes=(1, 0)))


def schmidt_form(x):
    x = np.asarray(x, dtype=complex)
    U, s, Vh = np.linalg.svd(x)
    return SchmidtForm(u=U.conj().T, v=Vh.conj().T, sigma=s)


def diag_rect(sigma, shape):
    out = np.zeros(shape, dtype=complex)
    k = len(sigma)
    out[np.arange(k), np.arange(k)] = sigma
    return out


def schmidt_align(K, x, tol=MEMBERSHIP_TOL):
    """Rotate x to its Schmidt form and carry K along.

    Returns ``(form, K_rot, x_rot)`` with ``x_rot = form.u @ x @ form.v``
    diagonal, non-negative and non-increasing.
    """
    x = np.asarray(x, dtype=complex)
    res = K.residual(x)
    if res > tol:
        raise MembershipError(f"x is not in the subspace (residual {res:.3e})")
    form = schmidt_form(x)
    x_rot = diag_rect(form.sigma, x.shape)
    K_rot = K.map(lambda b: form.u @ b @ form.v)
    return form, K_rot, x_rot


def pad_square(a):
    """Zero-pad an n x m matrix to N x N with N = max(n, m)."""
    a = np.asarray(a, dtype=complex)
    n, m = a.shape
    N = max(n, m)
    if n == m:
        return a
    out = np.zeros((N, N), dtype=complex)
    out[:n, :m] = a
    return out


def pad_subspace(K):
    return K.map(pad_square)


def tensor_subspace(KA, KB):
    """All pairwise Kronecker products, A-index major."""
    basis = [np.kron(a, b) for a in KA.basis for b in KB.basis]
    nA, mA = KA.shape
    nB, mB = KB.shape
    if not basis:
        return SubspaceBasis(np.zeros((0, nA * nB, mA * mB), dtype=complex))
    return SubspaceBasis(np.array(basis))


def random_subspace(n, m, d, seed):
    """Orthonormalized i.i.d. complex standard normal matrices."""
    if d < 1 or d > n * m:
        raise DimensionError(f"need 1 <= d <= n*m = {n * m}, got d = {d}")
    rng = np.random.default_rng(seed)
    raw = (rng.standard_normal((d, n, m)) + 1j * rng.standard_normal((d, n, m))) / np.sqrt(2)
    return orthonormalize(list(raw))


def random_unitary(n, rng):
    """Haar-random unitary via QR with phase correction."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_unit_matrix(shape, rng):
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z / np.linalg.norm(z)

"""Renyi entropies of states and bipartite matrices, and channel subspaces.

Natural logarithms throughout.  The von Neumann point alpha = 1 is not
supported.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidChannelError, PreconditionError
from .matspace import orthonormalize

HERMITIAN_TOL = 1e-10
NEG_EIG_TOL = 1e-10
TP_TOL = 1e-8


@dataclass(frozen=True)
class AlphaParam:
    value: float

    def __post_init__(self):
        check_alpha(self.value)

    @property
    def regime(self):
        return "main" if self.value > 1 else "exploratory"


def check_alpha(alpha):
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha <= 0:
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    if alpha == 1:
        raise ValueError("alpha = 1 (von Neumann limit) is not supported")
    return alpha


def check_density_matrix(rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise PreconditionError(f"density matrix must be square, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > HERMITIAN_TOL:
        raise PreconditionError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1) > HERMITIAN_TOL:
        raise PreconditionError("density matrix does not have unit trace")
    return rho


def renyi_spectrum(p, alpha):
    """Renyi entropy of a probability vector; entries in [-1e-10, 0) are clamped."""
    alpha = check_alpha(alpha)
    p = np.asarray(p, dtype=float)
    if p.min(initial=0.0) < -NEG_EIG_TOL:
        raise PreconditionError(f"negative eigenvalue {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    return float(np.log(np.sum(p[p > 0] ** alpha)) / (1 - alpha))


def renyi_entropy(rho, alpha):
    rho = check_density_matrix(rho)
    return renyi_spectrum(np.linalg.eigvalsh(rho), alpha)


def q_alpha(x, alpha):
    """Tr[(x x*)^alpha] computed from the singular values of x."""
    s = np.linalg.svd(np.asarray(x, dtype=complex), compute_uv=False)
    return float(np.sum(s[s > 0] ** (2 * alpha)))


def e_alpha(x, alpha):
    """Renyi entropy of entanglement of a normalized bipartite matrix."""
    alpha = check_alpha(alpha)
    return float(np.log(q_alpha(x, alpha)) / (1 - alpha))


def reduced_state(x):
    x = np.asarray(x, dtype=complex)
    return x @ x.conj().T


def check_channel(kraus, tol=TP_TOL):
    ks = np.asarray(kraus, dtype=complex)
    if ks.ndim == 2:
        ks = ks[None]
    if ks.ndim != 3:
        raise InvalidChannelError("kraus must be a list of d_out x d_in matrices")
    d_in = ks.shape[2]
    s = np.einsum("kij,kil->jl", ks.conj(), ks)
    err = np.abs(s - np.eye(d_in)).max()
    if err > tol:
        raise InvalidChannelError(f"sum K*K deviates from identity by {err:.3e}")
    return ks


def apply_channel(kraus, rho):
    ks = check_channel(kraus)
    return np.einsum("kij,jl,kml->im", ks, np.asarray(rho, dtype=complex), ks.conj())


def stinespring_matrix(kraus, psi):
    """The d_out x E matrix whose k-th column is K_k psi."""
    ks = np.asarray(kraus, dtype=complex)
    return np.einsum("kij,j->ik", ks, np.asarray(psi, dtype=complex))


def channel_to_subspace(kraus):
    """Subspace {V psi} of C^{d_out x E} given by the Stinespring isometry."""
    ks = check_channel(kraus)
    d_in = ks.shape[2]
    return orthonormalize([stinespring_matrix(ks, e) for e in np.eye(d_in)])


def min_output_entropy_estimate(kraus, alpha, restarts=16, seed=0):
    """Upper bound on the minimum output Renyi entropy (alpha > 1).

    Maximizes Q_alpha over the channel subspace with random restarts; global
    optimality is not guaranteed.  Returns ``(value, x)``.
    """
    from .additivity import maximize_q

    alpha = check_alpha(alpha)
    if alpha <= 1:
        raise PreconditionError("minimum output entropy estimate needs alpha > 1")
    K = channel_to_subspace(kraus)
    cp = maximize_q(K, alpha, seed=seed, restarts=restarts)
    return e_alpha(cp.x, alpha), cp.x


def upb_dimension_bound(d_out, d_env):
    """Subspaces of larger dimension necessarily contain a product state."""
    if d_out < 1 or d_env < 1:
        raise ValueError("dimensions must be positive")
    return (d_out - 1) * (d_env - 1)

"""Dense complex linear algebra substrate.

Matrices are plain ``numpy`` complex arrays. Antilinear operators are stored
as the matrix ``A`` of ``T o J`` where ``J`` is entrywise conjugation in the
standard basis, i.e. ``T x = A @ conj(x)``; all antilinear algebra reduces to
linear algebra plus explicit conjugations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.stats import unitary_group

from .errors import BadDimension, NonFinite, NotHermitian

#: eigenvalue gap below which two eigenvalues are treated as one
CLUSTER_TOL = 1e-8

_PHASE_EPS = 1e-10


def tau_lin(dim):
    """Tolerance for linear-algebra identities at dimension ``dim``."""
    return 1e-10 * max(int(dim), 1)


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-d complex array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim == 1:
        A = A.reshape(1, -1) if A.size else A.reshape(0, 0)
    if A.ndim != 2:
        raise BadDimension(f"{name} must be 2-d, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFinite(f"{name} has NaN or Inf entries")
    return A


def dagger(M):
    return np.conj(np.swapaxes(M, -1, -2))


def is_hermitian(M, tol=None):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    tol = tau_lin(M.shape[0]) if tol is None else tol
    return np.linalg.norm(M - dagger(M)) <= tol


def check_hermitian(M, name="matrix", tol=None):
    """Validate and return the Hermitian part of ``M``."""
    A = as_matrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise NotHermitian(f"{name} is not square: {A.shape}")
    tol = tau_lin(A.shape[0]) if tol is None else tol
    err = np.linalg.norm(A - dagger(A))
    if err > tol:
        raise NotHermitian(f"{name}: ||M - M*|| = {err:.3e} exceeds {tol:.1e}")
    return 0.5 * (A + dagger(A))


def _normalize_phases(V):
    # rotate each column so its first non-negligible entry is real positive
    V = V.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        idx = np.flatnonzero(np.abs(col) > _PHASE_EPS)
        if idx.size:
            z = col[idx[0]]
            V[:, k] = col * (np.conj(z) / abs(z))
    return V


def _column_key(v):
    idx = np.flatnonzero(np.abs(v) > _PHASE_EPS)
    first = int(idx[0]) if idx.size else v.size
    return (first, tuple(-np.round(np.abs(v), 12)))


def cluster_slices(eigenvalues, tol=CLUSTER_TOL):
    """Group a non-increasing eigenvalue list into runs with gaps below ``tol``."""
    out = []
    start = 0
    for k in range(1, len(eigenvalues) + 1):
        if k == len(eigenvalues) or eigenvalues[k - 1] - eigenvalues[k] >= tol:
            out.append(slice(start, k))
            start = k
    return out


@dataclass(frozen=True)
class HermitianSpectrum:
    """Eigenvalues in non-increasing order with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.size

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ dagger(V)

    def clusters(self, tol=CLUSTER_TOL):
        return cluster_slices(self.eigenvalues, tol)


def hermitian_eig(M, cluster_tol=CLUSTER_TOL):
    """Deterministic eigendecomposition of a Hermitian matrix.

    Eigenvalues come out non-increasing. Inside a numerically degenerate
    cluster (consecutive gap below ``cluster_tol``) the eigenvectors are
    re-orthonormalized jointly and ordered by a fixed lexicographic key so
    repeated calls give identical output.

    Raises
    ------
    NotHermitian
        If ``||M - M*||`` exceeds ``tau_lin``.
    NonFinite
        On NaN or Inf input.
    """
    H = check_hermitian(M)
    n = H.shape[0]
    if n == 0:
        return HermitianSpectrum(np.zeros(0), np.zeros((0, 0), complex))
    w, V = np.linalg.eigh(H)
    w = w[::-1].copy()
    V = V[:, ::-1].copy()
    for sl in cluster_slices(w, cluster_tol):
        if sl.stop - sl.start > 1:
            Q, _ = np.linalg.qr(V[:, sl])
            Q = _normalize_phases(Q)
            order = sorted(range(Q.shape[1]), key=lambda k: _column_key(Q[:, k]))
            V[:, sl] = Q[:, order]
        else:
            V[:, sl] = _normalize_phases(V[:, sl])
    return HermitianSpectrum(w, V)


def matrix_exp_skew_hermitian(Z, t):
    """Return the unitary ``exp(i t Z)`` for Hermitian ``Z``."""
    H = check_hermitian(Z, "generator")
    w, V = np.linalg.eigh(H)
    return (V * np.exp(1j * t * w)) @ dagger(V)


def psd_sqrt(M):
    """Square root of a Hermitian PSD matrix (negative rounding noise clipped)."""
    H = check_hermitian(M)
    w, V = np.linalg.eigh(H)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ dagger(V)


def svd(M):
    """Return ``(U, s, V)`` with ``M = U diag(s) V*`` and ``s`` non-increasing."""
    A = as_matrix(M)
    U, s, Vh = np.linalg.svd(A)
    return U, s, dagger(Vh)


def trace(M):
    return complex(np.trace(as_matrix(M)))


def trace_norm(M):
    """Sum of singular values."""
    A = as_matrix(M)
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False).sum())


@dataclass(frozen=True)
class AntilinearOp:
    """Antilinear map ``x -> mat @ conj(x)``."""

    mat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mat", as_matrix(self.mat, "antilinear matrix"))

    def __call__(self, x):
        return self.mat @ np.conj(np.asarray(x, dtype=complex))

    def adjoint(self):
        # <T* xi, eta> = <T eta, xi> forces the transpose, not the conjugate transpose
        return AntilinearOp(self.mat.T.copy())

    def compose(self, other):
        """``self o other`` for another antilinear op: a linear matrix."""
        return self.mat @ np.conj(other.mat)

    def sandwich(self, X):
        """Linear matrix of ``T X T*`` for linear ``X``."""
        return self.mat @ np.conj(X) @ dagger(self.mat)

    def gram(self):
        """Linear matrix of ``T* T``."""
        return np.conj(dagger(self.mat) @ self.mat)


@dataclass(frozen=True)
class AntilinearPolar:
    """``T = U |T|`` with ``U`` an antilinear partial isometry, ``N(U) = N(|T|)``."""

    isometry: AntilinearOp
    modulus: np.ndarray

    @cached_property
    def initial_projection(self):
        """``U* U`` as a linear matrix."""
        return self.isometry.adjoint().compose(self.isometry)

    @cached_property
    def final_projection(self):
        """``U U*`` as a linear matrix."""
        return self.isometry.compose(self.isometry.adjoint())

    def operator(self):
        """Recompose ``U |T|`` as an antilinear op."""
        return AntilinearOp(self.isometry.mat @ np.conj(self.modulus))

    def right_modulus(self):
        """``|T*|`` computed as ``U |T| U*``."""
        return self.isometry.sandwich(self.modulus)


def polar_antilinear(T, rank_tol=None):
    """Left polar decomposition of an antilinear operator.

    With ``T x = A conj(x)`` and the linear SVD ``A = X S Y*``, the modulus is
    ``|T| = conj(Y S Y*)`` and ``U`` has matrix ``X_r Y_r*`` restricted to the
    non-zero singular values, so ``N(U) = N(|T|)``.
    """
    A = T.mat if isinstance(T, AntilinearOp) else as_matrix(T)
    if A.size == 0:
        return AntilinearPolar(AntilinearOp(A), A.copy())
    X, s, Yh = np.linalg.svd(A)
    if rank_tol is None:
        rank_tol = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    r = int(np.sum(s > rank_tol))
    W = X[:, :r] @ Yh[:r, :]
    absA = (dagger(Yh[:r, :]) * s[:r]) @ Yh[:r, :]
    return AntilinearPolar(AntilinearOp(W), np.conj(absA))


def haar_unitary(n, rng):
    """Haar-distributed ``n x n`` unitary drawn from ``rng`` (a numpy Generator)."""
    if n == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return unitary_group.rvs(n, random_state=rng)


def random_hermitian(n, rng):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (Z + dagger(Z))


def random_density(n, rng, rank=None):
    """Random density matrix of the given rank (full rank by default)."""
    rank = n if rank is None else rank
    G = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    rho = G @ dagger(G)
    return rho / np.trace(rho).real

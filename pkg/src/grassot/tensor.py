"""Pure states of ``H (x) H`` as transport plans.

A unit vector ``zeta = sum_ij M_ij e_i (x) e_j`` is stored through its
coefficient matrix ``M``. The map ``Theta`` sends it to the antilinear
Hilbert-Schmidt operator ``x -> sum_ij M_ij <x, e_i> e_j`` (inner product
conjugate-linear in ``x``), whose matrix in the ``x -> A conj(x)`` convention
is ``A = M^T``. Then ``Tr_2 |zeta><zeta| = M M*`` and
``Tr_1 |zeta><zeta| = M^T conj(M)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AssertionFailure,
    BadDimension,
    NotNormalized,
    NotRepresentation,
    NotSubordinate,
)
from .grassmann import Projection, _scale_value
from .linalg import (
    AntilinearOp,
    as_matrix,
    haar_unitary,
    polar_antilinear,
    psd_sqrt,
    trace_norm,
)
from .spectral import DensityMatrix, DiscreteMeasure, eigenspaces, psi
from .state_cost import Budget, _rotate, cost_p, frame2, pattern_search
from .transport import TransportPlan, check_exponent

#: Schmidt coefficients above this count towards the Schmidt rank
SCHMIDT_TOL = 1e-9
NORM_TOL = 1e-9


@dataclass(frozen=True)
class TensorState:
    """Unit vector of ``H (x) H`` given by its ``n x n`` coefficient matrix."""

    coeff: np.ndarray

    def __post_init__(self):
        M = as_matrix(self.coeff, "coefficient matrix")
        if M.shape[0] != M.shape[1] or M.size == 0:
            raise BadDimension(f"coefficient matrix must be square, got {M.shape}")
        nrm = np.linalg.norm(M)
        if abs(nrm - 1.0) > NORM_TOL:
            raise NotNormalized(f"tensor state has norm {float(nrm):.12g}, expected 1")
        object.__setattr__(self, "coeff", M)

    @classmethod
    def from_terms(cls, terms, normalize=False):
        """Build ``sum_k c_k xi_k (x) eta_k`` from ``(c, xi, eta)`` triples."""
        M = None
        for c, xi, eta in terms:
            t = complex(c) * np.outer(np.asarray(xi, dtype=complex), np.asarray(eta, dtype=complex))
            M = t if M is None else M + t
        if M is None:
            raise ValueError("no terms given")
        if normalize:
            M = M / np.linalg.norm(M)
        return cls(M)

    @classmethod
    def random(cls, n, rng):
        M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return cls(M / np.linalg.norm(M))

    @property
    def dim(self):
        return self.coeff.shape[0]

    @property
    def vector(self):
        """``zeta`` in the product basis, index ``i * n + j``."""
        return self.coeff.reshape(-1)

    def density(self):
        v = self.vector
        return np.outer(v, np.conj(v))


def partial_trace(T, side, dims=None):
    """Trace out factor ``side`` (1 or 2) of an operator on ``H (x) K``.

    ``dims = (dim H, dim K)`` defaults to two equal factors.
    """
    T = as_matrix(T, "operator")
    N = T.shape[0]
    if T.shape != (N, N):
        raise BadDimension(f"operator must be square, got {T.shape}")
    if dims is None:
        n = math.isqrt(N)
        if n * n != N:
            raise BadDimension(f"dimension {N} is not a perfect square")
        dims = (n, n)
    n, m = dims
    if n * m != N:
        raise BadDimension(f"dims {dims} do not multiply to {N}")
    T4 = T.reshape(n, m, n, m)
    if side == 2:
        return np.einsum("ikjk->ij", T4)
    if side == 1:
        return np.einsum("kikj->ij", T4)
    raise ValueError("side must be 1 or 2")


def theta(zeta):
    """The antilinear Hilbert-Schmidt operator of ``zeta``."""
    return AntilinearOp(zeta.coeff.T.copy())


@dataclass(frozen=True)
class CorrelationOperator:
    """Antilinear partial isometry ``U`` with ``Theta = U rho_1^{1/2}``."""

    op: AntilinearOp
    initial_proj: Projection
    final_proj: Projection

    def __call__(self, x):
        return self.op(x)


@dataclass(frozen=True)
class Correlation:
    rho1: DensityMatrix
    rho2: DensityMatrix
    U: CorrelationOperator
    errors: dict


def _correlation_operator(zeta):
    T = theta(zeta)
    pol = polar_antilinear(T)
    W = pol.isometry
    r = int(round(np.trace(pol.initial_projection).real))
    return CorrelationOperator(
        W,
        Projection(pol.initial_projection, r),
        Projection(pol.final_projection, r),
    )


def correlation(zeta):
    """Marginals and correlation operator of a pure tensor state.

    ``errors`` records the deviations in ``|Theta|^2 = Tr_2``,
    ``|Theta*|^2 = Tr_1``, ``rho_2 = U rho_1 U*`` and
    ``Theta = U rho_1^{1/2}`` (Frobenius norm).
    """
    D = zeta.density()
    r1 = partial_trace(D, 2)
    r2 = partial_trace(D, 1)
    T = theta(zeta)
    U = _correlation_operator(zeta)
    sq = psd_sqrt(r1)
    errors = {
        "theta_abs": float(np.linalg.norm(T.gram() - r1)),
        "theta_adj_abs": float(np.linalg.norm(T.adjoint().gram() - r2)),
        "conjugation": float(np.linalg.norm(U.op.sandwich(r1) - r2)),
        "polar": float(np.linalg.norm(U.op.mat @ np.conj(sq) - T.mat)),
    }
    return Correlation(DensityMatrix(r1), DensityMatrix(r2), U, errors)


def pushforward_projection(U, P):
    """``U P U*`` for ``P <= U* U``, computed as ``A conj(P) A*``.

    Raises
    ------
    NotSubordinate
        If ``P`` is not below the initial projection of ``U``.
    """
    if not P <= U.initial_proj:
        raise NotSubordinate("projection is not below the initial projection of U")
    return Projection(U.op.sandwich(P.mat), P.rank)


def tensor_plans(zeta, mu, corr=None, tol=1e-8):
    """The plan ``(Id x U~)_# tr(.) mu`` for a representation ``mu`` of ``rho_1``.

    Raises
    ------
    NotRepresentation
        If ``mu`` does not integrate to ``rho_1``.
    NotSubordinate
        If an atom is not below ``U* U``.
    """
    corr = correlation(zeta) if corr is None else corr
    err = trace_norm(psi(mu).mat - corr.rho1.mat)
    if err > tol:
        raise NotRepresentation(f"measure integrates to a state {err:.3e} away from rho_1")
    pushed = tuple(pushforward_projection(corr.U, P) for P in mu.projections)
    target = DiscreteMeasure(mu.weights.copy(), pushed)
    return TransportPlan(mu, target, np.diag(mu.masses))


def _pair_angles(U, V):
    # angle between span(U[:, a]) and span(V[:, a]) for unit columns
    g = np.einsum("ia,ia->a", np.conj(U), V)
    sin = np.linalg.norm(V - U * g, axis=0)
    return np.clip(np.arctan2(sin, np.abs(g)), 0.0, math.pi / 2)


@dataclass(frozen=True)
class PureCostResult:
    value: float
    mu: DiscreteMeasure
    certified: bool
    marginal_cost: float | None = None


def pure_cost(zeta, p=2, budget=None, scale=None, verify=False):
    """``C_p`` of a pure tensor state.

    Minimizes ``sum_i lambda_i d(P_i, U~(P_i))^p`` over rank-one
    representations of ``rho_1``. The objective splits over eigenspaces, so
    each frame is optimized on its own: pattern search from the identity
    and from Haar starts, plus a full grid when the eigenspace is
    two-dimensional (``certified`` is true when every eigenspace was either
    one- or two-dimensional).

    With ``verify=True`` the marginal cost ``C_p(rho_1, rho_2)`` is also
    computed and must not exceed the value by more than 1e-6.
    """
    p = check_exponent(p)
    budget = Budget() if budget is None else budget
    sc = _scale_value(scale)
    corr = correlation(zeta)
    W = corr.U.op.mat
    rng = np.random.default_rng(budget.seed)
    total = 0.0
    certified = True
    weights, projs = [], []
    for lam, V in eigenspaces(corr.rho1):
        k = V.shape[1]

        def block(F, V=V):
            B = V @ F
            return float(((sc * _pair_angles(B, W @ np.conj(B))) ** p).sum())

        if k == 1:
            F = np.eye(1, dtype=complex)
        else:
            starts = [np.eye(k, dtype=complex)] + [haar_unitary(k, rng) for _ in range(max(budget.restarts - 1, 0))]
            if k == 2:
                grid = [
                    (block(frame2(a, b)), a, b)
                    for a in np.linspace(0.0, math.pi / 2, budget.grid + 1)
                    for b in np.linspace(0.0, 2 * math.pi, 2 * budget.grid, endpoint=False)
                ]
                _, a0, b0 = min(grid)
                starts.append(frame2(a0, b0))
            else:
                certified = False
            best = None
            for F0 in starts:
                x, fx, _ = pattern_search(
                    lambda x, F0=F0: block(_rotate(F0, x)),
                    k * (k - 1),
                    budget.step_init,
                    budget.step_min,
                    budget.max_evals,
                )
                if best is None or fx < best[0]:
                    best = (fx, _rotate(F0, x))
            F = best[1]
        total += lam * block(F)
        B = V @ F
        for a in range(k):
            weights.append(lam)
            projs.append(Projection(np.outer(B[:, a], np.conj(B[:, a])), 1))
    value = max(total, 0.0) ** (1.0 / p)
    mu = DiscreteMeasure(np.array(weights), tuple(projs))
    marginal = None
    if verify:
        marginal = cost_p(corr.rho1, corr.rho2, p, budget, scale).value
        if marginal > value + 1e-6:
            raise AssertionFailure(f"marginal cost {marginal} exceeds pure cost {value}")
    return PureCostResult(value, mu, certified, marginal)


def schmidt(zeta):
    """Schmidt coefficients (non-increasing) and whether ``zeta`` is a simple tensor."""
    s = np.linalg.svd(zeta.coeff, compute_uv=False)
    return s, bool(np.sum(s > SCHMIDT_TOL) == 1)


def flip(zeta):
    """``x (x) y -> y (x) x`` extended linearly: transpose the coefficients."""
    return TensorState(zeta.coeff.T.copy())


def phase_gauge_error(zeta, lam):
    """Largest change in the projection-level data under ``zeta -> lam zeta``."""
    a = _correlation_operator(zeta)
    b = _correlation_operator(TensorState(lam * zeta.coeff))
    return max(
        float(np.linalg.norm(a.initial_proj.mat - b.initial_proj.mat)),
        float(np.linalg.norm(a.final_proj.mat - b.final_proj.mat)),
        float(np.linalg.norm(lam * a.op.mat - b.op.mat)),
    )

"""The Grassmannian of finite-rank orthogonal projections.

Points are :class:`Projection` objects, tangent vectors at ``P`` are
Hermitian matrices ``Z`` that are off-diagonal in the splitting
``R(P) + R(P)^perp``, and geodesics take the form
``t -> exp(itZ) P exp(-itZ)``.

Distances come from principal angles. Two normalizations are offered via
:class:`Scale`: ``CANONICAL`` gives ``||theta||_2`` (lines at right angles
sit at distance pi/2) and ``EMBEDDED`` multiplies by sqrt(2), which is the
length measured in the Hilbert-Schmidt norm ``tr(XY)`` of the ambient space.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import (
    BaseMismatch,
    CutLocus,
    NotProjection,
    NotSubprojection,
    NotTangent,
    RankMismatch,
)
from .linalg import (
    as_matrix,
    check_hermitian,
    dagger,
    matrix_exp_skew_hermitian,
    tau_lin,
)

#: angles this close to pi/2 are treated as cut-locus pairs by ``log_map``
CUT_LOCUS_MARGIN = 1e-9

FD_STEP = 1e-4


class Scale(float, enum.Enum):
    CANONICAL = 1.0
    EMBEDDED = math.sqrt(2.0)

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        for member in cls:
            if float(value) == member.value:
                return member
        raise ValueError(f"unknown distance scale {value!r}")


DEFAULT_SCALE = Scale.CANONICAL


def _scale_value(scale):
    return float(DEFAULT_SCALE if scale is None else scale)


@dataclass(frozen=True)
class Projection:
    """Orthogonal projection of rank ``rank >= 1``.

    The constructor re-verifies ``P = P*``, ``P^2 = P`` and ``tr P = rank``.
    """

    mat: np.ndarray
    rank: int

    def __post_init__(self):
        P = as_matrix(self.mat, "projection")
        n = P.shape[0]
        if P.shape != (n, n) or n == 0:
            raise NotProjection(f"projection must be square and non-empty, got {P.shape}")
        tol = tau_lin(n)
        if np.linalg.norm(P - dagger(P)) > tol:
            raise NotProjection("projection is not Hermitian")
        P = 0.5 * (P + dagger(P))
        if np.linalg.norm(P @ P - P) > tol:
            raise NotProjection("projection is not idempotent")
        tr = np.trace(P).real
        if self.rank < 1 or abs(tr - self.rank) > tol:
            raise NotProjection(f"trace {tr:.12g} does not match declared rank {self.rank}")
        object.__setattr__(self, "mat", P)
        object.__setattr__(self, "rank", int(self.rank))

    @classmethod
    def from_matrix(cls, P):
        P = as_matrix(P, "projection")
        return cls(P, int(round(np.trace(P).real)))

    @classmethod
    def from_vectors(cls, vectors):
        """Projection onto the span of the columns of ``vectors``."""
        Y = as_matrix(vectors, "vectors")
        if Y.ndim == 2 and Y.shape[0] == 1 and Y.shape[1] > 1:
            Y = Y.T
        U, s, _ = np.linalg.svd(Y, full_matrices=False)
        r = int(np.sum(s > max(Y.shape) * np.finfo(float).eps * (s[0] if s.size else 0)))
        if r == 0:
            raise NotProjection("spanning set is zero")
        B = U[:, :r]
        return cls(B @ dagger(B), r)

    @property
    def dim(self):
        return self.mat.shape[0]

    @cached_property
    def basis(self):
        """Orthonormal basis of the range as an ``n x rank`` matrix."""
        w, V = np.linalg.eigh(self.mat)
        return V[:, ::-1][:, : self.rank].copy()

    def __le__(self, other):
        tol = tau_lin(self.dim)
        return np.linalg.norm(other.mat @ self.mat - self.mat) <= tol


def as_projection(P):
    return P if isinstance(P, Projection) else Projection.from_matrix(P)


def _check_codiagonal(P, Z, tol=None):
    n = P.dim
    tol = tau_lin(n) if tol is None else tol
    Pc = np.eye(n) - P.mat
    if np.linalg.norm(P.mat @ Z @ P.mat) > tol or np.linalg.norm(Pc @ Z @ Pc) > tol:
        raise NotTangent("generator is not codiagonal at the base projection")


@dataclass(frozen=True)
class TangentVector:
    """Codiagonal Hermitian ``mat`` at the projection ``base``."""

    base: Projection
    mat: np.ndarray

    def __post_init__(self):
        try:
            Z = check_hermitian(self.mat, "tangent vector", tol=tau_lin(self.base.dim))
        except ValueError as exc:
            raise NotTangent(str(exc)) from exc
        _check_codiagonal(self.base, Z)
        object.__setattr__(self, "mat", Z)


def codiagonal_project(P, X):
    """Orthogonal projection ``PX(1-P) + (1-P)XP`` onto the tangent space at ``P``."""
    P = as_projection(P)
    X = check_hermitian(X)
    Pc = np.eye(P.dim) - P.mat
    return TangentVector(P, P.mat @ X @ Pc + Pc @ X @ P.mat)


def _generator(P, Z):
    if isinstance(Z, TangentVector):
        if Z.base is not P and not np.allclose(Z.base.mat, P.mat, atol=tau_lin(P.dim)):
            raise BaseMismatch("tangent vector lives at a different projection")
        return Z.mat
    try:
        Zm = check_hermitian(Z, "generator", tol=tau_lin(P.dim))
    except ValueError as exc:
        raise NotTangent(str(exc)) from exc
    _check_codiagonal(P, Zm)
    return Zm


def geodesic_point(P, Z, t):
    """Point ``exp(itZ) P exp(-itZ)`` on the geodesic from ``P`` with generator ``Z``."""
    P = as_projection(P)
    U = matrix_exp_skew_hermitian(_generator(P, Z), t)
    return Projection(U @ P.mat @ dagger(U), P.rank)


def _angles_from_bases(YP, YQ):
    C = dagger(YP) @ YQ
    cos = np.linalg.svd(C, compute_uv=False)
    S = YQ - YP @ C
    sin = np.linalg.svd(S, compute_uv=False)[::-1]
    theta = np.arctan2(sin[: cos.size], cos)
    return np.clip(np.sort(theta), 0.0, np.pi / 2)


def principal_angles(P, Q):
    """Principal angles between ranges of equal-rank projections, non-decreasing.

    Cosines come from the singular values of ``Y_P* Y_Q``; sines from the
    component of ``Y_Q`` orthogonal to ``R(P)``. Combining both through
    ``arctan2`` keeps small angles accurate where ``arccos`` alone would not.
    """
    P, Q = as_projection(P), as_projection(Q)
    if P.rank != Q.rank:
        raise RankMismatch(f"ranks differ: {P.rank} vs {Q.rank}")
    if P.dim != Q.dim:
        raise RankMismatch(f"ambient dimensions differ: {P.dim} vs {Q.dim}")
    # fixed argument order makes d(P, Q) == d(Q, P) bit for bit
    if P.mat.tobytes() > Q.mat.tobytes():
        P, Q = Q, P
    return _angles_from_bases(P.basis, Q.basis)


def distance(P, Q, scale=None):
    """Geodesic distance; ``inf`` across connected components (different ranks)."""
    P, Q = as_projection(P), as_projection(Q)
    if P.rank != Q.rank:
        return math.inf
    return _scale_value(scale) * float(np.linalg.norm(principal_angles(P, Q)))


def line_angles(U, V):
    """Angles between the lines spanned by unit columns of ``U`` and of ``V``.

    Returns the ``U.shape[1] x V.shape[1]`` matrix of
    ``arctan2(||v - <u,v> u||, |<u,v>|)``.
    """
    G = dagger(U) @ V
    R = V[:, None, :] - U[:, :, None] * G[None, :, :]
    sin = np.linalg.norm(R, axis=0)
    return np.clip(np.arctan2(sin, np.abs(G)), 0.0, np.pi / 2)


def log_map(P, Q):
    """Generator ``Z`` at ``P`` with ``geodesic_point(P, Z, 1) == Q``.

    Builds the horizontal Stiefel log ``U arctan(S) V*`` from the SVD of
    ``(Y_Q - Y_P C) C^{-1}``, ``C = Y_P* Y_Q``, and lifts it to the
    codiagonal generator ``-i (D Y_P* - Y_P D*)``. The result rotates each
    principal vector of ``R(P)`` inside the plane it spans with its partner
    in ``R(Q)``.

    Raises
    ------
    CutLocus
        If a principal angle is within ``CUT_LOCUS_MARGIN`` of pi/2.
    RankMismatch
        If the ranks differ.
    """
    P, Q = as_projection(P), as_projection(Q)
    theta = principal_angles(P, Q)
    if theta.size and theta[-1] >= np.pi / 2 - CUT_LOCUS_MARGIN:
        raise CutLocus(f"largest principal angle {float(theta[-1]):.12g} reaches the cut locus")
    YP, YQ = P.basis, Q.basis
    C = dagger(YP) @ YQ
    B = np.linalg.solve(C.T, (YQ - YP @ C).T).T
    U, s, Vh = np.linalg.svd(B, full_matrices=False)
    D = (U * np.arctan(s)) @ Vh
    K = D @ dagger(YP) - YP @ dagger(D)
    Z = -1j * K
    return TangentVector(P, 0.5 * (Z + dagger(Z)))


def speed(P, Z, scale=None):
    """Constant speed of ``t -> exp(itZ) P exp(-itZ)`` in units of ``scale``.

    The Hilbert-Schmidt norm of ``i[Z, P]`` is the embedded speed; divide by
    sqrt(2) for the canonical one.
    """
    P = as_projection(P)
    Zm = _generator(P, Z)
    hs = float(np.linalg.norm(1j * (Zm @ P.mat - P.mat @ Zm)))
    return _scale_value(scale) * hs / math.sqrt(2.0)


# ---------------------------------------------------------------- Stiefel


def check_stiefel(phi, tol=None):
    phi = as_matrix(phi, "Stiefel point")
    r = phi.shape[1]
    tol = tau_lin(phi.shape[0]) if tol is None else tol
    if np.linalg.norm(dagger(phi) @ phi - np.eye(r)) > tol:
        raise NotProjection("columns are not orthonormal")
    return phi


def stiefel_tangent_project(phi, X):
    """Tangent component ``phi Sk(phi* X) + (1 - phi phi*) X``."""
    A = dagger(phi) @ X
    return phi @ (0.5 * (A - dagger(A))) + X - phi @ A


def stiefel_geodesic(phi0, X, t):
    """Closed-form Stiefel geodesic ``exp(tM) exp(-tQ) phi0``.

    With respect to ``H = R(phi0) + R(phi0)^perp`` the generator is
    ``M = [[A, B], [-B*, 0]]`` and ``Q = [[A/2, 0], [0, 0]]`` where, written as
    operators on ``H``, ``A/2 = phi0 (phi0* X) phi0*`` and the off-diagonal
    blocks come from ``X phi0* - phi0 X* (1 - phi0 phi0*)``. Then
    ``gamma(0) = phi0`` and ``gamma'(0) = X``.
    """
    phi0 = check_stiefel(phi0)
    X = as_matrix(X, "tangent")
    if X.shape != phi0.shape:
        raise NotTangent(f"tangent shape {X.shape} does not match {phi0.shape}")
    S = dagger(X) @ phi0
    if np.linalg.norm(S + dagger(S)) > tau_lin(phi0.shape[0]):
        raise NotTangent("X* phi0 is not skew-adjoint")
    n = phi0.shape[0]
    Pphi = phi0 @ dagger(phi0)
    half_A = phi0 @ (dagger(phi0) @ X) @ dagger(phi0)
    velocity_op = X @ dagger(phi0) - phi0 @ dagger(X) @ (np.eye(n) - Pphi)
    M = velocity_op + half_A
    # exp(tM) for skew M is exp(it(-iM)) with -iM Hermitian
    hM = -1j * M
    hQ = -1j * half_A
    g = matrix_exp_skew_hermitian(0.5 * (hM + dagger(hM)), t) @ matrix_exp_skew_hermitian(
        0.5 * (hQ + dagger(hQ)), -t
    )
    return g @ phi0


def geodesic_residual(phi0, X, t, h=FD_STEP):
    """``||gamma'' + gamma (gamma'* gamma')||`` at time ``t`` by central differences."""
    gm = stiefel_geodesic(phi0, X, t - h)
    g0 = stiefel_geodesic(phi0, X, t)
    gp = stiefel_geodesic(phi0, X, t + h)
    vel = (gp - gm) / (2 * h)
    acc = (gp - 2 * g0 + gm) / (h * h)
    return float(np.linalg.norm(acc + g0 @ (dagger(vel) @ vel)))


# ------------------------------------------------------- curvature & checks


def curvature_tensor(X, Y, Z):
    """``R(X, Y) Z = [[X, Y], Z]`` for tangent vectors at a common base."""
    base = X.base
    for V in (Y, Z):
        if V.base is not base and not np.allclose(V.base.mat, base.mat, atol=tau_lin(base.dim)):
            raise BaseMismatch("tangent vectors live at different projections")
    XY = X.mat @ Y.mat - Y.mat @ X.mat
    return XY @ Z.mat - Z.mat @ XY


def sectional_quantity(X, Y):
    """``<R(X,Y)Y, X>`` in the real trace inner product; non-negative."""
    return float(np.trace(curvature_tensor(X, Y, Y) @ X.mat).real)


def four_point_check(p, x, y, z, scale=None, slack=1e-9):
    """Four-point comparison inequality for non-negative curvature.

    ``d(p,x)^2 + d(p,y)^2 + d(p,z)^2 >= (d(x,y)^2 + d(y,z)^2 + d(z,x)^2) / 3``.
    """
    pts = [as_projection(a) for a in (p, x, y, z)]
    if len({q.rank for q in pts}) != 1:
        raise RankMismatch("four-point check needs equal ranks")
    p, x, y, z = pts

    def d2(a, b):
        return distance(a, b, scale) ** 2

    lhs = d2(p, x) + d2(p, y) + d2(p, z)
    rhs = (d2(x, y) + d2(y, z) + d2(z, x)) / 3.0
    return bool(lhs >= rhs - slack)


class SubprojectionTransport(NamedTuple):
    moved: Projection
    sub_distance: float
    path_length: float


def subprojection_transport(P, Q, Z, scale=None):
    """Move ``Q <= P`` along the geodesic generated by ``Z`` at ``P``.

    Returns ``Q1 = exp(iZ) Q exp(-iZ)`` (which lies under ``gamma(1)``),
    ``d(Q, Q1)`` and the length of ``gamma`` on ``[0, 1]``.
    """
    P, Q = as_projection(P), as_projection(Q)
    if not Q <= P:
        raise NotSubprojection("Q is not a subprojection of P")
    Zm = _generator(P, Z)
    # Z is tangent at P, not at Q, so conjugate Q directly
    U = matrix_exp_skew_hermitian(Zm, 1.0)
    Q1 = Projection(U @ Q.mat @ dagger(U), Q.rank)
    return SubprojectionTransport(Q1, distance(Q, Q1, scale), speed(P, Zm, scale))

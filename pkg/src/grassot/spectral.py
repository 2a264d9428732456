"""Density matrices and discrete measures on the Grassmannian.

``phi`` sends a density matrix to its spectral measure (one atom per
distinct non-zero eigenvalue, carried by the full eigenprojection) and
``psi`` integrates a measure back to an operator. Orthogonal refinements of
the spectral measure are parametrized by per-eigenspace unitary frames and
rank partitions, see :func:`lambda_perp_element`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    BadFrame,
    BadPartition,
    DimMismatch,
    InvalidDensity,
    NotNormalized,
    NotPSD,
    ZeroVector,
)
from .grassmann import Projection, as_projection
from .linalg import (
    CLUSTER_TOL,
    as_matrix,
    check_hermitian,
    dagger,
    haar_unitary,
    hermitian_eig,
    tau_lin,
    trace_norm,
)

#: weights at or below this are dropped from measures
WEIGHT_TOL = 1e-12
#: tolerance for the trace-normalization and orthogonality class flags
CLASS_TOL = 1e-9


@dataclass(frozen=True)
class DensityMatrix:
    """Positive semidefinite unit-trace matrix."""

    mat: np.ndarray

    def __post_init__(self):
        try:
            rho = check_hermitian(self.mat, "density")
        except ValueError as exc:
            raise InvalidDensity(str(exc)) from exc
        n = rho.shape[0]
        if n == 0:
            raise InvalidDensity("density matrix is empty")
        tol = tau_lin(n)
        lam_min = np.linalg.eigvalsh(rho)[0]
        if lam_min < -tol:
            raise NotPSD(f"density has negative eigenvalue {lam_min:.3e}")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > tol:
            raise InvalidDensity(f"density has trace {float(tr):.12g}")
        object.__setattr__(self, "mat", rho)

    @property
    def dim(self):
        return self.mat.shape[0]

    @cached_property
    def spectrum(self):
        return hermitian_eig(self.mat)


def as_density(rho):
    return rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)


@dataclass(frozen=True)
class MeasureClass:
    is_D1: bool
    is_orthogonal: bool
    is_rank1: bool
    is_distinct_weights: bool


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite positive combination of Dirac masses on projections.

    Atoms whose projections coincide are merged (weights added); weights at
    or below ``WEIGHT_TOL`` are dropped with a warning and the remaining
    weights rescaled to keep the trace-weighted total.
    """

    weights: np.ndarray
    projections: tuple = field(default_factory=tuple)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        projs = tuple(as_projection(P) for P in self.projections)
        if w.size != len(projs):
            raise ValueError("weights and projections differ in length")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        if projs and len({P.dim for P in projs}) != 1:
            raise DimMismatch("atoms live in different ambient dimensions")
        keep = w > WEIGHT_TOL
        if not np.all(keep):
            ranks = np.array([P.rank for P in projs], dtype=float)
            total = float(w @ ranks)
            kept = float(w[keep] @ ranks[keep])
            warnings.warn(
                f"dropping {int((~keep).sum())} atom(s) with weight <= {WEIGHT_TOL}; renormalizing",
                RuntimeWarning,
                stacklevel=3,
            )
            w = w[keep] * (total / kept if kept > 0 else 1.0)
            projs = tuple(P for P, k in zip(projs, keep) if k)
        merged_w, merged_p = [], []
        for wi, P in zip(w, projs):
            for k, Q in enumerate(merged_p):
                if Q.rank == P.rank and np.linalg.norm(Q.mat - P.mat) <= tau_lin(P.dim):
                    merged_w[k] += wi
                    break
            else:
                merged_w.append(float(wi))
                merged_p.append(P)
        object.__setattr__(self, "weights", np.array(merged_w, dtype=float))
        object.__setattr__(self, "projections", tuple(merged_p))

    def __len__(self):
        return len(self.projections)

    @property
    def dim(self):
        return self.projections[0].dim if self.projections else 0

    @property
    def ranks(self):
        return np.array([P.rank for P in self.projections], dtype=int)

    @property
    def masses(self):
        """Weights of the trace-weighted measure ``tr(.) mu``."""
        return self.weights * self.ranks

    def measure_class(self):
        n = len(self)
        orth = True
        for i in range(n):
            for j in range(i + 1, n):
                if np.trace(self.projections[i].mat @ self.projections[j].mat).real > CLASS_TOL:
                    orth = False
        w = self.weights
        distinct = all(abs(w[i] - w[j]) > CLASS_TOL for i in range(n) for j in range(i + 1, n))
        return MeasureClass(
            is_D1=bool(abs(self.masses.sum() - 1.0) <= CLASS_TOL),
            is_orthogonal=orth,
            is_rank1=bool(np.all(self.ranks == 1)),
            is_distinct_weights=distinct,
        )


def phi(rho, cluster_tol=CLUSTER_TOL):
    """Spectral measure: one atom per distinct positive eigenvalue.

    Eigenvalues closer than ``cluster_tol`` are treated as equal and share
    an atom carried by their joint eigenprojection; the kernel is dropped.
    """
    rho = as_density(rho)
    spec = hermitian_eig(rho.mat, cluster_tol)
    weights, projs = [], []
    for sl in spec.clusters(cluster_tol):
        lam = float(spec.eigenvalues[sl].mean())
        if lam <= cluster_tol:
            continue
        V = spec.eigenvectors[:, sl]
        weights.append(lam)
        projs.append(Projection(V @ dagger(V), V.shape[1]))
    return DiscreteMeasure(np.array(weights), tuple(projs))


def eigenspaces(rho, cluster_tol=CLUSTER_TOL):
    """``(eigenvalue, orthonormal basis)`` for each atom of ``phi(rho)``, same order."""
    rho = as_density(rho)
    spec = hermitian_eig(rho.mat, cluster_tol)
    out = []
    for sl in spec.clusters(cluster_tol):
        lam = float(spec.eigenvalues[sl].mean())
        if lam > cluster_tol:
            out.append((lam, spec.eigenvectors[:, sl].copy()))
    return out


def psi(mu):
    """Integrate a trace-normalized measure: ``sum_i w_i P_i``."""
    if abs(mu.masses.sum() - 1.0) > CLASS_TOL:
        raise NotNormalized(f"sum of weight * rank is {float(mu.masses.sum()):.12g}, expected 1")
    rho = sum(w * P.mat for w, P in zip(mu.weights, mu.projections))
    rho = rho / np.trace(rho).real
    return DensityMatrix(rho)


def _check_frame(F, k):
    F = as_matrix(F, "frame")
    if F.shape != (k, k):
        raise BadFrame(f"frame must be {k}x{k}, got {F.shape}")
    if np.linalg.norm(dagger(F) @ F - np.eye(k)) > tau_lin(k) * 10:
        raise BadFrame("frame is not unitary")
    return F


def lambda_perp_element(rho, frames=None, split=None, cluster_tol=CLUSTER_TOL):
    """An orthogonal representation of ``rho``.

    Parameters
    ----------
    rho : DensityMatrix or array
    frames : list of (k_i x k_i) unitaries or None
        One per eigenspace of ``phi(rho)`` (in its order); ``None`` entries
        mean the identity frame.
    split : list of tuples of positive ints or None
        Ordered partition of each eigenspace dimension; consecutive rotated
        basis vectors are grouped accordingly. ``None`` means all ones, which
        gives rank-one atoms.

    Returns
    -------
    DiscreteMeasure
        Orthogonal, trace-normalized, and integrating back to ``rho``.
    """
    spaces = eigenspaces(rho, cluster_tol)
    frames = [None] * len(spaces) if frames is None else list(frames)
    split = [None] * len(spaces) if split is None else list(split)
    if len(frames) != len(spaces):
        raise BadFrame(f"expected {len(spaces)} frames, got {len(frames)}")
    if len(split) != len(spaces):
        raise BadPartition(f"expected {len(spaces)} partitions, got {len(split)}")
    weights, projs = [], []
    for (lam, V), F, parts in zip(spaces, frames, split):
        k = V.shape[1]
        B = V if F is None else V @ _check_frame(F, k)
        parts = (1,) * k if parts is None else tuple(int(x) for x in parts)
        if any(x < 1 for x in parts) or sum(parts) != k:
            raise BadPartition(f"{parts} is not a partition of {k}")
        start = 0
        for size in parts:
            cols = B[:, start : start + size]
            weights.append(lam)
            projs.append(Projection(cols @ dagger(cols), size))
            start += size
    return DiscreteMeasure(np.array(weights), tuple(projs))


def sample_lambda_perp(rho, seed, split=None, cluster_tol=CLUSTER_TOL):
    """Draw an element of the representation set using Haar frames from ``seed``."""
    rng = np.random.default_rng(seed)
    spaces = eigenspaces(rho, cluster_tol)
    frames = [haar_unitary(V.shape[1], rng) for _, V in spaces]
    return lambda_perp_element(rho, frames, split, cluster_tol)


def eigenvalue_l1_gap(rho1, rho2):
    """``sum_i |lambda_i(rho1) - lambda_i(rho2)|`` with both spectra sorted."""
    A, B = as_matrix(rho1), as_matrix(rho2)
    if A.shape != B.shape:
        raise DimMismatch(f"shapes differ: {A.shape} vs {B.shape}")
    la = np.sort(np.linalg.eigvalsh(check_hermitian(A)))[::-1]
    lb = np.sort(np.linalg.eigvalsh(check_hermitian(B)))[::-1]
    return float(np.abs(la - lb).sum())


def density_from_vectors(vectors, tol=1e-9):
    """``sum_k ||xi_k||^2 P_[xi_k]`` for vectors with squared norms summing to one."""
    vecs = [np.asarray(v, dtype=complex).reshape(-1) for v in vectors]
    if not vecs:
        raise NotNormalized("no vectors given")
    norms2 = np.array([np.vdot(v, v).real for v in vecs])
    if np.any(norms2 == 0):
        raise ZeroVector("zero vector in list")
    if abs(norms2.sum() - 1.0) > tol:
        raise NotNormalized(f"squared norms sum to {float(norms2.sum()):.12g}")
    # ||xi||^2 |xi/||xi||><xi/||xi||| is just |xi><xi|
    rho = sum(np.outer(v, np.conj(v)) for v in vecs)
    return DensityMatrix(rho / np.trace(rho).real)


def spectral_distance_profile(mu):
    """Multiset of ``(rank, total mass)`` used to decide finiteness of transport."""
    prof = {}
    for r, m in zip(mu.ranks, mu.masses):
        prof[int(r)] = prof.get(int(r), 0.0) + float(m)
    return prof


def roundtrip_error(rho):
    """Trace-norm distance between ``rho`` and ``psi(phi(rho))``."""
    rho = as_density(rho)
    return trace_norm(psi(phi(rho)).mat - rho.mat)


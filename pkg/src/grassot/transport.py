"""Exact discrete optimal transport on the Grassmannian.

Mass may only move between projections of equal rank, so every problem
splits into independent rank blocks. Each block is solved exactly by the
transportation simplex in :mod:`grassot._simplex`; if the total masses of a
rank block disagree the transport cost is ``+inf``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._simplex import transport_simplex
from .errors import Infeasible, NotNormalized, SupportMismatch
from .grassmann import distance
from .spectral import CLASS_TOL, WEIGHT_TOL, DiscreteMeasure, as_density, phi

#: tolerance on per-rank total masses when deciding feasibility
MASS_TOL = 1e-9
MAX_P = 16.0


def check_exponent(p):
    p = float(p)
    if not 1.0 <= p <= MAX_P:
        raise ValueError(f"exponent p must lie in [1, {MAX_P:g}], got {p}")
    return p


def _check_normalized(mu, name):
    total = float(mu.masses.sum())
    if abs(total - 1.0) > CLASS_TOL:
        raise NotNormalized(f"{name} has trace-weighted mass {total:.12g}, expected 1")


def cost_matrix(mu0, mu1, p, scale=None):
    """``d(P_i, Q_j)^p`` with ``inf`` across ranks."""
    C = np.full((len(mu0), len(mu1)), math.inf)
    for i, P in enumerate(mu0.projections):
        for j, Q in enumerate(mu1.projections):
            if P.rank == Q.rank:
                C[i, j] = distance(P, Q, scale) ** p
    return C


@dataclass(frozen=True)
class TransportPlan:
    """Coupling of ``tr(.) source`` and ``tr(.) target`` on atom pairs."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    masses: np.ndarray

    def support(self, tol=WEIGHT_TOL):
        rows, cols = np.nonzero(self.masses > tol)
        return list(zip(rows.tolist(), cols.tolist()))

    def marginal_error(self):
        return max(
            float(np.abs(self.masses.sum(axis=1) - self.source.masses).max(initial=0.0)),
            float(np.abs(self.masses.sum(axis=0) - self.target.masses).max(initial=0.0)),
        )

    def is_admissible(self, tol=WEIGHT_TOL):
        r0, r1 = self.source.ranks, self.target.ranks
        return all(r0[i] == r1[j] for i, j in self.support(tol))

    def total_cost(self, p, scale=None):
        """``sum nu_ij d(P_i, Q_j)^p`` (not the p-th root)."""
        C = cost_matrix(self.source, self.target, p, scale)
        mask = self.masses > 0
        return float((self.masses[mask] * C[mask]).sum())


class TransportResult(NamedTuple):
    cost: float
    plan: TransportPlan | None


class _Block(NamedTuple):
    rows: np.ndarray
    cols: np.ndarray
    u: np.ndarray
    v: np.ndarray


def _rank_blocks(mu0, mu1):
    r0, r1 = mu0.ranks, mu1.ranks
    for r in sorted(set(r0.tolist()) | set(r1.tolist())):
        yield r, np.flatnonzero(r0 == r), np.flatnonzero(r1 == r)


def _solve(mu0, mu1, p, scale):
    C = cost_matrix(mu0, mu1, p, scale)
    a, b = mu0.masses, mu1.masses
    masses = np.zeros_like(C)
    blocks = []
    for _, rows, cols in _rank_blocks(mu0, mu1):
        ma, mb = a[rows].sum(), b[cols].sum()
        if abs(ma - mb) > MASS_TOL:
            return None, C, blocks
        bb = b[cols] * (ma / mb)
        res = transport_simplex(a[rows], bb, C[np.ix_(rows, cols)])
        masses[np.ix_(rows, cols)] = res.plan
        blocks.append(_Block(rows, cols, res.u, res.v))
    return masses, C, blocks


def wasserstein(mu0, mu1, p, scale=None):
    """Wasserstein distance between ``tr(.) mu0`` and ``tr(.) mu1``.

    Returns ``TransportResult(cost, plan)`` where ``cost`` is the p-th root of
    the optimal total cost, or ``(inf, None)`` when some rank carries
    different total mass on the two sides.
    """
    p = check_exponent(p)
    _check_normalized(mu0, "source")
    _check_normalized(mu1, "target")
    masses, C, _ = _solve(mu0, mu1, p, scale)
    if masses is None:
        return TransportResult(math.inf, None)
    mask = masses > 0
    total = float((masses[mask] * C[mask]).sum())
    return TransportResult(max(total, 0.0) ** (1.0 / p), TransportPlan(mu0, mu1, masses))


def is_cyclically_monotone(plan, p, max_cycle=4, scale=None, slack=1e-9):
    """Check every cycle of at most ``max_cycle`` support pairs.

    For pairs ``(P_1,Q_1)..(P_k,Q_k)`` on the support the shifted matching
    must not be cheaper: ``sum c(P_i,Q_i) <= sum c(P_i,Q_{i+1}) + slack``.
    """
    if max_cycle > 5:
        raise ValueError("max_cycle is capped at 5")
    C = cost_matrix(plan.source, plan.target, p, scale)
    supp = plan.support()
    for k in range(2, max_cycle + 1):
        for combo in itertools.combinations(supp, k):
            base = sum(C[i, j] for i, j in combo)
            first, rest = combo[0], combo[1:]
            for order in itertools.permutations(rest):
                cyc = (first,) + order
                shifted = sum(C[cyc[t][0], cyc[(t + 1) % k][1]] for t in range(k))
                if base > shifted + slack:
                    return False
    return True


@dataclass(frozen=True)
class DualPotentials:
    """Kantorovich pair with ``g(Q) - f(P) <= d(P,Q)^p`` on same-rank pairs."""

    f: np.ndarray
    g: np.ndarray
    p: float
    primal: float
    dual: float

    @property
    def gap(self):
        return self.primal - self.dual


def dp_transform(f, mu0, mu1, p, scale=None):
    """``g(Q) = min_P f(P) + d(P,Q)^p`` over same-rank source atoms (``inf`` if none)."""
    C = cost_matrix(mu0, mu1, p, scale)
    f = np.asarray(f, dtype=float)
    return np.min(f[:, None] + C, axis=0, initial=math.inf)


def reverse_transform(g, mu0, mu1, p, scale=None):
    """``f(P) = max_Q g(Q) - d(P,Q)^p`` over same-rank target atoms (``-inf`` if none)."""
    C = cost_matrix(mu0, mu1, p, scale)
    g = np.asarray(g, dtype=float)
    return np.max(g[None, :] - C, axis=1, initial=-math.inf)


def dual_solve(mu0, mu1, p, scale=None):
    """Optimal potentials from the simplex duals, tightened by the transform.

    The simplex gives ``u_i + v_j <= c_ij``; with ``f = -u`` the transform
    ``g = f^{d^p}`` dominates ``v`` while staying feasible, so the pair stays
    optimal and ``g`` is exactly the transform of ``f``.

    Raises
    ------
    Infeasible
        When the transport cost is infinite.
    """
    p = check_exponent(p)
    _check_normalized(mu0, "source")
    _check_normalized(mu1, "target")
    masses, C, blocks = _solve(mu0, mu1, p, scale)
    if masses is None:
        raise Infeasible("rank profiles are incompatible; transport cost is infinite")
    f = np.zeros(len(mu0))
    for blk in blocks:
        f[blk.rows] = -blk.u + 0.0  # avoid negative zeros
    g = dp_transform(f, mu0, mu1, p, scale)
    mask = masses > 0
    primal = float((masses[mask] * C[mask]).sum())
    dual = float(g @ mu1.masses - f @ mu0.masses)
    return DualPotentials(f, g, p, primal, dual)


@dataclass(frozen=True)
class KantorovichOperator:
    """``C = sum_i f_i P_i`` over an orthogonal family of projections."""

    diag_values: np.ndarray
    projections: tuple

    @property
    def matrix(self):
        return sum(f * P.mat for f, P in zip(self.diag_values, self.projections))

    def expectation(self, rho):
        """``tr(C rho)``."""
        rho = as_density(rho)
        return float(np.trace(self.matrix @ rho.mat).real)


def potential_operator(f, rho=None, measure=None):
    """Represent potential values on spectral atoms as an operator.

    Pass either a density (its spectral measure supplies the atoms) or an
    orthogonal measure directly.
    """
    if measure is None:
        if rho is None:
            raise ValueError("need a density or a measure")
        measure = phi(rho)
    f = np.asarray(f, dtype=float)
    if f.size != len(measure):
        raise SupportMismatch(f"{f.size} values for {len(measure)} atoms")
    if not measure.measure_class().is_orthogonal:
        raise SupportMismatch("atoms are not mutually orthogonal")
    op = KantorovichOperator(f.copy(), measure.projections)
    C = op.matrix
    for fi, P in zip(f, measure.projections):
        if abs(np.trace(C @ P.mat).real - P.rank * fi) > 1e-9 * max(1.0, abs(fi)):
            raise SupportMismatch("operator does not reproduce the potential")
    return op

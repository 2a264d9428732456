"""State-level transport: the cost ``C_p``, the distance ``W_p`` and paths.

``W_p`` transports the canonical spectral measures directly. ``C_p`` instead
minimizes over all orthogonal rank-one representations of both states,
which amounts to choosing an orthonormal frame inside every degenerate
eigenspace. Nothing closed-form is known for that minimum, so it is
searched for numerically:

* nondegenerate spectra have a unique representation and are solved
  directly;
* otherwise frames and plan are updated alternately (frames by a
  derivative-free pattern search with the plan held fixed, then the plan by
  an exact solve), from several starting frames;
* when the only freedom is a single two-dimensional eigenspace the result is
  cross-checked against a grid over the whole frame manifold and the
  ``certified`` flag is raised.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._simplex import transport_simplex
from .errors import (
    DimMismatch,
    Infeasible,
    InfiniteCost,
    NotOrthogonalPath,
    NotPSD,
)
from .grassmann import Projection, _scale_value, geodesic_point, line_angles, log_map
from .linalg import (
    dagger,
    haar_unitary,
    hermitian_eig,
    matrix_exp_skew_hermitian,
    tau_lin,
    trace_norm,
)
from .spectral import (
    DensityMatrix,
    DiscreteMeasure,
    as_density,
    eigenspaces,
    phi,
    psi,
)
from .transport import TransportPlan, TransportResult, check_exponent, wasserstein

#: atoms whose overlap ``tr(PQ)`` stays below this count as orthogonal on paths
PATH_ORTHO_TOL = 1e-7
#: tolerance of the geodesic identity checked on orthogonal paths
GEODESIC_TOL = 1e-6
#: largest number of atoms (both sides) for which the grid certificate runs
CERTIFY_MAX_ATOMS = 8


def thread_count():
    """Worker cap from ``QOT_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("QOT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Budget:
    """Optimizer settings for :func:`cost_p`."""

    restarts: int = 8
    max_iter: int = 100
    step_init: float = math.pi / 4
    step_min: float = 1e-6
    max_evals: int = 20000
    grid: int = 64
    seed: int = 0
    certify: bool = True


@dataclass(frozen=True)
class CostResult:
    value: float
    mu0: DiscreteMeasure
    mu1: DiscreteMeasure
    plan: TransportPlan
    p: float
    iterations: int
    restarts: int
    certified: bool
    history: tuple = field(default=())


# ------------------------------------------------------------ representations


class _Side:
    """Rank-one representations of one state, parametrized by frames."""

    def __init__(self, rho):
        self.spaces = eigenspaces(rho)
        self.sizes = [V.shape[1] for _, V in self.spaces]
        self.offsets = np.cumsum([0] + self.sizes)
        self.weights = np.concatenate([np.full(k, lam) for (lam, _), k in zip(self.spaces, self.sizes)])
        self.free = [s for s, k in enumerate(self.sizes) if k > 1]

    def atoms(self, frames):
        return np.hstack([V @ F for (_, V), F in zip(self.spaces, frames)])

    def identity_frames(self):
        return [np.eye(k, dtype=complex) for k in self.sizes]

    def aligned_frames(self, other_rho):
        # eigenbasis of the other state compressed to each eigenspace
        out = []
        for _, V in self.spaces:
            if V.shape[1] == 1:
                out.append(np.eye(1, dtype=complex))
            else:
                out.append(hermitian_eig(dagger(V) @ other_rho @ V, cluster_tol=0.0).eigenvectors)
        return out

    def haar_frames(self, rng):
        return [haar_unitary(k, rng) if k > 1 else np.eye(1, dtype=complex) for k in self.sizes]

    def measure(self, frames):
        U = self.atoms(frames)
        projs = tuple(Projection(np.outer(u, np.conj(u)), 1) for u in U.T)
        return DiscreteMeasure(self.weights.copy(), projs)


def _costs(U, W, p, scale):
    return (scale * line_angles(U, W)) ** p


def _offdiag_generator(x, k):
    # k(k-1) real parameters: real and imaginary parts above the diagonal
    H = np.zeros((k, k), dtype=complex)
    iu = np.triu_indices(k, 1)
    m = len(iu[0])
    H[iu] = x[:m] + 1j * x[m:]
    return H + dagger(H)


def _rotate(F, x):
    k = F.shape[0]
    return F @ matrix_exp_skew_hermitian(_offdiag_generator(x, k), 1.0)


def pattern_search(f, dim, step_init, step_min, max_evals):
    """Coordinate pattern search from the origin; returns ``(x, f(x), evals)``.

    Accepts only strict improvements, so ``f(x) <= f(0)`` always.
    """
    x = np.zeros(dim)
    fx = f(x)
    evals = 1
    step = step_init
    while step >= step_min and evals < max_evals:
        improved = False
        for d in range(dim):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[d] += sign * step
                fy = f(y)
                evals += 1
                if fy < fx:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            step *= 0.5
    return x, fx, evals


class _Problem:
    def __init__(self, rho0, rho1, p, scale):
        self.rho0, self.rho1 = rho0, rho1
        self.sides = (_Side(rho0), _Side(rho1))
        self.p = p
        self.scale = scale

    def solve_plan(self, frames):
        U = self.sides[0].atoms(frames[0])
        W = self.sides[1].atoms(frames[1])
        C = _costs(U, W, self.p, self.scale)
        res = transport_simplex(self.sides[0].weights, self.sides[1].weights, C)
        return float((res.plan * C).sum()), res.plan

    def value(self, frames):
        return self.solve_plan(frames)[0]

    def _block_objective(self, frames, side, s, plan):
        sd = self.sides[side]
        lo, hi = sd.offsets[s], sd.offsets[s + 1]
        other = self.sides[1 - side].atoms(frames[1 - side])
        nu = plan[lo:hi, :] if side == 0 else plan[:, lo:hi].T
        cols = np.flatnonzero(nu.sum(axis=0) > 0)
        nu, other = nu[:, cols], other[:, cols]
        V = sd.spaces[s][1]
        F0 = frames[side][s]

        def f(x):
            B = V @ _rotate(F0, x)
            return float((nu * _costs(B, other, self.p, self.scale)).sum())

        return f

    def descend(self, frames, budget):
        frames = [list(frames[0]), list(frames[1])]
        value, plan = self.solve_plan(frames)
        history = [value]
        it = 0
        for it in range(1, budget.max_iter + 1):
            for side in (0, 1):
                for s in self.sides[side].free:
                    k = self.sides[side].sizes[s]
                    f = self._block_objective(frames, side, s, plan)
                    x, _, _ = pattern_search(f, k * (k - 1), budget.step_init, budget.step_min, budget.max_evals)
                    if np.any(x):
                        frames[side][s] = _rotate(frames[side][s], x)
            new, plan = self.solve_plan(frames)
            history.append(new)
            done = value - new <= 1e-12 * max(1.0, value)
            value = new
            if done:
                break
        return value, frames, history, it

    # -- certificate for a single two-dimensional eigenspace

    def single_free_block(self):
        free = [(side, s) for side in (0, 1) for s in self.sides[side].free]
        if len(free) != 1:
            return None
        side, s = free[0]
        if self.sides[side].sizes[s] != 2:
            return None
        if sum(len(sd.weights) for sd in self.sides) > CERTIFY_MAX_ATOMS:
            return None
        return side, s

    def frames_with(self, base, side, s, F):
        frames = [list(base[0]), list(base[1])]
        frames[side][s] = F
        return frames

    def grid_oracle(self, base, side, s, n_grid, budget):
        """Minimum over ``a in [0, pi/2]``, ``b in [0, 2 pi)`` and local polish."""
        best = (math.inf, 0.0, 0.0)
        for a in np.linspace(0.0, math.pi / 2, n_grid + 1):
            for b in np.linspace(0.0, 2 * math.pi, 2 * n_grid, endpoint=False):
                v = self.value(self.frames_with(base, side, s, frame2(a, b)))
                if v < best[0]:
                    best = (v, a, b)
        _, a0, b0 = best

        def f(x):
            return self.value(self.frames_with(base, side, s, frame2(a0 + x[0], b0 + x[1])))

        h = math.pi / (2 * n_grid)
        x, fx, _ = pattern_search(f, 2, h, budget.step_min, budget.max_evals)
        return fx, self.frames_with(base, side, s, frame2(a0 + x[0], b0 + x[1]))


def frame2(a, b):
    """Unitary ``2x2`` frame with first column ``(cos a, e^{ib} sin a)``."""
    c, s = math.cos(a), math.sin(a)
    e = complex(math.cos(b), math.sin(b))
    return np.array([[c, -np.conj(e) * s], [e * s, c]], dtype=complex)


def _check_dims(rho0, rho1):
    if rho0.dim != rho1.dim:
        raise DimMismatch(f"states act on different dimensions: {rho0.dim} vs {rho1.dim}")


def cost_p(rho0, rho1, p=2, budget=None, scale=None):
    """Transport cost ``C_p`` between two states.

    Parameters
    ----------
    rho0, rho1 : DensityMatrix or array
    p : float
        Exponent in ``[1, 16]``.
    budget : Budget, optional
        Restarts, iteration caps, grid size and seed.
    scale : Scale, optional

    Returns
    -------
    CostResult
        ``value`` is the best cost found; ``certified`` is true when the
        representation is unique or a grid oracle confirmed the optimum.
    """
    p = check_exponent(p)
    budget = Budget() if budget is None else budget
    rho0, rho1 = as_density(rho0), as_density(rho1)
    _check_dims(rho0, rho1)
    sc = _scale_value(scale)
    prob = _Problem(rho0.mat, rho1.mat, p, sc)
    base = (prob.sides[0].identity_frames(), prob.sides[1].identity_frames())

    if not prob.sides[0].free and not prob.sides[1].free:
        value, _ = prob.solve_plan(base)
        return _finish(prob, base, p, scale, 0, 1, True, (value,))

    starts = [base, (prob.sides[0].aligned_frames(rho1.mat), prob.sides[1].aligned_frames(rho0.mat))]
    seeds = np.random.SeedSequence(budget.seed).spawn(max(budget.restarts - 2, 0))
    for ss in seeds:
        rng = np.random.default_rng(ss)
        starts.append((prob.sides[0].haar_frames(rng), prob.sides[1].haar_frames(rng)))
    starts = starts[: max(budget.restarts, 1)]

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        runs = list(pool.map(lambda st: prob.descend(st, budget), starts))
    # minimum value, ties broken by restart index
    k = min(range(len(runs)), key=lambda i: (runs[i][0], i))
    value, frames, history, _ = runs[k]
    iterations = sum(r[3] for r in runs)
    for r in runs:
        if any(b > a + 1e-12 * max(1.0, a) for a, b in zip(r[2], r[2][1:])):
            raise RuntimeError("block-coordinate descent increased the objective")

    certified = False
    blk = prob.single_free_block() if budget.certify else None
    if blk is not None:
        oracle, oracle_frames = prob.grid_oracle(frames, *blk, budget.grid, budget)
        if oracle < value:
            value, frames = oracle, oracle_frames
            history = history + [oracle]
        certified = True
    return _finish(prob, frames, p, scale, iterations, len(starts), certified, tuple(history))


def _finish(prob, frames, p, scale, iterations, restarts, certified, history):
    mu0 = prob.sides[0].measure(frames[0])
    mu1 = prob.sides[1].measure(frames[1])
    res = wasserstein(mu0, mu1, p, scale)
    return CostResult(res.cost, mu0, mu1, res.plan, p, iterations, restarts, certified, history)


def w_p(rho0, rho1, p=2, scale=None):
    """Wasserstein distance of states: transport of the spectral measures.

    Returns ``TransportResult(value, plan)``; ``(inf, None)`` when the
    eigenspace profiles are incompatible.
    """
    rho0, rho1 = as_density(rho0), as_density(rho1)
    _check_dims(rho0, rho1)
    return wasserstein(phi(rho0), phi(rho1), p, scale)


@dataclass
class SemidistanceReport:
    pairs: int = 0
    violations: list = field(default_factory=list)
    values: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations


def check_semidistance(sample, p=2, budget=None, scale=None):
    """Symmetry, the ``pi/2`` bound, ``C_p <= W_p`` and indiscernibility on all pairs."""
    rep = SemidistanceReport()
    states = [as_density(r) for r in sample]
    bound = math.pi / 2 * _scale_value(scale)
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            a, b = states[i], states[j]
            c_ab = cost_p(a, b, p, budget, scale).value
            c_ba = cost_p(b, a, p, budget, scale).value
            w = w_p(a, b, p, scale).cost
            rep.pairs += 1
            rep.values.append((i, j, c_ab, c_ba, w))
            if abs(c_ab - c_ba) > 1e-6:
                rep.violations.append((i, j, "symmetry", c_ab, c_ba))
            if c_ab > bound + 1e-9:
                rep.violations.append((i, j, "bound", c_ab, bound))
            if c_ab > w + 1e-6:
                rep.violations.append((i, j, "cost<=wp", c_ab, w))
            if c_ab < 1e-6 and trace_norm(a.mat - b.mat) >= 1e-4:
                rep.violations.append((i, j, "indiscernible", c_ab, trace_norm(a.mat - b.mat)))
    return rep


def w_p_triangle(rho0, rho1, rho2, p=2, scale=None, slack=1e-8):
    """``W_p(rho0, rho2) <= W_p(rho0, rho1) + W_p(rho1, rho2)``.

    Raises
    ------
    Infeasible
        If any of the three distances is infinite.
    """
    d01 = w_p(rho0, rho1, p, scale).cost
    d12 = w_p(rho1, rho2, p, scale).cost
    d02 = w_p(rho0, rho2, p, scale).cost
    if not all(math.isfinite(d) for d in (d01, d12, d02)):
        raise Infeasible("a leg of the triangle has infinite distance")
    return bool(d02 <= d01 + d12 + slack)


# ------------------------------------------------------------------ paths


@dataclass(frozen=True)
class StatePath:
    times: np.ndarray
    measures: tuple
    densities: tuple
    orthogonal_flags: np.ndarray
    geodesic_error: float | None = None

    @property
    def all_orthogonal(self):
        return bool(np.all(self.orthogonal_flags))


def _is_orthogonal(mu, tol=PATH_ORTHO_TOL):
    P = [Q.mat for Q in mu.projections]
    for i in range(len(P)):
        for j in range(i + 1, len(P)):
            if abs(np.trace(P[i] @ P[j]).real) > tol:
                return False
    return True


def _extract_plan(result):
    if isinstance(result, TransportPlan):
        return result, None
    if isinstance(result, CostResult):
        if not math.isfinite(result.value):
            raise InfiniteCost("cost is infinite")
        return result.plan, result.value
    if isinstance(result, TransportResult) or isinstance(result, tuple):
        cost, plan = result
        if plan is None or not math.isfinite(cost):
            raise InfiniteCost("transport cost is infinite; no plan to interpolate")
        return plan, cost
    raise TypeError(f"cannot build a path from {type(result).__name__}")


def state_geodesic(result, grid=None, p=2, scale=None):
    """Displacement interpolation of a transport plan, pushed to states.

    Every support pair ``(P_i, Q_j)`` with mass ``m`` contributes an atom
    moving along the Grassmann geodesic from ``P_i`` to ``Q_j`` with weight
    ``m / rank``. When every intermediate measure is orthogonal the path is
    compared with the geodesic identity ``W_p(rho_s, rho_t) = |t-s| W_p(rho_0,
    rho_1)`` and the worst deviation is stored in ``geodesic_error``
    (``None`` otherwise).

    Raises
    ------
    CutLocus
        If a support pair is at principal angle pi/2.
    InfiniteCost
        If there is no finite plan.
    """
    plan, _ = _extract_plan(result)
    times = np.linspace(0.0, 1.0, 11) if grid is None else np.asarray(grid, dtype=float)
    src, tgt = plan.source.projections, plan.target.projections
    moves = []
    for i, j in plan.support():
        Z = log_map(src[i], tgt[j])
        moves.append((src[i], Z, plan.masses[i, j]))
    measures, densities, flags = [], [], []
    for t in times:
        projs = tuple(geodesic_point(P, Z, t) for P, Z, _ in moves)
        w = np.array([m / P.rank for P, _, m in moves])
        mu = DiscreteMeasure(w / (w * [P.rank for P in projs]).sum(), projs)
        measures.append(mu)
        densities.append(psi(mu))
        flags.append(_is_orthogonal(mu))
    flags = np.array(flags, dtype=bool)
    err = None
    full = w_p(densities[0], densities[-1], p, scale).cost if len(times) > 1 else math.inf
    # the geodesic identity only makes sense for a finite W_p between the ends
    if flags.all() and math.isfinite(full):
        span = times[-1] - times[0]
        err = 0.0
        for a in range(len(times)):
            for b in range(a + 1, len(times)):
                d = w_p(densities[a], densities[b], p, scale).cost
                expect = abs(times[b] - times[a]) / span * full if span > 0 else 0.0
                err = max(err, abs(d - expect))
    return StatePath(times, tuple(measures), tuple(densities), flags, err)


# ---------------------------------------------------------------- rigidity


@dataclass(frozen=True)
class RigidityDiagnosis:
    plan_bijective: bool
    matching: tuple | None
    matching_source: str | None
    unitary: np.ndarray | None
    error: float | None
    failure: str | None = None

    @property
    def ok(self):
        return self.failure is None


def _plan_bijection(plan, tol):
    M = plan.masses > tol
    if not (np.all(M.sum(axis=1) == 1) and np.all(M.sum(axis=0) == 1)):
        return None
    return tuple((int(i), int(np.argmax(M[i]))) for i in range(M.shape[0]))


def _weight_bijection(src, tgt, tol=1e-9):
    used = set()
    out = []
    for i in range(len(src)):
        for j in range(len(tgt)):
            if (
                j not in used
                and src.ranks[i] == tgt.ranks[j]
                and abs(src.weights[i] - tgt.weights[j]) <= tol
            ):
                used.add(j)
                out.append((i, j))
                break
        else:
            return None
    return tuple(out) if len(out) == len(tgt) else None


def _matching_ok(src, tgt, matching, tol=1e-9):
    return all(
        src.ranks[i] == tgt.ranks[j] and abs(src.weights[i] - tgt.weights[j]) <= tol
        for i, j in matching
    )


def _complete(B):
    n = B.shape[0]
    if B.shape[1] == n:
        return B
    Q, _ = np.linalg.qr(np.hstack([B, np.eye(n, dtype=complex)]))
    # the first columns of Q span R(B); the rest complete it
    return np.hstack([B, Q[:, B.shape[1] : n]])


def rigidity_check(plan, path=None, tol=1e-8):
    """Recover a unitary conjugating the source state into the target state.

    The plan's own matching is used when it is a bijection between atoms of
    equal weight and rank. Otherwise any such bijection between the two
    spectral measures is used, since equal weights and ranks are all that is
    needed to build the unitary. A missing bijection is reported in
    ``failure`` rather than raised.

    Raises
    ------
    NotOrthogonalPath
        If ``path`` is given and some intermediate measure is not orthogonal.
    """
    if path is not None and not path.all_orthogonal:
        raise NotOrthogonalPath("path leaves the orthogonal measures")
    src, tgt = plan.source, plan.target
    matching = _plan_bijection(plan, 1e-12)
    plan_bij = matching is not None and _matching_ok(src, tgt, matching)
    source = "plan"
    if not plan_bij:
        matching, source = _weight_bijection(src, tgt), "weights"
    if matching is None:
        return RigidityDiagnosis(False, None, None, None, None, "NotBijective: no weight- and rank-preserving bijection")
    n = src.dim
    B = np.hstack([src.projections[i].basis for i, _ in matching])
    C = np.hstack([tgt.projections[j].basis for _, j in matching])
    u = _complete(C) @ dagger(_complete(B))
    rho0, rho1 = psi(src), psi(tgt)
    err = trace_norm(rho1.mat - u @ rho0.mat @ dagger(u))
    fail = None if err <= tol else f"conjugation error {err:.3e} exceeds {tol:.1e}"
    if np.linalg.norm(dagger(u) @ u - np.eye(n)) > tau_lin(n) * 10:
        fail = "constructed map is not unitary"
    return RigidityDiagnosis(plan_bij, matching, source, u, err, fail)


# ------------------------------------------------------------- convergence


class ConvergenceRow(NamedTuple):
    n: int
    trace_gap: float
    cost: float
    wp: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple
    epsilon: float
    threshold_n: int | None
    monotone: bool

    @property
    def reached(self):
        return self.threshold_n is not None


def convergence_experiment(rho, delta, n_max=256, p=2, n_values=None, epsilon=1e-2, budget=None, scale=None):
    """Tabulate ``C_p(rho_n, rho)`` for ``rho_n = normalize(rho + delta / n)``.

    ``n_values`` defaults to the powers of two up to ``n_max``.
    ``threshold_n`` is the smallest tabulated ``N`` with ``C_p <= epsilon`` for
    every tabulated ``n >= N``; ``monotone`` allows optimizer noise of 1e-4.

    Raises
    ------
    NotPSD
        If some ``rho + delta / n`` is not positive semidefinite.
    """
    rho = as_density(rho)
    D = np.asarray(delta, dtype=complex)
    if n_values is None:
        n_values = [2**k for k in range(int(math.log2(n_max)) + 1)]
    rows = []
    for n in n_values:
        M = rho.mat + D / n
        M = 0.5 * (M + dagger(M))
        if np.linalg.eigvalsh(M)[0] < -tau_lin(rho.dim):
            raise NotPSD(f"rho + delta/{n} is not positive semidefinite")
        rho_n = DensityMatrix(M / np.trace(M).real)
        c = cost_p(rho_n, rho, p, budget, scale).value
        w = w_p(rho_n, rho, p, scale).cost
        rows.append(ConvergenceRow(int(n), trace_norm(rho_n.mat - rho.mat), c, w))
    threshold = None
    for k in range(len(rows)):
        if all(r.cost <= epsilon for r in rows[k:]):
            threshold = rows[k].n
            break
    monotone = all(b.cost <= a.cost + 1e-4 for a, b in zip(rows, rows[1:]))
    return ConvergenceTable(tuple(rows), epsilon, threshold, monotone)

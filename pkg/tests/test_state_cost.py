import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from grassot.errors import (
    CutLocus,
    DimMismatch,
    Infeasible,
    InfiniteCost,
    NotOrthogonalPath,
    NotPSD,
)
from grassot.grassmann import Projection
from grassot.linalg import dagger, haar_unitary, trace_norm
from grassot.spectral import DiscreteMeasure, eigenspaces, psi
from grassot.state_cost import (
    Budget,
    check_semidistance,
    convergence_experiment,
    cost_p,
    frame2,
    rigidity_check,
    state_geodesic,
    w_p,
    w_p_triangle,
)
from grassot.transport import TransportPlan, wasserstein

from helpers import conjugate, degenerate_density, line, rand_density

seeds = st.integers(0, 2**32 - 1)
E1 = np.diag([1.0, 0.0])
E2 = np.diag([0.0, 1.0])
HALF = np.eye(2) / 2


# ------------------------------------------------------------------ oracles


def frame_measure(rho, a, b):
    """Rank-one representation of ``rho`` with the 2-dim eigenspace rotated by ``frame2(a, b)``."""
    weights, projs = [], []
    for lam, V in eigenspaces(rho):
        B = V @ frame2(a, b) if V.shape[1] == 2 else V
        for c in range(B.shape[1]):
            weights.append(lam)
            projs.append(Projection(np.outer(B[:, c], np.conj(B[:, c])), 1))
    return DiscreteMeasure(np.array(weights), tuple(projs))


def grid_oracle(rho0, rho1, p=2, n=48):
    """Dense grid plus Nelder-Mead polish over the frame of the single degenerate eigenspace of ``rho0``."""

    def f(x):
        return wasserstein(frame_measure(rho0, x[0], x[1]), frame_measure(rho1, 0, 0), p).cost

    grid = sorted(
        (f((a, b)), a, b)
        for a in np.linspace(0, math.pi / 2, n + 1)
        for b in np.linspace(0, 2 * math.pi, n, endpoint=False)
    )
    best = grid[0][0]
    for _, a, b in grid[:4]:
        res = minimize(f, [a, b], method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-12})
        best = min(best, res.fun)
    return best


# ------------------------------------------------------------------ cost_p


def test_cost_equal_states():
    res = cost_p(np.diag([0.6, 0.3, 0.1]), np.diag([0.6, 0.3, 0.1]))
    assert res.value == 0.0
    assert np.allclose(res.plan.masses, np.diag(res.plan.masses.diagonal()))


def test_cost_half_vs_pure():
    res = cost_p(HALF, E1)
    assert res.value == pytest.approx(math.pi / 4, abs=1e-6)
    assert res.certified
    # the optimizing frame sits at angle pi/4 from e1
    for P in res.mu0.projections:
        assert abs(np.trace(P.mat @ E1).real - 0.5) <= 1e-5
    # closed-form oracle: cost^2 = (a^2 + (pi/2 - a)^2) / 2
    a = np.arange(0, math.pi / 2, 1e-4)
    assert res.value == pytest.approx(math.sqrt(((a**2 + (math.pi / 2 - a) ** 2) / 2).min()), abs=1e-4)


def test_cost_orthogonal_pure():
    assert cost_p(E1, E2).value == pytest.approx(math.pi / 2, abs=1e-12)


def test_cost_dim_mismatch():
    with pytest.raises(DimMismatch):
        cost_p(HALF, np.eye(3) / 3)


def test_result_invariants(rng):
    rho0 = degenerate_density([0.4, 0.4, 0.2], rng)
    rho1 = rand_density(3, rng)
    res = cost_p(rho0, rho1)
    assert res.value == pytest.approx(wasserstein(res.mu0, res.mu1, 2).cost, abs=1e-9)
    for mu, rho in ((res.mu0, rho0), (res.mu1, rho1)):
        cls = mu.measure_class()
        assert cls.is_orthogonal and cls.is_rank1
        assert trace_norm(psi(mu).mat - rho) <= 1e-9
    assert all(b <= a + 1e-12 for a, b in zip(res.history, res.history[1:]))


@pytest.mark.parametrize("case", range(4))
def test_grid_oracle_agreement(case):
    rng = np.random.default_rng(100 + case)
    if case < 2:
        rho0, rho1 = HALF, rand_density(2, rng)
    else:
        rho0, rho1 = degenerate_density([0.4, 0.4, 0.2], rng), rand_density(3, rng)
    res = cost_p(rho0, rho1)
    assert abs(res.value - grid_oracle(rho0, rho1)) <= 1e-4


@settings(max_examples=4)
@given(seeds)
def test_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    rho0 = degenerate_density([0.4, 0.4, 0.2], rng)
    rho1 = degenerate_density([0.5, 0.25, 0.25], rng)
    u = haar_unitary(3, rng)
    a = cost_p(rho0, rho1).value
    b = cost_p(conjugate(rho0, u), conjugate(rho1, u)).value
    assert a == pytest.approx(b, abs=1e-6)


@given(seeds, st.integers(1, 6))
def test_nondegenerate_cost_is_wp(seed, n):
    rng = np.random.default_rng(seed)
    a, b = rand_density(n, rng), rand_density(n, rng)
    res = cost_p(a, b)
    assert res.certified
    assert res.value == pytest.approx(w_p(a, b).cost, abs=1e-9)


def test_budget_is_deterministic(rng):
    rho0 = degenerate_density([0.3, 0.3, 0.3, 0.1], rng)
    rho1 = rand_density(4, rng)
    a = cost_p(rho0, rho1, budget=Budget(restarts=3, seed=5))
    b = cost_p(rho0, rho1, budget=Budget(restarts=3, seed=5))
    assert a.value == b.value and a.history == b.history


# --------------------------------------------------------------------- w_p


def test_wp_examples():
    assert w_p(HALF, HALF).cost == 0
    assert w_p(HALF, E1).cost == math.inf
    assert w_p(HALF, E1).plan is None
    # common eigenbasis: e1 -> e1 and e2 -> e2 are free, e1 and e2 are pi/2 apart
    res = w_p(np.diag([0.7, 0.3]), np.diag([0.6, 0.4]))
    assert math.isfinite(res.cost)
    C = np.array([[0, (math.pi / 2) ** 2], [(math.pi / 2) ** 2, 0]])
    a, b = np.array([0.7, 0.3]), np.array([0.6, 0.4])
    # 2x2 transport: the surplus 0.1 on e1 must travel pi/2
    assert res.cost == pytest.approx(math.sqrt(0.1 * C[0, 1]), abs=1e-12)
    assert np.allclose(res.plan.masses.sum(axis=1), a) and np.allclose(res.plan.masses.sum(axis=0), b)


def test_semidistance(rng):
    sample = [HALF, E1, np.diag([0.7, 0.3]), rand_density(2, rng)]
    rep = check_semidistance(sample, budget=Budget(restarts=3))
    assert rep.ok, rep.violations
    assert rep.pairs == 6


@settings(max_examples=10)
@given(seeds, st.integers(2, 6))
def test_cost_below_wp_and_bound(seed, n):
    rng = np.random.default_rng(seed)
    a = rand_density(n, rng)
    eigs = np.sort(rng.random(n))[::-1]
    eigs[1] = eigs[0]
    b = degenerate_density(eigs / eigs.sum(), rng)
    c = cost_p(a, b, budget=Budget(restarts=3)).value
    assert c <= w_p(a, b).cost + 1e-6
    assert c <= math.pi / 2 + 1e-9


def test_triangle_examples(rng):
    a = np.diag([0.6, 0.3, 0.1])
    assert w_p_triangle(a, a, np.diag([0.5, 0.3, 0.2]))
    for _ in range(20):
        d = [np.diag(np.sort(rng.dirichlet(np.ones(3)))[::-1]) for _ in range(3)]
        assert w_p_triangle(*d)
    with pytest.raises(Infeasible):
        w_p_triangle(HALF, E1, E2)


@given(seeds, st.integers(2, 5))
def test_triangle_random_profiles(seed, n):
    rng = np.random.default_rng(seed)
    assert w_p_triangle(*(rand_density(n, rng) for _ in range(3)))


# ---------------------------------------------------------------- geodesics


def test_geodesic_constant():
    rho = np.diag([0.7, 0.3])
    path = state_geodesic(w_p(rho, rho))
    assert all(np.allclose(d.mat, rho) for d in path.densities)
    assert path.all_orthogonal and path.geodesic_error <= 1e-12


def test_geodesic_rotating_line():
    u = np.array([1.0, 0.0])
    v = np.array([math.cos(1.0), math.sin(1.0)])
    a, b = np.outer(u, u), np.outer(v, v)
    path = state_geodesic(w_p(a, b))
    for t, rho in zip(path.times, path.densities):
        x = np.array([math.cos(t), math.sin(t)])
        assert np.allclose(rho.mat, np.outer(x, x), atol=1e-9)
    assert path.all_orthogonal
    assert path.geodesic_error <= 1e-8


def test_geodesic_endpoints(rng):
    a, b = rand_density(3, rng), rand_density(3, rng)
    res = w_p(a, b)
    try:
        path = state_geodesic(res)
    except CutLocus:
        pytest.skip("random pair hit the cut locus")
    assert trace_norm(path.densities[0].mat - a) <= 1e-8
    assert trace_norm(path.densities[-1].mat - b) <= 1e-8


def test_geodesic_crossing():
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    src = DiscreteMeasure([0.5, 0.5], (line(e1), line(e2)))
    tgt = DiscreteMeasure([0.5, 0.5], (line([1, 1, 1]), line([1, -1, 0])))
    plan = TransportPlan(src, tgt, np.diag([0.5, 0.5]))
    path = state_geodesic(plan, np.linspace(0, 1, 5))
    assert path.orthogonal_flags[0] and path.orthogonal_flags[-1]
    assert not path.orthogonal_flags[1:-1].any()
    assert path.geodesic_error is None
    with pytest.raises(NotOrthogonalPath):
        rigidity_check(plan, path)


def test_geodesic_errors():
    with pytest.raises(InfiniteCost):
        state_geodesic(w_p(HALF, E1))
    with pytest.raises(CutLocus):
        state_geodesic(w_p(E1, E2))


def test_geodesic_from_cost_result():
    res = cost_p(HALF, E1)
    path = state_geodesic(res, [0.0, 1.0])
    assert trace_norm(path.densities[0].mat - HALF) <= 1e-8
    assert trace_norm(path.densities[-1].mat - E1) <= 1e-8
    # the endpoints lie in different components, so no geodesic identity is checked
    assert path.geodesic_error is None


# ---------------------------------------------------------------- rigidity


def test_rigidity_identical():
    rho = np.diag([0.5, 0.3, 0.2])
    diag = rigidity_check(w_p(rho, rho).plan)
    assert diag.ok and diag.plan_bijective
    assert diag.matching == ((0, 0), (1, 1), (2, 2))
    assert np.allclose(diag.unitary, np.eye(3))


@given(seeds, st.integers(2, 6))
def test_rigidity_conjugated(seed, n):
    rng = np.random.default_rng(seed)
    phi_ = rand_density(n, rng)
    v = haar_unitary(n, rng)
    psi_ = conjugate(phi_, v)
    res = w_p(phi_, psi_)
    diag = rigidity_check(res.plan)
    assert diag.ok
    u = diag.unitary
    assert np.linalg.norm(dagger(u) @ u - np.eye(n)) <= 1e-9
    assert trace_norm(psi_ - u @ phi_ @ dagger(u)) <= 1e-8


def test_rigidity_different_spectra():
    diag = rigidity_check(w_p(np.diag([0.7, 0.3]), np.diag([0.6, 0.4])).plan)
    assert not diag.ok
    assert diag.failure.startswith("NotBijective")


# -------------------------------------------------------------- convergence


def test_convergence_zero_perturbation():
    tab = convergence_experiment(np.diag([0.7, 0.3]), np.zeros((2, 2)), n_max=8)
    assert all(r.cost == 0 for r in tab.rows)
    assert tab.threshold_n == 1


def test_convergence_nondegenerate():
    tab = convergence_experiment(np.diag([0.7, 0.3]), 0.1 * np.diag([1.0, -1.0]), n_max=32)
    costs = [r.cost for r in tab.rows]
    assert tab.monotone
    assert all(b < a for a, b in zip(costs, costs[1:]))
    assert all(math.isfinite(r.wp) for r in tab.rows)


def test_convergence_degenerate_limit():
    tab = convergence_experiment(HALF, 0.1 * np.diag([1.0, -1.0]), n_max=16)
    assert all(r.wp == math.inf for r in tab.rows)
    costs = [r.cost for r in tab.rows]
    assert all(b < a for a, b in zip(costs, costs[1:]))


def test_convergence_not_psd():
    with pytest.raises(NotPSD):
        convergence_experiment(np.diag([1.0, 0.0]), np.diag([-2.0, 2.0]), n_max=2)

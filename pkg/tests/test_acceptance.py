"""Acceptance criteria, one test per criterion at the stated tolerance.

Each test records a ``PASS``/``FAIL`` line with the measured value; the lines
are printed at the end of the session (see ``conftest.py``).
"""

import itertools
import math
import time

import numpy as np
import pytest

from grassot.grassmann import (
    four_point_check,
    geodesic_point,
    log_map,
    principal_angles,
    stiefel_geodesic,
    stiefel_tangent_project,
)
from grassot.linalg import dagger, haar_unitary, random_density, trace_norm
from grassot.spectral import eigenvalue_l1_gap, roundtrip_error
from grassot.state_cost import (
    convergence_experiment,
    cost_p,
    rigidity_check,
    w_p,
    w_p_triangle,
)
from grassot.tensor import TensorState, correlation, pure_cost
from grassot.transport import (
    cost_matrix,
    dual_solve,
    is_cyclically_monotone,
    wasserstein,
)

from helpers import (
    conjugate,
    degenerate_density,
    equal_mass_measure,
    rand_measure,
    rand_projection,
)

pytestmark = pytest.mark.acceptance

RESULTS = []
HALF = np.eye(2) / 2
E1 = np.diag([1.0, 0.0])


def record(num, title, passed, detail):
    line = f"criterion {num:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert passed, line


def rng_for(num):
    return np.random.default_rng(1000 + num)


def test_c01_degenerate_cost_benchmark():
    t0 = time.perf_counter()
    res = cost_p(HALF, E1, 2)
    elapsed = time.perf_counter() - t0
    # one-parameter oracle: frame lines (cos a, sin a) and (-sin a, cos a),
    # both sent to e1, distances arccos of the overlaps
    a = np.arange(0.0, math.pi / 2 + 1e-4, 1e-4)
    d1 = np.arccos(np.clip(np.abs(np.cos(a)), 0, 1))
    d2 = np.arccos(np.clip(np.abs(np.sin(a)), 0, 1))
    oracle = math.sqrt((0.5 * d1**2 + 0.5 * d2**2).min())
    err = abs(res.value - oracle)
    record(
        1,
        "C_2(I/2, |e1><e1|) vs grid oracle",
        err <= 1e-4 and elapsed < 5.0,
        f"value={res.value:.10f} oracle={oracle:.10f} err={err:.2e} time={elapsed:.2f}s",
    )


def test_c02_wp_infinite():
    res = w_p(HALF, E1, 2)
    record(2, "W_p(I/2, |e1><e1|) = inf", res.cost == math.inf and res.plan is None, f"value={res.cost}")


def test_c03_round_trip():
    rng = rng_for(3)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(500):
        n = 1 + k % 12
        worst = max(worst, roundtrip_error(random_density(n, rng)))
    elapsed = time.perf_counter() - t0
    record(3, "spectral round trip", worst <= 1e-9 and elapsed < 10.0, f"max err={worst:.2e} time={elapsed:.2f}s")


def test_c04_geodesic_equation():
    rng = rng_for(4)
    h = 1e-4
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        r = int(rng.integers(1, min(2, n - 1) + 1))
        phi0 = haar_unitary(n, rng)[:, :r]
        X = stiefel_tangent_project(phi0, rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r)))
        X = X / np.linalg.norm(X)
        t = float(rng.uniform(0.0, 1.0))
        g = stiefel_geodesic(phi0, X, t)
        gp = stiefel_geodesic(phi0, X, t + h)
        gm = stiefel_geodesic(phi0, X, t - h)
        vel = (gp - gm) / (2 * h)
        acc = (gp - 2 * g + gm) / h**2
        worst = max(worst, float(np.linalg.norm(acc + g @ (dagger(vel) @ vel))))
    record(4, "Stiefel geodesic equation", worst <= 1e-5, f"max residual={worst:.2e}")


def test_c05_exp_log():
    rng = rng_for(5)
    worst, done = 0.0, 0
    while done < 500:
        n = int(rng.integers(2, 7))
        r = int(rng.integers(1, n))
        P, Q = rand_projection(n, r, rng), rand_projection(n, r, rng)
        if principal_angles(P, Q).max() > math.pi / 2 - 0.1:
            continue
        done += 1
        R = geodesic_point(P, log_map(P, Q), 1.0)
        worst = max(worst, float(np.linalg.norm(R.mat - Q.mat)))
    record(5, "exp/log consistency", worst <= 1e-8, f"max err={worst:.2e} over {done} pairs")


def test_c06_strong_duality():
    rng = rng_for(6)
    gap = slack = 0.0
    monotone = True
    for _ in range(200):
        k0, k1 = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        mu0, mu1 = rand_measure(3, k0, rng), rand_measure(3, k1, rng)
        d = dual_solve(mu0, mu1, 2)
        gap = max(gap, abs(d.gap))
        res = wasserstein(mu0, mu1, 2)
        C = cost_matrix(mu0, mu1, 2)
        for i, j in res.plan.support():
            slack = max(slack, abs(d.g[j] - d.f[i] - C[i, j]))
        monotone = monotone and is_cyclically_monotone(res.plan, 2, max_cycle=4)
    record(
        6,
        "strong duality and slackness",
        gap <= 1e-8 and slack <= 1e-8 and monotone,
        f"max gap={gap:.2e} max slackness={slack:.2e} monotone={monotone}",
    )


def test_c07_permutation_oracle():
    rng = rng_for(7)
    worst, count = 0.0, 0
    for k in range(1, 6):
        for _ in range(40):
            mu0, mu1 = equal_mass_measure(3, k, rng), equal_mass_measure(3, k, rng)
            C = cost_matrix(mu0, mu1, 2)
            brute = min(sum(C[i, s[i]] for i in range(k)) for s in itertools.permutations(range(k))) / k
            lp = wasserstein(mu0, mu1, 2).cost ** 2
            worst = max(worst, abs(lp - brute))
            count += 1
    record(7, "LP vs permutation oracle", worst <= 1e-10, f"max diff={worst:.2e} over {count} instances")


def test_c08_robinson_bound():
    rng = rng_for(8)
    worst = -math.inf
    for k in range(500):
        n = 1 + k % 12
        a, b = random_density(n, rng), random_density(n, rng)
        worst = max(worst, eigenvalue_l1_gap(a, b) - trace_norm(a - b))
    record(8, "eigenvalue l1 gap <= trace norm", worst <= 1e-9, f"max excess={worst:.2e}")


def test_c09_tensor_identities():
    rng = rng_for(9)
    worst = {"theta_abs": 0.0, "conjugation": 0.0, "polar": 0.0}
    for k in range(500):
        c = correlation(TensorState.random(1 + k % 8, rng))
        for key in worst:
            worst[key] = max(worst[key], c.errors[key])
    detail = " ".join(f"{k}={v:.2e}" for k, v in worst.items())
    record(9, "tensor identities", max(worst.values()) <= 1e-9, detail)


def test_c10_pure_cost_ordering():
    rng = rng_for(10)
    excess = -math.inf
    for k in range(200):
        z = TensorState.random(1 + k % 4, rng)
        c = correlation(z)
        excess = max(excess, cost_p(c.rho1, c.rho2, 2).value - pure_cost(z, 2).value)
    bell = max(pure_cost(TensorState(np.eye(n) / math.sqrt(n))).value for n in (2, 3, 4))
    record(
        10,
        "C_p(marginals) <= pure cost",
        excess <= 1e-6 and bell <= 1e-6,
        f"max excess={excess:.2e} max-entangled cost={bell:.2e}",
    )


def test_c11_four_point():
    rng = rng_for(11)
    failures = 0
    for n, r in ((3, 1), (5, 2)):
        for _ in range(1000):
            pts = [rand_projection(n, r, rng) for _ in range(4)]
            failures += not four_point_check(*pts, slack=1e-9)
    record(11, "Alexandrov four-point inequality", failures == 0, f"failures={failures} of 2000")


def test_c12_convergence_topology():
    delta = 0.1 * np.diag([1.0, -1.0])
    n_values = [1, 2, 4, 8, 16, 32, 64, 128, 256]
    nondeg = convergence_experiment(np.diag([0.7, 0.3]), delta, n_values=n_values)
    degen = convergence_experiment(HALF, delta, n_values=n_values)
    tail = [r.cost for t in (nondeg, degen) for r in t.rows if r.n >= 64]
    wp_inf = all(r.wp == math.inf for r in degen.rows)
    worst = max(tail)
    record(
        12,
        "C_2(rho_n, rho) <= 1e-2 for n >= 64",
        worst <= 1e-2 and wp_inf,
        f"max C_2 over n>=64 = {worst:.4g} (n=64: {nondeg.rows[6].cost:.4g} / {degen.rows[6].cost:.4g}), "
        f"degenerate W_p inf throughout={wp_inf}",
    )


def test_c13_wp_triangle():
    rng = rng_for(13)
    failures = 0
    for k in range(200):
        n = 2 + k % 5
        if k % 2:
            triple = [random_density(n, rng) for _ in range(3)]
        else:
            # common degenerate profile keeps every leg finite
            eigs = np.sort(rng.random(n))[::-1]
            eigs[1] = eigs[0]
            triple = [degenerate_density(eigs / eigs.sum(), rng) for _ in range(3)]
        failures += not w_p_triangle(*triple, slack=1e-8)
    record(13, "W_p triangle inequality", failures == 0, f"failures={failures} of 200")


def test_c14_rigidity():
    rng = rng_for(14)
    worst = 0.0
    ok = True
    for k in range(100):
        n = 2 + k % 6
        phi_ = random_density(n, rng)
        v = haar_unitary(n, rng)
        psi_ = conjugate(phi_, v)
        diag = rigidity_check(w_p(phi_, psi_).plan)
        ok = ok and diag.ok
        if diag.unitary is not None:
            u = diag.unitary
            worst = max(worst, trace_norm(psi_ - u @ phi_ @ dagger(u)))
    record(14, "rigidity of conjugated states", ok and worst <= 1e-8, f"max conjugation err={worst:.2e}")


"""Random instance builders shared by the test modules."""

import numpy as np

from grassot.grassmann import Projection
from grassot.linalg import dagger, haar_unitary, random_density
from grassot.spectral import DiscreteMeasure


def rand_projection(n, r, rng):
    U = haar_unitary(n, rng)[:, :r]
    return Projection(U @ dagger(U), r)


def line(v):
    v = np.asarray(v, dtype=complex)
    return Projection.from_vectors(v.reshape(-1, 1))


def rand_measure(n, k, rng, ranks=(1,)):
    """Random trace-normalized measure with ``k`` atoms of the given ranks."""
    rs = [int(rng.choice(ranks)) for _ in range(k)]
    projs = [rand_projection(n, r, rng) for r in rs]
    w = rng.random(k) + 0.05
    w = w / (w * np.array(rs)).sum()
    return DiscreteMeasure(w, tuple(projs))


def equal_mass_measure(n, k, rng):
    """``k`` rank-one atoms of mass ``1/k``."""
    return DiscreteMeasure(np.full(k, 1.0 / k), tuple(rand_projection(n, 1, rng) for _ in range(k)))


def conjugate(rho, u):
    return u @ rho @ dagger(u)


def rand_density(n, rng, rank=None):
    return random_density(n, rng, rank)


def degenerate_density(eigs, rng):
    """Density with prescribed eigenvalues in a Haar-random eigenbasis."""
    n = len(eigs)
    u = haar_unitary(n, rng)
    return u @ np.diag(np.asarray(eigs, dtype=float)) @ dagger(u)

"""Dense transportation simplex (MODI / stepping-stone).

Solves ``min <C, X>`` subject to ``X 1 = a``, ``X^T 1 = b``, ``X >= 0`` and
returns the optimal plan together with dual potentials ``u, v`` satisfying
``u_i + v_j <= C_ij`` everywhere and with equality on the final basis.

Starts from a least-cost basis. The entering cell is the most negative
reduced cost (lowest row-major index on ties); after a run of degenerate
pivots the rule switches to Bland's lowest-index choice, which cannot cycle.
"""

from __future__ import annotations

from collections import deque
from typing import NamedTuple

import numpy as np

#: consecutive degenerate pivots tolerated before switching to Bland's rule
BLAND_AFTER = 50


class SimplexResult(NamedTuple):
    plan: np.ndarray
    u: np.ndarray
    v: np.ndarray
    pivots: int


def _least_cost(a, b, C):
    m, n = a.size, b.size
    X = np.zeros((m, n))
    basic = np.zeros((m, n), dtype=bool)
    ra, rb = a.copy(), b.copy()
    row_open = np.ones(m, dtype=bool)
    col_open = np.ones(n, dtype=bool)
    masked = C.astype(float).copy()
    for _ in range(m + n - 1):
        flat = int(np.argmin(masked))
        i, j = divmod(flat, n)
        x = min(ra[i], rb[j])
        X[i, j] = max(x, 0.0)
        basic[i, j] = True
        ra[i] -= x
        rb[j] -= x
        # cross out exactly one line so the basis stays a spanning tree
        close_row = ra[i] <= rb[j]
        if close_row and row_open.sum() == 1:
            close_row = False
        elif not close_row and col_open.sum() == 1:
            close_row = True
        if close_row:
            row_open[i] = False
            masked[i, :] = np.inf
        else:
            col_open[j] = False
            masked[:, j] = np.inf
    return X, basic


def _potentials(C, basic):
    m, n = C.shape
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    rows, cols = np.nonzero(basic)
    row_adj = [[] for _ in range(m)]
    col_adj = [[] for _ in range(n)]
    for r, c in zip(rows, cols):
        row_adj[r].append(c)
        col_adj[c].append(r)
    u[0] = 0.0
    queue = deque([(0, True)])
    while queue:
        k, is_row = queue.popleft()
        if is_row:
            for c in row_adj[k]:
                if np.isnan(v[c]):
                    v[c] = C[k, c] - u[k]
                    queue.append((c, False))
        else:
            for r in col_adj[k]:
                if np.isnan(u[r]):
                    u[r] = C[r, k] - v[k]
                    queue.append((r, True))
    return u, v, row_adj, col_adj


def _cycle(i, j, row_adj, col_adj, m):
    """Basic cells on the tree path from column ``j`` to row ``i``."""
    # nodes: rows 0..m-1, columns m..m+n-1
    start, goal = m + j, i
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        nbrs = col_adj[node - m] if node >= m else [c + m for c in row_adj[node]]
        for nb in nbrs:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    path = []
    node = goal
    while parent[node] is not None:
        prev = parent[node]
        a, b = (node, prev) if node < m else (prev, node)
        path.append((a, b - m))
        node = prev
    # path was collected from row i back to column j; reverse so it starts at j
    return path[::-1]


def transport_simplex(a, b, C, tol=None, max_pivots=None):
    """Exact balanced transport between histograms ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    m, n = C.shape
    if a.size != m or b.size != n:
        raise ValueError("marginal sizes do not match the cost matrix")
    if m == 0 or n == 0:
        return SimplexResult(np.zeros((m, n)), np.zeros(m), np.zeros(n), 0)
    scale = max(1.0, float(np.abs(C).max()))
    tol = 1e-12 * scale if tol is None else tol
    max_pivots = 50 * (m + n) ** 2 + 100 if max_pivots is None else max_pivots
    X, basic = _least_cost(a, b, C)
    pivots = 0
    degenerate_run = 0
    while True:
        u, v, row_adj, col_adj = _potentials(C, basic)
        reduced = C - u[:, None] - v[None, :]
        eligible = (reduced < -tol) & ~basic
        if not eligible.any():
            break
        if pivots >= max_pivots:
            raise RuntimeError("transportation simplex did not converge")
        if degenerate_run < BLAND_AFTER:
            flat = int(np.argmin(np.where(eligible, reduced, np.inf).ravel()))
        else:
            flat = int(np.argmax(eligible.ravel()))
        i, j = divmod(flat, n)
        path = _cycle(i, j, row_adj, col_adj, m)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(X[r, c] for r, c in minus)
        ties = [(r, c) for r, c in minus if X[r, c] <= theta]
        leave = min(ties)
        for r, c in minus:
            X[r, c] -= theta
        for r, c in plus:
            X[r, c] += theta
        X[i, j] = theta
        X[leave] = 0.0
        basic[leave] = False
        basic[i, j] = True
        pivots += 1
        degenerate_run = degenerate_run + 1 if theta <= 0 else 0
    X[X < 0] = 0.0
    return SimplexResult(X, u, v, pivots)

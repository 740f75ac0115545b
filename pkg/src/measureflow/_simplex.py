"""Network simplex for the dense balanced transportation problem.

    min  sum_ij c_ij x_ij
    s.t. sum_j x_ij = supply_i,   sum_i x_ij = demand_j,   x >= 0

The basis is a spanning tree of the bipartite graph.  The initial basis is
the northwest-corner staircase, which for atoms sorted by position in one
dimension is already the monotone (optimal) coupling, so those instances
finish in a single pricing pass.  Pricing is vectorized Dantzig (most
negative reduced cost, first index on ties); after a stretch of degenerate
pivots the solver switches to Bland's smallest-index rule until a
nondegenerate pivot occurs, which prevents cycling while keeping the pivot
sequence deterministic.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


class SimplexError(RuntimeError):
    """Internal failure of the transportation solver (should never happen)."""


def _northwest_corner(supply: np.ndarray, demand: np.ndarray):
    """Initial spanning-tree basis with exactly m + n - 1 arcs."""
    m, n = len(supply), len(demand)
    a = supply.astype(float).copy()
    b = demand.astype(float).copy()
    flows: dict[tuple[int, int], float] = {}
    i = j = 0
    while True:
        f = min(a[i], b[j])
        flows[(i, j)] = max(f, 0.0)
        a[i] -= f
        b[j] -= f
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1:
            i += 1
        elif i == m - 1:
            j += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return flows


class _Tree:
    """Spanning-tree bookkeeping over nodes 0..m-1 (rows) and m..m+n-1 (cols)."""

    def __init__(self, m: int, n: int, basis: dict[tuple[int, int], float]):
        self.m = m
        self.n = n
        self.adj: dict[int, set[int]] = {k: set() for k in range(m + n)}
        for (i, j) in basis:
            self.adj[i].add(m + j)
            self.adj[m + j].add(i)
        self.parent = [-1] * (m + n)
        self.depth = [0] * (m + n)

    def rebuild(self, cost: np.ndarray, u: np.ndarray, v: np.ndarray) -> None:
        """BFS from the root: parents, depths and dual potentials."""
        m = self.m
        parent = self.parent
        depth = self.depth
        seen = [False] * (m + self.n)
        parent[0] = -1
        depth[0] = 0
        seen[0] = True
        u[0] = 0.0
        queue = deque([0])
        count = 0
        while queue:
            node = queue.popleft()
            count += 1
            for nbr in self.adj[node]:
                if seen[nbr]:
                    continue
                seen[nbr] = True
                parent[nbr] = node
                depth[nbr] = depth[node] + 1
                if node < m:  # row -> col arc (node, nbr - m)
                    v[nbr - m] = cost[node, nbr - m] - u[node]
                else:  # col -> row arc (nbr, node - m)
                    u[nbr] = cost[nbr, node - m] - v[node - m]
                queue.append(nbr)
        if count != m + self.n:
            raise SimplexError("basis graph is not a spanning tree")

    def path_to_root(self, node: int) -> list[int]:
        path = [node]
        while self.parent[path[-1]] != -1:
            path.append(self.parent[path[-1]])
        return path

    def cycle_nodes(self, row: int, col_node: int) -> list[int]:
        """Node walk of the unique cycle closed by the entering arc row->col."""
        pa = self.path_to_root(row)
        pb = self.path_to_root(col_node)
        in_a = {node: k for k, node in enumerate(pa)}
        lca = next(node for node in pb if node in in_a)
        b_part = pb[: pb.index(lca)]  # col .. (lca exclusive)
        if lca == row:
            return [row] + b_part
        a_part = pa[: in_a[lca] + 1]  # row .. lca
        # walk: row, col, ..., lca, ..., back toward row
        return [row] + b_part + [lca] + a_part[-2:0:-1]

    def replace(self, leaving: tuple[int, int], entering: tuple[int, int]) -> None:
        li, lj = leaving
        ei, ej = entering
        self.adj[li].discard(self.m + lj)
        self.adj[self.m + lj].discard(li)
        self.adj[ei].add(self.m + ej)
        self.adj[self.m + ej].add(ei)


def solve_transport(
    supply,
    demand,
    cost,
    *,
    tol: float = 1e-12,
    max_iter: int | None = None,
):
    """Solve the balanced transportation LP exactly.

    Returns ``(value, flows)`` with ``flows`` a dict ``{(i, j): flow > 0}``.
    ``supply`` and ``demand`` must be nonnegative and (approximately)
    balanced; the staircase start absorbs imbalance up to ~1e-9.
    """
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    if m == 0 or n == 0:
        return 0.0, {}
    if len(supply) != m or len(demand) != n:
        raise ValueError("cost shape does not match supply/demand lengths")

    flows = _northwest_corner(supply, demand)
    tree = _Tree(m, n, flows)
    u = np.zeros(m)
    v = np.zeros(n)

    scale_c = 1.0 + float(np.max(np.abs(cost))) if cost.size else 1.0
    price_tol = tol * scale_c
    mass_scale = 1.0 + float(max(supply.sum(), demand.sum()))
    degen_tol = tol * mass_scale

    if max_iter is None:
        max_iter = 2000 + 60 * (m + n)

    bland = False
    degenerate_run = 0
    bland_window = 2 * (m + n) + 10

    for _ in range(max_iter):
        tree.rebuild(cost, u, v)
        reduced = cost - u[:, None] - v[None, :]
        if bland:
            mask = reduced.reshape(-1) < -price_tol
            if not mask.any():
                break
            flat = int(np.argmax(mask))
        else:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -price_tol:
                break
        ei, ej = divmod(flat, n)

        walk = tree.cycle_nodes(ei, m + ej)
        size = len(walk)
        arcs = []
        signs = []
        for k in range(size):
            x, y = walk[k], walk[(k + 1) % size]
            if x < m:
                arcs.append((x, y - m))
                signs.append(+1.0)
            else:
                arcs.append((y, x - m))
                signs.append(-1.0)

        theta = math.inf
        leave_pos = -1
        for k in range(1, size):
            if signs[k] < 0 and flows[arcs[k]] < theta:
                theta = flows[arcs[k]]
                leave_pos = k
        if leave_pos < 0:
            raise SimplexError("no leaving arc: unbounded cycle in transportation LP")

        for k in range(1, size):
            f = flows[arcs[k]] + signs[k] * theta
            flows[arcs[k]] = max(f, 0.0)
        flows[arcs[leave_pos]] = 0.0
        leaving = arcs[leave_pos]
        del flows[leaving]
        flows[(ei, ej)] = theta
        tree.replace(leaving, (ei, ej))

        if theta <= degen_tol:
            degenerate_run += 1
            if degenerate_run >= bland_window:
                bland = True
        else:
            degenerate_run = 0
            bland = False
    else:
        raise SimplexError(f"pivot limit {max_iter} exceeded")

    # Optimality certificate: every reduced cost nonnegative (up to noise).
    tree.rebuild(cost, u, v)
    worst = float(np.min(cost - u[:, None] - v[None, :]))
    if worst < -100 * price_tol:
        raise SimplexError(f"returned basis is not optimal (reduced cost {worst})")

    positive = {arc: f for arc, f in flows.items() if f > 0.0}
    value = math.fsum(cost[i, j] * f for (i, j), f in positive.items())
    return value, positive

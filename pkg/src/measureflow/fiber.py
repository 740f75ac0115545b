"""Velocity-matching operators on lifted measures.

``fiber_w`` couples two lifted measures of equal mass so that the induced
base coupling is an optimal transport plan, and minimizes the velocity cost
among such couplings.  ``fiber_wg`` is the unbalanced variant: it couples
sub-measures whose induced base decomposition attains the generalized
Wasserstein optimum (removed mass + base transport cost), again minimizing
the velocity cost.  Neither operator is a distance.

Base-stage optimality is encoded as a linear constraint ``base cost of the
coupling <= optimum + eps_opt`` (exact equality constraints on LP optima
are numerically brittle); the resulting side-constrained LPs are no longer
network problems and are solved with HiGHS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, MassMismatch
from .flat import generalized_wasserstein
from .measures import LiftedMeasure
from .wasserstein import MASS_TOL, wasserstein1

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass(frozen=True)
class FiberPlan:
    """Coupling of lifted atoms: entries (index into V1 atoms, index into V2
    atoms, flow), plus the induced base and fiber costs."""

    entries: tuple[tuple[int, int, float], ...]
    base_cost: float
    fiber_cost: float

    def row_sums(self, n1: int) -> list[float]:
        sums = [[] for _ in range(n1)]
        for i, _, f in self.entries:
            sums[i].append(f)
        return [math.fsum(s) for s in sums]

    def col_sums(self, n2: int) -> list[float]:
        sums = [[] for _ in range(n2)]
        for _, j, f in self.entries:
            sums[j].append(f)
        return [math.fsum(s) for s in sums]

    def total_flow(self) -> float:
        return math.fsum(f for _, _, f in self.entries)


def _pair_costs(V1: LiftedMeasure, V2: LiftedMeasure):
    x1 = np.array([base for base, _, _ in V1.atoms], dtype=float)
    v1 = np.array([vel for _, vel, _ in V1.atoms], dtype=float)
    x2 = np.array([base for base, _, _ in V2.atoms], dtype=float)
    v2 = np.array([vel for _, vel, _ in V2.atoms], dtype=float)
    dbase = x1[:, None, :] - x2[None, :, :]
    dvel = v1[:, None, :] - v2[None, :, :]
    base_cost = np.sqrt(np.sum(dbase * dbase, axis=2))
    fiber_cost = np.sqrt(np.sum(dvel * dvel, axis=2))
    return base_cost, fiber_cost


def _marginal_matrix(n1: int, n2: int):
    """Rows summing a flattened (n1, n2) matrix by row and by column."""
    nvar = n1 * n2
    rows = np.zeros((n1, nvar))
    for i in range(n1):
        rows[i, i * n2 : (i + 1) * n2] = 1.0
    cols = np.zeros((n2, nvar))
    for j in range(n2):
        cols[j, j::n2] = 1.0
    return rows, cols


def _extract_plan(x: np.ndarray, n1: int, n2: int, base_cost, fiber_cost) -> FiberPlan:
    entries = []
    for flat, f in enumerate(x):
        if f > 1e-13:
            i, j = divmod(flat, n2)
            entries.append((i, j, float(f)))
    bc = math.fsum(base_cost[i, j] * f for i, j, f in entries)
    fc = math.fsum(fiber_cost[i, j] * f for i, j, f in entries)
    return FiberPlan(entries=tuple(entries), base_cost=bc, fiber_cost=fc)


def fiber_w_solution(
    V1: LiftedMeasure, V2: LiftedMeasure, eps_opt: float | None = None
) -> tuple[float, FiberPlan]:
    """Two-stage optimum with the attaining coupling.

    Stage 1: optimal base transport cost W* between the projections.
    Stage 2: minimize the fiber cost over couplings of V1 with V2 whose
    base marginal costs at most W* + eps_opt.
    """
    if V1.dim != V2.dim:
        raise DimensionMismatch(f"dim {V1.dim} vs {V2.dim}")
    mass1, mass2 = V1.mass(), V2.mass()
    if abs(mass1 - mass2) > MASS_TOL * max(1.0, mass1, mass2):
        raise MassMismatch(f"masses differ: {mass1} vs {mass2}")
    if V1.is_empty and V2.is_empty:
        return 0.0, FiberPlan(entries=(), base_cost=0.0, fiber_cost=0.0)

    wstar, _ = wasserstein1(V1.base_projection(), V2.base_projection())
    if eps_opt is None:
        eps_opt = 1e-9 * (1.0 + wstar)
    n1, n2 = len(V1.atoms), len(V2.atoms)
    base_cost, fiber_cost = _pair_costs(V1, V2)
    rows, cols = _marginal_matrix(n1, n2)
    A_eq = np.vstack([rows, cols])
    b_eq = np.concatenate(
        [[w for _, _, w in V1.atoms], [w for _, _, w in V2.atoms]]
    )
    res = linprog(
        fiber_cost.reshape(-1),
        A_ub=base_cost.reshape(1, -1),
        b_ub=[wstar + eps_opt],
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
        options=_HIGHS_OPTIONS,
    )
    if res.status != 0:
        raise RuntimeError(f"fiber LP failed: {res.message}")
    plan = _extract_plan(res.x, n1, n2, base_cost, fiber_cost)
    return max(float(res.fun), 0.0), plan


def fiber_w(V1: LiftedMeasure, V2: LiftedMeasure, eps_opt: float | None = None) -> float:
    return fiber_w_solution(V1, V2, eps_opt)[0]


def fiber_wg_solution(
    V1: LiftedMeasure, V2: LiftedMeasure, eps_opt: float | None = None
) -> tuple[float, FiberPlan]:
    """Unbalanced variant with the attaining coupling.

    Stage 1: generalized Wasserstein optimum G* between the projections.
    Stage 2: minimize the fiber cost over sub-couplings p (row sums bounded
    by V1 weights, column sums by V2 weights) whose induced base
    decomposition attains G* within eps_opt, i.e.

        (|mu1| - flow) + (|mu2| - flow) + base_cost(p) <= G* + eps_opt.

    A coupling feasible for this constraint automatically has an optimal
    base marginal between the kept parts.
    """
    if V1.dim != V2.dim:
        raise DimensionMismatch(f"dim {V1.dim} vs {V2.dim}")
    if V1.is_empty or V2.is_empty:
        return 0.0, FiberPlan(entries=(), base_cost=0.0, fiber_cost=0.0)

    gstar = generalized_wasserstein(V1.base_projection(), V2.base_projection()).distance
    if eps_opt is None:
        eps_opt = 1e-9 * (1.0 + gstar)
    mass1, mass2 = V1.mass(), V2.mass()
    n1, n2 = len(V1.atoms), len(V2.atoms)
    base_cost, fiber_cost = _pair_costs(V1, V2)
    rows, cols = _marginal_matrix(n1, n2)
    A_ub = np.vstack([rows, cols, (base_cost - 2.0).reshape(1, -1)])
    b_ub = np.concatenate(
        [
            [w for _, _, w in V1.atoms],
            [w for _, _, w in V2.atoms],
            [gstar - mass1 - mass2 + eps_opt],
        ]
    )
    res = linprog(
        fiber_cost.reshape(-1),
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=(0, None),
        method="highs",
        options=_HIGHS_OPTIONS,
    )
    if res.status != 0:
        raise RuntimeError(f"fiber LP failed: {res.message}")
    plan = _extract_plan(res.x, n1, n2, base_cost, fiber_cost)
    return max(float(res.fun), 0.0), plan


def fiber_wg(V1: LiftedMeasure, V2: LiftedMeasure, eps_opt: float | None = None) -> float:
    return fiber_wg_solution(V1, V2, eps_opt)[0]


def check_ww_inequalities(
    V1: LiftedMeasure, V2: LiftedMeasure, tol: float = 1e-7
) -> bool:
    """Check the chain inequalities relating base, fiber and joint costs.

    Always checks W^g(V1, V2) <= fiber_wg(V1, V2) + W^g(pi#V1, pi#V2);
    when masses are equal also checks the balanced analogue with W1 and
    fiber_w.  Both must hold for a correct solver; False signals a bug.
    """
    J1, J2 = V1.as_joint(), V2.as_joint()
    B1, B2 = V1.base_projection(), V2.base_projection()

    lhs_g = generalized_wasserstein(J1, J2).distance
    rhs_g = math.fsum(
        [fiber_wg(V1, V2), generalized_wasserstein(B1, B2).distance]
    )
    ok = lhs_g <= rhs_g + tol * (1.0 + abs(rhs_g))

    mass1, mass2 = V1.mass(), V2.mass()
    if abs(mass1 - mass2) <= MASS_TOL * max(1.0, mass1, mass2):
        lhs_w, _ = wasserstein1(J1, J2)
        rhs_w = math.fsum([fiber_w(V1, V2), wasserstein1(B1, B2)[0]])
        ok = ok and lhs_w <= rhs_w + tol * (1.0 + abs(rhs_w))
    return ok

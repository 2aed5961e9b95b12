"""Discrete optimal transport and excess-cost probabilities with certificates.

The two primal problems live on the same bipartite geometry:

* ``ot_cost`` minimizes expected cost over couplings (min-cost flow);
* ``ecp`` minimizes the probability of exceeding a cost level ``alpha``
  (max-flow over the admissible cells, by Strassen duality).

Duals come along for free: Kantorovich potentials from the terminating flow
potentials, and a maximizing witness set E from the min cut.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import flow
from .errors import (
    DimensionMismatchError,
    InfeasibleError,
    SizeGuardError,
    ValidationError,
)
from .measures import Dist, JointDist

#: Cells with cost <= alpha + ADMISS_EPS count as admissible, so ties at
#: exactly alpha resolve toward admissibility and the strict ">alpha" event
#: is complementary to them.
ADMISS_EPS = 1e-12


@dataclass(frozen=True)
class CostMatrix:
    """A finite nonnegative cost table c(x, y)."""

    values: tuple

    def __post_init__(self) -> None:
        rows = []
        width = None
        for row in self.values:
            row = tuple(float(v) for v in row)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValidationError("ragged cost matrix")
            for v in row:
                if not math.isfinite(v) or v < 0.0:
                    raise ValidationError(
                        f"cost {v!r} is not finite and nonnegative"
                    )
            rows.append(row)
        if not rows or width == 0:
            raise ValidationError("cost matrix must be nonempty")
        object.__setattr__(self, "values", tuple(rows))

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.values), len(self.values[0]))

    @classmethod
    def hamming(cls, m: int, k: int | None = None) -> "CostMatrix":
        k = m if k is None else k
        return cls(tuple(tuple(0.0 if i == j else 1.0 for j in range(k))
                         for i in range(m)))

    @classmethod
    def from_rows(cls, rows) -> "CostMatrix":
        return cls(tuple(tuple(row) for row in rows))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def max(self) -> float:
        return max(max(row) for row in self.values)

    def min(self) -> float:
        return min(min(row) for row in self.values)


@dataclass(frozen=True)
class TransportPlan:
    """An optimal coupling together with its expected cost."""

    plan: JointDist
    objective: float


@dataclass(frozen=True)
class EcpResult:
    """Outcome of a Strassen excess-cost problem.

    ``value`` is G_alpha, ``complement`` is 1 - G_alpha computed on its own
    (never by subtraction, so tiny tails keep full precision), ``plan`` is an
    optimal coupling and ``witness`` a maximizing dual set E of x indices with
    value = P_X(E) - P_Y(Gamma(E)).
    """

    value: float
    complement: float
    plan: JointDist
    witness: frozenset


@dataclass(frozen=True)
class SupportSet:
    """Cells carrying positive mass in at least one optimal coupling."""

    cells: frozenset

    def __post_init__(self) -> None:
        cells = frozenset((int(i), int(j)) for i, j in self.cells)
        if not cells:
            raise ValidationError("support set must be nonempty")
        object.__setattr__(self, "cells", cells)

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self.cells

    def __iter__(self):
        return iter(sorted(self.cells))

    def __len__(self) -> int:
        return len(self.cells)


def _check_dims(p_x: Dist, p_y: Dist, c: CostMatrix) -> None:
    m, k = c.shape
    if len(p_x) != m or len(p_y) != k:
        raise DimensionMismatchError(
            f"cost is {m}x{k} but marginals have sizes {len(p_x)}, {len(p_y)}"
        )


def admissible_mask(c: CostMatrix, alpha: float) -> np.ndarray:
    """Boolean table of the cells with c(x, y) <= alpha (up to the tie epsilon)."""
    return c.as_array() <= alpha + ADMISS_EPS


def gamma_enlarge(a_set, c: CostMatrix, alpha: float) -> frozenset:
    """The alpha-enlargement: all y admissible from some x in the set."""
    adm = admissible_mask(c, alpha)
    out = set()
    for i in a_set:
        out.update(int(j) for j in np.nonzero(adm[int(i)])[0])
    return frozenset(out)


def ot_value(px: np.ndarray, py: np.ndarray, cost: np.ndarray) -> float:
    """Expected-cost optimum only, for hot loops (no plan, no dataclasses)."""
    if cost.shape == (2, 2):
        return _ot_value_2x2(px[0], py[0], cost)
    _, _, _, objective = flow.transport_min_cost(px, py, cost)
    return objective


def _ot_value_2x2(q0: float, r0: float, cost: np.ndarray) -> float:
    # The coupling is one-parameter: t = P(0,0) in [max(0, q0+r0-1), min(q0, r0)],
    # and the objective is affine in t, so the optimum sits at an endpoint.
    slope = cost[0, 0] + cost[1, 1] - cost[0, 1] - cost[1, 0]
    t = min(q0, r0) if slope < 0 else max(0.0, q0 + r0 - 1.0)
    return float(
        t * cost[0, 0]
        + (q0 - t) * cost[0, 1]
        + (r0 - t) * cost[1, 0]
        + (1.0 - q0 - r0 + t) * cost[1, 1]
    )


def ot_cost(p_x: Dist, p_y: Dist, c: CostMatrix) -> TransportPlan:
    """The minimum expected cost over couplings, with an optimal vertex plan."""
    _check_dims(p_x, p_y, c)
    cost = c.as_array()
    plan, _, _, _ = flow.transport_min_cost(p_x.mass, p_y.mass, cost)
    plan = flow.cancel_cycles(plan)
    objective = float(np.sum(plan * cost))
    return TransportPlan(plan=JointDist.from_array(plan), objective=objective)


def ecp(p_x: Dist, p_y: Dist, c: CostMatrix, alpha: float,
        exact: bool = False) -> EcpResult:
    """Strassen's optimal excess-cost probability G_alpha.

    Computed as 1 - maxflow on the bipartite graph whose uncapacitated edges
    are exactly the admissible cells.  With ``exact=True`` the marginals are
    lifted to integers over a common denominator (their float values read as
    exact binary rationals) and the flow runs in big-integer arithmetic.
    """
    _check_dims(p_x, p_y, c)
    adm = admissible_mask(c, alpha)
    if exact:
        flow_frac, flow_mat, witness = flow.bipartite_max_flow_exact(
            p_x.mass, p_y.mass, adm)
        value = float(max(Fraction(0), 1 - flow_frac))
        complement = float(min(Fraction(1), flow_frac))
    else:
        flow_val, flow_mat, witness = flow.bipartite_max_flow(
            p_x.mass, p_y.mass, adm)
        value = max(0.0, 1.0 - flow_val)
        complement = min(1.0, flow_val)
    plan = _complete_plan(flow_mat, p_x, p_y)
    return EcpResult(value=value, complement=complement,
                     plan=JointDist.from_array(plan),
                     witness=frozenset(witness))


def _complete_plan(flow_mat: np.ndarray, p_x: Dist, p_y: Dist) -> np.ndarray:
    """Route leftover marginal mass by the northwest-corner rule.

    After a maximal admissible flow, no (x, y) pair with residual mass on
    both sides can be admissible (that would be an augmenting path), so any
    completion lands on inadmissible cells and every completion is optimal.
    """
    plan = flow_mat.copy()
    rx = [max(0.0, pm - s) for pm, s in zip(p_x.mass, plan.sum(axis=1))]
    ry = [max(0.0, pm - s) for pm, s in zip(p_y.mass, plan.sum(axis=0))]
    i = j = 0
    m, k = plan.shape
    while i < m and j < k:
        if rx[i] <= flow.FLOW_EPS:
            i += 1
            continue
        if ry[j] <= flow.FLOW_EPS:
            j += 1
            continue
        t = min(rx[i], ry[j])
        plan[i, j] += t
        rx[i] -= t
        ry[j] -= t
    return plan


def ecp_dual_bruteforce(p_x: Dist, p_y: Dist, c: CostMatrix,
                        alpha: float) -> tuple[float, frozenset]:
    """max over E of P_X(E) - P_Y(Gamma(E)) by subset enumeration.

    An independent check of the max-flow route; refuses alphabets past 20
    symbols (2^|X| subsets).
    """
    _check_dims(p_x, p_y, c)
    m, k = c.shape
    if m > 20:
        raise SizeGuardError(
            f"subset enumeration needs 2^{m} sets; refusing beyond 2^20"
        )
    adm = admissible_mask(c, alpha)
    gamma_bits = [0] * m
    for i in range(m):
        bits = 0
        for j in np.nonzero(adm[i])[0]:
            bits |= 1 << int(j)
        gamma_bits[i] = bits
    py_of_mask: dict[int, float] = {0: 0.0}

    def py_mass(mask: int) -> float:
        got = py_of_mask.get(mask)
        if got is None:
            low = mask & -mask
            got = py_mass(mask ^ low) + p_y.mass[low.bit_length() - 1]
            py_of_mask[mask] = got
        return got

    best, best_set = 0.0, 0
    px_sum = [0.0] * (1 << m)
    gm = [0] * (1 << m)
    for mask in range(1, 1 << m):
        low = mask & -mask
        rest = mask ^ low
        idx = low.bit_length() - 1
        px_sum[mask] = px_sum[rest] + p_x.mass[idx]
        gm[mask] = gm[rest] | gamma_bits[idx]
        val = px_sum[mask] - py_mass(gm[mask])
        if val > best:
            best, best_set = val, mask
    witness = frozenset(i for i in range(m) if best_set >> i & 1)
    return best, witness


def kantorovich_certificate(p_x: Dist, p_y: Dist, c: CostMatrix,
                            plan: TransportPlan):
    """Dual potentials (f, g) with f + g <= c everywhere, and the duality gap.

    The gap is plan objective minus the dual value; it vanishes (up to flow
    roundoff) exactly when the plan is optimal.
    """
    _check_dims(p_x, p_y, c)
    mat = plan.plan.as_array()
    if mat.shape != c.shape:
        raise DimensionMismatchError("plan shape does not match the cost table")
    if (np.abs(mat.sum(axis=1) - p_x.as_array()).max() > 1e-9
            or np.abs(mat.sum(axis=0) - p_y.as_array()).max() > 1e-9):
        raise InfeasibleError("plan marginals do not match the problem marginals")
    cost = c.as_array()
    _, f, g, _ = flow.transport_min_cost(p_x.mass, p_y.mass, cost)
    violation = float((f[:, None] + g[None, :] - cost).max())
    if violation > 0.0:
        # Shift f down by the roundoff overshoot so the certificate is
        # unconditionally feasible; this only widens the gap by ~1e-15.
        f = f - violation
    dual_value = float(f @ p_x.as_array() + g @ p_y.as_array())
    gap = plan.objective - dual_value
    return tuple(float(v) for v in f), tuple(float(v) for v in g), gap


def optimal_support(p_x: Dist, p_y: Dist, c: CostMatrix,
                    tol: float = 1e-9) -> SupportSet:
    """Union of supports over all optimal couplings.

    One optimal plan and its potentials pin down the whole optimal face: a
    coupling is optimal iff it lives on the cells tight against the
    potentials.  A tight cell then carries mass in some optimal coupling
    iff the base plan already uses it, or mass can be routed onto it around
    an alternating cycle (gain on tight cells, give back on cells the base
    plan uses).  Membership is thus decided by graph reachability rather
    than by thresholding a per-cell LP, which would also admit slack cells
    whose reduced cost is smaller than the mass budget lets on.  ``tol``
    only separates tight from slack reduced costs (relative to the cost
    scale) and plan mass from roundoff dust.
    """
    _check_dims(p_x, p_y, c)
    m, k = c.shape
    cost = c.as_array()
    plan, f, g, _ = flow.transport_min_cost(p_x.as_array(), p_y.as_array(),
                                            cost)
    scale = max(1.0, float(np.abs(cost).max()))
    tight = cost - f[:, None] - g[None, :] <= tol * scale
    used = plan > tol
    # Symbol digraph: x -> y along any tight cell (mass may be added there),
    # y -> x along any used cell (the base plan can give mass back).  A cell
    # (i, j) joins the support iff a path j ~> i closes the cycle through it.
    adj: list[list[int]] = [[] for _ in range(m + k)]
    for i in range(m):
        for j in range(k):
            if tight[i, j]:
                adj[i].append(m + j)
            if used[i, j]:
                adj[m + j].append(i)
    cells = set()
    for j in range(k):
        seen = np.zeros(m + k, dtype=bool)
        stack = [m + j]
        seen[m + j] = True
        while stack:
            node = stack.pop()
            for nxt in adj[node]:
                if not seen[nxt]:
                    seen[nxt] = True
                    stack.append(nxt)
        for i in range(m):
            if tight[i, j] and (used[i, j] or seen[i]):
                cells.add((i, j))
    return SupportSet(frozenset(cells))

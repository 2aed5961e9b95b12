"""Exact excess-cost probabilities for n-fold products via type lattices.

The n-letter problem G_alpha(P_X^n, P_Y^n) with per-symbol average cost
collapses to an outer Strassen problem between the laws of the empirical
types, whose inner cost is the plain OT value between the induced
distributions.  This module builds those lattices, solves the outer problem
(a banded cut DP for binary alphabets, dense max-flow otherwise), and
provides the coupling constructions used to realize the optimum.

Numerical posture: type masses are kept in log space end to end; every
reported probability is assembled from sums of same-sign terms selected
through a dual witness, never by subtracting two near-equal bulk sums.
"""
from __future__ import annotations

import itertools
import math
import random
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.special import gammaln, logsumexp

from . import flow
from .curves import RateCurve
from .errors import SizeGuardError, ValidationError
from .measures import Dist, JointDist
from .transport import ADMISS_EPS, CostMatrix, ecp, ot_value

ENUM_GUARD = 10_000_000
DENSE_GUARD = 300_000
PAIR_GUARD = 2_000_000


@dataclass(frozen=True)
class TypeVector:
    """An empirical histogram: nonnegative counts summing to n."""

    counts: tuple
    n: int

    def __post_init__(self) -> None:
        counts = tuple(int(v) for v in self.counts)
        object.__setattr__(self, "counts", counts)
        if self.n < 1:
            raise ValidationError("n must be a positive integer")
        if any(v < 0 for v in counts) or sum(counts) != self.n:
            raise ValidationError(
                f"counts {counts!r} are not a composition of {self.n}"
            )

    def induced(self) -> Dist:
        return Dist.from_mass([v / self.n for v in self.counts])

    def fractions(self) -> tuple:
        return tuple(v / self.n for v in self.counts)


@lru_cache(maxsize=64)
def enum_types(n: int, k: int) -> tuple[TypeVector, ...]:
    """All compositions of n into k nonnegative parts, lexicographic."""
    if n < 1 or k < 1:
        raise ValidationError("need n >= 1 and k >= 1")
    count = math.comb(n + k - 1, k - 1)
    if count > ENUM_GUARD:
        raise SizeGuardError(
            f"type lattice has {count} points, beyond the {ENUM_GUARD} guard"
        )
    return tuple(TypeVector(c, n) for c in _compositions(n, k))


def _compositions(n: int, k: int):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


@lru_cache(maxsize=32)
def _counts_matrix(n: int, k: int) -> np.ndarray:
    arr = np.array([t.counts for t in enum_types(n, k)], dtype=np.int64)
    arr.setflags(write=False)
    return arr


def type_log_prob(t: TypeVector, p: Dist) -> float:
    """log of the product-law probability of the type class of t under p."""
    if len(t.counts) != len(p):
        raise ValidationError(
            f"type has {len(t.counts)} symbols, distribution has {len(p)}"
        )
    total = math.lgamma(t.n + 1)
    for cnt, mass in zip(t.counts, p.mass):
        if cnt == 0:
            continue
        if mass == 0.0:
            return -math.inf
        total += cnt * math.log(mass) - math.lgamma(cnt + 1)
    return total


@dataclass(frozen=True, eq=False)
class TypeMeasure:
    """A type lattice with the log-probabilities its base law induces."""

    lattice: tuple
    logmass: np.ndarray

    def __post_init__(self) -> None:
        lm = np.asarray(self.logmass, dtype=float)
        lm.setflags(write=False)
        object.__setattr__(self, "logmass", lm)
        if len(self.lattice) != len(lm):
            raise ValidationError("lattice and logmass must align")
        total = logsumexp(lm)
        if abs(total) > 1e-9:
            raise ValidationError(
                f"type masses sum to exp({total!r}), not 1"
            )

    @classmethod
    def of(cls, p: Dist, n: int) -> "TypeMeasure":
        k = len(p)
        lattice = enum_types(n, k)
        counts = _counts_matrix(n, k)
        mass = p.as_array()
        logp = np.where(mass > 0.0, np.log(np.where(mass > 0.0, mass, 1.0)),
                        -math.inf)
        with np.errstate(invalid="ignore"):
            # 0 * (-inf) appears on zero-count coordinates and is discarded
            contrib = np.where(counts > 0, counts * logp[None, :], 0.0)
        logmass = (gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)
                   + contrib.sum(axis=1))
        return cls(lattice=lattice, logmass=logmass)

    def __len__(self) -> int:
        return len(self.lattice)

    def mass(self) -> np.ndarray:
        return np.exp(self.logmass)

    def prob(self, index_set) -> float:
        idx = np.fromiter((int(i) for i in index_set), dtype=np.int64)
        if idx.size == 0:
            return 0.0
        return float(np.exp(logsumexp(self.logmass[idx])))

    def as_dist(self) -> Dist:
        """The lattice as a plain Dist (masses renormalized from log space)."""
        m = self.mass()
        m = m / math.fsum(m)
        return Dist.from_mass(m, labels=tuple(t.counts for t in self.lattice))


@dataclass(frozen=True, eq=False)
class NestedInstance:
    """Outer Strassen instance over two type lattices."""

    mu: TypeMeasure
    nu: TypeMeasure
    inner_cost: np.ndarray
    cost: CostMatrix
    n: int


@lru_cache(maxsize=16)
def _inner_cost_table(c: CostMatrix, n: int) -> np.ndarray:
    kx, ky = c.shape
    fx = _counts_matrix(n, kx) / n
    fy = _counts_matrix(n, ky) / n
    if kx == 2 and ky == 2:
        carr = c.as_array()
        q0 = fx[:, 0][:, None]
        r0 = fy[:, 0][None, :]
        slope = carr[0, 0] + carr[1, 1] - carr[0, 1] - carr[1, 0]
        if slope < 0:
            t = np.minimum(q0, r0)
        else:
            t = np.maximum(0.0, q0 + r0 - 1.0)
        table = (t * carr[0, 0] + (q0 - t) * carr[0, 1]
                 + (r0 - t) * carr[1, 0] + (1.0 - q0 - r0 + t) * carr[1, 1])
    else:
        if len(fx) * len(fy) > PAIR_GUARD:
            raise SizeGuardError(
                f"inner cost table would have {len(fx) * len(fy)} entries"
            )
        carr = c.as_array()
        table = np.empty((len(fx), len(fy)))
        for i in range(len(fx)):
            for j in range(len(fy)):
                table[i, j] = ot_value(fx[i], fy[j], carr)
    table = np.maximum(table, 0.0)
    table.setflags(write=False)
    return table


def nested_instance(p_x: Dist, p_y: Dist, c: CostMatrix, n: int) -> NestedInstance:
    if (len(p_x), len(p_y)) != c.shape:
        raise ValidationError("marginal sizes do not match the cost table")
    mu = TypeMeasure.of(p_x, n)
    nu = TypeMeasure.of(p_y, n)
    return NestedInstance(mu=mu, nu=nu, inner_cost=_inner_cost_table(c, n),
                          cost=c, n=n)


# ---------------------------------------------------------------------------
# Outer Strassen solve on the lattice.
# ---------------------------------------------------------------------------

def _banded_view(adm: np.ndarray):
    """Interval structure of an admissibility table, if it has one.

    Returns ``(active_rows, lo, hi, empty_rows)`` when every row's admissible
    set is a contiguous interval and the interval endpoints are nondecreasing
    over the active rows; otherwise None.  Both conditions together are what
    the cut DP needs to enumerate witness sets exactly.
    """
    any_row = adm.any(axis=1)
    act = np.nonzero(any_row)[0]
    if act.size == 0:
        return None
    first = np.argmax(adm, axis=1)[act]
    last = (adm.shape[1] - 1 - np.argmax(adm[:, ::-1], axis=1))[act]
    counts = adm.sum(axis=1)[act]
    if not np.array_equal(counts, last - first + 1):
        return None
    if np.any(np.diff(first) < 0) or np.any(np.diff(last) < 0):
        return None
    return act, first, last, np.nonzero(~any_row)[0]


def _signed_sortkey(lpos: np.ndarray, lneg: np.ndarray) -> np.ndarray:
    """Total order on values exp(lpos) - exp(lneg) without leaving log space.

    Positive values map to their log magnitude (in [-inf, 0]), zeros to
    -1000, negatives to -2000 - log magnitude, so the usual argmax ranks by
    true signed value while every comparison retains relative precision.
    Plain subtraction would wipe out differences parked 200 orders of
    magnitude below the bulk masses.
    """
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        top = np.maximum(lpos, lneg)
        logabs = top + np.log1p(-np.exp(-np.abs(lpos - lneg)))
    logabs = np.where(np.isnan(logabs), -np.inf, logabs)
    return np.where(logabs == -np.inf, -1000.0,
                    np.where(lpos > lneg, logabs, -2000.0 - logabs))


def _maxdp_chains(logmu_a: np.ndarray, lognu: np.ndarray, lo: np.ndarray,
                  hi: np.ndarray) -> np.ndarray:
    """Parent pointers of best witness chains for mu(E) - nu(Gamma(E)).

    Chains are indexed by their last included row; a transition either
    merges with a previous chain (lo_i <= hi_j + 1, paying only the new
    nu-span hi_j+1..hi_i) or starts a disjoint interval.  Both sides of the
    score are accumulated as log-sums, so selection stays sharp even when
    the optimum is a difference of two tail masses near 1e-300.
    """
    m = len(logmu_a)
    llog = np.empty(m)
    glog = np.empty(m)
    parent = np.full(m, -1, dtype=np.int64)
    for i in range(m):
        hi_i, lo_i = int(hi[i]), int(lo[i])
        revacc = np.logaddexp.accumulate(lognu[hi_i::-1])
        span_full = revacc[hi_i - lo_i]
        fresh_l, fresh_g = logmu_a[i], span_full
        if i:
            idx = hi_i - hi[:i] - 1
            incr = np.where(hi[:i] >= lo_i - 1,
                            np.where(idx >= 0, revacc[np.maximum(idx, 0)],
                                     -np.inf),
                            span_full)
            lpos = np.logaddexp(llog[:i], logmu_a[i])
            lneg = np.logaddexp(glog[:i], incr)
            keys = _signed_sortkey(lpos, lneg)
            j = int(np.argmax(keys))
            if keys[j] > _signed_sortkey(np.array([fresh_l]),
                                         np.array([fresh_g]))[0]:
                parent[i] = j
                llog[i], glog[i] = lpos[j], lneg[j]
                continue
        llog[i], glog[i] = fresh_l, fresh_g
    return parent


def _mindp_chains(logmu_a: np.ndarray, lognu: np.ndarray, lo: np.ndarray,
                  hi: np.ndarray) -> np.ndarray:
    """Parent pointers of best chains for nu(Gamma(E)) + mu(rows left out).

    The score is a sum of nonnegative masses, so it accumulates as plain
    log-sums; the trailing skipped rows past the last included one are a
    common additive term per endpoint and are settled by the caller's exact
    re-evaluation.
    """
    m = len(logmu_a)
    glog = np.empty(m)
    slog = np.empty(m)
    parent = np.full(m, -1, dtype=np.int64)
    prefmu = np.concatenate(
        [[-np.inf], np.logaddexp.accumulate(logmu_a)])
    for i in range(m):
        hi_i, lo_i = int(hi[i]), int(lo[i])
        revacc = np.logaddexp.accumulate(lognu[hi_i::-1])
        span_full = revacc[hi_i - lo_i]
        fresh_g, fresh_s = span_full, prefmu[i]
        if i:
            idx = hi_i - hi[:i] - 1
            incr = np.where(hi[:i] >= lo_i - 1,
                            np.where(idx >= 0, revacc[np.maximum(idx, 0)],
                                     -np.inf),
                            span_full)
            revmu = np.logaddexp.accumulate(logmu_a[i - 1::-1])
            skip_idx = i - 2 - np.arange(i)
            skip = np.where(skip_idx >= 0, revmu[np.maximum(skip_idx, 0)],
                            -np.inf)
            gcand = np.logaddexp(glog[:i], incr)
            scand = np.logaddexp(slog[:i], skip)
            keys = np.logaddexp(gcand, scand)
            j = int(np.argmin(keys))
            if keys[j] < np.logaddexp(fresh_g, fresh_s):
                parent[i] = j
                glog[i], slog[i] = gcand[j], scand[j]
                continue
        glog[i], slog[i] = fresh_g, fresh_s
    return parent


def _chain_members(parent: np.ndarray, i: int) -> list[int]:
    out = []
    while i >= 0:
        out.append(i)
        i = parent[i]
    out.reverse()
    return out


def _merge_spans(chain, lo, hi):
    spans = []
    for i in chain:
        if spans and lo[i] <= spans[-1][1] + 1:
            spans[-1][1] = max(spans[-1][1], hi[i])
        else:
            spans.append([int(lo[i]), int(hi[i])])
    return spans


def _span_indices(spans) -> np.ndarray:
    if not spans:
        return np.empty(0, dtype=np.int64)
    return np.concatenate([np.arange(a, b + 1) for a, b in spans])


def _lse(logs: np.ndarray) -> float:
    if logs.size == 0:
        return -math.inf
    return float(logsumexp(logs))


def _witness_values(chain, view, logmu, lognu):
    """Exact (direct, complement-sum) values of one witness chain.

    direct   = mu(E) - nu(Gamma(E)), evaluated through whichever of the two
               algebraically equal forms sums the smaller masses;
    comp_sum = mu(E^c) + nu(Gamma(E)), the matching bound on 1 - G
               (a sum of same-sign terms, so it never cancels).
    """
    act, lo, hi, empty = view
    rows = act[chain] if len(chain) else np.empty(0, dtype=np.int64)
    rows_e = np.concatenate([rows, empty])
    spans = _merge_spans(chain, lo, hi)
    gamma = _span_indices(spans)
    in_e = np.zeros(len(logmu), dtype=bool)
    in_e[rows_e] = True
    in_g = np.zeros(len(lognu), dtype=bool)
    in_g[gamma] = True
    l_e = _lse(logmu[in_e])
    l_ec = _lse(logmu[~in_e])
    l_g = _lse(lognu[in_g])
    l_gc = _lse(lognu[~in_g])
    mass_e = math.exp(l_e) if l_e > -math.inf else 0.0
    if mass_e > 0.5:
        direct = math.exp(l_gc) - math.exp(l_ec)
    else:
        direct = mass_e - math.exp(l_g)
    comp_sum = math.exp(l_ec) + math.exp(l_g)
    return direct, comp_sum


def _side_candidates(logmu, lognu, adm):
    """All per-chain witness evaluations for one orientation, or None."""
    view = _banded_view(adm)
    if view is None:
        return None
    act, lo, hi, empty = view
    logmu_a = logmu[act]
    g_vals, comp_vals = [], []
    for dp in (_maxdp_chains, _mindp_chains):
        parent = dp(logmu_a, lognu, lo, hi)
        for i in range(len(act)):
            chain = _chain_members(parent, i)
            direct, comp_sum = _witness_values(chain, view, logmu, lognu)
            g_vals.append(direct)
            comp_vals.append(comp_sum)
    # The empty-active-chain witness (only always-free rows included).
    direct, comp_sum = _witness_values([], view, logmu, lognu)
    g_vals.append(direct)
    comp_vals.append(comp_sum)
    return g_vals, comp_vals


def _lattice_ecp_banded(logmu, lognu, adm):
    a = _side_candidates(logmu, lognu, adm)
    b = _side_candidates(lognu, logmu, adm.T)
    if a is None or b is None:
        return None
    g = max(0.0, max(a[0]), max(b[0]))
    comp = min(1.0, min(a[1]), min(b[1]))
    return min(g, 1.0), max(comp, 0.0)


def _lattice_ecp_dense(logmu, lognu, adm):
    if adm.size > DENSE_GUARD:
        raise SizeGuardError(
            f"dense outer flow needs {adm.size} cells; no banded structure found"
        )
    mu_lin = np.exp(logmu)
    nu_lin = np.exp(lognu)
    _, _, witness = flow.bipartite_max_flow(mu_lin, nu_lin, adm)
    rows = np.fromiter(witness, dtype=np.int64) if witness else np.empty(0, np.int64)
    in_e = np.zeros(len(logmu), dtype=bool)
    in_e[rows] = True
    in_g = adm[in_e].any(axis=0) if rows.size else np.zeros(len(lognu), bool)
    l_e, l_ec = _lse(logmu[in_e]), _lse(logmu[~in_e])
    l_g, l_gc = _lse(lognu[in_g]), _lse(lognu[~in_g])
    mass_e = math.exp(l_e) if l_e > -math.inf else 0.0
    if mass_e > 0.5:
        g = math.exp(l_gc) - math.exp(l_ec)
    else:
        g = mass_e - math.exp(l_g)
    comp = math.exp(l_ec) + math.exp(l_g)
    return min(max(g, 0.0), 1.0), min(max(comp, 0.0), 1.0)


def gn_tails(p_x: Dist, p_y: Dist, c: CostMatrix, alpha: float,
             n: int) -> tuple[float, float]:
    """(G, 1-G) for the n-fold product problem, each summed on its own scale.

    The pair is computed from dual witnesses rather than from each other, so
    both stay meaningful when one of them is at the 1e-300 scale.
    """
    inst = nested_instance(p_x, p_y, c, n)
    adm = inst.inner_cost <= alpha + ADMISS_EPS
    if not adm.any():
        return 1.0, 0.0
    logmu, lognu = inst.mu.logmass, inst.nu.logmass
    banded = _lattice_ecp_banded(logmu, lognu, adm)
    if banded is not None:
        return banded
    return _lattice_ecp_dense(logmu, lognu, adm)


def exact_gn(p_x: Dist, p_y: Dist, c: CostMatrix, alpha: float, n: int) -> float:
    """G_alpha(P_X^n, P_Y^n), exactly, through the nested formula."""
    return gn_tails(p_x, p_y, c, alpha, n)[0]


def direct_gn_oracle(p_x: Dist, p_y: Dist, c: CostMatrix, alpha: float,
                     n: int) -> float:
    """The same probability solved on the raw product space (tests only)."""
    kx, ky = c.shape
    if kx ** n * ky ** n > 1_000_000:
        raise SizeGuardError(
            f"product space has {kx ** n * ky ** n} cells, beyond the guard"
        )
    xs = list(itertools.product(range(kx), repeat=n))
    ys = list(itertools.product(range(ky), repeat=n))
    px = np.array([math.prod(p_x.mass[s] for s in seq) for seq in xs])
    py = np.array([math.prod(p_y.mass[s] for s in seq) for seq in ys])
    carr = c.as_array()
    cost = np.array([[sum(carr[a, b] for a, b in zip(sx, sy)) / n
                      for sy in ys] for sx in xs])
    adm = cost <= alpha + ADMISS_EPS
    value, _, _ = flow.bipartite_max_flow(px, py, adm)
    return max(0.0, 1.0 - value)


def optimal_outer_plan(instance: NestedInstance, alpha: float) -> JointDist:
    """An optimal coupling of the two type laws for the outer problem."""
    inner = CostMatrix.from_rows(instance.inner_cost)
    return ecp(instance.mu.as_dist(), instance.nu.as_dist(), inner, alpha).plan


# ---------------------------------------------------------------------------
# Coupling constructions.
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def _optimal_joint_type(tx: tuple, ty: tuple, c: CostMatrix) -> tuple:
    """The lexicographically smallest cost-optimal integer coupling of types.

    Transportation polytopes with integer marginals have integer vertices, so
    each sequential lexicographic minimization lands on an integer; the
    result is rounded and re-verified.
    """
    m, k = len(tx), len(ty)
    carr = c.as_array().reshape(-1)
    a_eq = np.zeros((m + k, m * k))
    for i in range(m):
        a_eq[i, i * k:(i + 1) * k] = 1.0
    for j in range(k):
        a_eq[m + j, j::k] = 1.0
    b_eq = np.concatenate([np.array(tx, float), np.array(ty, float)])
    res = linprog(carr, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise ValidationError("inner type coupling LP failed")
    vstar = res.fun
    fixed: list[tuple[int, float]] = []
    values = []
    for cell in range(m * k):
        obj = np.zeros(m * k)
        obj[cell] = 1.0
        a_extra = np.zeros((len(fixed), m * k))
        for r, (cj, _) in enumerate(fixed):
            a_extra[r, cj] = 1.0
        a = np.vstack([a_eq, a_extra]) if fixed else a_eq
        b = np.concatenate([b_eq, np.array([v for _, v in fixed])]) if fixed else b_eq
        res = linprog(obj, A_ub=carr.reshape(1, -1), b_ub=[vstar + 1e-7],
                      A_eq=a, b_eq=b, bounds=(0, None), method="highs")
        if res.status != 0:
            raise ValidationError("lexicographic tie-break LP failed")
        val = round(res.fun)
        fixed.append((cell, float(val)))
        values.append(int(val))
    mat = tuple(tuple(values[i * k + j] for j in range(k)) for i in range(m))
    if (any(v < 0 for row in mat for v in row)
            or [sum(row) for row in mat] != list(tx)
            or [sum(col) for col in zip(*mat)] != list(ty)):
        raise ValidationError("tie-broken inner coupling failed verification")
    total_cost = sum(v * cv for v, cv in zip(values, carr))
    if total_cost > vstar + 1e-6:
        raise ValidationError("tie-broken inner coupling lost optimality")
    return mat


class TypeClassSampler:
    """Samples (x^n, y^n) pairs realizing an outer coupling of type laws.

    For each drawn type pair the emitted sequences are a uniformly shuffled
    arrangement of the optimal inner joint type, which makes the sequence
    marginals exactly the product laws while the excess-cost event keeps the
    outer coupling's probability.
    """

    def __init__(self, trips, n: int):
        self._trips = trips  # list of (prob, joint_counts_matrix)
        self.n = n
        self._cum = list(itertools.accumulate(p for p, _ in trips))

    def sample(self, rng: random.Random) -> tuple[tuple, tuple]:
        u = rng.random() * self._cum[-1]
        idx = bisect_right(self._cum, u)
        idx = min(idx, len(self._trips) - 1)
        _, mat = self._trips[idx]
        pairs = [(i, j) for i, row in enumerate(mat)
                 for j, v in enumerate(row) for _ in range(v)]
        rng.shuffle(pairs)
        xs, ys = zip(*pairs)
        return tuple(xs), tuple(ys)

    def law(self) -> dict:
        """Exact sampler law as {(x_seq, y_seq): probability}; small n only."""
        total_arrangements = 0
        for _, mat in self._trips:
            flat = [v for row in mat for v in row]
            total_arrangements += _multinomial(self.n, flat)
        if total_arrangements > 200_000:
            raise SizeGuardError(
                f"law enumeration needs {total_arrangements} arrangements"
            )
        out: dict = {}
        for prob, mat in self._trips:
            pairs = Counter()
            for i, row in enumerate(mat):
                for j, v in enumerate(row):
                    if v:
                        pairs[(i, j)] += v
            count = _multinomial(self.n, list(pairs.values()))
            share = prob / count
            for arrangement in _multiset_permutations(pairs, self.n):
                xs, ys = zip(*arrangement)
                key = (tuple(xs), tuple(ys))
                out[key] = out.get(key, 0.0) + share
        return out


def _multinomial(n: int, parts) -> int:
    out = math.factorial(n)
    for p in parts:
        out //= math.factorial(p)
    return out


def _multiset_permutations(counter: Counter, n: int):
    if n == 0:
        yield ()
        return
    for item in sorted(counter):
        if counter[item] == 0:
            continue
        counter[item] -= 1
        for rest in _multiset_permutations(counter, n - 1):
            yield (item,) + rest
        counter[item] += 1


def lift_coupling(pi: JointDist, instance: NestedInstance) -> TypeClassSampler:
    """Realize an outer type coupling as a sampler of sequence pairs."""
    lx, ly = len(instance.mu), len(instance.nu)
    if pi.shape != (lx, ly):
        raise ValidationError(
            f"coupling is {pi.shape} but lattices have sizes {lx}, {ly}"
        )
    mx = np.array(pi.marginal_x())
    my = np.array(pi.marginal_y())
    if (np.abs(mx - instance.mu.mass()).max() > 1e-9
            or np.abs(my - instance.nu.mass()).max() > 1e-9):
        raise ValidationError("coupling marginals do not match the type laws")
    trips = []
    mat = pi.as_array()
    for i, j in np.argwhere(mat > 0.0):
        tx = instance.mu.lattice[int(i)].counts
        ty = instance.nu.lattice[int(j)].counts
        joint = _optimal_joint_type(tx, ty, instance.cost)
        trips.append((float(mat[i, j]), joint))
    return TypeClassSampler(trips, instance.n)


def splitting_coupling(mu: TypeMeasure, nu: TypeMeasure, a_set,
                       b_set) -> JointDist:
    """Mixture coupling with guaranteed mass on a target rectangle.

    With p = min(mu(A), nu(B)), couples the conditional laws on A x B with
    weight p and the normalized leftovers as an independent product with
    weight 1 - p; the result has marginals (mu, nu) and puts at least p on
    A x B.
    """
    lx, ly = len(mu), len(nu)
    if lx * ly > 4_000_000:
        raise SizeGuardError("splitting matrix would be too large")
    mvec = mu.mass()
    nvec = nu.mass()
    a_mask = np.zeros(lx, dtype=bool)
    a_mask[np.fromiter((int(i) for i in a_set), dtype=np.int64,
                       count=len(a_set))] = True
    b_mask = np.zeros(ly, dtype=bool)
    b_mask[np.fromiter((int(j) for j in b_set), dtype=np.int64,
                       count=len(b_set))] = True
    pa = float(mvec[a_mask].sum())
    pb = float(nvec[b_mask].sum())
    p = min(pa, pb)
    if p <= 1e-300:
        return JointDist.from_array(np.outer(mvec, nvec))
    mu_a = np.where(a_mask, mvec, 0.0) / pa
    nu_b = np.where(b_mask, nvec, 0.0) / pb
    if p >= 1.0 - 1e-15:
        return JointDist.from_array(np.outer(mu_a, nu_b))
    mu_rest = (mvec - p * mu_a) / (1.0 - p)
    nu_rest = (nvec - p * nu_b) / (1.0 - p)
    out = p * np.outer(mu_a, nu_b) + (1.0 - p) * np.outer(mu_rest, nu_rest)
    return JointDist.from_array(np.clip(out, 0.0, None))


def exponent_series(p_x: Dist, p_y: Dist, c: CostMatrix, alpha_fn,
                    n_list, mode: str) -> RateCurve:
    """Exponential decay estimates -(1/n) log of the relevant tail.

    ``mode`` is "lower-tail" (the tail is 1 - G, mass failing to exceed
    alpha) or "upper-tail" (the tail is G itself).  A zero tail yields the
    +inf sentinel for that n.
    """
    if mode not in ("lower-tail", "upper-tail"):
        raise ValidationError(f"unknown mode {mode!r}")
    ns = [int(v) for v in n_list]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValidationError("n values must be strictly increasing")
    alphas, gs, comps, es = [], [], [], []
    for n in ns:
        alpha = float(alpha_fn(n))
        g, comp = gn_tails(p_x, p_y, c, alpha, n)
        tail = comp if mode == "lower-tail" else g
        e = math.inf if tail <= 0.0 else -math.log(tail) / n
        alphas.append(alpha)
        gs.append(g)
        comps.append(comp)
        es.append(e)
    return RateCurve(
        params=tuple(float(n) for n in ns),
        values=tuple(es),
        meta={"kind": f"exponent-series:{mode}", "alpha": tuple(alphas),
              "gn": tuple(gs), "complement": tuple(comps)},
    )

"""Exhaustive ground truth for small instances.

Optimal adaptive policies, the adaptive monotonicity ratio, the
submodularity and monotonicity checkers, the approximation-bound formulas and
end-to-end certification of the two policies.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidArgument, TooLarge
from .evaluation import exact_favg
from .model import CARDINALITY, KNAPSACK, Instance, Psi, is_zero, mask_items, psi_add
from .policies import (
    STOP_TREE,
    AdaptiveRandomGreedy,
    BestSingleton,
    PolicyTree,
    RandomSubsetDensityGreedy,
    SamplingDensityGreedy,
    TreePolicy,
    compose,
)
from .utility import expectations

TOL = 1e-9
DEFAULT_MAX_ITEMS = 8
DEFAULT_TREE_LIMIT = 10**7

__all__ = [
    "PolicyTree",
    "Witness",
    "BoundReport",
    "RatioReport",
    "optimal_policy",
    "enumerate_policies",
    "count_policies",
    "monotonicity_ratio",
    "monotonicity_ratio_bruteforce",
    "worst_continuations",
    "check_adaptive_submodular",
    "check_adaptive_monotone",
    "ratio_bound",
    "certify",
    "InequalityCheck",
    "sample_greedy_check",
    "disjoint_union_check",
    "half_sample_check",
]


# -- optimal policy -----------------------------------------------------------

def optimal_policy(instance: Instance, max_items: int = DEFAULT_MAX_ITEMS) -> tuple:
    """Best budget-feasible adaptive policy, by DP over (psi, remaining budget).

    Ties prefer stopping, then the lowest item index.  Returns ``(tree, value)``.
    """
    if instance.n > max_items:
        raise TooLarge(f"optimal_policy is limited to {max_items} items")
    ex = expectations(instance)
    costs = instance.costs
    q = len(instance.state_space)
    memo: dict = {}

    def solve(psi: Psi, budget):
        key = (psi, budget)
        if key in memo:
            return memo[key]
        best_v, best_t = ex.expected(psi), STOP_TREE
        observed = {e for e, _ in psi}
        for e in range(instance.n):
            if e in observed or costs[e] > budget:
                continue
            probs = dict(ex.state_probs(e, psi))
            v = Fraction(0)
            kids = []
            for s in range(q):
                if s in probs:
                    cv, ct = solve(psi_add(psi, e, s), budget - costs[e])
                    v += probs[s] * cv
                    kids.append(ct)
                else:
                    kids.append(STOP_TREE)
            if v > best_v:
                best_v, best_t = v, PolicyTree(e, tuple(kids))
        memo[key] = (best_v, best_t)
        return memo[key]

    value, tree = solve((), instance.budget)
    return tree, value


# -- policy enumeration -------------------------------------------------------

def count_policies(instance: Instance, budget=None) -> int:
    """Number of structurally distinct deterministic trees (incl. the empty one)."""
    costs = instance.costs
    q = len(instance.state_space)
    memo: dict = {}

    def count(remaining: int, left) -> int:
        key = (remaining, left)
        if key not in memo:
            total = 1
            for e in mask_items(remaining):
                if left is None or costs[e] <= left:
                    total += count(remaining & ~(1 << e), None if left is None else left - costs[e]) ** q
            memo[key] = total
        return memo[key]

    return count((1 << instance.n) - 1, budget)


def _guard(instance: Instance, budget, limit: int):
    total = count_policies(instance, budget)
    if total > limit:
        raise TooLarge(f"{total} policy trees exceed the enumeration limit {limit}")
    return total


def enumerate_policies(instance: Instance, budget=None, limit: int = DEFAULT_TREE_LIMIT):
    """Yield every deterministic policy tree whose every path costs at most
    ``budget`` (``None``: unrestricted).  Stop comes first, then trees rooted at
    lower item indices; children vary in lexicographic order."""
    _guard(instance, budget, limit)
    costs = instance.costs
    q = len(instance.state_space)
    memo: dict = {}

    def trees(remaining: int, left) -> list:
        key = (remaining, left)
        if key not in memo:
            out = [STOP_TREE]
            for e in mask_items(remaining):
                if left is not None and costs[e] > left:
                    continue
                sub = trees(remaining & ~(1 << e), None if left is None else left - costs[e])
                out.extend(PolicyTree(e, kids) for kids in itertools.product(sub, repeat=q))
            memo[key] = out
        return memo[key]

    yield from trees((1 << instance.n) - 1, budget)


# -- monotonicity ratio -------------------------------------------------------

@dataclass(frozen=True)
class RatioReport:
    m_raw: float
    m: float
    policy: PolicyTree
    continuation: PolicyTree
    numerator: object  # f_avg(policy @ continuation)
    denominator: object  # f_avg(policy)
    budget_feasible: bool
    n_policies: int


class _Tables:
    """Float lookup tables shared by the vectorized computations."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.atoms = list(instance.prior.atoms())
        self.phis = [phi for phi, _ in self.atoms]
        self.p = np.array([float(p) for _, p in self.atoms])
        n = instance.n
        f = instance.utility
        self.F = np.array([[float(f.value(mask, phi)) for phi in self.phis] for mask in range(1 << n)])
        self.q = len(instance.state_space)
        self.cols = np.arange(len(self.atoms))
        self._assign: dict = {}

    def assignment_index(self, dom: int) -> np.ndarray:
        """Per atom, the index of its restriction to ``dom`` (mixed radix over
        the items of ``dom`` in increasing order)."""
        got = self._assign.get(dom)
        if got is None:
            idx = np.zeros(len(self.atoms), dtype=np.int64)
            for j, e in enumerate(mask_items(dom)):
                idx += np.array([phi[e] for phi in self.phis], dtype=np.int64) * self.q**j
            got = self._assign[dom] = idx
        return got


def _outcome_maps(instance: Instance, tables: _Tables, budget) -> dict:
    """Distinct outcome maps of all deterministic trees.

    An outcome map lists, for every positive-probability realization, the set
    the tree selects.  Returns ``{map: representative tree}``.
    """
    costs = instance.costs
    q = tables.q
    phis = tables.phis
    memo: dict = {}

    def maps(psi: Psi, idxs: tuple, left) -> dict:
        key = (psi, left)
        if key in memo:
            return memo[key]
        out = {(0,) * len(idxs): STOP_TREE}
        observed = {e for e, _ in psi}
        for e in range(instance.n):
            if e in observed or (left is not None and costs[e] > left):
                continue
            nleft = None if left is None else left - costs[e]
            child_maps = []
            where = []  # for each position in idxs: (state, position in child list)
            by_state = [[] for _ in range(q)]
            for a in idxs:
                s = phis[a][e]
                where.append((s, len(by_state[s])))
                by_state[s].append(a)
            for s in range(q):
                if by_state[s]:
                    child_maps.append(list(maps(psi_add(psi, e, s), tuple(by_state[s]), nleft).items()))
                else:
                    child_maps.append([((), STOP_TREE)])
            bit = 1 << e
            for combo in itertools.product(*child_maps):
                m = tuple(combo[s][0][j] | bit for s, j in where)
                if m not in out:
                    out[m] = PolicyTree(e, tuple(c[1] for c in combo))
        memo[key] = out
        return out

    return maps((), tuple(range(len(phis))), budget)


def _min_continuation(instance: Instance, tables: _Tables, A: np.ndarray, budget=None, allowed: int | None = None):
    """For each row of ``A`` (an outcome map), min over deterministic
    continuations B of sum_phi p(phi) f(A(phi) | B(phi), phi).

    The continuation starts from empty observations; it may re-select items the
    first policy already holds.  ``allowed`` restricts the items it may select,
    ``budget`` bounds its own total cost.
    """
    n = instance.n
    q = tables.q
    costs = instance.costs
    full = (1 << n) - 1
    allowed = full if allowed is None else allowed
    pw = tables.p[None, :]
    doms = [d for d in range(1 << n) if d & ~allowed == 0]
    if budget is not None:
        doms = [d for d in doms if instance.cost_of(d) <= budget]
    dom_set = set(doms)
    doms.sort(key=lambda d: -bin(d).count("1"))
    W: dict = {}
    for d in doms:
        k = bin(d).count("1")
        vals = tables.F[A | d, tables.cols] * pw
        aidx = tables.assignment_index(d)
        stop = np.zeros((A.shape[0], q**k))
        for col in range(q**k):
            hit = aidx == col
            if hit.any():
                stop[:, col] = vals[:, hit].sum(axis=1)
        best = stop
        items = mask_items(d)
        for e in mask_items(allowed & ~d):
            child = d | 1 << e
            if child not in dom_set:
                continue
            # position of e among the items of child
            j = sum(1 for x in items if x < e)
            cont = np.zeros_like(stop)
            for col in range(q**k):
                low = col % q**j
                high = col // q**j
                for s in range(q):
                    ccol = low + s * q**j + high * q ** (j + 1)
                    cont[:, col] += W[child][:, ccol]
            best = np.minimum(best, cont)
        W[d] = best
    return W[0][:, 0]


def _continuation_tree(instance: Instance, outcome: dict, budget=None, allowed: int | None = None):
    """Exact scalar version of ``_min_continuation`` for one outcome map given
    as ``{phi: mask}``; returns ``(value, tree)``.  Ties prefer shallower
    trees, then lower item indices."""
    ex = expectations(instance)
    f = instance.utility
    costs = instance.costs
    q = len(instance.state_space)
    allowed = (1 << instance.n) - 1 if allowed is None else allowed
    memo: dict = {}

    def solve(psi: Psi, spent):
        if psi in memo:
            return memo[psi]
        dom = 0
        for e, _ in psi:
            dom |= 1 << e
        best_v = sum((p * f.value(outcome[phi] | dom, phi) for phi, p in ex.atoms(psi)), Fraction(0))
        best_t = STOP_TREE
        for e in mask_items(allowed & ~dom):
            if budget is not None and spent + costs[e] > budget:
                continue
            probs = dict(ex.state_probs(e, psi))
            v = Fraction(0)
            kids = []
            for s in range(q):
                if s in probs:
                    cv, ct = solve(psi_add(psi, e, s), spent + costs[e])
                    v += probs[s] * cv
                    kids.append(ct)
                else:
                    kids.append(STOP_TREE)
            tree = PolicyTree(e, tuple(kids))
            if v < best_v or (v == best_v and tree.depth() < best_t.depth()):
                best_v, best_t = v, tree
        memo[psi] = (best_v, best_t)
        return memo[psi]

    return solve((), 0)


def _map_arrays(instance: Instance, budget, limit: int):
    n_trees = _guard(instance, budget, limit)
    tables = _Tables(instance)
    maps = _outcome_maps(instance, tables, budget)
    keys = list(maps)
    A = np.array(keys, dtype=np.int64).reshape(len(keys), len(tables.atoms))
    return tables, A, [maps[k] for k in keys], n_trees


def worst_continuations(instance: Instance, budget_feasible: bool = False, limit: int = DEFAULT_TREE_LIMIT):
    """For every distinct first policy pi: ``(tree, min_pi' f_avg(pi @ pi'), f_avg(pi))``
    in floating point.  A pair-by-pair envelope check reduces to these rows."""
    budget = instance.budget if budget_feasible else None
    tables, A, trees, _ = _map_arrays(instance, budget, limit)
    num = _min_continuation(instance, tables, A, budget)
    den = (tables.F[A, tables.cols] * tables.p[None, :]).sum(axis=1)
    return list(zip(trees, num.tolist(), den.tolist()))


def monotonicity_ratio(instance: Instance, budget_feasible: bool = False, limit: int = DEFAULT_TREE_LIMIT) -> RatioReport:
    """min over deterministic (pi, pi') of f_avg(pi @ pi') / f_avg(pi), ratio 1
    where f_avg(pi) = 0.

    Every first policy pi is enumerated (deduplicated by outcome map); for each
    one the worst continuation pi' is found exactly by DP over pi''s own
    observations.  With ``budget_feasible`` both policies must respect the
    instance budget on every path.
    """
    budget = instance.budget if budget_feasible else None
    tables, A, trees, n_trees = _map_arrays(instance, budget, limit)
    num = _min_continuation(instance, tables, A, budget)
    den = (tables.F[A, tables.cols] * tables.p[None, :]).sum(axis=1)
    live = den > 1e-12
    if not live.any():
        return RatioReport(1.0, 1.0, STOP_TREE, STOP_TREE, 0, 0, budget_feasible, n_trees)
    ratios = np.where(live, num / np.where(live, den, 1.0), np.inf)
    i = int(np.argmin(ratios))
    outcome = {phi: int(A[i, j]) for j, phi in enumerate(tables.phis)}
    ex = expectations(instance)
    value, cont = _continuation_tree(instance, outcome, budget)
    denom = sum((p * instance.utility.value(outcome[phi], phi) for phi, p in ex.atoms(())), Fraction(0))
    m_raw = float(value / denom)
    return RatioReport(m_raw, min(max(m_raw, 0.0), 1.0), trees[i], cont, value, denom, budget_feasible, n_trees)


def monotonicity_ratio_bruteforce(instance: Instance, budget_feasible: bool = False, limit: int = 10**4) -> tuple:
    """Pairwise enumeration of all deterministic trees; independent of the DP
    route.  Returns ``(m_raw, pi, pi', pair_table)`` where ``pair_table`` maps
    (i, j) tree indices to ``(f_avg(pi_i @ pi_j), f_avg(pi_i))``."""
    budget = instance.budget if budget_feasible else None
    trees = list(enumerate_policies(instance, budget, limit))
    atoms = list(instance.prior.atoms())
    f = instance.utility
    outcomes = [[t.outcome(phi) for phi, _ in atoms] for t in trees]
    cache: dict = {}

    def fv(mask, j):
        key = (mask, j)
        if key not in cache:
            cache[key] = f.value(mask, atoms[j][0])
        return cache[key]

    base = [sum((atoms[j][1] * fv(o[j], j) for j in range(len(atoms))), Fraction(0)) for o in outcomes]
    best = (None, None, None)
    table = {}
    for i, oi in enumerate(outcomes):
        for j, oj in enumerate(outcomes):
            joint = sum((atoms[u][1] * fv(oi[u] | oj[u], u) for u in range(len(atoms))), Fraction(0))
            table[i, j] = (joint, base[i])
            r = Fraction(1) if is_zero(base[i]) else joint / base[i]
            if best[0] is None or r < best[0]:
                best = (r, trees[i], trees[j])
    return best[0], best[1], best[2], table, trees


# -- property checkers --------------------------------------------------------

@dataclass(frozen=True)
class Witness:
    """A violated inequality ``lhs >= rhs`` (up to tolerance)."""

    kind: str  # "submodularity" | "monotonicity"
    psi: Psi
    psi_prime: Psi | None
    item: int
    lhs: object
    rhs: object

    def reproduce(self, instance: Instance, tol: float = TOL) -> bool:
        ex = expectations(instance)
        lhs = ex.item(self.item, self.psi)
        rhs = ex.item(self.item, self.psi_prime) if self.kind == "submodularity" else 0
        return lhs == self.lhs and rhs == self.rhs and lhs < rhs - tol

    def describe(self, instance: Instance) -> str:
        def fmt(psi):
            states = instance.state_space.states
            return "{" + ",".join(f"{instance.items[e].id}:{states[s]}" for e, s in psi) + "}"

        item = instance.items[self.item].id
        if self.kind == "submodularity":
            return f"D({item}|{fmt(self.psi)})={float(self.lhs):.12g} < D({item}|{fmt(self.psi_prime)})={float(self.rhs):.12g}"
        return f"D({item}|{fmt(self.psi)})={float(self.lhs):.12g} < 0"


def positive_partial_realizations(instance: Instance) -> list:
    """All psi with Pr[Phi ~ psi] > 0, by domain size, then domain, then states."""
    phis = instance.support()
    out = []
    for size in range(instance.n + 1):
        for dom in itertools.combinations(range(instance.n), size):
            seen = sorted({tuple(phi[e] for e in dom) for phi in phis})
            out.extend(tuple(zip(dom, states)) for states in seen)
    return out


def check_adaptive_submodular(instance: Instance, tol: float = TOL, max_items: int = DEFAULT_MAX_ITEMS):
    """None if Delta(e|psi) >= Delta(e|psi') - tol for all psi <= psi' and
    e outside dom(psi'); otherwise the first violation."""
    if instance.n > max_items:
        raise TooLarge(f"checker is limited to {max_items} items")
    ex = expectations(instance)
    for psi_p in positive_partial_realizations(instance):
        observed = {e for e, _ in psi_p}
        for size in range(len(psi_p)):
            for psi in itertools.combinations(psi_p, size):
                for e in range(instance.n):
                    if e in observed:
                        continue
                    lhs, rhs = ex.item(e, psi), ex.item(e, psi_p)
                    if lhs < rhs - tol:
                        return Witness("submodularity", psi, psi_p, e, lhs, rhs)
    return None


def check_adaptive_monotone(instance: Instance, tol: float = TOL, max_items: int = DEFAULT_MAX_ITEMS):
    """None if Delta(e|psi) >= -tol everywhere; otherwise the first violation."""
    if instance.n > max_items:
        raise TooLarge(f"checker is limited to {max_items} items")
    ex = expectations(instance)
    for psi in positive_partial_realizations(instance):
        observed = {e for e, _ in psi}
        for e in range(instance.n):
            if e not in observed:
                d = ex.item(e, psi)
                if d < -tol:
                    return Witness("monotonicity", psi, None, e, d, 0)
    return None


# -- bounds and certification -------------------------------------------------

def ratio_bound(m, constraint: str):
    """m(1 - 1/e) + (1 - m)/e under a cardinality constraint, (m + 1)/10 under
    a knapsack constraint."""
    if not 0 <= m <= 1:
        raise InvalidArgument(f"m must lie in [0, 1], got {m}")
    if constraint == CARDINALITY:
        return m * (1 - 1 / math.e) + (1 - m) * (1 / math.e)
    if constraint == KNAPSACK:
        return (m + 1) / 10
    raise InvalidArgument(f"unknown constraint {constraint!r}")


BOUND_CONSTRAINT = {"arg": CARDINALITY, "sad": KNAPSACK}


@dataclass(frozen=True)
class BoundReport:
    m: float
    opt_value: object
    policy_value: object
    theoretical_ratio: float
    achieved_ratio: float | None
    passed: bool
    constraint: str
    policy_id: str


def certify(instance: Instance, policy_id: str, m: float | None = None, opt=None, tol: float = TOL) -> BoundReport:
    """Check f_avg(policy) >= bound(m) * f_avg(opt) - 1e-9 exactly.

    ``m`` and ``opt`` may be passed in to reuse earlier oracle results.
    """
    if policy_id not in BOUND_CONSTRAINT:
        raise InvalidArgument(f"no approximation bound for policy {policy_id!r}")
    if m is None:
        m = monotonicity_ratio(instance).m
    if opt is None:
        opt = optimal_policy(instance)[1]
    policy = AdaptiveRandomGreedy(instance) if policy_id == "arg" else SamplingDensityGreedy(instance)
    value = exact_favg(instance, policy).value
    constraint = BOUND_CONSTRAINT[policy_id]
    bound = ratio_bound(m, constraint)
    achieved = float(value) / float(opt) if opt > 0 else None
    passed = float(value) >= bound * float(opt) - tol
    return BoundReport(m, opt, value, bound, achieved, passed, constraint, policy_id)


# -- intermediate inequalities of the knapsack guarantee --------------------

@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs - TOL


def sample_greedy_check(instance: Instance, opt_tree: PolicyTree | None = None) -> InequalityCheck:
    """4 f_avg(pi2) + f(e*) >= f_avg(opt @ pi2)."""
    if opt_tree is None:
        opt_tree = optimal_policy(instance)[0]
    pi2 = RandomSubsetDensityGreedy(instance)
    f2 = exact_favg(instance, pi2).value
    fe = BestSingleton(instance).value
    joint = exact_favg(instance, compose(TreePolicy(instance, opt_tree), pi2)).value
    return InequalityCheck("sample_greedy", float(4 * f2 + fe), float(joint))


def half_sample_check(instance: Instance, m: float, opt: tuple | None = None) -> InequalityCheck:
    """f_avg(opt @ pi2) >= (m + 1)/2 * f_avg(opt)."""
    tree, value = opt if opt is not None else optimal_policy(instance)
    pi2 = RandomSubsetDensityGreedy(instance)
    joint = exact_favg(instance, compose(TreePolicy(instance, tree), pi2)).value
    return InequalityCheck("half_sample", float(joint), (m + 1) / 2 * float(value))


def disjoint_union_check(instance: Instance, m: float, limit: int = DEFAULT_TREE_LIMIT) -> InequalityCheck:
    """Worst case over all triples with range(pi_b) and range(pi_c) disjoint of
    f_avg(a@b) + f_avg(a@c) - (1 + m) f_avg(a).

    Disjoint ranges fit inside some split (S, E \\ S), and for a fixed split the
    two terms are minimized independently, so the exhaustive minimum over
    triples is the minimum over a and S of the two restricted continuation
    minima.  Reported as an inequality ``lhs >= rhs`` at the worst triple.
    """
    tables, A, _, _ = _map_arrays(instance, None, limit)
    den = (tables.F[A, tables.cols] * tables.p[None, :]).sum(axis=1)
    full = (1 << instance.n) - 1
    restricted = {s: _min_continuation(instance, tables, A, None, s) for s in range(1 << instance.n)}
    worst = None
    for s in range(1 << instance.n):
        lhs = restricted[s] + restricted[full & ~s]
        rhs = (1 + m) * den
        i = int(np.argmin(lhs - rhs))
        if worst is None or lhs[i] - rhs[i] < worst[0] - worst[1]:
            worst = (float(lhs[i]), float(rhs[i]))
    return InequalityCheck("disjoint_union", worst[0], worst[1])

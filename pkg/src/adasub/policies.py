"""Adaptive policies.

A policy is a decision rule over its own observation history.  It is driven
through four hooks so that both the exact evaluator (which branches over every
random draw) and the trajectory runner (which samples) can use it:

``start()``
    distribution over initial internal contexts, ``[(p, ctx), ...]``.
``step(ctx)``
    distribution over the next action, ``[(p, action, ctx'), ...]`` where an
    action is an item index, ``NOOP`` or ``STOP``.
``observe(ctx, item, state)``
    context after seeing the state of the item just selected.
``draw_start(rng)`` / ``draw_step(ctx, rng)``
    sampled versions of the first two.  Subclasses override them where the
    order of random draws is part of the contract.

Contexts carry everything a policy knows, including its local partial
realization, so a policy never sees observations made by anyone else.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .errors import ConstraintMismatch, Infeasible, InvalidArgument
from .model import (
    CARDINALITY,
    NOOP,
    STOP,
    Instance,
    JointPrior,
    Psi,
    is_zero,
    mask_items,
    positive,
    psi_add,
)
from .utility import expectations

ONE = Fraction(1)


def _categorical(options, rng: random.Random):
    if len(options) == 1:
        return options[0]
    u = rng.random()
    acc = 0.0
    for opt in options:
        acc += float(opt[0])
        if u < acc:
            return opt
    return options[-1]


def draw_realization(instance: Instance, rng: random.Random) -> tuple:
    """Sample phi from the prior: one uniform per item in id order (independent
    priors) or a single uniform over the atom table (joint priors)."""
    prior = instance.prior
    if isinstance(prior, JointPrior):
        return _categorical([(p, phi) for phi, p in prior.table], rng)[1]
    phi = []
    for dist in prior.dists:
        options = [(p, s) for s, p in enumerate(dist) if not is_zero(p)]
        phi.append(_categorical(options, rng)[1])
    return tuple(phi)


class Policy:
    budget_feasible = True
    name = "policy"

    def __init__(self, instance: Instance):
        self.instance = instance
        self.ex = expectations(instance)

    def start(self):
        return [(ONE, None)]

    def step(self, ctx):
        raise NotImplementedError

    def observe(self, ctx, item: int, state: int):
        raise NotImplementedError

    def draw_start(self, rng: random.Random):
        return _categorical(self.start(), rng)[1]

    def draw_step(self, ctx, rng: random.Random):
        _, action, nxt = _categorical(self.step(ctx), rng)
        return action, nxt

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


@dataclass
class Trajectory:
    steps: list  # (action, observed state or None)
    selected: int  # bitmask
    utility: object
    seed: int | None = None
    realization: tuple = ()

    def items(self, instance: Instance) -> list:
        return instance.set_ids(self.selected)

    def selections(self) -> list:
        return [a for a, _ in self.steps if a is not NOOP]


def run_trajectory(policy: Policy, phi: tuple, rng: random.Random | int | None = None) -> Trajectory:
    """Execute one run of ``policy`` against the true realization ``phi``."""
    seed = rng if isinstance(rng, int) else None
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    inst = policy.instance
    ctx = policy.draw_start(rng)
    steps = []
    selected = 0
    while True:
        action, ctx = policy.draw_step(ctx, rng)
        if action is STOP:
            break
        if action is NOOP:
            steps.append((NOOP, None))
            continue
        state = phi[action]
        steps.append((action, state))
        selected |= 1 << action
        ctx = policy.observe(ctx, action, state)
    return Trajectory(steps, selected, inst.utility.value(selected, phi), seed, tuple(phi))


def _seeded_run(policy: Policy, seed: int, phi=None) -> Trajectory:
    rng = random.Random(seed)
    if phi is None:
        phi = draw_realization(policy.instance, rng)
    traj = run_trajectory(policy, phi, rng)
    traj.seed = seed
    return traj


# -- explicit decision trees ------------------------------------------------

@dataclass(frozen=True)
class PolicyTree:
    """Deterministic policy: select ``item``, then follow ``children[state]``.

    ``item is None`` marks a stop leaf.
    """

    item: int | None = None
    children: tuple = ()

    @property
    def is_stop(self) -> bool:
        return self.item is None

    def depth(self) -> int:
        if self.item is None:
            return 0
        return 1 + max(c.depth() for c in self.children)

    def max_cost(self, costs) -> object:
        if self.item is None:
            return 0
        return costs[self.item] + max(c.max_cost(costs) for c in self.children)

    def outcome(self, phi) -> int:
        """Selected set (bitmask) when the truth is ``phi``."""
        node, mask = self, 0
        while node.item is not None:
            mask |= 1 << node.item
            node = node.children[phi[node.item]]
        return mask

    def format(self, instance: Instance) -> str:
        if self.item is None:
            return "stop"
        states = instance.state_space.states
        kids = self.children
        head = instance.items[self.item].id
        if all(c == kids[0] for c in kids):
            return head if kids[0].is_stop else f"{head}>{kids[0].format(instance)}"
        inner = ",".join(f"{states[s]}:{c.format(instance)}" for s, c in enumerate(kids))
        return f"{head}{{{inner}}}"


STOP_TREE = PolicyTree()


def tree_select(instance: Instance, *items, then: PolicyTree | None = None) -> PolicyTree:
    """Tree that selects ``items`` in order regardless of states, then ``then``."""
    node = then or STOP_TREE
    q = len(instance.state_space)
    for e in reversed(items):
        idx = instance.index(e) if isinstance(e, str) else e
        node = PolicyTree(idx, (node,) * q)
    return node


class TreePolicy(Policy):
    name = "tree"

    def __init__(self, instance: Instance, tree: PolicyTree, name: str | None = None):
        super().__init__(instance)
        self.tree = tree
        self.budget_feasible = tree.max_cost(instance.costs) <= instance.budget
        if name:
            self.name = name

    def start(self):
        return [(ONE, self.tree)]

    def step(self, node):
        if node.item is None:
            return [(ONE, STOP, node)]
        return [(ONE, node.item, node)]

    def observe(self, node, item, state):
        return node.children[state]


def never_select(instance: Instance) -> TreePolicy:
    return TreePolicy(instance, STOP_TREE, name="never")


# -- composition ----------------------------------------------------------

class Composed(Policy):
    """``first @ second``: run ``first`` to termination, then ``second`` from a
    fresh start against the same underlying realization."""

    budget_feasible = False

    def __init__(self, first: Policy, second: Policy):
        if first.instance is not second.instance:
            raise InvalidArgument("cannot compose policies over different instances")
        super().__init__(first.instance)
        self.first = first
        self.second = second
        self.name = f"{first.name}@{second.name}"

    def start(self):
        return [(p, (0, c)) for p, c in self.first.start()]

    def step(self, ctx):
        phase, sub = ctx
        if phase == 1:
            return [(p, a, (1, c)) for p, a, c in self.second.step(sub)]
        out = []
        for p, a, c in self.first.step(sub):
            if a is STOP:
                for q, c2 in self.second.start():
                    out.extend((p * q * r, a2, nxt) for r, a2, nxt in self.step((1, c2)))
            else:
                out.append((p, a, (0, c)))
        return out

    def observe(self, ctx, item, state):
        phase, sub = ctx
        pol = self.second if phase else self.first
        return phase, pol.observe(sub, item, state)

    def draw_start(self, rng):
        return 0, self.first.draw_start(rng)

    def draw_step(self, ctx, rng):
        phase, sub = ctx
        if phase == 0:
            action, nxt = self.first.draw_step(sub, rng)
            if action is not STOP:
                return action, (0, nxt)
            phase, sub = 1, self.second.draw_start(rng)
        action, nxt = self.second.draw_step(sub, rng)
        return action, (1, nxt)


def compose(first: Policy, second: Policy) -> Composed:
    return Composed(first, second)


# -- adaptive random greedy (cardinality) ----------------------------------

def greedy_topk_set(instance: Instance, psi: Psi, k: int) -> tuple:
    """The k-slot candidate set M(psi).

    Returns ``(items, n_noop)``: the at most ``k`` unobserved items with the
    largest strictly positive marginals, best first (ties by item index), and
    the number of dummy slots padding the set to exactly ``k``.
    """
    if k < 1:
        raise InvalidArgument("k must be at least 1")
    ex = expectations(instance)
    instance.prior.conditional(psi)
    observed = {e for e, _ in psi}
    gains = [(ex.item(e, psi), e) for e in range(instance.n) if e not in observed]
    ranked = sorted((g for g in gains if positive(g[0])), key=lambda g: (-g[0], g[1]))
    chosen = tuple(e for _, e in ranked[:k])
    return chosen, k - len(chosen)


class AdaptiveRandomGreedy(Policy):
    """k rounds; each round picks one of the k slots of M(psi) uniformly.

    Dummy slots select nothing.  Context is ``(round, psi)``.
    """

    name = "arg"

    def __init__(self, instance: Instance):
        if instance.constraint != CARDINALITY:
            raise ConstraintMismatch("adaptive random greedy needs a cardinality constraint")
        super().__init__(instance)
        self.k = int(instance.budget)
        self._memo: dict = {}

    def start(self):
        return [(ONE, (0, ()))]

    def _slots(self, psi):
        got = self._memo.get(psi)
        if got is None:
            got = self._memo[psi] = greedy_topk_set(self.instance, psi, self.k)
        return got

    def step(self, ctx):
        r, psi = ctx
        if r >= self.k:
            return [(ONE, STOP, ctx)]
        items, n_noop = self._slots(psi)
        w = Fraction(1, self.k)
        nxt = (r + 1, psi)
        out = [(w, e, nxt) for e in items]
        if n_noop:
            out.append((w * n_noop, NOOP, nxt))
        return out

    def draw_step(self, ctx, rng):
        r, psi = ctx
        if r >= self.k:
            return STOP, ctx
        items, _ = self._slots(psi)
        slot = int(rng.random() * self.k)
        return (items[slot] if slot < len(items) else NOOP), (r + 1, psi)

    def observe(self, ctx, item, state):
        r, psi = ctx
        return r, psi_add(psi, item, state)


class MaterializedDummyRandomGreedy(Policy):
    """Random greedy with 2k-1 explicit dummy items added to the ground set.

    Dummies have ids ``n .. n+2k-2``, zero marginal everywhere, and are ranked
    ahead of real items with equal (zero) marginal.  Selecting a dummy is
    reported as ``NOOP`` since it has no state and adds no utility.
    """

    name = "arg-dummies"

    def __init__(self, instance: Instance):
        if instance.constraint != CARDINALITY:
            raise ConstraintMismatch("adaptive random greedy needs a cardinality constraint")
        super().__init__(instance)
        self.k = int(instance.budget)
        n = instance.n
        self.dummies = tuple(range(n, n + 2 * self.k - 1))

    def start(self):
        return [(ONE, (0, (), frozenset()))]

    def _top(self, psi, used):
        observed = {e for e, _ in psi}
        pool = [(self.ex.item(e, psi), 1, e) for e in range(self.instance.n) if e not in observed]
        pool += [(Fraction(0), 0, d) for d in self.dummies if d not in used]
        pool.sort(key=lambda t: (-t[0], t[1], t[2]))
        top = pool[: self.k]
        assert len(top) == self.k
        return [e for _, _, e in top]

    def step(self, ctx):
        r, psi, used = ctx
        if r >= self.k:
            return [(ONE, STOP, ctx)]
        w = Fraction(1, self.k)
        out = []
        for e in self._top(psi, used):
            if e >= self.instance.n:
                out.append((w, NOOP, (r + 1, psi, used | {e})))
            else:
                out.append((w, e, (r + 1, psi, used)))
        return out

    def observe(self, ctx, item, state):
        r, psi, used = ctx
        return r, psi_add(psi, item, state), used


def adaptive_random_greedy(instance: Instance, seed: int, phi=None) -> Trajectory:
    """One seeded run of the random greedy policy.  If ``phi`` is omitted it is drawn first
    from the same generator."""
    return _seeded_run(AdaptiveRandomGreedy(instance), seed, phi)


# -- sampling-based density greedy (knapsack) -----------------------------

def best_singleton(instance: Instance) -> tuple:
    """``(e*, f(e*))`` over affordable items, f(e) = Delta(e | {})."""
    ex = expectations(instance)
    best = None
    for e in range(instance.n):
        if instance.items[e].cost > instance.budget:
            continue
        v = ex.item(e, ())
        if best is None or v > best[1]:
            best = (e, v)
    if best is None:
        raise Infeasible("no item fits in the budget")
    return best


class BestSingleton(Policy):
    """Select e* once.  Stops at once if no item fits the budget."""

    name = "best1"

    def __init__(self, instance: Instance):
        super().__init__(instance)
        try:
            self.item, self.value = best_singleton(instance)
        except Infeasible:
            self.item, self.value = None, Fraction(0)

    def start(self):
        return [(ONE, 0)]

    def step(self, ctx):
        if ctx == 0 and self.item is not None:
            return [(ONE, self.item, 1)]
        return [(ONE, STOP, ctx)]

    def observe(self, ctx, item, state):
        return ctx


class DensityGreedy(Policy):
    """Density greedy restricted to the item set ``sample`` (a bitmask).

    Candidates each round: unselected items of ``sample`` with strictly
    positive marginal that fit in the remaining budget.  Picks the largest
    marginal-to-cost ratio, ties by item index.  Context is
    ``(remaining sample, remaining budget, psi)``.
    """

    name = "dg"

    def __init__(self, instance: Instance, sample: int):
        super().__init__(instance)
        self.sample = sample

    def start(self):
        return [(ONE, (self.sample, self.instance.budget, ()))]

    def choose(self, ctx):
        remaining, budget, psi = ctx
        costs = self.instance.costs
        best = None
        for e in mask_items(remaining):
            c = costs[e]
            if c > budget:
                continue
            gain = self.ex.item(e, psi)
            if not positive(gain):
                continue
            density = gain / c if c else float("inf")
            if best is None or density > best[0]:
                best = (density, e)
        return None if best is None else best[1]

    def step(self, ctx):
        e = self.choose(ctx)
        if e is None:
            return [(ONE, STOP, ctx)]
        remaining, budget, psi = ctx
        return [(ONE, e, (remaining & ~(1 << e), budget - self.instance.costs[e], psi))]

    def observe(self, ctx, item, state):
        remaining, budget, psi = ctx
        return remaining, budget, psi_add(psi, item, state)


class RandomSubsetDensityGreedy(Policy):
    """The second candidate policy: density greedy over a random half-sample S,
    each item kept independently with probability 1/2."""

    name = "pi2"

    def __init__(self, instance: Instance):
        super().__init__(instance)
        self.inner = DensityGreedy(instance, 0)

    def start(self):
        n = self.instance.n
        w = Fraction(1, 2**n)
        return [(w, (s, self.instance.budget, ())) for s in range(2**n)]

    def draw_start(self, rng):
        s = 0
        for e in range(self.instance.n):
            if rng.random() < 0.5:
                s |= 1 << e
        return s, self.instance.budget, ()

    def step(self, ctx):
        return self.inner.step(ctx)

    def observe(self, ctx, item, state):
        return self.inner.observe(ctx, item, state)


class SamplingDensityGreedy(Policy):
    """Best singleton with probability 1/5, otherwise density greedy over a
    random half-sample.

    Draw order when sampling: S membership for each item in index order, then
    the branch uniform r0 (best singleton iff r0 < 1/5).
    """

    name = "sad"
    P_SINGLETON = Fraction(1, 5)

    def __init__(self, instance: Instance):
        super().__init__(instance)
        self.pi1 = BestSingleton(instance)
        self.pi2 = RandomSubsetDensityGreedy(instance)

    def start(self):
        out = [(self.P_SINGLETON * p, (1, c)) for p, c in self.pi1.start()]
        out += [((1 - self.P_SINGLETON) * p, (2, c)) for p, c in self.pi2.start()]
        return out

    def draw_start(self, rng):
        ctx2 = self.pi2.draw_start(rng)
        r0 = rng.random()
        if r0 < float(self.P_SINGLETON):
            return 1, self.pi1.draw_start(rng)
        return 2, ctx2

    def _sub(self, branch):
        return self.pi1 if branch == 1 else self.pi2

    def step(self, ctx):
        branch, sub = ctx
        return [(p, a, (branch, c)) for p, a, c in self._sub(branch).step(sub)]

    def draw_step(self, ctx, rng):
        branch, sub = ctx
        action, nxt = self._sub(branch).draw_step(sub, rng)
        return action, (branch, nxt)

    def observe(self, ctx, item, state):
        branch, sub = ctx
        return branch, self._sub(branch).observe(sub, item, state)


def density_greedy(instance: Instance, sample: int | Iterable[str], seed: int, phi=None) -> Trajectory:
    if not isinstance(sample, int):
        sample = instance.mask(sample)
    return _seeded_run(DensityGreedy(instance, sample), seed, phi)


def sampling_density_greedy(instance: Instance, seed: int, phi=None) -> Trajectory:
    return _seeded_run(SamplingDensityGreedy(instance), seed, phi)


# -- baseline -----------------------------------------------------------------

class AdaptiveGreedy(Policy):
    """Deterministic greedy: best affordable positive-marginal item each round."""

    name = "greedy"

    def start(self):
        return [(ONE, ((), self.instance.budget))]

    def step(self, ctx):
        psi, budget = ctx
        observed = {e for e, _ in psi}
        best = None
        for e in range(self.instance.n):
            if e in observed or self.instance.items[e].cost > budget:
                continue
            gain = self.ex.item(e, psi)
            if positive(gain) and (best is None or gain > best[0]):
                best = (gain, e)
        if best is None:
            return [(ONE, STOP, ctx)]
        e = best[1]
        return [(ONE, e, (psi, budget - self.instance.items[e].cost))]

    def observe(self, ctx, item, state):
        psi, budget = ctx
        return psi_add(psi, item, state), budget


POLICY_IDS = ("arg", "sad", "best1", "dg", "greedy")


def make_policy(instance: Instance, policy_id: str, sample: int | None = None) -> Policy:
    if policy_id == "arg":
        return AdaptiveRandomGreedy(instance)
    if policy_id == "sad":
        return SamplingDensityGreedy(instance)
    if policy_id == "best1":
        return BestSingleton(instance)
    if policy_id == "dg":
        if sample is None:
            raise InvalidArgument("policy 'dg' needs an explicit sample set")
        return DensityGreedy(instance, sample)
    if policy_id == "greedy":
        return AdaptiveGreedy(instance)
    raise InvalidArgument(f"unknown policy {policy_id!r}")

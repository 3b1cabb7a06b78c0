"""Expected utility of a policy, exactly or by Monte Carlo."""
from __future__ import annotations

import math
import os
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidArgument, TooLarge
from .model import NOOP, STOP, Instance, Psi, psi_add
from .policies import Policy, draw_realization, run_trajectory
from .utility import expectations

DEFAULT_NODE_LIMIT = 10**7


def node_limit() -> int:
    raw = os.environ.get("ADASUB_NODE_LIMIT")
    return int(raw) if raw else DEFAULT_NODE_LIMIT


@dataclass(frozen=True)
class EvaluationReport:
    value: object
    method: str  # "exact" | "monte-carlo"
    samples: int | None = None
    std_error: float | None = None
    seed: int | None = None

    def __float__(self):
        return float(self.value)


class _Expander:
    def __init__(self, policy: Policy, limit: int):
        self.policy = policy
        self.ex = expectations(policy.instance)
        self.limit = limit
        self.nodes = 0

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.limit:
            raise TooLarge(f"exact evaluation exceeded {self.limit} nodes")

    def value(self, ctx, world: Psi):
        """E[f(final set) | world], where world holds every observation made so
        far and its domain is the selected set."""
        self._tick()
        total = Fraction(0)
        for p, action, nxt in self.policy.step(ctx):
            if action is STOP:
                v = self.ex.expected(world)
            elif action is NOOP:
                v = self.value(nxt, world)
            else:
                v = self.select(nxt, world, action)
            total += p * v
        return total

    def select(self, ctx, world: Psi, item: int):
        for e, s in world:
            if e == item:
                # already observed by an earlier phase: its state is known
                return self.value(self.policy.observe(ctx, item, s), world)
        total = Fraction(0)
        for s, q in self.ex.state_probs(item, world):
            total += q * self.value(self.policy.observe(ctx, item, s), psi_add(world, item, s))
        return total

    def run(self, world: Psi = ()):
        total = Fraction(0)
        for p, ctx in self.policy.start():
            total += p * self.value(ctx, world)
        return total


def _check(instance: Instance, policy: Policy):
    if policy.instance is not instance:
        raise InvalidArgument("policy belongs to a different instance")


def exact_favg(instance: Instance, policy: Policy, limit: int | None = None) -> EvaluationReport:
    """Exact f_avg over the prior and every internal random draw of the policy.

    Rational priors and utilities give an exact ``Fraction``.
    """
    _check(instance, policy)
    value = _Expander(policy, limit or node_limit()).run()
    return EvaluationReport(value, "exact")


def policy_marginal(instance: Instance, policy: Policy, psi: Psi = (), limit: int | None = None):
    """Delta(pi | psi): the policy runs from a fresh start while the world is
    already conditioned on ``psi`` and ``dom(psi)`` counts as selected."""
    _check(instance, policy)
    ex = expectations(instance)
    instance.prior.conditional(psi)
    value = _Expander(policy, limit or node_limit()).run(psi)
    return value - ex.expected(psi)


def mc_favg(instance: Instance, policy: Policy, samples: int, seed: int = 42) -> EvaluationReport:
    """Monte-Carlo f_avg.

    Sample ``i`` uses ``random.Random(seed ^ i)``: it first draws the
    realization, then the policy's own draws.
    """
    _check(instance, policy)
    if samples < 1:
        raise InvalidArgument("samples must be at least 1")
    counts: Counter = Counter()
    for i in range(samples):
        rng = random.Random(seed ^ i)
        phi = draw_realization(instance, rng)
        counts[float(run_trajectory(policy, phi, rng).utility)] += 1
    values = sorted(counts.items())
    mean = math.fsum(v * c for v, c in values) / samples
    if samples > 1:
        var = math.fsum(c * (v - mean) ** 2 for v, c in values) / (samples - 1)
        std_error = math.sqrt(var / samples)
    else:
        std_error = 0.0
    return EvaluationReport(mean, "monte-carlo", samples, std_error, seed)


def expected_empty(instance: Instance):
    """E[f(empty set, Phi)]."""
    return expectations(instance).expected(())

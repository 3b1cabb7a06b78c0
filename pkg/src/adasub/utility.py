"""Utility functions f(A, phi) and their conditional expected marginals.

Sets are bitmasks over item indices; realizations are state-index tuples.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .errors import InvalidArgument
from .model import NOOP, Instance, Psi, psi_mask


class UtilityFunction:
    kind = "custom"

    def value(self, mask: int, phi: tuple):
        raise NotImplementedError

    def __call__(self, mask: int, phi: tuple):
        return self.value(mask, phi)


@dataclass(frozen=True)
class StochasticModular(UtilityFunction):
    """Sum of weights of selected items whose state is ``active``."""

    weights: tuple
    active: int = 0
    kind = "modular"

    def __post_init__(self):
        if any(w < 0 for w in self.weights):
            raise InvalidArgument("modular weights must be nonnegative")

    def value(self, mask, phi):
        total = Fraction(0)
        for e, w in enumerate(self.weights):
            if mask >> e & 1 and phi[e] == self.active:
                total += w
        return total


@dataclass(frozen=True)
class GraphCut(UtilityFunction):
    """Weight of edges with exactly one endpoint selected; ignores states."""

    edges: tuple  # ((u, v, w), ...)
    kind = "cut"

    def __post_init__(self):
        for u, v, w in self.edges:
            if w < 0:
                raise InvalidArgument("edge weights must be nonnegative")
            if u == v:
                raise InvalidArgument("self-loops are not allowed")

    def value(self, mask, phi):
        total = Fraction(0)
        for u, v, w in self.edges:
            if (mask >> u & 1) != (mask >> v & 1):
                total += w
        return total


@dataclass(frozen=True)
class Blend(UtilityFunction):
    """``lam * modular + (1 - lam) * cut``."""

    lam: object
    modular: StochasticModular
    cut: GraphCut
    kind = "blend"

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise InvalidArgument("blend lambda must lie in [0, 1]")

    def value(self, mask, phi):
        return self.lam * self.modular.value(mask, phi) + (1 - self.lam) * self.cut.value(mask, phi)


@dataclass(frozen=True)
class StochasticCoverage(UtilityFunction):
    """Number of universe elements covered by selected items in the active state."""

    covers: tuple  # per item: frozenset of universe element tokens
    active: int = 0
    kind = "coverage"

    def value(self, mask, phi):
        covered = set()
        for e, elems in enumerate(self.covers):
            if mask >> e & 1 and phi[e] == self.active:
                covered |= elems
        return Fraction(len(covered))


@dataclass(frozen=True)
class ZeroUtility(UtilityFunction):
    kind = "zero"

    def value(self, mask, phi):
        return Fraction(0)


@dataclass(frozen=True)
class FunctionUtility(UtilityFunction):
    """Wraps an arbitrary ``fn(mask, phi)``; not expressible in instance files."""

    fn: Callable
    label: str = "custom"

    def value(self, mask, phi):
        return self.fn(mask, phi)


def evaluate(f: UtilityFunction, mask: int, phi: tuple, n: int | None = None):
    if n is not None and mask >> n:
        raise InvalidArgument("set contains items outside the ground set")
    return f.value(mask, phi)


class Expectations:
    """Memoized conditional expectations of one instance's utility.

    Everything here is a pure function of the instance; the memo lives in the
    instance's private table so all policies on an instance share it.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        self.f = instance.utility
        self.n = instance.n
        self._atoms = list(instance.prior.atoms())
        self._cond: dict = {}
        self._exp: dict = {}
        self._item: dict = {}
        self._states: dict = {}

    def atoms(self, psi: Psi) -> list:
        """Conditional atoms ``(phi, p)`` given ``psi``, renormalized."""
        got = self._cond.get(psi)
        if got is None:
            got = list(self.instance.prior.conditional(psi).atoms()) if psi else self._atoms
            self._cond[psi] = got
        return got

    def state_probs(self, e: int, psi: Psi) -> list:
        key = (e, psi)
        got = self._states.get(key)
        if got is None:
            got = self._states[key] = self.instance.prior.state_probs(e, psi)
        return got

    def expected(self, psi: Psi, extra: int = 0):
        """E[f(dom(psi) | extra, Phi) | Phi ~ psi]."""
        key = (psi, extra)
        got = self._exp.get(key)
        if got is None:
            mask = psi_mask(psi) | extra
            got = sum((p * self.f.value(mask, phi) for phi, p in self.atoms(psi)), Fraction(0))
            self._exp[key] = got
        return got

    def item(self, e: int, psi: Psi):
        """Delta(e | psi); may be negative."""
        key = (e, psi)
        got = self._item.get(key)
        if got is None:
            if not 0 <= e < self.n:
                raise InvalidArgument(f"item {e} is not in the ground set")
            base = psi_mask(psi)
            got = sum(
                (p * (self.f.value(base | 1 << e, phi) - self.f.value(base, phi)) for phi, p in self.atoms(psi)),
                Fraction(0),
            )
            self._item[key] = got
        return got

    def set(self, mask: int, psi: Psi):
        """Delta(S | psi) for the set encoded by ``mask``."""
        if mask >> self.n:
            raise InvalidArgument("set contains items outside the ground set")
        return self.expected(psi, mask) - self.expected(psi)


def expectations(instance: Instance) -> Expectations:
    ex = instance._memo.get("expectations")
    if ex is None:
        ex = instance._memo["expectations"] = Expectations(instance)
    return ex


def marginal_item(instance: Instance, e, psi: Psi = ()):
    if e is NOOP:
        instance.prior.conditional(psi)  # still rejects impossible psi
        return Fraction(0)
    return expectations(instance).item(e, psi)


def marginal_set(instance: Instance, mask: int, psi: Psi = ()):
    return expectations(instance).set(mask, psi)

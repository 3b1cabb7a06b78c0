"""Ground set, state priors and partial realizations.

Items and state tokens are strings at the boundary and dense integers
internally.  A realization is a tuple ``phi`` with ``phi[e]`` the state index
of item ``e``.  A partial realization is a sorted tuple of ``(item, state)``
pairs, which makes it hashable and canonical (selection order is forgotten).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .errors import ImpossibleObservation, InvalidArgument

Number = Union[Fraction, float, int]
Psi = tuple  # tuple[tuple[int, int], ...], sorted by item

PROB_TOL = 1e-9
# beyond this many realizations an independent prior is not expanded
MAX_ATOMS = 1 << 20


class _Sentinel:
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name

    def __reduce__(self):
        return self.name


# Actions besides selecting an item index.  NOOP stands in for a dummy item.
NOOP = _Sentinel("NOOP")
STOP = _Sentinel("STOP")

CARDINALITY = "cardinality"
KNAPSACK = "knapsack"


def is_zero(x: Number) -> bool:
    if isinstance(x, float):
        return abs(x) <= 1e-15
    return x == 0


def positive(x: Number) -> bool:
    """Strict positivity, with a small float guard against rounding noise."""
    if isinstance(x, float):
        return x > 1e-12
    return x > 0


def as_number(value) -> Number:
    """Exact rational for ints, Fractions and numeric strings; floats stay floats."""
    if isinstance(value, (Fraction, int)):
        return Fraction(value)
    if isinstance(value, float):
        return value
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidArgument(f"not a number: {value!r}") from exc


@dataclass(frozen=True)
class Item:
    id: str
    cost: Number = Fraction(1)

    def __post_init__(self):
        if self.cost < 0:
            raise InvalidArgument(f"negative cost for item {self.id!r}")


@dataclass(frozen=True)
class StateSpace:
    states: tuple

    def __post_init__(self):
        if not self.states:
            raise InvalidArgument("state space is empty")
        if len(set(self.states)) != len(self.states):
            raise InvalidArgument("state tokens must be distinct")

    def __len__(self):
        return len(self.states)

    def index(self, token: str) -> int:
        try:
            return self.states.index(token)
        except ValueError:
            raise InvalidArgument(f"unknown state {token!r}") from None


# -- partial realizations ---------------------------------------------------

def psi_add(psi: Psi, item: int, state: int) -> Psi:
    for e, _ in psi:
        if e == item:
            raise InvalidArgument(f"item {item} already observed")
    return tuple(sorted(psi + ((item, state),)))


def psi_mask(psi: Psi) -> int:
    mask = 0
    for e, _ in psi:
        mask |= 1 << e
    return mask


def psi_union(a: Psi, b: Psi) -> Psi:
    merged = dict(a)
    for e, s in b:
        if merged.get(e, s) != s:
            raise ImpossibleObservation(f"conflicting observations for item {e}")
        merged[e] = s
    return tuple(sorted(merged.items()))


def consistent(phi: Sequence[int], psi: Psi) -> bool:
    """True iff ``phi`` agrees with ``psi`` on every observed item."""
    n = len(phi)
    for e, s in psi:
        if not 0 <= e < n:
            raise InvalidArgument(f"item {e} is not in the ground set")
        if phi[e] != s:
            return False
    return True


def mask_items(mask: int) -> list:
    out = []
    e = 0
    while mask:
        if mask & 1:
            out.append(e)
        mask >>= 1
        e += 1
    return out


# -- priors -------------------------------------------------------------------

def _check_total(total: Number, what: str):
    if abs(float(total) - 1.0) > PROB_TOL:
        raise InvalidArgument(f"probabilities for {what} sum to {float(total):.12g}, not 1")


class Prior:
    """Distribution over full realizations."""

    n_items: int

    def atoms(self) -> Iterator[tuple]:
        """Yield ``(phi, p)`` for every realization with p > 0."""
        raise NotImplementedError

    def conditional(self, psi: Psi) -> "Prior":
        raise NotImplementedError

    def state_probs(self, item: int, psi: Psi = ()) -> list:
        """Distribution of one item's state given ``psi``, as ``[(state, p), ...]`` with p > 0."""
        return self.conditional(psi)._marginal(item)

    def _marginal(self, item: int) -> list:
        acc: dict = {}
        for phi, p in self.atoms():
            acc[phi[item]] = acc.get(phi[item], 0) + p
        return sorted((s, p) for s, p in acc.items() if not is_zero(p))

    def support(self) -> list:
        return [phi for phi, _ in self.atoms()]

    def to_joint(self) -> "JointPrior":
        return JointPrior(self.n_items, tuple(self.atoms()))


@dataclass(frozen=True)
class IndependentPrior(Prior):
    """Per-item categorical distributions; ``dists[e][s]`` is Pr[state of e is s]."""

    dists: tuple

    def __post_init__(self):
        for e, dist in enumerate(self.dists):
            if any(p < 0 for p in dist):
                raise InvalidArgument(f"negative probability for item {e}")
            _check_total(sum(dist), f"item {e}")

    @property
    def n_items(self) -> int:
        return len(self.dists)

    def atoms(self):
        choices = [[(s, p) for s, p in enumerate(d) if not is_zero(p)] for d in self.dists]
        size = 1
        for c in choices:
            size *= len(c)
        if size > MAX_ATOMS:
            raise InvalidArgument(f"prior has {size} realizations, too many to expand")
        for combo in itertools.product(*choices):
            p = Fraction(1)
            for _, q in combo:
                p = p * q
            yield tuple(s for s, _ in combo), p

    def conditional(self, psi: Psi) -> "IndependentPrior":
        dists = list(self.dists)
        for e, s in psi:
            if not 0 <= e < len(dists):
                raise InvalidArgument(f"item {e} is not in the ground set")
            if is_zero(dists[e][s]):
                raise ImpossibleObservation(f"state {s} of item {e} has probability 0")
            dists[e] = tuple(Fraction(int(t == s)) for t in range(len(dists[e])))
        return IndependentPrior(tuple(dists))

    def state_probs(self, item, psi=()):
        for e, s in psi:
            if e == item:
                return [(s, Fraction(1))]
        # other observations cannot affect this item, but must be possible
        for e, s in psi:
            if is_zero(self.dists[e][s]):
                raise ImpossibleObservation(f"state {s} of item {e} has probability 0")
        return [(s, p) for s, p in enumerate(self.dists[item]) if not is_zero(p)]


@dataclass(frozen=True)
class JointPrior(Prior):
    """Explicit list of ``(phi, p)`` atoms.  Zero-probability atoms are dropped."""

    n: int
    table: tuple

    def __post_init__(self):
        seen = set()
        kept = []
        for phi, p in self.table:
            phi = tuple(phi)
            if len(phi) != self.n:
                raise InvalidArgument("realization does not cover the ground set")
            if p < 0:
                raise InvalidArgument("negative probability in joint prior")
            if phi in seen:
                raise InvalidArgument(f"duplicate realization {phi}")
            seen.add(phi)
            if not is_zero(p):
                kept.append((phi, p))
        _check_total(sum(p for _, p in kept), "the joint prior")
        object.__setattr__(self, "table", tuple(kept))

    @property
    def n_items(self) -> int:
        return self.n

    def atoms(self):
        return iter(self.table)

    def conditional(self, psi: Psi) -> "JointPrior":
        kept = [(phi, p) for phi, p in self.table if consistent(phi, psi)]
        total = sum(p for _, p in kept)
        if not kept or is_zero(total):
            raise ImpossibleObservation(f"observation {psi} has probability 0")
        return JointPrior(self.n, tuple((phi, p / total) for phi, p in kept))


def conditional(prior: Prior, psi: Psi) -> Prior:
    return prior.conditional(psi)


# -- instance -----------------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    items: tuple
    state_space: StateSpace
    prior: Prior
    utility: object
    budget: Number
    constraint: str = CARDINALITY
    name: str = "instance"
    # memo tables for pure expectation queries; see adasub.utility.Expectations
    _memo: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise InvalidArgument("item ids must be unique")
        if self.prior.n_items != len(self.items):
            raise InvalidArgument("prior does not match the ground set")
        if self.constraint not in (CARDINALITY, KNAPSACK):
            raise InvalidArgument(f"unknown constraint {self.constraint!r}")
        if self.budget < 0:
            raise InvalidArgument("budget must be nonnegative")
        if self.constraint == CARDINALITY:
            if any(it.cost != 1 for it in self.items):
                raise InvalidArgument("cardinality constraint requires unit costs")
            if self.budget != int(self.budget) or self.budget < 1:
                raise InvalidArgument("cardinality budget must be a positive integer")

    @property
    def n(self) -> int:
        return len(self.items)

    @property
    def ids(self) -> list:
        return [it.id for it in self.items]

    @property
    def costs(self) -> list:
        return [it.cost for it in self.items]

    def index(self, item_id: str) -> int:
        for i, it in enumerate(self.items):
            if it.id == item_id:
                return i
        raise InvalidArgument(f"unknown item {item_id!r}")

    def mask(self, ids: Iterable[str]) -> int:
        m = 0
        for i in ids:
            m |= 1 << self.index(i)
        return m

    def psi(self, observations: Mapping[str, str] | None = None) -> Psi:
        """Internal partial realization from ``{item_id: state_token}``."""
        obs = observations or {}
        return tuple(sorted((self.index(e), self.state_space.index(s)) for e, s in obs.items()))

    def realization(self, assignment: Mapping[str, str]) -> tuple:
        if set(assignment) != set(self.ids):
            raise InvalidArgument("realization must assign every item exactly once")
        return tuple(self.state_space.index(assignment[i]) for i in self.ids)

    def set_ids(self, mask: int) -> list:
        return [self.items[e].id for e in mask_items(mask)]

    def cost_of(self, mask: int) -> Number:
        return sum((self.items[e].cost for e in mask_items(mask)), Fraction(0))

    def support(self) -> list:
        return self.prior.support()

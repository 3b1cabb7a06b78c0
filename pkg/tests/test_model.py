from fractions import Fraction

import pytest

from adasub.errors import ImpossibleObservation, InvalidArgument
from adasub.model import (
    IndependentPrior,
    Instance,
    Item,
    JointPrior,
    StateSpace,
    conditional,
    consistent,
    psi_add,
    psi_union,
)
from adasub.utility import ZeroUtility

H = Fraction(1, 2)
Q = Fraction(1, 4)


def test_consistent_agreement():
    phi = (1, 0)  # a:1, b:0 with states indexed directly
    assert consistent(phi, ((0, 1),))
    assert not consistent(phi, ((0, 0),))
    assert consistent(phi, ())


def test_consistent_rejects_foreign_item():
    with pytest.raises(InvalidArgument):
        consistent((1, 0), ((5, 1),))


def test_independent_conditional_fixes_observed_item():
    prior = IndependentPrior(((H, H), (H, H)))
    cond = conditional(prior, ((0, 1),))
    assert cond.dists[0] == (0, 1)
    assert cond.dists[1] == (H, H)


def test_joint_conditional_single_atom():
    prior = JointPrior(2, (((1, 1), H), ((0, 0), H)))
    assert conditional(prior, ((0, 1),)).table == (((1, 1), Fraction(1)),)


def test_joint_conditional_renormalizes():
    prior = JointPrior(2, (((1, 1), Q), ((1, 0), Q), ((0, 0), H)))
    cond = conditional(prior, ((0, 1),))
    assert dict(cond.table) == {(1, 1): H, (1, 0): H}
    assert sum(p for _, p in cond.table) == 1


def test_conditioning_on_impossible_state():
    prior = JointPrior(2, (((1, 1), H), ((0, 0), H)))
    with pytest.raises(ImpossibleObservation):
        conditional(prior, ((0, 1), (1, 0)))
    with pytest.raises(ImpossibleObservation):
        IndependentPrior(((1, 0),)).conditional(((0, 1),))


def test_prior_validation():
    with pytest.raises(InvalidArgument):
        IndependentPrior(((Fraction(9, 10), 0),))
    with pytest.raises(InvalidArgument):
        JointPrior(1, (((0,), H), ((0,), H)))
    with pytest.raises(InvalidArgument):
        IndependentPrior(((Fraction(3, 2), Fraction(-1, 2)),))


def test_support_drops_zero_atoms():
    prior = IndependentPrior(((1, 0), (H, H)))
    assert sorted(prior.support()) == [(0, 0), (0, 1)]


def test_psi_helpers():
    psi = psi_add((), 1, 0)
    psi = psi_add(psi, 0, 1)
    assert psi == ((0, 1), (1, 0))
    with pytest.raises(InvalidArgument):
        psi_add(psi, 0, 0)
    assert psi_union(((0, 1),), ((1, 0),)) == psi
    with pytest.raises(ImpossibleObservation):
        psi_union(((0, 1),), ((0, 0),))


def _instance(costs, budget, constraint):
    items = tuple(Item(str(i), c) for i, c in enumerate(costs))
    prior = IndependentPrior(tuple((H, H) for _ in costs))
    return Instance(items, StateSpace(("1", "0")), prior, ZeroUtility(), budget, constraint)


def test_cardinality_requires_unit_costs_and_integer_budget():
    _instance([1, 1], 2, "cardinality")
    with pytest.raises(InvalidArgument):
        _instance([1, 2], 2, "cardinality")
    with pytest.raises(InvalidArgument):
        _instance([1, 1], Fraction(3, 2), "cardinality")
    _instance([1, 2], Fraction(3, 2), "knapsack")


def test_item_and_state_validation():
    with pytest.raises(InvalidArgument):
        Item("a", -1)
    with pytest.raises(InvalidArgument):
        StateSpace(())
    with pytest.raises(InvalidArgument):
        StateSpace(("x", "x"))
    items = (Item("a"), Item("a"))
    with pytest.raises(InvalidArgument):
        Instance(items, StateSpace(("1",)), IndependentPrior(((1,), (1,))), ZeroUtility(), 1)


def test_instance_lookup_helpers(cut_edge):
    assert cut_edge.n == 2
    assert cut_edge.ids == ["a", "b"]
    assert cut_edge.mask(["b"]) == 2
    assert cut_edge.psi({"a": "1"}) == ((0, 0),)
    assert cut_edge.set_ids(3) == ["a", "b"]
    assert cut_edge.cost_of(3) == 2

from fractions import Fraction

import pytest

from adasub.errors import InvalidArgument
from adasub.evaluation import policy_marginal
from adasub.model import NOOP
from adasub.policies import PolicyTree, STOP_TREE, TreePolicy, never_select, tree_select
from adasub.utility import (
    Blend,
    GraphCut,
    StochasticCoverage,
    StochasticModular,
    evaluate,
    marginal_item,
    marginal_set,
)

from conftest import bernoulli_modular, bundled


def test_modular_counts_active_selected():
    f = StochasticModular((1, 1), active=1)
    assert evaluate(f, 0b11, (1, 0)) == 1


def test_cut_single_edge():
    f = GraphCut(((0, 1, 1),))
    for phi in [(0, 0), (1, 0), (1, 1)]:
        assert evaluate(f, 0b01, phi) == 1
        assert evaluate(f, 0b11, phi) == 0


def test_blend_and_coverage_values():
    mod = StochasticModular((2, 3), active=0)
    cut = GraphCut(((0, 1, 4),))
    f = Blend(Fraction(1, 4), mod, cut)
    assert evaluate(f, 0b01, (0, 0)) == Fraction(1, 4) * 2 + Fraction(3, 4) * 4
    cov = StochasticCoverage((frozenset("xy"), frozenset("yz")), active=0)
    assert evaluate(cov, 0b11, (0, 0)) == 3
    assert evaluate(cov, 0b11, (0, 1)) == 2


def test_evaluate_rejects_foreign_items():
    with pytest.raises(InvalidArgument):
        evaluate(GraphCut(((0, 1, 1),)), 0b100, (0, 0), n=2)


def test_parameter_validation():
    with pytest.raises(InvalidArgument):
        StochasticModular((-1,))
    with pytest.raises(InvalidArgument):
        GraphCut(((0, 0, 1),))
    with pytest.raises(InvalidArgument):
        Blend(2, StochasticModular((1,)), GraphCut(()))


def test_item_marginals():
    inst = bernoulli_modular("ab")
    assert marginal_item(inst, 0) == Fraction(1, 2)
    cut = bundled("graph_cut_edge")
    for s in (0, 1):
        assert marginal_item(cut, 1, ((0, s),)) == -1
        assert marginal_item(cut, NOOP, ((0, s),)) == 0
    assert marginal_item(cut, NOOP) == 0


def test_set_marginals():
    inst = bernoulli_modular("ab")
    assert marginal_set(inst, 0) == 0
    assert marginal_set(inst, 0b11) == 1
    assert marginal_set(bundled("graph_cut_edge"), 0b11) == 0


def test_policy_marginals():
    inst = bernoulli_modular("ab")
    assert policy_marginal(inst, never_select(inst)) == 0
    assert policy_marginal(inst, TreePolicy(inst, tree_select(inst, "a"))) == Fraction(1, 2)
    # state index 0 is token "1"
    b_then_stop = tree_select(inst, "b")
    tree = PolicyTree(0, (b_then_stop, STOP_TREE))
    assert policy_marginal(inst, TreePolicy(inst, tree)) == Fraction(3, 4)


def test_policy_marginal_matches_item_marginal_on_cut(cut_edge):
    pol = TreePolicy(cut_edge, tree_select(cut_edge, "b"))
    for s in (0, 1):
        assert policy_marginal(cut_edge, pol, ((0, s),)) == -1

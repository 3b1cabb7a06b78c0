import math
from fractions import Fraction

import pytest

from adasub.errors import InvalidArgument, TooLarge
from adasub.evaluation import exact_favg
from adasub.fileformat import bundled_instances, parse_instance
from adasub.oracles import (
    certify,
    check_adaptive_monotone,
    check_adaptive_submodular,
    sample_greedy_check,
    count_policies,
    enumerate_policies,
    disjoint_union_check,
    half_sample_check,
    monotonicity_ratio,
    monotonicity_ratio_bruteforce,
    optimal_policy,
    ratio_bound,
)
from adasub.policies import TreePolicy, compose, make_policy
from adasub.utility import FunctionUtility, ZeroUtility

from conftest import bernoulli_modular, bundled, with_utility

SMALL = [i for i in bundled_instances() if i.n <= 3]

# m of the bundled mixed instances, pinned after cross-checking (pairwise
# enumeration for three items, witness replay for four)
M_FIXTURES = {
    "blend_tri3_l025": Fraction(11, 62),
    "blend_tri3_l050": Fraction(11, 26),
    "blend_tri3_l075": Fraction(11, 14),
    "blend_4_k3": Fraction(13, 38),
    "knap_blend_4": Fraction(7, 17),
    "knap_blend_joint_3": Fraction(7, 24),
}


# -- optimal policy ----------------------------------------------------------

def test_opt_modular_k1():
    assert optimal_policy(bernoulli_modular("ab"))[1] == Fraction(1, 2)


def test_opt_cut_edge(cut_edge):
    tree, value = optimal_policy(cut_edge)
    assert value == 1
    assert tree.format(cut_edge) == "a"


def test_opt_zero_budget():
    inst = bernoulli_modular("ab", k=0, constraint="knapsack")
    tree, value = optimal_policy(inst)
    assert tree.is_stop and value == 0


@pytest.mark.parametrize("inst", bundled_instances(), ids=lambda i: i.name)
def test_opt_dominates_constructed_policies(inst):
    _, opt = optimal_policy(inst)
    pids = ["sad", "best1", "greedy"] + (["arg"] if inst.constraint == "cardinality" else [])
    for pid in pids:
        assert exact_favg(inst, make_policy(inst, pid)).value <= opt


def test_opt_guard():
    with pytest.raises(TooLarge):
        optimal_policy(bundled("blend_4_k3"), max_items=3)


# -- enumeration -------------------------------------------------------------

def test_policy_counts():
    one = bernoulli_modular("a")
    assert count_policies(one, 1) == 2
    assert [t.format(one) for t in enumerate_policies(one, 1)] == ["stop", "a"]
    assert count_policies(bernoulli_modular("ab", k=2), 0) == 1
    single_state = parse_instance(
        "[items]\na 1\nb 1\n[states]\nx\n[prior]\nindependent\na x:1\nb x:1\n"
        "[utility]\nmodular weights=a:1,b:1\n[constraint]\ncardinality 2\n"
    )
    trees = list(enumerate_policies(single_state, 2))
    assert [t.format(single_state) for t in trees] == ["stop", "a", "a>b", "b", "b>a"]
    assert len({t.outcome((0, 0)) for t in trees}) == 4


def test_enumeration_guard():
    with pytest.raises(TooLarge):
        list(enumerate_policies(bundled("blend_4_k3"), limit=100))


# -- monotonicity ratio ------------------------------------------------------

@pytest.mark.parametrize("name", ["modular_4", "coverage_4", "knap_modular_4"])
def test_ratio_monotone_instances(name):
    assert monotonicity_ratio(bundled(name)).m == 1


def test_ratio_cut_edge(cut_edge):
    r = monotonicity_ratio(cut_edge)
    assert r.m == 0 and r.m_raw == 0
    assert (r.policy.format(cut_edge), r.continuation.format(cut_edge)) == ("a", "b")
    assert (r.numerator, r.denominator) == (0, 1)


@pytest.mark.parametrize("name,expected", sorted(M_FIXTURES.items()))
def test_ratio_fixtures(name, expected):
    inst = bundled(name)
    r = monotonicity_ratio(inst)
    assert r.numerator / r.denominator == expected
    # replay the witness pair through the exact evaluator
    pi = TreePolicy(inst, r.policy)
    joint = exact_favg(inst, compose(pi, TreePolicy(inst, r.continuation))).value
    assert joint / exact_favg(inst, pi).value == expected


def test_ratio_nondecreasing_in_lambda():
    ms = [M_FIXTURES[f"blend_tri3_l0{x}"] for x in ("25", "50", "75")]
    assert 0 < ms[0] <= ms[1] <= ms[2] < 1


@pytest.mark.parametrize("inst", SMALL, ids=lambda i: i.name)
@pytest.mark.parametrize("feasible", [False, True])
def test_ratio_dual_route(inst, feasible):
    dp = monotonicity_ratio(inst, feasible)
    raw, _, _, _, _ = monotonicity_ratio_bruteforce(inst, feasible)
    assert dp.numerator / dp.denominator == raw
    assert dp.m_raw == pytest.approx(float(raw), abs=1e-12)


def test_budget_feasible_ratio_not_smaller():
    inst = bundled("knap_blend_joint_3")
    assert monotonicity_ratio(inst, True).m_raw >= monotonicity_ratio(inst).m_raw
    assert monotonicity_ratio(inst, True).m_raw == pytest.approx(7 / 22)


def test_ratio_zero_utility():
    inst = with_utility(bernoulli_modular("ab", k=2), ZeroUtility())
    assert monotonicity_ratio(inst).m == 1


# -- property checkers -------------------------------------------------------

@pytest.mark.parametrize("name", ["modular_4", "coverage_4", "cut_square_4", "graph_cut_edge"])
def test_submodular_pass(name):
    assert check_adaptive_submodular(bundled(name)) is None


def test_submodular_violator():
    inst = with_utility(bernoulli_modular("ab", k=2), FunctionUtility(lambda mask, phi: int(mask == 0b11), "pair"))
    w = check_adaptive_submodular(inst)
    assert w is not None and w.kind == "submodularity"
    assert w.psi == () and w.item == 1
    assert [e for e, _ in w.psi_prime] == [0]
    assert (w.lhs, w.rhs) == (0, 1)
    assert w.reproduce(inst)


def test_monotone_checks(cut_edge):
    assert check_adaptive_monotone(bernoulli_modular("abc")) is None
    assert check_adaptive_monotone(with_utility(bernoulli_modular("ab"), ZeroUtility())) is None
    w = check_adaptive_monotone(cut_edge)
    assert w.item == 1 and [e for e, _ in w.psi] == [0] and w.lhs == -1
    assert w.reproduce(cut_edge)
    assert w.describe(cut_edge) == "D(b|{a:1})=-1 < 0"


def test_checker_guard():
    with pytest.raises(TooLarge):
        check_adaptive_submodular(bundled("modular_4"), max_items=2)


# -- bounds -------------------------------------------------------------------

def test_ratio_bound_endpoints():
    assert ratio_bound(1, "cardinality") == pytest.approx(1 - 1 / math.e, abs=1e-12)
    assert ratio_bound(0, "cardinality") == pytest.approx(1 / math.e, abs=1e-12)
    assert ratio_bound(0, "knapsack") == 0.1
    assert ratio_bound(0.5, "cardinality") == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(InvalidArgument):
        ratio_bound(1.5, "knapsack")
    with pytest.raises(InvalidArgument):
        ratio_bound(0.5, "matroid")


def test_certify_examples(cut_edge):
    rep = certify(cut_edge, "arg")
    assert (rep.m, rep.opt_value, rep.policy_value, rep.passed) == (0, 1, 1, True)
    assert rep.theoretical_ratio == pytest.approx(0.3679, abs=1e-4)

    rep = certify(bernoulli_modular("ab"), "arg")
    assert (rep.m, rep.opt_value, rep.policy_value, rep.passed) == (1, Fraction(1, 2), Fraction(1, 2), True)
    assert rep.theoretical_ratio == pytest.approx(0.6321, abs=1e-4)

    rep = certify(cut_edge, "sad")
    assert (rep.m, rep.opt_value, rep.policy_value, rep.passed) == (0, 1, Fraction(4, 5), True)
    assert rep.theoretical_ratio == pytest.approx(0.1)
    with pytest.raises(InvalidArgument):
        certify(cut_edge, "greedy")


def test_certify_zero_opt_has_no_ratio():
    inst = with_utility(bernoulli_modular("ab"), ZeroUtility())
    rep = certify(inst, "arg")
    assert rep.achieved_ratio is None and rep.passed


def test_intermediate_inequalities_smallest_knapsack():
    inst = bundled("knap_blend_joint_3")
    m = monotonicity_ratio(inst).m
    for check in (sample_greedy_check(inst), half_sample_check(inst, m), disjoint_union_check(inst, m)):
        assert check.holds, check

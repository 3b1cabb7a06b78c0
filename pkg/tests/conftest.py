import sys
from collections import Counter
from fractions import Fraction

import pytest

from adasub.fileformat import load_instance, parse_instance, resolve_instance_path
from adasub.model import NOOP, STOP, Instance


def toy(body: str, name: str = "t"):
    return parse_instance(body, name)


def bernoulli_modular(ids="ab", weights=None, k=1, p="1/2", constraint="cardinality"):
    weights = weights or {i: 1 for i in ids}
    items = "\n".join(f"{i} 1" for i in ids)
    prior = "\n".join(f"{i} 1:{p} 0:{1 - Fraction(p)}" for i in ids)
    w = ",".join(f"{i}:{weights[i]}" for i in ids)
    return toy(f"[items]\n{items}\n[states]\n1 0\n[prior]\nindependent\n{prior}\n"
               f"[utility]\nmodular weights={w} active=1\n[constraint]\n{constraint} {k}\n")


def with_utility(instance: Instance, utility) -> Instance:
    return Instance(instance.items, instance.state_space, instance.prior, utility,
                    instance.budget, instance.constraint, instance.name)


def bundled(name: str) -> Instance:
    return load_instance(resolve_instance_path(name))


def final_sets(policy, phi) -> Counter:
    """Distribution over final selected masks when the truth is ``phi``,
    obtained by walking the policy's branches directly."""
    out: Counter = Counter()

    def go(ctx, p, mask):
        for q, action, nxt in policy.step(ctx):
            if action is STOP:
                out[mask] += p * q
            elif action is NOOP:
                go(nxt, p * q, mask)
            else:
                go(policy.observe(nxt, action, phi[action]), p * q, mask | 1 << action)

    for q, ctx in policy.start():
        go(ctx, q, 0)
    return out


def favg_by_realization(policy) -> Fraction:
    inst = policy.instance
    total = Fraction(0)
    for phi, p in inst.prior.atoms():
        for mask, q in final_sets(policy, phi).items():
            total += p * q * inst.utility.value(mask, phi)
    return total


@pytest.fixture
def cut_edge():
    return bundled("graph_cut_edge")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])

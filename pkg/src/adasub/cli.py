"""Command-line experiment harness.

Every subcommand writes CSV (header plus rows) to stdout or ``--output``.
Diagnostics go to stderr as single-line ``key=value`` records.  Exit codes:
0 success, 1 certification failure, 2 usage or parse error, 3 oracle guard
exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import AdasubError, ParseError, TooLarge
from .evaluation import exact_favg, mc_favg
from .fileformat import bundled_paths, load_instance, parse_instance, resolve_instance_path
from .model import CARDINALITY, KNAPSACK, NOOP, Instance
from .oracles import (
    BOUND_CONSTRAINT,
    DEFAULT_MAX_ITEMS,
    DEFAULT_TREE_LIMIT,
    TOL,
    certify,
    check_adaptive_monotone,
    check_adaptive_submodular,
    monotonicity_ratio,
    optimal_policy,
    ratio_bound,
)
from .policies import POLICY_IDS, draw_realization, make_policy, run_trajectory

__all__ = ["ExperimentConfig", "ReportRow", "Outcome", "parse_instance", "run_experiment", "main"]


@dataclass
class ExperimentConfig:
    subcommand: str
    instance: str | None = None
    policy: str = "arg"
    seed: int = 42
    samples: int = 100000
    exact: bool = False
    tolerance: float = TOL
    output: str | None = None
    node_limit: int | None = None
    tree_limit: int = DEFAULT_TREE_LIMIT
    max_items: int = DEFAULT_MAX_ITEMS
    sample_set: str | None = None
    realization: str | None = None
    m: float | None = None
    constraint: str = CARDINALITY
    instances_dir: str | None = None
    jobs: int = 1
    timing: bool = False


@dataclass
class ReportRow:
    instance_id: str
    policy_id: str
    constraint: str
    k: object
    m: object = None
    opt_value: object = None
    policy_value: object = None
    theoretical_ratio: object = None
    achieved_ratio: object = None
    passed: object = None
    method: str = "exact"
    samples: object = None
    std_error: object = None
    seed: object = None
    wall_time_ms: object = None


REPORT_HEADER = [
    "instance_id", "policy_id", "constraint", "k", "m", "opt_value", "policy_value",
    "theoretical_ratio", "achieved_ratio", "pass", "method", "samples", "std_error", "seed", "wall_time_ms",
]


@dataclass
class Outcome:
    header: list
    rows: list  # lists of cell values
    exit_code: int = 0
    text: str | None = None  # plain output instead of CSV (``bound``)


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, str)):
        return str(x)
    return repr(float(x))


def _report_cells(row: ReportRow) -> list:
    return [_cell(v) for v in asdict(row).values()]


def _num_text(x) -> str:
    return str(x.numerator) if getattr(x, "denominator", 2) == 1 else _cell(x)


# -- subcommands -------------------------------------------------------------

def _instance(config: ExperimentConfig) -> Instance:
    if not config.instance:
        raise AdasubError("--instance is required")
    return load_instance(resolve_instance_path(config.instance))


def _sample_mask(instance: Instance, text: str | None):
    if text is None:
        return None
    ids = [t for t in text.split(",") if t]
    return instance.mask(ids)


def _check(config):
    inst = _instance(config)
    rows = []
    for prop, fn in (("adaptive_submodular", check_adaptive_submodular), ("adaptive_monotone", check_adaptive_monotone)):
        w = fn(inst, config.tolerance, config.max_items)
        rows.append([inst.name, prop, _cell(w is None), "" if w is None else w.describe(inst)])
    return Outcome(["instance_id", "property", "pass", "witness"], rows)


def _ratio(config):
    inst = _instance(config)
    rows = []
    for variant, feasible in (("unrestricted", False), ("budget_feasible", True)):
        r = monotonicity_ratio(inst, feasible, config.tree_limit)
        rows.append([inst.name, variant, _cell(r.m_raw), _cell(r.m), r.policy.format(inst),
                     r.continuation.format(inst), str(r.n_policies)])
    return Outcome(["instance_id", "variant", "m_raw", "m", "policy", "continuation", "n_policies"], rows)


def _opt(config):
    inst = _instance(config)
    tree, value = optimal_policy(inst, config.max_items)
    return Outcome(["instance_id", "constraint", "k", "opt_value", "policy"],
                   [[inst.name, inst.constraint, _num_text(inst.budget), _cell(value), tree.format(inst)]])


def _run(config):
    import random

    inst = _instance(config)
    policy = make_policy(inst, config.policy, _sample_mask(inst, config.sample_set))
    rng = random.Random(config.seed)
    if config.realization:
        pairs = dict(p.split("=", 1) for p in config.realization.split(",") if p)
        phi = inst.realization(pairs)
    else:
        phi = draw_realization(inst, rng)
    traj = run_trajectory(policy, phi, rng)
    states = inst.state_space.states
    actions = ";".join("noop" if a is NOOP else f"{inst.items[a].id}={states[s]}" for a, s in traj.steps)
    realized = ";".join(f"{i}={states[s]}" for i, s in zip(inst.ids, phi))
    row = [inst.name, config.policy, str(config.seed), realized, actions,
           ";".join(traj.items(inst)), _cell(traj.utility)]
    return Outcome(["instance_id", "policy_id", "seed", "realization", "actions", "final_set", "utility"], [row])


def _evaluate(config):
    inst = _instance(config)
    policy = make_policy(inst, config.policy, _sample_mask(inst, config.sample_set))
    start = time.perf_counter()
    row = ReportRow(inst.name, config.policy, inst.constraint, _num_text(inst.budget))
    if config.exact:
        rep = exact_favg(inst, policy, config.node_limit)
    else:
        rep = mc_favg(inst, policy, config.samples, config.seed)
    row.policy_value = rep.value
    row.method = rep.method
    row.samples = rep.samples
    row.std_error = rep.std_error
    row.seed = rep.seed
    if config.timing:
        row.wall_time_ms = round((time.perf_counter() - start) * 1000, 3)
    return Outcome(REPORT_HEADER, [_report_cells(row)])


def _certify_rows(inst: Instance, policies, config, timing: bool) -> list:
    start = time.perf_counter()
    m = monotonicity_ratio(inst, False, config.tree_limit).m
    _, opt = optimal_policy(inst, config.max_items)
    rows = []
    for pid in policies:
        t0 = time.perf_counter()
        rep = certify(inst, pid, m=m, opt=opt, tol=config.tolerance)
        elapsed = (time.perf_counter() - t0 + (t0 - start if pid == policies[0] else 0)) * 1000
        rows.append(ReportRow(
            inst.name, pid, rep.constraint, _num_text(inst.budget), rep.m, rep.opt_value, rep.policy_value,
            rep.theoretical_ratio, rep.achieved_ratio, rep.passed, "exact", None, None, config.seed,
            round(elapsed, 3) if timing else None,
        ))
    return rows


def _certify(config):
    if config.policy not in BOUND_CONSTRAINT:
        raise AdasubError(f"certify supports policies {sorted(BOUND_CONSTRAINT)}")
    inst = _instance(config)
    rows = _certify_rows(inst, [config.policy], config, config.timing)
    code = 0 if all(r.passed for r in rows) else 1
    return Outcome(REPORT_HEADER, [_report_cells(r) for r in rows], code)


def _bench_policies(inst: Instance) -> list:
    return ["arg", "sad"] if inst.constraint == CARDINALITY else ["sad"]


def _bench_one(args):
    path, config = args
    inst = load_instance(path)
    return _certify_rows(inst, _bench_policies(inst), config, config.timing)


def _bench(config):
    paths = sorted(Path(config.instances_dir).glob("*.toy")) if config.instances_dir else bundled_paths()
    jobs = [(p, config) for p in paths]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_bench_one, jobs))
    else:
        results = [_bench_one(j) for j in jobs]
    rows = sorted((r for batch in results for r in batch), key=lambda r: (r.instance_id, r.policy_id))
    code = 0 if all(r.passed for r in rows) else 1
    return Outcome(REPORT_HEADER, [_report_cells(r) for r in rows], code)


def _bound(config):
    if config.m is None:
        raise AdasubError("--m is required")
    return Outcome([], [], 0, f"{ratio_bound(config.m, config.constraint):.12g}")


HANDLERS = {
    "check": _check, "ratio": _ratio, "opt": _opt, "run": _run,
    "evaluate": _evaluate, "bound": _bound, "certify": _certify, "bench": _bench,
}


def run_experiment(config: ExperimentConfig) -> Outcome:
    if not config.node_limit:
        return HANDLERS[config.subcommand](config)
    # the guard is read from the environment so bench workers see it too
    saved = os.environ.get("ADASUB_NODE_LIMIT")
    os.environ["ADASUB_NODE_LIMIT"] = str(config.node_limit)
    try:
        return HANDLERS[config.subcommand](config)
    finally:
        if saved is None:
            del os.environ["ADASUB_NODE_LIMIT"]
        else:
            os.environ["ADASUB_NODE_LIMIT"] = saved


def render(outcome: Outcome) -> str:
    if outcome.text is not None:
        return outcome.text + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(outcome.header)
    writer.writerows(outcome.rows)
    return buf.getvalue()


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write CSV here instead of stdout")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--tolerance", type=float, default=TOL)
    common.add_argument("--node-limit", type=int, default=None,
                        help="exact-evaluation node guard (default: $ADASUB_NODE_LIMIT or 1e7)")
    common.add_argument("--tree-limit", type=int, default=DEFAULT_TREE_LIMIT, help="policy enumeration guard")
    common.add_argument("--max-items", type=int, default=DEFAULT_MAX_ITEMS, help="DP and checker size guard")
    common.add_argument("--timing", action="store_true", help="fill wall_time_ms (output is then not reproducible)")

    with_instance = argparse.ArgumentParser(add_help=False)
    with_instance.add_argument("--instance", "-i", required=True, help="instance file or bundled instance name")

    with_policy = argparse.ArgumentParser(add_help=False)
    with_policy.add_argument("--policy", "-p", choices=POLICY_IDS, default="arg")
    with_policy.add_argument("--sample-set", help="comma-separated item ids for policy 'dg'")

    parser = argparse.ArgumentParser(prog="adasub", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("check", parents=[common, with_instance], help="adaptive submodularity and monotonicity")
    sub.add_parser("ratio", parents=[common, with_instance], help="adaptive monotonicity ratio")
    sub.add_parser("opt", parents=[common, with_instance], help="optimal adaptive policy")
    p = sub.add_parser("run", parents=[common, with_instance, with_policy], help="one seeded trajectory")
    p.add_argument("--realization", help="fix the true states, e.g. a=1,b=0")
    p = sub.add_parser("evaluate", parents=[common, with_instance, with_policy], help="exact or Monte-Carlo f_avg")
    p.add_argument("--samples", type=int, default=None, help="Monte-Carlo sample count; without it the value is exact")
    p.add_argument("--exact", action="store_true", help="force exact evaluation")
    p = sub.add_parser("bound", parents=[common], help="approximation ratio for a given m")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--constraint", choices=(CARDINALITY, KNAPSACK), default=CARDINALITY)
    p = sub.add_parser("certify", parents=[common, with_instance], help="check the approximation bound")
    p.add_argument("--policy", "-p", choices=sorted(BOUND_CONSTRAINT), default="arg")
    p = sub.add_parser("bench", parents=[common], help="certify every bundled instance")
    p.add_argument("--instances-dir", help="directory of .toy files (default: bundled instances)")
    p.add_argument("--jobs", type=int, default=min(4, os.cpu_count() or 1))
    return parser


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    values = {k: v for k, v in vars(ns).items() if k in known and v is not None}
    if ns.subcommand == "evaluate" and ns.samples is None:
        values["exact"] = True
    return ExperimentConfig(**values)


def _fail(kind: str, message: str, code: int) -> int:
    detail = " ".join(str(message).split())
    print(f"error={kind} message={detail!r}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    config = config_from_args(ns)
    try:
        outcome = run_experiment(config)
    except ParseError as exc:
        return _fail("parse-error", exc, 2)
    except TooLarge as exc:
        return _fail("oracle-guard-exceeded", exc, 3)
    except (AdasubError, FileNotFoundError) as exc:
        return _fail("usage", exc, 2)
    text = render(outcome)
    if config.output:
        Path(config.output).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())

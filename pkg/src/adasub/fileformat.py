"""Line-oriented instance files.

::

    # comments start with '#'
    [items]
    a 1            # id cost
    b 2
    [states]
    1 0            # state tokens, in order
    [prior]
    independent
    a 1:1/2 0:1/2  # id state:prob ...
    b 1:0.3 0:0.7
    [utility]
    blend lambda=1/2 weights=a:2,b:1 active=1 edges=a-b:1
    [constraint]
    knapsack 3

A joint prior replaces the ``independent`` block with ``joint`` followed by
lines ``prob id:state id:state ...``.  Utility kinds are ``modular``
(``weights``, ``active``), ``cut`` (``edges``), ``blend`` (``lambda`` plus the
keys of both), ``coverage`` (``covers=a:x|y,b:y``, ``active``) and ``zero``.
Numbers are read as exact rationals (``1/3``, ``0.25`` and ``2`` all work).
"""
from __future__ import annotations

import re
from fractions import Fraction
from pathlib import Path

from .errors import AdasubError, ParseError
from .model import (
    CARDINALITY,
    KNAPSACK,
    IndependentPrior,
    Instance,
    Item,
    JointPrior,
    StateSpace,
)
from .utility import Blend, GraphCut, StochasticCoverage, StochasticModular, ZeroUtility

TOKEN = re.compile(r"^[A-Za-z0-9_.]+$")
SECTIONS = ("items", "states", "prior", "utility", "constraint")


def _num(text: str, line: int, col: int) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad number {text!r}", line, col) from None


class _Line:
    def __init__(self, lineno: int, raw: str):
        self.lineno = lineno
        self.raw = raw
        self.fields = []  # (column, text)
        for m in re.finditer(r"\S+", raw):
            self.fields.append((m.start() + 1, m.group()))

    def error(self, message: str, field: int = 0) -> ParseError:
        col = self.fields[field][0] if self.fields else 1
        return ParseError(message, self.lineno, col)


def _split_sections(text: str) -> dict:
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        stripped = body.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError("unterminated section header", lineno, body.index("[") + 1)
            name = stripped[1:-1].strip()
            if name not in SECTIONS:
                raise ParseError(f"unknown section [{name}]", lineno, body.index("[") + 1)
            if name in sections:
                raise ParseError(f"duplicate section [{name}]", lineno, body.index("[") + 1)
            sections[name] = []
            current = name
            continue
        if current is None:
            raise ParseError("content before the first section", lineno, 1)
        sections[current].append(_Line(lineno, body))
    for name in SECTIONS:
        if name not in sections:
            raise ParseError(f"missing section [{name}]", 0, 0)
    return sections


def _token(line: _Line, i: int, what: str) -> str:
    tok = line.fields[i][1]
    if not TOKEN.match(tok):
        raise line.error(f"invalid {what} {tok!r}", i)
    return tok


def _pair(line: _Line, i: int, text: str, what: str) -> tuple:
    if ":" not in text:
        raise line.error(f"expected {what} as key:value, got {text!r}", i)
    key, value = text.rsplit(":", 1)
    return key, value


def parse_instance(text: str, name: str = "instance") -> Instance:
    sec = _split_sections(text)

    items = []
    for line in sec["items"]:
        if len(line.fields) != 2:
            raise line.error("item lines are 'id cost'")
        item_id = _token(line, 0, "item id")
        cost = _num(line.fields[1][1], line.lineno, line.fields[1][0])
        if cost < 0:
            raise line.error(f"negative cost for item {item_id!r}", 1)
        items.append(Item(item_id, cost))
    if not items:
        raise ParseError("no items", 0, 0)
    ids = [it.id for it in items]
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate item id", sec["items"][0].lineno, 1)
    index = {i: k for k, i in enumerate(ids)}

    tokens = [t for line in sec["states"] for t in (_token(line, j, "state") for j in range(len(line.fields)))]
    if not tokens or len(set(tokens)) != len(tokens):
        raise ParseError("states must be a nonempty list of distinct tokens", sec["states"][0].lineno if sec["states"] else 0, 1)
    states = StateSpace(tuple(tokens))
    sindex = {t: k for k, t in enumerate(tokens)}

    def item_of(line, i, text):
        if text not in index:
            raise line.error(f"unknown item {text!r}", i)
        return index[text]

    def state_of(line, i, text):
        if text not in sindex:
            raise line.error(f"unknown state {text!r}", i)
        return sindex[text]

    prior_lines = sec["prior"]
    if not prior_lines or len(prior_lines[0].fields) != 1:
        raise ParseError("prior must start with 'independent' or 'joint'", prior_lines[0].lineno if prior_lines else 0, 1)
    mode = prior_lines[0].fields[0][1]
    try:
        if mode == "independent":
            dists: list = [None] * len(items)
            for line in prior_lines[1:]:
                e = item_of(line, 0, line.fields[0][1])
                if dists[e] is not None:
                    raise line.error(f"duplicate prior for item {ids[e]!r}")
                dist = [Fraction(0)] * len(tokens)
                for j in range(1, len(line.fields)):
                    s, p = _pair(line, j, line.fields[j][1], "state:prob")
                    dist[state_of(line, j, s)] = _num(p, line.lineno, line.fields[j][0])
                if any(p < 0 for p in dist):
                    raise line.error(f"negative probability for item {ids[e]!r}")
                if abs(float(sum(dist)) - 1) > 1e-9:
                    raise line.error(f"probabilities for item {ids[e]!r} sum to {float(sum(dist)):.12g}, not 1")
                dists[e] = tuple(dist)
            missing = [ids[e] for e, d in enumerate(dists) if d is None]
            if missing:
                raise ParseError(f"no prior for item {missing[0]!r}", prior_lines[0].lineno, 1)
            prior = IndependentPrior(tuple(dists))
        elif mode == "joint":
            table = []
            for line in prior_lines[1:]:
                p = _num(line.fields[0][1], line.lineno, line.fields[0][0])
                phi: list = [None] * len(items)
                for j in range(1, len(line.fields)):
                    e_txt, s_txt = _pair(line, j, line.fields[j][1], "id:state")
                    e = item_of(line, j, e_txt)
                    if phi[e] is not None:
                        raise line.error(f"item {e_txt!r} assigned twice", j)
                    phi[e] = state_of(line, j, s_txt)
                if None in phi:
                    raise line.error("joint realization must assign every item")
                table.append((tuple(phi), p))
            total = sum(p for _, p in table)
            if abs(float(total) - 1) > 1e-9:
                raise ParseError(f"joint probabilities sum to {float(total):.12g}, not 1", prior_lines[0].lineno, 1)
            prior = JointPrior(len(items), tuple(table))
        else:
            raise prior_lines[0].error(f"unknown prior kind {mode!r}")
    except ParseError:
        raise
    except AdasubError as exc:
        raise ParseError(str(exc), prior_lines[0].lineno, 1) from None

    util_lines = sec["utility"]
    if len(util_lines) != 1:
        raise ParseError("utility section must hold exactly one line", util_lines[0].lineno if util_lines else 0, 1)
    utility = _parse_utility(util_lines[0], index, sindex, len(items))

    cons = sec["constraint"]
    if len(cons) != 1 or len(cons[0].fields) != 2:
        raise ParseError("constraint must be 'cardinality k' or 'knapsack k'", cons[0].lineno if cons else 0, 1)
    line = cons[0]
    kind = line.fields[0][1]
    if kind not in (CARDINALITY, KNAPSACK):
        raise line.error(f"unknown constraint {kind!r}")
    budget = _num(line.fields[1][1], line.lineno, line.fields[1][0])
    if kind == CARDINALITY:
        if budget.denominator != 1 or budget < 1:
            raise line.error("cardinality budget must be a positive integer", 1)
        if any(it.cost != 1 for it in items):
            raise line.error("cardinality constraint requires every cost to be 1")
    if budget < 0:
        raise line.error("budget must be nonnegative", 1)

    try:
        return Instance(tuple(items), states, prior, utility, budget, kind, name)
    except AdasubError as exc:
        raise ParseError(str(exc), 0, 0) from None


def _parse_utility(line: _Line, index: dict, sindex: dict, n: int):
    kind = line.fields[0][1]
    params = {}
    for j in range(1, len(line.fields)):
        text = line.fields[j][1]
        if "=" not in text:
            raise line.error(f"expected key=value, got {text!r}", j)
        key, value = text.split("=", 1)
        if key in params:
            raise line.error(f"duplicate parameter {key!r}", j)
        params[key] = (j, value)

    def item(j, text):
        if text not in index:
            raise line.error(f"unknown item {text!r}", j)
        return index[text]

    def modular():
        weights = [Fraction(1)] * n
        if "weights" in params:
            j, value = params["weights"]
            for part in value.split(","):
                e, w = _pair(line, j, part, "item:weight")
                weights[item(j, e)] = _num(w, line.lineno, line.fields[j][0])
        return StochasticModular(tuple(weights), active())

    def active():
        if "active" not in params:
            return 0
        j, value = params["active"]
        if value not in sindex:
            raise line.error(f"unknown state {value!r}", j)
        return sindex[value]

    def cut():
        edges = []
        if "edges" in params:
            j, value = params["edges"]
            for part in value.split(","):
                uv, w = _pair(line, j, part, "u-v:weight")
                if "-" not in uv:
                    raise line.error(f"expected edge as u-v:weight, got {part!r}", j)
                u, v = uv.split("-", 1)
                edges.append((item(j, u), item(j, v), _num(w, line.lineno, line.fields[j][0])))
        return GraphCut(tuple(edges))

    allowed = {
        "modular": {"weights", "active"},
        "cut": {"edges"},
        "blend": {"lambda", "weights", "active", "edges"},
        "coverage": {"covers", "active"},
        "zero": set(),
    }
    if kind not in allowed:
        raise line.error(f"unknown utility kind {kind!r}")
    for key, (j, _) in params.items():
        if key not in allowed[kind]:
            raise line.error(f"unknown parameter {key!r} for {kind}", j)
    try:
        if kind == "modular":
            return modular()
        if kind == "cut":
            return cut()
        if kind == "blend":
            if "lambda" not in params:
                raise line.error("blend needs lambda=")
            j, value = params["lambda"]
            return Blend(_num(value, line.lineno, line.fields[j][0]), modular(), cut())
        if kind == "coverage":
            covers = [frozenset()] * n
            if "covers" in params:
                j, value = params["covers"]
                for part in value.split(","):
                    e, elems = _pair(line, j, part, "item:x|y")
                    covers[item(j, e)] = frozenset(x for x in elems.split("|") if x)
            return StochasticCoverage(tuple(covers), active())
        return ZeroUtility()
    except ParseError:
        raise
    except AdasubError as exc:
        raise line.error(str(exc)) from None


def _fmt(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _utility_text(instance: Instance) -> str:
    u = instance.utility
    ids = instance.ids
    states = instance.state_space.states

    def modular(m):
        weights = ",".join(f"{ids[e]}:{_fmt(w)}" for e, w in enumerate(m.weights))
        return f"weights={weights} active={states[m.active]}"

    def cut(c):
        if not c.edges:
            return ""
        return "edges=" + ",".join(f"{ids[a]}-{ids[b]}:{_fmt(w)}" for a, b, w in c.edges)

    if isinstance(u, StochasticModular):
        return f"modular {modular(u)}"
    if isinstance(u, GraphCut):
        return f"cut {cut(u)}".rstrip()
    if isinstance(u, Blend):
        return f"blend lambda={_fmt(u.lam)} {modular(u.modular)} {cut(u.cut)}".rstrip()
    if isinstance(u, StochasticCoverage):
        covers = ",".join(f"{ids[e]}:{'|'.join(sorted(c))}" for e, c in enumerate(u.covers))
        return f"coverage covers={covers} active={states[u.active]}"
    if isinstance(u, ZeroUtility):
        return "zero"
    raise AdasubError(f"utility {type(u).__name__} has no file representation")


def serialize_instance(instance: Instance) -> str:
    ids = instance.ids
    states = instance.state_space.states
    out = ["[items]"]
    out += [f"{it.id} {_fmt(it.cost)}" for it in instance.items]
    out += ["[states]", " ".join(states), "[prior]"]
    prior = instance.prior
    if isinstance(prior, IndependentPrior):
        out.append("independent")
        for e, dist in enumerate(prior.dists):
            out.append(ids[e] + " " + " ".join(f"{states[s]}:{_fmt(p)}" for s, p in enumerate(dist)))
    else:
        out.append("joint")
        for phi, p in prior.table:
            out.append(_fmt(p) + " " + " ".join(f"{ids[e]}:{states[s]}" for e, s in enumerate(phi)))
    out += ["[utility]", _utility_text(instance), "[constraint]", f"{instance.constraint} {_fmt(instance.budget)}"]
    return "\n".join(out) + "\n"


def load_instance(path) -> Instance:
    path = Path(path)
    return parse_instance(path.read_text(encoding="utf-8"), name=path.stem)


BUNDLED_DIR = Path(__file__).with_name("instances")


def bundled_paths() -> list:
    return sorted(BUNDLED_DIR.glob("*.toy"))


def bundled_instances() -> list:
    return [load_instance(p) for p in bundled_paths()]


def resolve_instance_path(name) -> Path:
    """Accept a path, or the file name of a bundled instance."""
    path = Path(name)
    if path.exists():
        return path
    for cand in (BUNDLED_DIR / name, BUNDLED_DIR / f"{name}.toy"):
        if cand.exists():
            return cand
    raise FileNotFoundError(f"no instance file {name!r}")

"""ASM-style workflow execution over :class:`CoalitionState`.

A workflow is a control graph of update, condition and terminal nodes. A
configuration pairs the current node with a state snapshot, workflow
variable bindings and the event history. ``step`` is deterministic: every
node kind yields at most one successor, and a condition whose taken branch
is absent yields none (a stuck configuration, i.e. a deadlock).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from coalcheck import coalition as cc
from coalcheck._frozen import FrozenMap
from coalcheck.logic import (
    WILDCARD,
    And,
    EventAtom,
    Expr,
    Implies,
    Not,
    Or,
    RequestAtom,
    atoms,
    names,
)
from coalcheck.policy import Action, Effect, Policy, instantiate

# Argument expressions: identifier, set literal, or action literal.
Arg = Union[str, frozenset, Action]
Value = Union[str, frozenset, Action, Effect, None]

FAULT_NODE = "<fault>"
FAULT_OP = "RuntimeFault"

BUILTIN_ARITY = {
    "create_agent": (1, 2),
    "create_coalition": (1, 1),
    "join": (2, 2),
    "share_info": (3, 3),
    "request_info": (4, 4),
}


class Outcome(str, enum.Enum):
    SUCCESS = "SUCCESS"
    ERROR = "ERROR"


class UnboundVariable(Exception):
    pass


class _Fault(Exception):
    pass


@dataclass(frozen=True)
class UpdateNode:
    id: str
    op: str
    args: tuple[Arg, ...]
    next: str
    result: Optional[str] = None


@dataclass(frozen=True)
class ConditionNode:
    id: str
    guard: Expr
    yes: Optional[str] = None
    no: Optional[str] = None


@dataclass(frozen=True)
class TerminalNode:
    id: str
    outcome: Outcome = Outcome.SUCCESS
    message: str = ""


Node = Union[UpdateNode, ConditionNode, TerminalNode]


def successors_of(node: Node) -> tuple[str, ...]:
    if isinstance(node, UpdateNode):
        return (node.next,)
    if isinstance(node, ConditionNode):
        return tuple(x for x in (node.yes, node.no) if x is not None)
    return ()


def arg_names(args: Iterable[Arg]) -> list[str]:
    out: list[str] = []
    for a in args:
        if isinstance(a, Action):
            continue
        if isinstance(a, frozenset):
            out.extend(sorted(a))
        else:
            out.append(a)
    return out


@dataclass(frozen=True)
class Workflow:
    nodes: FrozenMap[str, Node]
    entry: str

    def __post_init__(self) -> None:
        if not isinstance(self.nodes, FrozenMap):
            object.__setattr__(self, "nodes", FrozenMap(self.nodes))

    @classmethod
    def of(cls, nodes: Iterable[Node], entry: str) -> "Workflow":
        return cls(FrozenMap({n.id: n for n in nodes}), entry)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(
            n.result for n in self.nodes.values() if isinstance(n, UpdateNode) and n.result
        )


@dataclass(frozen=True)
class Producer:
    """A scenario-declared operation that mints a fresh information token.

    The token is named ``prefix#n`` and handed to ``actor``. When ``attach``
    is set, a copy of that policy with resource ``prefix`` rebound to the
    token joins the actor's PDP; when ``shares_into`` is set the actor then
    shares the token into that coalition.
    """

    name: str
    actor: str
    prefix: str
    params: Optional[tuple[str, ...]] = None
    shares_into: Optional[str] = None
    attach: Optional[Policy] = None
    requires: Optional[Expr] = None


@dataclass(frozen=True)
class OpRegistry:
    producers: FrozenMap[str, Producer] = field(default_factory=FrozenMap)

    def __post_init__(self) -> None:
        if not isinstance(self.producers, FrozenMap):
            object.__setattr__(self, "producers", FrozenMap(self.producers))

    @classmethod
    def of(cls, producers: Iterable[Producer]) -> "OpRegistry":
        return cls(FrozenMap({p.name: p for p in producers}))

    def __contains__(self, op: str) -> bool:
        return op in BUILTIN_ARITY or op in self.producers


@dataclass(frozen=True)
class Event:
    node: str
    op: str
    args: tuple[Value, ...]
    result: Value = None


@dataclass(frozen=True)
class Config:
    node: str
    state: cc.CoalitionState
    bindings: FrozenMap[str, Value] = field(default_factory=FrozenMap)
    history: tuple[Event, ...] = ()

    def key(self) -> tuple:
        """Deduplication key: node, canonical state text, bindings."""
        return (self.node, self.state.canonical(), tuple(sorted(self.bindings.items(), key=_item_key)))


def _item_key(kv):
    return (kv[0], render_value(kv[1]))


def initial_config(w: Workflow, init: cc.CoalitionState) -> Config:
    return Config(w.entry, init)


# --- values and rendering --------------------------------------------------


def render_value(v: Value) -> str:
    if v is None:
        return "-"
    if isinstance(v, frozenset):
        return "{" + ", ".join(sorted(render_value(x) for x in v)) + "}"
    if isinstance(v, enum.Enum):
        return v.value
    return str(v)


def render_event(e: Event) -> str:
    if e.op == FAULT_OP:
        return f"{FAULT_OP}: {e.args[0]}"
    call = f"{e.op}({', '.join(render_value(a) for a in e.args)})"
    return call if e.result is None else f"{call} -> {render_value(e.result)}"


# --- resolution ------------------------------------------------------------


def _resolver(bindings: Mapping[str, Value], variables: frozenset[str]) -> Callable[[str], Value]:
    def resolve(name: str) -> Value:
        if name in bindings:
            return bindings[name]
        if name in variables:
            raise UnboundVariable(name)
        return name

    return resolve


def _resolve_arg(a: Arg, resolve: Callable[[str], Value]) -> Value:
    if isinstance(a, Action):
        return a
    if isinstance(a, frozenset):
        return frozenset(_as_info(resolve(x)) for x in a)
    return resolve(a)


def _as_str(v: Value, what: str) -> str:
    if not isinstance(v, str) or isinstance(v, enum.Enum):
        raise _Fault(f"expected {what}, got {render_value(v)}")
    return v


def _as_info(v: Value) -> str:
    return _as_str(v, "information item")


def _as_info_set(v: Value) -> frozenset[str]:
    if isinstance(v, frozenset):
        return v
    return frozenset({_as_info(v)})


# --- guards ----------------------------------------------------------------


def _eval_expr(
    e: Expr,
    state: cc.CoalitionState,
    history: Sequence[Event],
    resolve: Callable[[str], Value],
) -> bool:
    if isinstance(e, RequestAtom):
        got = cc.request_info(
            state,
            _as_str(resolve(e.subject), "agent"),
            _as_str(resolve(e.coalition), "coalition"),
            e.action,
            frozenset(_as_info(resolve(r)) for r in e.resources),
        )
        return got is e.effect
    if isinstance(e, EventAtom):
        pats = [None if a == WILDCARD else resolve(a) for a in e.args]
        res = None if e.result in (None, WILDCARD) else resolve(e.result)
        return any(
            ev.op == e.op
            and len(ev.args) == len(pats)
            and all(p is None or p == v for p, v in zip(pats, ev.args))
            and (res is None or res == ev.result)
            for ev in history
        )
    if isinstance(e, Not):
        return not _eval_expr(e.operand, state, history, resolve)
    if isinstance(e, And):
        return all(_eval_expr(o, state, history, resolve) for o in e.operands)
    if isinstance(e, Or):
        return any(_eval_expr(o, state, history, resolve) for o in e.operands)
    if isinstance(e, Implies):
        return (not _eval_expr(e.lhs, state, history, resolve)) or _eval_expr(
            e.rhs, state, history, resolve
        )
    raise TypeError(f"not an expression: {e!r}")


def eval_guard(cfg: Config, guard: Expr, variables: frozenset[str] = frozenset()) -> bool:
    """Evaluate a condition guard against ``cfg``.

    Raises :class:`UnboundVariable` for workflow variables not yet bound and
    lets coalition-core precondition errors propagate.
    """
    return _eval_expr(guard, cfg.state, cfg.history, _resolver(cfg.bindings, variables))


def describe_guard(cfg: Config, guard: Expr, variables: frozenset[str] = frozenset()) -> str:
    """Human-readable account of every request atom the guard consults."""
    resolve = _resolver(cfg.bindings, variables)
    parts = []
    for a in atoms(guard):
        if not isinstance(a, RequestAtom):
            continue
        try:
            s = render_value(resolve(a.subject))
            c = render_value(resolve(a.coalition))
            rs = render_value(frozenset(render_value(resolve(r)) for r in a.resources))
            head = f"request_info({s}, {c}, {a.action.value}, {rs})"
            rset = frozenset(_as_info(resolve(r)) for r in a.resources)
            got = cc.request_info(cfg.state, _as_str(resolve(a.subject), "agent"), c, a.action, rset)
            parts.append(f"{head} = {got.value}")
        except (cc.CoalitionError, UnboundVariable, _Fault) as exc:
            parts.append(f"request_info(...) failed: {type(exc).__name__}: {exc}")
    return "; ".join(parts)


# --- updates ---------------------------------------------------------------


def _fault(cfg: Config, node_id: str, msg: str) -> Config:
    ev = Event(node_id, FAULT_OP, (msg,))
    return Config(FAULT_NODE, cfg.state, cfg.bindings, cfg.history + (ev,))


def _apply_builtin(state: cc.CoalitionState, op: str, vals: list[Value]):
    lo, hi = BUILTIN_ARITY[op]
    if not lo <= len(vals) <= hi:
        raise _Fault(f"{op} expects {lo}..{hi} arguments, got {len(vals)}")
    if op == "create_agent":
        info = _as_info_set(vals[1]) if len(vals) > 1 else frozenset()
        return cc.create_agent(state, _as_str(vals[0], "agent"), info), None
    if op == "create_coalition":
        return cc.create_coalition(state, _as_str(vals[0], "coalition")), None
    if op == "join":
        return cc.join(state, _as_str(vals[0], "agent"), _as_str(vals[1], "coalition")), None
    if op == "share_info":
        return (
            cc.share_info(
                state, _as_str(vals[0], "agent"), _as_str(vals[1], "coalition"), _as_info_set(vals[2])
            ),
            None,
        )
    # request_info
    act = vals[2]
    if not isinstance(act, Action):
        raise _Fault(f"expected action, got {render_value(act)}")
    eff = cc.request_info(
        state, _as_str(vals[0], "agent"), _as_str(vals[1], "coalition"), act, _as_info_set(vals[3])
    )
    return state, eff


def _next_token(prefix: str, history: Sequence[Event]) -> str:
    mark = prefix + "#"
    n = sum(
        1
        for e in history
        if isinstance(e.result, str) and not isinstance(e.result, enum.Enum) and e.result.startswith(mark)
    )
    return f"{prefix}#{n + 1}"


def _apply_producer(cfg: Config, p: Producer, vals: list[Value]):
    state = cfg.state
    if p.params is not None:
        if len(vals) != len(p.params):
            raise _Fault(f"{p.name} expects {len(p.params)} arguments, got {len(vals)}")
        env = dict(zip(p.params, vals))
    else:
        env = {}
    if p.requires is not None:
        ok = _eval_expr(p.requires, state, cfg.history, lambda n: env.get(n, n))
        if not ok:
            raise _Fault(f"precondition of {p.name} not satisfied")
    token = _next_token(p.prefix, cfg.history)
    policy = None if p.attach is None else instantiate(p.attach, p.prefix, token)
    state = cc.add_information(state, p.actor, token, policy)
    if p.shares_into is not None:
        state = cc.share_info(state, p.actor, p.shares_into, {token})
    return state, token


def apply_update(
    cfg: Config, node: UpdateNode, reg: OpRegistry, variables: frozenset[str] = frozenset()
) -> Config:
    """Execute one update node.

    Coalition-core errors and malformed arguments do not raise: they append a
    ``RuntimeFault`` event and move to the implicit error terminal.
    """
    resolve = _resolver(cfg.bindings, variables)
    try:
        vals = [_resolve_arg(a, resolve) for a in node.args]
        if node.op in BUILTIN_ARITY:
            state, result = _apply_builtin(cfg.state, node.op, vals)
        elif node.op in reg.producers:
            state, result = _apply_producer(cfg, reg.producers[node.op], vals)
        else:
            raise _Fault(f"unregistered operation {node.op}")
    except (cc.CoalitionError, _Fault) as exc:
        return _fault(cfg, node.id, f"{node.op}: {type(exc).__name__}: {exc}")
    bindings = cfg.bindings
    if node.result is not None:
        if result is None:
            return _fault(cfg, node.id, f"{node.op}: produces no result for {node.result}")
        bindings = bindings.set(node.result, result)
    ev = Event(node.id, node.op, tuple(vals), result)
    return Config(node.next, state, bindings, cfg.history + (ev,))


# --- stepping --------------------------------------------------------------


def is_terminal(cfg: Config, w: Workflow) -> bool:
    return cfg.node == FAULT_NODE or isinstance(w.nodes.get(cfg.node), TerminalNode)


def _branch(cfg: Config, node: ConditionNode, variables: frozenset[str]) -> tuple[bool, Optional[str]]:
    taken = eval_guard(cfg, node.guard, variables)
    return taken, node.yes if taken else node.no


def step(cfg: Config, w: Workflow, reg: OpRegistry) -> tuple[Config, ...]:
    if cfg.node == FAULT_NODE:
        return ()
    node = w.nodes[cfg.node]
    variables = w.variables
    if isinstance(node, UpdateNode):
        return (apply_update(cfg, node, reg, variables),)
    if isinstance(node, ConditionNode):
        try:
            _, target = _branch(cfg, node, variables)
        except (cc.CoalitionError, _Fault) as exc:
            return (_fault(cfg, node.id, f"guard: {type(exc).__name__}: {exc}"),)
        if target is None:
            return ()
        return (Config(target, cfg.state, cfg.bindings, cfg.history),)
    return ()


def terminal_outcome(cfg: Config, w: Workflow) -> Outcome:
    if cfg.node == FAULT_NODE:
        return Outcome.ERROR
    node = w.nodes[cfg.node]
    assert isinstance(node, TerminalNode)
    return node.outcome


def describe(cfg: Config, w: Workflow, succ: Optional[Config]) -> tuple[str, str]:
    """(node kind, summary) for one trace line."""
    if cfg.node == FAULT_NODE:
        return "FAULT", render_event(cfg.history[-1])
    node = w.nodes[cfg.node]
    variables = w.variables
    if isinstance(node, UpdateNode):
        if succ is not None and len(succ.history) > len(cfg.history):
            return "UPDATE", render_event(succ.history[-1])
        args = ", ".join(render_value(a) for a in node.args)
        return "UPDATE", f"pending {node.op}({args})"
    if isinstance(node, ConditionNode):
        detail = describe_guard(cfg, node.guard, variables)
        try:
            taken, target = _branch(cfg, node, variables)
        except (cc.CoalitionError, _Fault, UnboundVariable):
            return "CONDITION", f"{detail} -> fault"
        label = "yes" if taken else "no"
        arrow = f"{label} {target}" if target is not None else f"{label} (missing branch)"
        return "CONDITION", f"{detail} -> {arrow}" if detail else f"guard -> {arrow}"
    if node.outcome is Outcome.SUCCESS:
        return "TERMINAL", "done"
    return "TERMINAL", f"fail {json.dumps(node.message)}"


@dataclass(frozen=True)
class TraceStep:
    index: int
    node: str
    kind: str
    summary: str


def trace_steps(path: Sequence[Config], w: Workflow) -> list[TraceStep]:
    out = []
    for i, cfg in enumerate(path):
        succ = path[i + 1] if i + 1 < len(path) else None
        kind, summary = describe(cfg, w, succ)
        out.append(TraceStep(i, cfg.node, kind, summary))
    return out


def format_steps(steps: Sequence[TraceStep], fmt: str = "plain") -> list[str]:
    if fmt == "json-lines":
        return [
            json.dumps({"step": s.index, "node": s.node, "kind": s.kind, "event": s.summary})
            for s in steps
        ]
    return [f"{s.index}\t{s.node}\t{s.kind}\t{s.summary}" for s in steps]


@dataclass(frozen=True)
class Trace:
    configs: tuple[Config, ...]
    outcome: str
    steps: tuple[TraceStep, ...]

    @property
    def events(self) -> tuple[Event, ...]:
        return self.configs[-1].history

    def lines(self, fmt: str = "plain") -> list[str]:
        body = format_steps(self.steps, fmt)
        if fmt == "json-lines":
            return body + [json.dumps({"outcome": self.outcome})]
        return body + [f"OUTCOME: {self.outcome}"]


DEFAULT_MAX_STEPS = 10_000


def run(
    w: Workflow, init: cc.CoalitionState, reg: OpRegistry, max_steps: int = DEFAULT_MAX_STEPS
) -> Trace:
    if max_steps < 1:
        raise ValueError("max_steps must be positive")
    cfg = initial_config(w, init)
    configs = [cfg]
    while True:
        if is_terminal(cfg, w):
            outcome = f"COMPLETED({terminal_outcome(cfg, w).value})"
            break
        succ = step(cfg, w, reg)
        if not succ:
            outcome = f"DEADLOCK({cfg.node})"
            break
        if len(configs) - 1 >= max_steps:
            outcome = "STEP_LIMIT"
            break
        cfg = succ[0]
        configs.append(cfg)
    path = tuple(configs)
    return Trace(path, outcome, tuple(trace_steps(path, w)))


# --- validation ------------------------------------------------------------


class Severity(str, enum.Enum):
    ERROR = "ERROR"
    WARNING = "WARNING"


@dataclass(frozen=True)
class Issue:
    severity: Severity
    code: str
    node: Optional[str]
    message: str

    def __str__(self) -> str:
        where = f" [{self.node}]" if self.node else ""
        return f"{self.severity.value} {self.code}{where}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def errors(self) -> tuple[Issue, ...]:
        return tuple(i for i in self.issues if i.severity is Severity.ERROR)

    @property
    def warnings(self) -> tuple[Issue, ...]:
        return tuple(i for i in self.issues if i.severity is Severity.WARNING)

    @property
    def ok(self) -> bool:
        return not self.errors


def _must_bound(w: Workflow, reachable: list[str]) -> dict[str, frozenset[str]]:
    """Variables bound on every path from the entry to each node."""
    universe = w.variables
    preds: dict[str, list[str]] = {n: [] for n in reachable}
    for n in reachable:
        for s in successors_of(w.nodes[n]):
            if s in preds:
                preds[s].append(n)
    bound_in = {n: (frozenset() if n == w.entry else universe) for n in reachable}

    def out(n: str) -> frozenset[str]:
        node = w.nodes[n]
        if isinstance(node, UpdateNode) and node.result:
            return bound_in[n] | {node.result}
        return bound_in[n]

    changed = True
    while changed:
        changed = False
        for n in reachable:
            acc = universe
            for p in preds[n]:
                acc = acc & out(p)
            if n == w.entry:
                acc = frozenset()
            if acc != bound_in[n]:
                bound_in[n] = acc
                changed = True
    return bound_in


# Expected kind of each built-in argument: a name, a READ/WRITE action, or
# information (a single name or a {set}).
_ARG_KINDS = {
    "create_agent": ("a name", "information"),
    "create_coalition": ("a name",),
    "join": ("a name", "a name"),
    "share_info": ("a name", "a name", "information"),
    "request_info": ("a name", "a name", "READ or WRITE", "information"),
}


def _arg_fits(a: Arg, kind: str) -> bool:
    if kind == "READ or WRITE":
        return isinstance(a, Action)
    if isinstance(a, Action):
        return False
    return kind == "information" or not isinstance(a, frozenset)


def validate_workflow(w: Workflow, reg: OpRegistry) -> ValidationReport:
    issues: list[Issue] = []

    def add(sev: Severity, code: str, node: Optional[str], msg: str) -> None:
        issues.append(Issue(sev, code, node, msg))

    if w.entry not in w.nodes:
        add(Severity.ERROR, "MISSING_ENTRY", None, f"entry node {w.entry} does not exist")
    for nid in sorted(w.nodes):
        node = w.nodes[nid]
        for s in successors_of(node):
            if s not in w.nodes:
                add(Severity.ERROR, "DANGLING_EDGE", nid, f"edge to unknown node {s}")
        if isinstance(node, ConditionNode):
            if node.yes is None:
                add(Severity.WARNING, "MISSING_BRANCH", nid, "no 'yes' branch; a true guard deadlocks")
            if node.no is None:
                add(Severity.WARNING, "MISSING_BRANCH", nid, "no 'no' branch; a false guard deadlocks")
        if isinstance(node, UpdateNode):
            _check_update(node, reg, add)

    reach: list[str] = []
    if w.entry in w.nodes:
        seen = {w.entry}
        queue = [w.entry]
        while queue:
            n = queue.pop(0)
            reach.append(n)
            for s in successors_of(w.nodes[n]):
                if s in w.nodes and s not in seen:
                    seen.add(s)
                    queue.append(s)
        for nid in sorted(set(w.nodes) - seen):
            add(Severity.ERROR, "UNREACHABLE_NODE", nid, "not reachable from entry")

        variables = w.variables
        bound = _must_bound(w, reach)
        for nid in sorted(reach):
            node = w.nodes[nid]
            if isinstance(node, UpdateNode):
                used = arg_names(node.args)
            elif isinstance(node, ConditionNode):
                used = list(names(node.guard))
            else:
                used = []
            for name in sorted(set(used)):
                if name in variables and name not in bound[nid]:
                    add(Severity.ERROR, "UNBOUND_VARIABLE", nid, f"{name} may be unbound here")
    return ValidationReport(tuple(issues))


def _check_update(node: UpdateNode, reg: OpRegistry, add) -> None:
    nid = node.id
    if node.op not in reg:
        add(Severity.ERROR, "UNREGISTERED_OP", nid, f"operation {node.op} is not registered")
        return
    if node.op in BUILTIN_ARITY:
        lo, hi = BUILTIN_ARITY[node.op]
        if not lo <= len(node.args) <= hi:
            add(Severity.ERROR, "ARITY_MISMATCH", nid, f"{node.op} takes {lo}..{hi} arguments")
        if node.result is not None and node.op != "request_info":
            add(Severity.ERROR, "NO_RESULT", nid, f"{node.op} produces no result to bind")
        for k, (a, kind) in enumerate(zip(node.args, _ARG_KINDS[node.op])):
            if not _arg_fits(a, kind):
                add(Severity.ERROR, "ARG_TYPE", nid, f"argument {k + 1} of {node.op} must be {kind}")
        return
    p = reg.producers[node.op]
    if p.params is not None and len(p.params) != len(node.args):
        add(Severity.ERROR, "ARITY_MISMATCH", nid, f"{node.op} takes {len(p.params)} arguments")

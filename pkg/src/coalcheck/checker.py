"""Liveness and safety checking over the finite reachable configuration space."""
from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from coalcheck import coalition as cc
from coalcheck.engine import (
    DEFAULT_MAX_STEPS,
    Config,
    OpRegistry,
    Workflow,
    format_steps,
    initial_config,
    is_terminal,
    step,
    trace_steps,
)
from coalcheck.logic import (
    WILDCARD,
    And,
    EventAtom,
    Expr,
    Formula,
    Implies,
    Not,
    Or,
    RequestAtom,
    Sort,
    atoms,
)
from coalcheck.policy import Effect

DEFAULT_STATE_CAP = 1_000_000


class StateLimitExceeded(Exception):
    pass


class SortMismatch(Exception):
    pass


@dataclass(frozen=True)
class PolicyVariant:
    """An alternative starting point differing only in declared PDP content."""

    name: str
    state: cc.CoalitionState
    registry: OpRegistry


@dataclass(frozen=True)
class ExplorationSpace:
    workflow: Workflow
    variants: tuple[PolicyVariant, ...]
    configs: tuple[Config, ...]
    variant_of: tuple[int, ...]
    successors: tuple[tuple[int, ...], ...]
    parent: tuple[Optional[int], ...]
    expanded: tuple[bool, ...]

    def __len__(self) -> int:
        return len(self.configs)

    def path_to(self, index: int) -> list[Config]:
        out = []
        i: Optional[int] = index
        while i is not None:
            out.append(self.configs[i])
            i = self.parent[i]
        return out[::-1]

    def is_stuck(self, index: int) -> bool:
        return (
            self.expanded[index]
            and not self.successors[index]
            and not is_terminal(self.configs[index], self.workflow)
        )

    def stuck(self) -> list[int]:
        return [i for i in range(len(self.configs)) if self.is_stuck(i)]


_POOL_CTX: tuple = ()


def _pool_init(w: Workflow, regs: tuple[OpRegistry, ...]) -> None:
    global _POOL_CTX
    _POOL_CTX = (w, regs)


def _expand(item: tuple[Config, int]) -> tuple[Config, ...]:
    w, regs = _POOL_CTX
    cfg, v = item
    return step(cfg, w, regs[v])


def reachable(
    w: Workflow,
    init: cc.CoalitionState,
    reg: OpRegistry,
    variants: Sequence[PolicyVariant] = (),
    max_steps: int = DEFAULT_MAX_STEPS,
    state_cap: int = DEFAULT_STATE_CAP,
    workers: int = 1,
) -> ExplorationSpace:
    """Breadth-first closure of ``step`` from one initial config per variant.

    The declared policies always form variant 0 ("default"). Exploration is
    level-synchronous, so fanning a level out over ``workers`` processes
    yields exactly the single-process space.
    """
    all_variants = (PolicyVariant("default", init, reg),) + tuple(variants)
    regs = tuple(v.registry for v in all_variants)
    configs: list[Config] = []
    variant_of: list[int] = []
    succs: list[list[int]] = []
    parent: list[Optional[int]] = []
    expanded: list[bool] = []
    index: dict[tuple, int] = {}

    def add(cfg: Config, v: int, par: Optional[int]) -> int:
        k = (v,) + cfg.key()
        if k in index:
            return index[k]
        if len(configs) >= state_cap:
            raise StateLimitExceeded(f"more than {state_cap} configurations")
        index[k] = len(configs)
        configs.append(cfg)
        variant_of.append(v)
        succs.append([])
        parent.append(par)
        expanded.append(False)
        return index[k]

    frontier = []
    for v, var in enumerate(all_variants):
        i = add(initial_config(w, var.state), v, None)
        if i not in frontier:
            frontier.append(i)

    pool = None
    if workers > 1:
        pool = ProcessPoolExecutor(max_workers=workers, initializer=_pool_init, initargs=(w, regs))
    try:
        depth = 0
        while frontier and depth < max_steps:
            items = [(configs[i], variant_of[i]) for i in frontier]
            if pool is not None:
                chunk = max(1, len(items) // (workers * 4))
                results = list(pool.map(_expand, items, chunksize=chunk))
            else:
                results = [step(cfg, w, regs[v]) for cfg, v in items]
            nxt: list[int] = []
            for i, out in zip(frontier, results):
                expanded[i] = True
                for cfg in out:
                    before = len(configs)
                    j = add(cfg, variant_of[i], i)
                    succs[i].append(j)
                    if j >= before:
                        nxt.append(j)
            frontier = nxt
            depth += 1
    finally:
        if pool is not None:
            pool.shutdown()

    return ExplorationSpace(
        w,
        all_variants,
        tuple(configs),
        tuple(variant_of),
        tuple(tuple(s) for s in succs),
        tuple(parent),
        tuple(expanded),
    )


# --- reports ---------------------------------------------------------------


class Verdict(str, enum.Enum):
    HOLDS = "HOLDS"
    VIOLATED = "VIOLATED"


@dataclass(frozen=True)
class Witness:
    index: int
    config: Config
    variant: str
    path: tuple[Config, ...]
    assignment: Optional[dict] = None


@dataclass(frozen=True)
class CheckReport:
    label: str
    verdict: Verdict
    witness: Optional[Witness] = None
    explored: int = 0

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    def lines(self, workflow: Workflow, fmt: str = "plain") -> list[str]:
        if fmt == "json-lines":
            import json

            head = {"check": self.label, "verdict": self.verdict.value, "configs": self.explored}
            if self.witness is not None:
                head["node"] = self.witness.config.node
                head["variant"] = self.witness.variant
                if self.witness.assignment is not None:
                    head["assignment"] = self.witness.assignment
            out = [json.dumps(head, sort_keys=True)]
        else:
            out = [f"{self.label}: {self.verdict.value}", f"  configurations explored: {self.explored}"]
            if self.witness is not None:
                w = self.witness
                out.append(f"  witness: config {w.index} at {w.config.node} (variant {w.variant})")
                if w.assignment:
                    binds = ", ".join(f"{k}={v}" for k, v in w.assignment.items())
                    out.append(f"  assignment: {binds}")
        if self.witness is not None:
            out.extend(format_steps(trace_steps(self.witness.path, workflow), fmt))
        return out


def _witness(space: ExplorationSpace, i: int, assignment: Optional[dict] = None) -> Witness:
    return Witness(
        i,
        space.configs[i],
        space.variants[space.variant_of[i]].name,
        tuple(space.path_to(i)),
        assignment,
    )


def check_liveness(space: ExplorationSpace) -> CheckReport:
    """HOLDS iff every expanded non-terminal configuration has a successor."""
    stuck = space.stuck()
    if not stuck:
        return CheckReport("LIVENESS", Verdict.HOLDS, explored=len(space))
    return CheckReport("LIVENESS", Verdict.VIOLATED, _witness(space, stuck[0]), len(space))


def check_safety(f: Formula, space: ExplorationSpace, name: str = "") -> CheckReport:
    """``f`` names a forbidden situation: HOLDS iff it is false everywhere."""
    label = f"SAFETY {name}" if name else "SAFETY"
    for i, cfg in enumerate(space.configs):
        ok, assignment = eval_formula(f, cfg)
        if ok:
            return CheckReport(label, Verdict.VIOLATED, _witness(space, i, assignment), len(space))
    return CheckReport(label, Verdict.HOLDS, explored=len(space))


# --- formula evaluation ----------------------------------------------------


def check_sorts(f: Formula) -> dict[str, Sort]:
    sorts: dict[str, Sort] = {}
    for q in f.quantifiers:
        if q.var in sorts:
            raise SortMismatch(f"variable {q.var} quantified twice")
        sorts[q.var] = q.sort
    for a in atoms(f.body):
        if not isinstance(a, RequestAtom):
            continue
        uses = [(a.subject, Sort.AGENT), (a.coalition, Sort.COALITION)]
        uses += [(r, Sort.INFORMATION) for r in a.resources]
        for name, want in uses:
            if name in sorts and sorts[name] is not want:
                raise SortMismatch(f"{name} is {sorts[name].value} but used as {want.value}")
    return sorts


def carrier(sort: Sort, cfg: Config) -> list[str]:
    """The finite domain a quantifier of ``sort`` ranges over in ``cfg``."""
    if sort is Sort.AGENT:
        return sorted(cfg.state.agents)
    if sort is Sort.COALITION:
        return sorted(cfg.state.coals)
    items = set(cfg.state.all_information())
    for ev in cfg.history:
        r = ev.result
        if isinstance(r, str) and not isinstance(r, enum.Enum):
            items.add(r)
    return sorted(items)


# Three-valued evaluation under a partial assignment: None means "depends on
# variables not yet assigned".


def _lookup(name: str, env: dict, free: frozenset):
    if name in env:
        return env[name]
    if name in free:
        return None
    return name


def _partial(e: Expr, cfg: Config, env: dict, free: frozenset) -> Optional[bool]:
    if isinstance(e, RequestAtom):
        s = _lookup(e.subject, env, free)
        c = _lookup(e.coalition, env, free)
        rs = [_lookup(r, env, free) for r in e.resources]
        if s is None or c is None or any(r is None for r in rs):
            return None
        try:
            got = cc.request_info(cfg.state, s, c, e.action, frozenset(rs))
        except cc.CoalitionError:
            # the request cannot be issued, so it yields no effect at all
            return False
        return got is e.effect
    if isinstance(e, EventAtom):
        pats = [None if a == WILDCARD else a for a in e.args]
        res_pat = None if e.result in (None, WILDCARD) else e.result
        unknown = False
        for ev in cfg.history:
            if ev.op != e.op or len(ev.args) != len(pats):
                continue
            verdict: Optional[bool] = True
            pairs = list(zip(pats, ev.args)) + [(res_pat, ev.result)]
            for pat, val in pairs:
                if pat is None:
                    continue
                want = _lookup(pat, env, free)
                if want is None:
                    verdict = None
                elif want != val:
                    verdict = False
                    break
            if verdict:
                return True
            if verdict is None:
                unknown = True
        return None if unknown else False
    if isinstance(e, Not):
        v = _partial(e.operand, cfg, env, free)
        return None if v is None else not v
    if isinstance(e, And):
        result: Optional[bool] = True
        for o in e.operands:
            v = _partial(o, cfg, env, free)
            if v is False:
                return False
            if v is None:
                result = None
        return result
    if isinstance(e, Or):
        result = False
        for o in e.operands:
            v = _partial(o, cfg, env, free)
            if v is True:
                return True
            if v is None:
                result = None
        return result
    if isinstance(e, Implies):
        return _partial(Or((Not(e.lhs), e.rhs)), cfg, env, free)
    raise TypeError(f"not an expression: {e!r}")


def eval_formula(f: Formula, cfg: Config) -> tuple[bool, Optional[dict]]:
    """Evaluate ``f`` in ``cfg``.

    Returns ``(value, assignment)``; when the formula starts with existential
    quantifiers and is true, ``assignment`` binds them to the first
    satisfying values in canonical (sorted) order.
    """
    check_sorts(f)
    qs = f.quantifiers
    domains = [carrier(q.sort, cfg) for q in qs]
    all_vars = frozenset(q.var for q in qs)
    n_lead = 0
    while n_lead < len(qs) and not qs[n_lead].universal:
        n_lead += 1

    def fixed(value: bool, start: int) -> bool:
        # body no longer depends on qs[start:]; only empty domains can flip it
        for k in range(len(qs) - 1, start - 1, -1):
            if not domains[k]:
                value = qs[k].universal
        return value

    def go(k: int, env: dict) -> tuple[bool, Optional[dict]]:
        free = all_vars - env.keys()
        v = _partial(f.body, cfg, env, free)
        if v is not None:
            out = fixed(v, k)
            if out and k < n_lead:
                env = dict(env)
                for j in range(k, n_lead):
                    env[qs[j].var] = domains[j][0]
            return out, env if out else None
        q = qs[k]
        for value in domains[k]:
            r, wit = go(k + 1, {**env, q.var: value})
            if q.universal and not r:
                return False, None
            if not q.universal and r:
                return True, wit
        return q.universal, (env if q.universal else None)

    value, env = go(0, {})
    if not value:
        return False, None
    return True, {qs[j].var: env[qs[j].var] for j in range(n_lead)} if env is not None else {}

"""Reader and writer for ``.dcs`` scenario files and property formulas.

The format is block structured; newlines carry no meaning and ``#`` starts
a comment. Parsing never raises anything but :class:`ParseError`, whose
``diagnostics`` point into the source text.
"""
from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass
from typing import Callable, Optional, Union

from coalcheck.coalition import is_identifier
from coalcheck.engine import (
    BUILTIN_ARITY,
    ConditionNode,
    Outcome,
    TerminalNode,
    UpdateNode,
    Workflow,
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
    Quantifier,
    RequestAtom,
    Sort,
    render,
    render_formula,
)
from coalcheck.policy import Action, CombAlg, Effect, Policy, Rule, Target
from coalcheck.scenario import (
    AgentDecl,
    CoalitionDecl,
    PolicyDef,
    ProducerDecl,
    PropertyDecl,
    Scenario,
    Settings,
    VariantDecl,
)

RESERVED = frozenset(
    {"READ", "WRITE", "PERMIT", "DENY", "NOT_APPLICABLE", "NOTAPPLICABLE", "DENY_OVERRIDES",
     "PERMIT_OVERRIDES", "INFORMATION", "AGENT", "COALITION", WILDCARD}
)


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity.lower()}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# --- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>->|==|[{}()\[\],=:.])
  | (?P<word>(?:[A-Za-z0-9_]|-(?!>))+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # word | string | punct | eof
    text: str
    offset: int


class _Stop(Exception):
    def __init__(self, diag: ParseDiagnostic):
        self.diag = diag


class _Source:
    def __init__(self, text: str):
        self.text = text
        self.starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def position(self, offset: int) -> tuple[int, int]:
        line = bisect.bisect_right(self.starts, offset) - 1
        return line + 1, offset - self.starts[line] + 1

    def diag(self, offset: int, message: str) -> ParseDiagnostic:
        line, col = self.position(min(offset, len(self.text)))
        return ParseDiagnostic("ERROR", line, col, message)


def _tokenize(src: _Source) -> list[_Tok]:
    text = src.text
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos] == '"':
                raise _Stop(src.diag(pos, "unterminated string"))
            raise _Stop(src.diag(pos, f"unexpected character {text[pos]!r}"))
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            out.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    out.append(_Tok("eof", "", len(text)))
    return out


# --- parser ----------------------------------------------------------------

_CONNECTIVES = ("and", "or", "implies", "not")


class _Parser:
    def __init__(self, src: _Source):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.diags: list[ParseDiagnostic] = []

    # token plumbing

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("word", "punct") and t.text == text

    def stop(self, message: str, tok: Optional[_Tok] = None) -> _Stop:
        return _Stop(self.src.diag((tok or self.tok).offset, message))

    def note(self, tok: _Tok, message: str) -> None:
        self.diags.append(self.src.diag(tok.offset, message))

    def _found(self) -> str:
        t = self.tok
        return "end of input" if t.kind == "eof" else repr(t.text)

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            raise self.stop(f"expected {text!r}, found {self._found()}")
        return self.advance()

    def word(self, what: str) -> _Tok:
        if self.tok.kind != "word":
            raise self.stop(f"expected {what}, found {self._found()}")
        return self.advance()

    def ident(self, what: str = "identifier") -> tuple[str, _Tok]:
        t = self.word(what)
        if not is_identifier(t.text):
            raise self.stop(f"invalid {what} {t.text!r} (1-64 characters from [A-Za-z0-9_-])", t)
        if t.text in RESERVED:
            raise self.stop(f"{t.text!r} is reserved and cannot be used as {what}", t)
        return t.text, t

    def ident_list(self, what: str) -> list[tuple[str, _Tok]]:
        return self._list("[", "]", lambda: self.ident(what))

    def _list(self, open_: str, close: str, item: Callable):
        self.expect(open_)
        out = []
        if not self.at(close):
            out.append(item())
            while self.at(","):
                self.advance()
                out.append(item())
        self.expect(close)
        return out

    def enum_word(self, enum_cls, what: str):
        t = self.word(what)
        try:
            return enum_cls(t.text), t
        except ValueError:
            allowed = " or ".join(e.value for e in enum_cls)
            raise self.stop(f"{what} must be {allowed}, found {t.text!r}", t) from None

    def integer(self, what: str) -> int:
        t = self.word(what)
        if not t.text.isdigit() or len(t.text) > 12 or int(t.text) < 1:
            raise self.stop(f"{what} must be a positive integer", t)
        return int(t.text)

    def block(self, handlers: dict[str, Callable[[_Tok], None]], what: str) -> None:
        self.expect("{")
        while not self.at("}"):
            t = self.word(f"a key in {what} block or '}}'")
            handler = handlers.get(t.text)
            if handler is None:
                keys = ", ".join(sorted(handlers))
                raise self.stop(f"unknown key {t.text!r} in {what} block (expected one of: {keys})", t)
            handler(t)
        self.advance()

    def keyed(self, seen: set, key_tok: _Tok, what: str) -> None:
        if key_tok.text in seen:
            self.note(key_tok, f"duplicate key {key_tok.text!r} in {what} block")
        seen.add(key_tok.text)
        self.expect("=")

    # expressions

    def formula(self) -> Formula:
        qs = []
        while self.at("exists") or self.at("forall"):
            universal = self.advance().text == "forall"
            var, _ = self.ident("quantified variable")
            self.expect(":")
            sort, _ = self.enum_word(Sort, "sort")
            self.expect(".")
            qs.append(Quantifier(var, sort, universal))
        return Formula(tuple(qs), self.expr())

    def expr(self) -> Expr:
        lhs = self._or()
        if self.at("implies"):
            self.advance()
            return Implies(lhs, self.expr())
        return lhs

    def _or(self) -> Expr:
        items = [self._and()]
        while self.at("or"):
            self.advance()
            items.append(self._and())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def _and(self) -> Expr:
        items = [self._unary()]
        while self.at("and"):
            self.advance()
            items.append(self._unary())
        return items[0] if len(items) == 1 else And(tuple(items))

    def _unary(self) -> Expr:
        if self.at("not"):
            self.advance()
            return Not(self._unary())
        return self._primary()

    def _primary(self) -> Expr:
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("event"):
            return self._event()
        if self.at("request") or self.at("request_info"):
            return self._request()
        prev = self.toks[self.i - 1] if self.i else None
        if self.tok.kind == "eof" and prev is not None and prev.text in _CONNECTIVES:
            raise self.stop(f"dangling {prev.text!r} at end of input", prev)
        raise self.stop(
            f"expected 'request(...) == EFFECT', 'event op(...)', 'not' or '(', found {self._found()}"
        )

    def _pattern(self) -> str:
        if self.at(WILDCARD):
            self.advance()
            return WILDCARD
        return self.ident("argument")[0]

    def _event(self) -> EventAtom:
        self.advance()
        op, _ = self.ident("operation name")
        args = self._list("(", ")", self._pattern)
        result = None
        if self.at("->"):
            self.advance()
            result = self._pattern()
        return EventAtom(op, tuple(args), result)

    def _request(self) -> RequestAtom:
        self.advance()
        self.expect("(")
        subject, _ = self.ident("subject")
        self.expect(",")
        coal, _ = self.ident("coalition")
        self.expect(",")
        action, _ = self.enum_word(Action, "action")
        self.expect(",")
        resources = [n for n, _ in self._list("{", "}", lambda: self.ident("resource"))]
        if not resources:
            raise self.stop("a request names at least one resource", self.toks[self.i - 1])
        self.expect(")")
        self.expect("==")
        effect, _ = self.enum_word(Effect, "effect")
        return RequestAtom(subject, coal, action, tuple(sorted(set(resources))), effect)


def _decode(source: Union[str, bytes]) -> str:
    if isinstance(source, str):
        return source
    try:
        return source.decode("utf-8")
    except UnicodeDecodeError as exc:
        good = source[: exc.start].decode("utf-8")
        src = _Source(good)
        raise ParseError([src.diag(len(good), "invalid UTF-8 byte sequence")]) from None


def _run(source: Union[str, bytes], body: Callable[[_Parser], object]):
    text = _decode(source)
    src = _Source(text)
    p: Optional[_Parser] = None
    diags: list[ParseDiagnostic] = []
    try:
        p = _Parser(src)
        result = body(p)
    except _Stop as stop:
        diags.append(stop.diag)
    except RecursionError:
        diags.append(src.diag(0, "input nested too deeply"))
    if p is not None:
        diags = p.diags + diags
    if diags:
        raise ParseError(sorted(set(diags), key=lambda d: (d.line, d.column, d.message)))
    return result


def parse_formula(source: Union[str, bytes]) -> Formula:
    def body(p: _Parser) -> Formula:
        f = p.formula()
        if p.tok.kind != "eof":
            raise p.stop(f"unexpected {p._found()} after formula")
        return f

    return _run(source, body)


def parse_guard(source: Union[str, bytes]) -> Expr:
    def body(p: _Parser) -> Expr:
        e = p.expr()
        if p.tok.kind != "eof":
            raise p.stop(f"unexpected {p._found()} after expression")
        return e

    return _run(source, body)


# --- scenario grammar ------------------------------------------------------


class _ScenarioReader:
    def __init__(self, p: _Parser):
        self.p = p
        self.agents: list[AgentDecl] = []
        self.coalitions: list[CoalitionDecl] = []
        self.policies: list[PolicyDef] = []
        self.producers: list[ProducerDecl] = []
        self.properties: list[PropertyDecl] = []
        self.variants: list[VariantDecl] = []
        self.settings: Optional[Settings] = None
        self.workflow: Optional[Workflow] = None
        self.names: dict[str, dict[str, _Tok]] = {}
        # (namespace, name, token, message) checked once everything is read
        self.refs: list[tuple[str, str, _Tok, str]] = []
        self.node_refs: list[tuple[str, _Tok]] = []
        self.op_refs: list[tuple[str, _Tok]] = []
        self.shares: list[tuple[str, list[tuple[str, _Tok]], _Tok]] = []

    def declare(self, ns: str, name: str, tok: _Tok) -> None:
        seen = self.names.setdefault(ns, {})
        if name in seen:
            self.p.note(tok, f"duplicate {ns} {name!r}")
        else:
            seen[name] = tok

    def ref(self, ns: str, name: str, tok: _Tok) -> None:
        self.refs.append((ns, name, tok, f"unknown {ns} {name!r}"))

    def read(self) -> Scenario:
        p = self.p
        items = {
            "settings": self.settings_block,
            "agent": self.agent,
            "policy": self.policy,
            "coalition": self.coalition,
            "producer": self.producer,
            "workflow": self.workflow_block,
            "property": self.property,
            "variant": self.variant,
        }
        while p.tok.kind != "eof":
            t = p.word("a declaration")
            handler = items.get(t.text)
            if handler is None:
                raise p.stop(
                    f"unknown declaration {t.text!r} (expected one of: {', '.join(sorted(items))})", t
                )
            handler(t)
        if self.workflow is None:
            raise p.stop("scenario has no workflow block")
        self.resolve()
        return Scenario(
            self.workflow,
            tuple(self.agents),
            tuple(self.coalitions),
            tuple(self.policies),
            tuple(self.producers),
            tuple(self.properties),
            tuple(self.variants),
            self.settings or Settings(),
        )

    def resolve(self) -> None:
        p = self.p
        for ns, name, tok, msg in self.refs:
            if name not in self.names.get(ns, {}):
                p.note(tok, msg)
        nodes = self.names.get("node", {})
        for name, tok in self.node_refs:
            if name not in nodes:
                p.note(tok, f"unknown node {name!r}")
        producers = self.names.get("producer", {})
        for op, tok in self.op_refs:
            if op not in BUILTIN_ARITY and op not in producers:
                p.note(tok, f"unknown operation {op!r}")
        held = {a.id: a.info for a in self.agents}
        for agent, items, tok in self.shares:
            if agent in held:
                for item, itok in items:
                    if item not in held[agent]:
                        p.note(itok, f"agent {agent!r} does not hold {item!r}")

    # blocks

    def settings_block(self, kw: _Tok) -> None:
        p = self.p
        if self.settings is not None:
            p.note(kw, "duplicate settings block")
        values = {"max_steps": Settings().max_steps, "state_cap": Settings().state_cap}
        seen: set = set()

        def setter(key):
            def h(t):
                p.keyed(seen, t, "settings")
                values[key] = p.integer(key)
            return h

        p.block({k: setter(k) for k in values}, "settings")
        self.settings = Settings(values["max_steps"], values["state_cap"])

    def agent(self, kw: _Tok) -> None:
        p = self.p
        aid, tok = p.ident("agent id")
        self.declare("agent", aid, tok)
        info: list[str] = []
        pols: list[str] = []
        combine = [CombAlg.DENY_OVERRIDES]
        seen: set = set()

        def h_info(t):
            p.keyed(seen, t, "agent")
            info.extend(n for n, _ in p.ident_list("information item"))

        def h_policy(t):
            name, ntok = p.ident("policy name")
            self.ref("policy", name, ntok)
            pols.append(name)

        def h_combine(t):
            p.keyed(seen, t, "agent")
            combine[0] = p.enum_word(CombAlg, "combining algorithm")[0]

        p.block({"info": h_info, "policy": h_policy, "combine": h_combine}, "agent")
        self.agents.append(AgentDecl(aid, frozenset(info), frozenset(pols), combine[0]))

    def target(self) -> Target:
        p = self.p
        fields: dict[str, list] = {}
        p.expect("(")
        while not p.at(")"):
            t = p.word("'subjects', 'resources' or 'actions'")
            if t.text not in ("subjects", "resources", "actions"):
                raise p.stop(f"unknown target field {t.text!r}", t)
            if t.text in fields:
                p.note(t, f"duplicate target field {t.text!r}")
            p.expect("=")
            if t.text == "actions":
                fields[t.text] = [a for a, _ in p._list("[", "]", lambda: p.enum_word(Action, "action"))]
            else:
                what = "subject" if t.text == "subjects" else "resource"
                fields[t.text] = [n for n, _ in p.ident_list(what)]
            if p.at(","):
                p.advance()
            elif not p.at(")"):
                raise p.stop(f"expected ',' or ')', found {p._found()}")
        p.advance()
        return Target(
            frozenset(fields.get("subjects", ())),
            frozenset(fields.get("resources", ())),
            frozenset(fields.get("actions", ())),
        )

    def rule(self) -> Optional[Rule]:
        p = self.p
        start = p.tok
        target: list[Optional[Target]] = [None]
        effect: list[Optional[Effect]] = [None]
        seen: set = set()

        def h_target(t):
            p.keyed(seen, t, "rule")
            target[0] = self.target()

        def h_effect(t):
            p.keyed(seen, t, "rule")
            eff, etok = p.enum_word(Effect, "rule effect")
            if eff is Effect.NOT_APPLICABLE:
                p.note(etok, "rule effect must be PERMIT or DENY")
                return
            effect[0] = eff

        p.block({"target": h_target, "effect": h_effect}, "rule")
        if effect[0] is None:
            if "effect" not in seen:
                p.note(start, "rule has no effect")
            return None
        return Rule(effect[0], target[0])

    def policy(self, kw: _Tok) -> None:
        p = self.p
        name, tok = p.ident("policy name")
        self.declare("policy", name, tok)
        target: list[Optional[Target]] = [None]
        combine = [CombAlg.DENY_OVERRIDES]
        rules: list[Rule] = []
        seen: set = set()

        def h_target(t):
            p.keyed(seen, t, "policy")
            target[0] = self.target()

        def h_combine(t):
            p.keyed(seen, t, "policy")
            combine[0] = p.enum_word(CombAlg, "combining algorithm")[0]

        def h_rule(t):
            r = self.rule()
            if r is not None:
                rules.append(r)

        p.block({"target": h_target, "combine": h_combine, "rule": h_rule}, "policy")
        if target[0] is None:
            p.note(tok, f"policy {name!r} needs a target")
            return
        self.policies.append(PolicyDef(name, Policy(target[0], frozenset(rules), combine[0])))

    def coalition(self, kw: _Tok) -> None:
        p = self.p
        cid, tok = p.ident("coalition id")
        self.declare("coalition", cid, tok)
        members: list[str] = []
        shares: list[tuple[str, frozenset]] = []
        seen: set = set()

        def h_members(t):
            p.keyed(seen, t, "coalition")
            for n, ntok in p.ident_list("agent id"):
                self.ref("agent", n, ntok)
                members.append(n)

        def h_share(t):
            agent, atok = p.ident("agent id")
            self.ref("agent", agent, atok)
            items = p.ident_list("information item")
            self.shares.append((agent, items, atok))
            shares.append((agent, frozenset(n for n, _ in items)))

        p.block({"members": h_members, "share": h_share}, "coalition")
        self.coalitions.append(CoalitionDecl(cid, frozenset(members), tuple(shares)))

    def producer(self, kw: _Tok) -> None:
        p = self.p
        name, tok = p.ident("producer name")
        self.declare("producer", name, tok)
        if name in BUILTIN_ARITY:
            p.note(tok, f"{name!r} is a built-in operation")
        vals: dict[str, object] = {}
        seen: set = set()

        def ref_key(key, ns):
            def h(t):
                p.keyed(seen, t, "producer")
                value, vtok = p.ident(key)
                if ns:
                    self.ref(ns, value, vtok)
                vals[key] = value
            return h

        def h_params(t):
            p.keyed(seen, t, "producer")
            params = [n for n, _ in p.ident_list("parameter")]
            if len(set(params)) != len(params):
                p.note(t, "duplicate parameter name")
            vals["params"] = tuple(params)

        def h_requires(t):
            p.keyed(seen, t, "producer")
            vals["requires"] = p.expr()

        p.block(
            {
                "actor": ref_key("actor", "agent"),
                "prefix": ref_key("prefix", None),
                "shares_into": ref_key("shares_into", "coalition"),
                "attach_policy": ref_key("attach_policy", "policy"),
                "params": h_params,
                "requires": h_requires,
            },
            "producer",
        )
        if "actor" not in vals:
            p.note(tok, f"producer {name!r} needs an actor")
            return
        self.producers.append(
            ProducerDecl(
                name,
                vals["actor"],
                vals.get("prefix"),
                vals.get("params"),
                vals.get("shares_into"),
                vals.get("attach_policy"),
                vals.get("requires"),
            )
        )

    def _arg(self):
        p = self.p
        if p.at("{"):
            return frozenset(n for n, _ in p._list("{", "}", lambda: p.ident("information item")))
        if p.tok.kind == "word" and p.tok.text in ("READ", "WRITE"):
            return Action(p.advance().text)
        return p.ident("argument")[0]

    def _node_ref(self, what: str) -> str:
        name, tok = self.p.ident(what)
        self.node_refs.append((name, tok))
        return name

    def workflow_block(self, kw: _Tok) -> None:
        p = self.p
        if self.workflow is not None:
            p.note(kw, "a scenario has exactly one workflow block")
        nodes = []
        entry: list[Optional[str]] = [None]
        seen: set = set()

        def h_entry(t):
            p.keyed(seen, t, "workflow")
            entry[0] = self._node_ref("entry node")

        def h_node(t):
            nid, ntok = p.ident("node id")
            self.declare("node", nid, ntok)
            p.expect(":")
            k = p.word("'update', 'if', 'done' or 'fail'")
            if k.text == "update":
                op, otok = p.ident("operation name")
                self.op_refs.append((op, otok))
                args = p._list("(", ")", self._arg)
                result = None
                if p.at("->"):
                    p.advance()
                    result = p.ident("result variable")[0]
                p.expect("then")
                nxt = self._node_ref("successor node")
                nodes.append(UpdateNode(nid, op, tuple(args), nxt, result))
            elif k.text == "if":
                guard = p.expr()
                yes = no = None
                if p.at("yes"):
                    p.advance()
                    yes = self._node_ref("'yes' successor")
                if p.at("no"):
                    p.advance()
                    no = self._node_ref("'no' successor")
                nodes.append(ConditionNode(nid, guard, yes, no))
            elif k.text in ("done", "fail"):
                msg = ""
                if p.tok.kind == "string":
                    msg = _unquote(p.advance().text)
                outcome = Outcome.SUCCESS if k.text == "done" else Outcome.ERROR
                nodes.append(TerminalNode(nid, outcome, msg))
            else:
                raise p.stop(f"expected 'update', 'if', 'done' or 'fail', found {k.text!r}", k)

        p.block({"node": h_node, "entry": h_entry}, "workflow")
        if entry[0] is None:
            p.note(kw, "workflow needs an entry node")
            entry[0] = ""
        if self.workflow is None:
            self.workflow = Workflow.of(nodes, entry[0])

    def property(self, kw: _Tok) -> None:
        p = self.p
        name, tok = p.ident("property name")
        self.declare("property", name, tok)
        k = p.word("'forbidden'")
        if k.text != "forbidden":
            raise p.stop(f"property kind must be 'forbidden', found {k.text!r}", k)
        p.expect("{")
        f = p.formula()
        p.expect("}")
        self.properties.append(PropertyDecl(name, f))

    def variant(self, kw: _Tok) -> None:
        p = self.p
        name, tok = p.ident("variant name")
        self.declare("variant", name, tok)
        subs: dict[str, str] = {}
        p.expect("{")
        while not p.at("}"):
            old, otok = p.ident("policy name")
            self.ref("policy", old, otok)
            if old in subs:
                p.note(otok, f"policy {old!r} substituted twice")
            p.expect("=")
            new, ntok = p.ident("policy name")
            self.ref("policy", new, ntok)
            subs[old] = new
        p.advance()
        self.variants.append(VariantDecl(name, tuple(subs.items())))


def _unquote(text: str) -> str:
    try:
        return json.loads(text)
    except ValueError:
        return text[1:-1]


def parse_scenario(source: Union[str, bytes]) -> Scenario:
    return _run(source, lambda p: _ScenarioReader(p).read())


# --- serializer ------------------------------------------------------------


def _ids(items) -> str:
    return "[" + ", ".join(sorted(items)) + "]"


def _target(t: Target) -> str:
    s, r, a = t.key()
    return f"(subjects = [{', '.join(s)}], resources = [{', '.join(r)}], actions = [{', '.join(a)}])"


def _arg(a) -> str:
    if isinstance(a, Action):
        return a.value
    if isinstance(a, frozenset):
        return "{" + ", ".join(sorted(a)) + "}"
    return a


def _node(n) -> str:
    if isinstance(n, UpdateNode):
        text = f"node {n.id}: update {n.op}({', '.join(_arg(a) for a in n.args)})"
        if n.result is not None:
            text += f" -> {n.result}"
        return f"{text} then {n.next}"
    if isinstance(n, ConditionNode):
        text = f"node {n.id}: if {render(n.guard)}"
        if n.yes is not None:
            text += f" yes {n.yes}"
        if n.no is not None:
            text += f" no {n.no}"
        return text
    kw = "done" if n.outcome is Outcome.SUCCESS else "fail"
    return f"node {n.id}: {kw}" + (f" {json.dumps(n.message)}" if n.message else "")


def serialize_scenario(s: Scenario) -> str:
    out: list[str] = []
    st = s.settings
    out += ["settings {", f"  max_steps = {st.max_steps}", f"  state_cap = {st.state_cap}", "}", ""]
    for pd in s.policies:
        pol = pd.policy
        out.append(f"policy {pd.name} {{")
        out.append(f"  target = {_target(pol.target)}")
        out.append(f"  combine = {pol.rule_comb_alg.value}")
        for r in pol.ordered_rules:
            tgt = "" if r.target is None else f"target = {_target(r.target)} "
            out.append(f"  rule {{ {tgt}effect = {r.effect.value} }}")
        out += ["}", ""]
    for a in s.agents:
        out.append(f"agent {a.id} {{")
        out.append(f"  info = {_ids(a.info)}")
        out.append(f"  combine = {a.combine.value}")
        out += [f"  policy {name}" for name in sorted(a.policies)]
        out += ["}", ""]
    for c in s.coalitions:
        out.append(f"coalition {c.id} {{")
        out.append(f"  members = {_ids(c.members)}")
        out += [f"  share {agent} {_ids(items)}" for agent, items in c.shares]
        out += ["}", ""]
    for pr in s.producers:
        out.append(f"producer {pr.name} {{")
        out.append(f"  actor = {pr.actor}")
        if pr.prefix is not None:
            out.append(f"  prefix = {pr.prefix}")
        if pr.params is not None:
            out.append(f"  params = [{', '.join(pr.params)}]")
        if pr.shares_into is not None:
            out.append(f"  shares_into = {pr.shares_into}")
        if pr.attach_policy is not None:
            out.append(f"  attach_policy = {pr.attach_policy}")
        if pr.requires is not None:
            out.append(f"  requires = {render(pr.requires)}")
        out += ["}", ""]
    out.append("workflow {")
    out.append(f"  entry = {s.workflow.entry}")
    out += [f"  {_node(n)}" for _, n in s.workflow.nodes.sorted_items()]
    out += ["}", ""]
    for prop in s.properties:
        out += [f"property {prop.name} {prop.kind} {{", f"  {render_formula(prop.formula)}", "}", ""]
    for v in s.variants:
        out.append(f"variant {v.name} {{")
        out += [f"  {old} = {new}" for old, new in v.substitutions]
        out += ["}", ""]
    return "\n".join(out)

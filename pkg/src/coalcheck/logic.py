"""Expression and formula syntax shared by workflow guards and properties."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from coalcheck.policy import Action, Effect

WILDCARD = "_"


class Sort(str, enum.Enum):
    INFORMATION = "INFORMATION"
    AGENT = "AGENT"
    COALITION = "COALITION"


@dataclass(frozen=True)
class RequestAtom:
    """``request(subject, coalition, action, {resources}) == effect``."""

    subject: str
    coalition: str
    action: Action
    resources: tuple[str, ...]
    effect: Effect

    def __post_init__(self) -> None:
        object.__setattr__(self, "action", Action(self.action))
        object.__setattr__(self, "effect", Effect(self.effect))
        object.__setattr__(self, "resources", tuple(sorted(set(self.resources))))


@dataclass(frozen=True)
class EventAtom:
    """``event op(args) -> result``: the history holds a matching event.

    ``_`` in an argument or result position matches anything; ``result``
    None is the same as ``_``.
    """

    op: str
    args: tuple[str, ...]
    result: Optional[str] = None


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class Implies:
    lhs: "Expr"
    rhs: "Expr"


Expr = Union[RequestAtom, EventAtom, Not, And, Or, Implies]


@dataclass(frozen=True)
class Quantifier:
    var: str
    sort: Sort
    universal: bool = False


@dataclass(frozen=True)
class Formula:
    quantifiers: tuple[Quantifier, ...]
    body: Expr

    def negated(self) -> "Formula":
        """The negation with quantifiers dualized (exists <-> forall)."""
        qs = tuple(Quantifier(q.var, q.sort, not q.universal) for q in self.quantifiers)
        return Formula(qs, Not(self.body))


def atoms(e: Expr) -> Iterator[Union[RequestAtom, EventAtom]]:
    if isinstance(e, (RequestAtom, EventAtom)):
        yield e
    elif isinstance(e, Not):
        yield from atoms(e.operand)
    elif isinstance(e, (And, Or)):
        for o in e.operands:
            yield from atoms(o)
    elif isinstance(e, Implies):
        yield from atoms(e.lhs)
        yield from atoms(e.rhs)
    else:  # pragma: no cover
        raise TypeError(f"not an expression: {e!r}")


def names(e: Expr) -> Iterator[str]:
    """Every identifier mentioned by the atoms of ``e`` (wildcards excluded)."""
    for a in atoms(e):
        if isinstance(a, RequestAtom):
            yield a.subject
            yield a.coalition
            yield from a.resources
        else:
            for x in a.args:
                if x != WILDCARD:
                    yield x
            if a.result is not None and a.result != WILDCARD:
                yield a.result


# --- rendering -----------------------------------------------------------

_PREC = {Implies: 1, Or: 2, And: 3, Not: 4}


def render(e: Expr, min_prec: int = 0) -> str:
    """Concrete syntax for ``e``; parenthesized when it binds looser than ``min_prec``."""
    if isinstance(e, RequestAtom):
        res = ", ".join(e.resources)
        return f"request({e.subject}, {e.coalition}, {e.action.value}, {{{res}}}) == {e.effect.value}"
    if isinstance(e, EventAtom):
        text = f"event {e.op}({', '.join(e.args)})"
        return text if e.result is None else f"{text} -> {e.result}"
    prec = _PREC[type(e)]
    if isinstance(e, Not):
        text = f"not {render(e.operand, prec)}"
    elif isinstance(e, And):
        text = " and ".join(render(o, prec + 1) for o in e.operands)
    elif isinstance(e, Or):
        text = " or ".join(render(o, prec + 1) for o in e.operands)
    else:
        # right-associative
        text = f"{render(e.lhs, prec + 1)} implies {render(e.rhs, prec)}"
    return f"({text})" if prec < min_prec else text


def render_formula(f: Formula) -> str:
    prefix = "".join(
        f"{'forall' if q.universal else 'exists'} {q.var}:{q.sort.value} . " for q in f.quantifiers
    )
    return prefix + render(f.body)

"""XACML-subset policy decision machinery.

Targets, rules, policies and PDPs are frozen values. Evaluation walks
policies and rules in a canonical order so traces are reproducible, even
though both combining algorithms are order-insensitive.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional


class Action(str, enum.Enum):
    READ = "READ"
    WRITE = "WRITE"


class Effect(str, enum.Enum):
    PERMIT = "PERMIT"
    DENY = "DENY"
    NOT_APPLICABLE = "NOT_APPLICABLE"


class CombAlg(str, enum.Enum):
    DENY_OVERRIDES = "DENY_OVERRIDES"
    PERMIT_OVERRIDES = "PERMIT_OVERRIDES"


def _fs(items: Iterable) -> frozenset:
    return items if isinstance(items, frozenset) else frozenset(items)


@dataclass(frozen=True)
class Target:
    """Subjects, resources and actions; an empty field matches anything."""

    subjects: frozenset[str] = frozenset()
    resources: frozenset[str] = frozenset()
    actions: frozenset[Action] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "subjects", _fs(self.subjects))
        object.__setattr__(self, "resources", _fs(self.resources))
        object.__setattr__(self, "actions", frozenset(Action(a) for a in self.actions))

    def key(self) -> tuple:
        return (
            tuple(sorted(self.subjects)),
            tuple(sorted(self.resources)),
            tuple(sorted(a.value for a in self.actions)),
        )


@dataclass(frozen=True)
class Request:
    target: Target

    def __post_init__(self) -> None:
        t = self.target
        if not (t.subjects and t.resources and t.actions):
            raise ValueError("request target needs non-empty subjects, resources and actions")


@dataclass(frozen=True)
class Rule:
    effect: Effect
    target: Optional[Target] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "effect", Effect(self.effect))
        if self.effect is Effect.NOT_APPLICABLE:
            raise ValueError("rule effect must be PERMIT or DENY")

    def key(self) -> tuple:
        tkey = (0,) if self.target is None else (1, self.target.key())
        return (tkey, self.effect.value)


@dataclass(frozen=True)
class Policy:
    target: Target
    rules: frozenset[Rule] = frozenset()
    rule_comb_alg: CombAlg = CombAlg.DENY_OVERRIDES

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", _fs(self.rules))
        object.__setattr__(self, "rule_comb_alg", CombAlg(self.rule_comb_alg))

    @cached_property
    def ordered_rules(self) -> tuple[Rule, ...]:
        return tuple(sorted(self.rules, key=Rule.key))

    def key(self) -> tuple:
        return (
            self.target.key(),
            tuple(r.key() for r in self.ordered_rules),
            self.rule_comb_alg.value,
        )


@dataclass(frozen=True)
class Pdp:
    policies: frozenset[Policy] = field(default_factory=frozenset)
    policy_comb_alg: CombAlg = CombAlg.DENY_OVERRIDES

    def __post_init__(self) -> None:
        object.__setattr__(self, "policies", _fs(self.policies))
        object.__setattr__(self, "policy_comb_alg", CombAlg(self.policy_comb_alg))

    @cached_property
    def ordered_policies(self) -> tuple[Policy, ...]:
        return tuple(sorted(self.policies, key=Policy.key))

    def key(self) -> tuple:
        return (tuple(p.key() for p in self.ordered_policies), self.policy_comb_alg.value)


EMPTY_PDP = Pdp()


def matches(req_target: Target, t: Target) -> bool:
    """Subset matching per field, with an empty field acting as a wildcard."""
    return (
        (not t.subjects or req_target.subjects <= t.subjects)
        and (not t.resources or req_target.resources <= t.resources)
        and (not t.actions or req_target.actions <= t.actions)
    )


def evaluate_rule(r: Rule, req: Request) -> Effect:
    if r.target is None or matches(req.target, r.target):
        return r.effect
    return Effect.NOT_APPLICABLE


def combine(alg: CombAlg, effects: Iterable[Effect]) -> Effect:
    seen = set(effects)
    if alg is CombAlg.DENY_OVERRIDES:
        order = (Effect.DENY, Effect.PERMIT)
    else:
        order = (Effect.PERMIT, Effect.DENY)
    for eff in order:
        if eff in seen:
            return eff
    return Effect.NOT_APPLICABLE


def evaluate_policy(p: Policy, req: Request) -> Effect:
    if not matches(req.target, p.target):
        return Effect.NOT_APPLICABLE
    return combine(p.rule_comb_alg, [evaluate_rule(r, req) for r in p.ordered_rules])


def evaluate_pdp(req: Request, pdp: Pdp) -> Effect:
    return combine(
        pdp.policy_comb_alg, [evaluate_policy(p, req) for p in pdp.ordered_policies]
    )


def instantiate(p: Policy, template: str, token: str) -> Policy:
    """Rebind every occurrence of resource ``template`` in ``p`` to ``token``."""

    def swap(t: Target) -> Target:
        if template not in t.resources:
            return t
        return Target(t.subjects, (t.resources - {template}) | {token}, t.actions)

    rules = frozenset(
        Rule(r.effect, None if r.target is None else swap(r.target)) for r in p.rules
    )
    return Policy(swap(p.target), rules, p.rule_comb_alg)

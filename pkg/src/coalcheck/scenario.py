"""Scenario declarations and their realization as engine inputs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from coalcheck import coalition as cc
from coalcheck.checker import DEFAULT_STATE_CAP, PolicyVariant
from coalcheck.engine import DEFAULT_MAX_STEPS, OpRegistry, Producer, Workflow
from coalcheck.logic import Expr, Formula
from coalcheck.policy import CombAlg, Pdp, Policy


def _sorted(items, key=lambda x: x.name):
    return tuple(sorted(items, key=key))


@dataclass(frozen=True)
class AgentDecl:
    id: str
    info: frozenset[str] = frozenset()
    policies: frozenset[str] = frozenset()
    combine: CombAlg = CombAlg.DENY_OVERRIDES

    def __post_init__(self) -> None:
        object.__setattr__(self, "info", frozenset(self.info))
        object.__setattr__(self, "policies", frozenset(self.policies))


@dataclass(frozen=True)
class CoalitionDecl:
    """A coalition present in the initial state.

    ``shares`` lists (agent, items) pairs the agent has already shared.
    """

    id: str
    members: frozenset[str] = frozenset()
    shares: tuple[tuple[str, frozenset[str]], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", frozenset(self.members))
        shares = {(a, frozenset(items)) for a, items in self.shares}
        object.__setattr__(self, "shares", tuple(sorted(shares, key=lambda s: (s[0], sorted(s[1])))))


@dataclass(frozen=True)
class PolicyDef:
    name: str
    policy: Policy


@dataclass(frozen=True)
class ProducerDecl:
    name: str
    actor: str
    prefix: Optional[str] = None
    params: Optional[tuple[str, ...]] = None
    shares_into: Optional[str] = None
    attach_policy: Optional[str] = None
    requires: Optional[Expr] = None

    @property
    def token_prefix(self) -> str:
        return self.prefix or self.name


@dataclass(frozen=True)
class PropertyDecl:
    name: str
    formula: Formula
    kind: str = "forbidden"


@dataclass(frozen=True)
class VariantDecl:
    """Swap named policy definitions: every use of a key uses its value instead."""

    name: str
    substitutions: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "substitutions", tuple(sorted(dict(self.substitutions).items())))


@dataclass(frozen=True)
class Settings:
    max_steps: int = DEFAULT_MAX_STEPS
    state_cap: int = DEFAULT_STATE_CAP


@dataclass(frozen=True)
class Scenario:
    workflow: Workflow
    agents: tuple[AgentDecl, ...] = ()
    coalitions: tuple[CoalitionDecl, ...] = ()
    policies: tuple[PolicyDef, ...] = ()
    producers: tuple[ProducerDecl, ...] = ()
    properties: tuple[PropertyDecl, ...] = ()
    variants: tuple[VariantDecl, ...] = ()
    settings: Settings = field(default_factory=Settings)

    def __post_init__(self) -> None:
        object.__setattr__(self, "agents", _sorted(self.agents, key=lambda a: a.id))
        object.__setattr__(self, "coalitions", _sorted(self.coalitions, key=lambda c: c.id))
        for name in ("policies", "producers", "properties", "variants"):
            object.__setattr__(self, name, _sorted(getattr(self, name)))

    # lookups

    def policy(self, name: str) -> Policy:
        for p in self.policies:
            if p.name == name:
                return p.policy
        raise KeyError(name)

    def property(self, name: str) -> PropertyDecl:
        for p in self.properties:
            if p.name == name:
                return p
        raise KeyError(name)

    def variant(self, name: str) -> VariantDecl:
        for v in self.variants:
            if v.name == name:
                return v
        raise KeyError(name)

    # realization

    def _subst(self, variant: Optional[str]) -> dict[str, str]:
        return {} if variant is None else dict(self.variant(variant).substitutions)

    def initial_state(self, variant: Optional[str] = None) -> cc.CoalitionState:
        """Agents, then coalitions, then memberships, then initial shares."""
        sub = self._subst(variant)
        state = cc.EMPTY_STATE
        for a in self.agents:
            pdp = Pdp(frozenset(self.policy(sub.get(n, n)) for n in a.policies), a.combine)
            state = cc.create_agent(state, a.id, a.info, pdp)
        for c in self.coalitions:
            state = cc.create_coalition(state, c.id)
        for c in self.coalitions:
            for m in sorted(c.members):
                state = cc.join(state, m, c.id)
        for c in self.coalitions:
            for agent, items in c.shares:
                state = cc.share_info(state, agent, c.id, items)
        return state

    def registry(self, variant: Optional[str] = None) -> OpRegistry:
        sub = self._subst(variant)
        producers = []
        for p in self.producers:
            attach = None
            if p.attach_policy is not None:
                attach = self.policy(sub.get(p.attach_policy, p.attach_policy))
            producers.append(
                Producer(p.name, p.actor, p.token_prefix, p.params, p.shares_into, attach, p.requires)
            )
        return OpRegistry.of(producers)

    def policy_variant(self, name: str) -> PolicyVariant:
        return PolicyVariant(name, self.initial_state(name), self.registry(name))

    def policy_variants(self) -> tuple[PolicyVariant, ...]:
        return tuple(self.policy_variant(v.name) for v in self.variants)

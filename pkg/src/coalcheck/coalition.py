"""Dynamic-coalition state: agents, coalitions and the information they share.

Every operation is a pure function returning a fresh :class:`CoalitionState`.
Access decisions are delegated to :mod:`coalcheck.policy`.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable

from coalcheck._frozen import FrozenMap
from coalcheck.policy import (
    EMPTY_PDP,
    Action,
    CombAlg,
    Effect,
    Pdp,
    Policy,
    Request,
    Target,
    evaluate_pdp,
)

_IDENT = re.compile(r"[A-Za-z0-9_-]{1,64}")
# Producer-minted tokens carry a "#<n>" suffix so they never collide with declared names.
_MINTED = re.compile(r"[A-Za-z0-9_-]{1,64}#[0-9]+")


class CoalitionError(Exception):
    """Base class for precondition violations of coalition operations."""


class InvalidIdentifier(CoalitionError, ValueError):
    pass


class DuplicateAgent(CoalitionError):
    pass


class DuplicateCoalition(CoalitionError):
    pass


class UnknownAgent(CoalitionError):
    pass


class UnknownCoalition(CoalitionError):
    pass


class NotOwned(CoalitionError):
    pass


class InfoNotInCoalition(CoalitionError):
    pass


def is_identifier(value: object) -> bool:
    return isinstance(value, str) and _IDENT.fullmatch(value) is not None


def is_information(value: object) -> bool:
    return is_identifier(value) or (isinstance(value, str) and _MINTED.fullmatch(value) is not None)


def check_identifier(value: object, what: str = "identifier") -> str:
    if not is_identifier(value):
        raise InvalidIdentifier(f"invalid {what}: {value!r}")
    return value  # type: ignore[return-value]


def _check_info(items: Iterable[str]) -> frozenset[str]:
    items = frozenset(items)
    for i in items:
        if not is_information(i):
            raise InvalidIdentifier(f"invalid information item: {i!r}")
    return items


@dataclass(frozen=True)
class Agent:
    info: frozenset[str] = frozenset()
    aac: Pdp = EMPTY_PDP


@dataclass(frozen=True)
class Coalition:
    agents: frozenset[str] = frozenset()
    info: frozenset[str] = frozenset()
    cac: Pdp = EMPTY_PDP


@dataclass(frozen=True)
class CoalitionState:
    coals: FrozenMap[str, Coalition] = field(default_factory=FrozenMap)
    agents: FrozenMap[str, Agent] = field(default_factory=FrozenMap)

    def membership_ok(self) -> bool:
        return all(c.agents <= self.agents.keys() for c in self.coals.values())

    def all_information(self) -> frozenset[str]:
        out: set[str] = set()
        for a in self.agents.values():
            out |= a.info
        for c in self.coals.values():
            out |= c.info
        return frozenset(out)

    def canonical(self) -> str:
        """Canonical text of the whole state; equal states give equal text."""
        return json.dumps(state_to_jsonable(self), sort_keys=True, separators=(",", ":"))


def _target_json(t: Target | None):
    if t is None:
        return None
    s, r, a = t.key()
    return {"subjects": list(s), "resources": list(r), "actions": list(a)}


def policy_to_jsonable(p: Policy) -> dict:
    return {
        "target": _target_json(p.target),
        "rules": [
            {"target": _target_json(r.target), "effect": r.effect.value} for r in p.ordered_rules
        ],
        "combine": p.rule_comb_alg.value,
    }


def pdp_to_jsonable(pdp: Pdp) -> dict:
    return {
        "policies": [policy_to_jsonable(p) for p in pdp.ordered_policies],
        "combine": pdp.policy_comb_alg.value,
    }


def state_to_jsonable(state: CoalitionState) -> dict:
    return {
        "agents": {
            aid: {"info": sorted(a.info), "aac": pdp_to_jsonable(a.aac)}
            for aid, a in state.agents.sorted_items()
        },
        "coals": {
            cid: {
                "agents": sorted(c.agents),
                "info": sorted(c.info),
                "cac": pdp_to_jsonable(c.cac),
            }
            for cid, c in state.coals.sorted_items()
        },
    }


EMPTY_STATE = CoalitionState()


def _agent(state: CoalitionState, aid: str) -> Agent:
    try:
        return state.agents[aid]
    except KeyError:
        raise UnknownAgent(aid) from None


def _coalition(state: CoalitionState, cid: str) -> Coalition:
    try:
        return state.coals[cid]
    except KeyError:
        raise UnknownCoalition(cid) from None


def create_agent(
    state: CoalitionState, aid: str, info: Iterable[str] = (), aac: Pdp = EMPTY_PDP
) -> CoalitionState:
    check_identifier(aid, "agent id")
    if aid in state.agents:
        raise DuplicateAgent(aid)
    agent = Agent(_check_info(info), aac)
    return CoalitionState(state.coals, state.agents.set(aid, agent))


def create_coalition(state: CoalitionState, cid: str) -> CoalitionState:
    check_identifier(cid, "coalition id")
    if cid in state.coals:
        raise DuplicateCoalition(cid)
    return CoalitionState(state.coals.set(cid, Coalition()), state.agents)


def join(state: CoalitionState, aid: str, cid: str) -> CoalitionState:
    _agent(state, aid)
    coal = _coalition(state, cid)
    if aid in coal.agents:
        return state
    coal = Coalition(coal.agents | {aid}, coal.info, coal.cac)
    return CoalitionState(state.coals.set(cid, coal), state.agents)


def get_matching_policies(pdp: Pdp, i: str) -> frozenset[Policy]:
    return frozenset(p for p in pdp.policies if not p.target.resources or i in p.target.resources)


def share_info(
    state: CoalitionState, aid: str, cid: str, i_set: Iterable[str]
) -> CoalitionState:
    agent = _agent(state, aid)
    coal = _coalition(state, cid)
    i_set = frozenset(i_set)
    missing = i_set - agent.info
    if missing:
        raise NotOwned(f"{aid} does not hold {sorted(missing)}")
    policies = set(coal.cac.policies)
    for i in i_set:
        policies |= get_matching_policies(agent.aac, i)
    # The coalition PDP is rebuilt with deny-overrides on every share.
    cac = Pdp(frozenset(policies), CombAlg.DENY_OVERRIDES)
    coal = Coalition(coal.agents, coal.info | i_set, cac)
    return CoalitionState(state.coals.set(cid, coal), state.agents)


def request_info(
    state: CoalitionState, aid: str, cid: str, act: Action, i_set: Iterable[str]
) -> Effect:
    """PEP entry point: ask the coalition PDP whether ``aid`` may ``act`` on ``i_set``."""
    _agent(state, aid)
    coal = _coalition(state, cid)
    i_set = frozenset(i_set)
    if not i_set <= coal.info:
        raise InfoNotInCoalition(f"{sorted(i_set - coal.info)} not shared in {cid}")
    return evaluate_pdp(Request(Target({aid}, i_set, {Action(act)})), coal.cac)


def add_information(state: CoalitionState, aid: str, item: str, policy: Policy | None = None) -> CoalitionState:
    """Hand a freshly minted item (and optionally a policy for it) to an agent."""
    agent = _agent(state, aid)
    aac = agent.aac
    if policy is not None:
        aac = Pdp(aac.policies | {policy}, aac.policy_comb_alg)
    agent = Agent(agent.info | _check_info([item]), aac)
    return CoalitionState(state.coals, state.agents.set(aid, agent))


def replace_aac(state: CoalitionState, aid: str, aac: Pdp) -> CoalitionState:
    agent = _agent(state, aid)
    return CoalitionState(state.coals, state.agents.set(aid, Agent(agent.info, aac)))

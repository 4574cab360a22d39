"""Verification of access-controlled dynamic-coalition workflows.

Agents and coalitions share information under XACML-style policies; workflows
over that state run as abstract state machines and are checked for deadlock
freedom and forbidden states by exhaustive exploration.
"""
from coalcheck.checker import (
    CheckReport,
    ExplorationSpace,
    PolicyVariant,
    check_liveness,
    check_safety,
    eval_formula,
    reachable,
)
from coalcheck.coalition import (
    CoalitionState,
    create_agent,
    create_coalition,
    get_matching_policies,
    join,
    request_info,
    share_info,
)
from coalcheck.dsl import ParseError, parse_formula, parse_scenario, serialize_scenario
from coalcheck.engine import OpRegistry, Workflow, run, step, validate_workflow
from coalcheck.policy import (
    Action,
    CombAlg,
    Effect,
    Pdp,
    Policy,
    Request,
    Rule,
    Target,
    combine,
    evaluate_pdp,
    evaluate_policy,
    evaluate_rule,
    matches,
)

__version__ = "0.1.0"

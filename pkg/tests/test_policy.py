import pytest
from hypothesis import given, strategies as st

from oracles import combine_oracle, effect_lists, pdp_oracle
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
    instantiate,
    matches,
)

R, W = Action.READ, Action.WRITE
P, D, NA = Effect.PERMIT, Effect.DENY, Effect.NOT_APPLICABLE


def req(subject, resources, action):
    return Request(Target({subject}, set(resources), {action}))


def pp_policy():
    rule_a1 = Rule(P, Target({"compA"}, {"PP"}, {R, W}))
    rule_a2 = Rule(D, Target(set(), {"PP"}, {R, W}))
    return Policy(Target(resources={"PP"}), {rule_a1, rule_a2}, CombAlg.PERMIT_OVERRIDES)


# --- examples ---------------------------------------------------------------


@pytest.mark.parametrize("action", [R, W])
def test_production_plan_policy_decisions(action):
    pol = pp_policy()
    assert evaluate_policy(pol, req("compA", ["PP"], action)) is P
    assert evaluate_policy(pol, req("compB", ["PP"], action)) is D


def test_policy_target_gate_gives_not_applicable():
    assert evaluate_policy(pp_policy(), req("compA", ["HA"], R)) is NA


def test_rule_without_target_always_applies():
    assert evaluate_rule(Rule(D), req("x", ["y"], R)) is D


def test_matching_is_subset_per_field():
    t = Target({"a", "b"}, {"r1", "r2"}, {R})
    assert matches(Target({"a"}, {"r1", "r2"}, {R}), t)
    assert not matches(Target({"a"}, {"r1", "r3"}, {R}), t)
    assert not matches(Target({"a"}, {"r1"}, {W}), t)
    assert matches(Target({"z"}, {"q"}, {W}), Target())


def test_combine_examples():
    assert combine(CombAlg.DENY_OVERRIDES, [P, D, NA]) is D
    assert combine(CombAlg.PERMIT_OVERRIDES, [P, D, NA]) is P
    assert combine(CombAlg.DENY_OVERRIDES, []) is NA
    assert combine(CombAlg.PERMIT_OVERRIDES, [NA, NA]) is NA


def test_empty_pdp_is_not_applicable():
    assert evaluate_pdp(req("a", ["r"], R), Pdp()) is NA


def test_rule_effect_not_applicable_rejected():
    with pytest.raises(ValueError):
        Rule(NA)


def test_request_needs_all_fields():
    with pytest.raises(ValueError):
        Request(Target({"a"}, set(), {R}))


def test_instantiate_rebinds_resource():
    pol = instantiate(pp_policy(), "PP", "PP#3")
    assert evaluate_policy(pol, req("compA", ["PP#3"], R)) is P
    assert evaluate_policy(pol, req("compB", ["PP#3"], W)) is D
    assert evaluate_policy(pol, req("compA", ["PP"], R)) is NA


# --- oracle -----------------------------------------------------------------


@pytest.mark.parametrize("alg", list(CombAlg))
def test_combine_matches_truth_table(alg):
    cases = list(effect_lists(3))
    assert len(cases) == 39
    for effects in cases:
        got = combine(alg, [Effect(e) for e in effects])
        assert got.value == combine_oracle(alg.value, effects), effects


# --- properties -------------------------------------------------------------

effects = st.sampled_from(list(Effect))
algs = st.sampled_from(list(CombAlg))
names = st.sampled_from(["a", "b", "c"])
actions = st.sampled_from(list(Action))


@st.composite
def targets(draw):
    return Target(
        draw(st.frozensets(names, max_size=3)),
        draw(st.frozensets(names, max_size=3)),
        draw(st.frozensets(actions, max_size=2)),
    )


@st.composite
def requests(draw):
    return Request(
        Target({draw(names)}, draw(st.frozensets(names, min_size=1, max_size=2)), {draw(actions)})
    )


rules = st.builds(Rule, st.sampled_from([P, D]), st.one_of(st.none(), targets()))
policies = st.builds(Policy, targets(), st.frozensets(rules, max_size=3), algs)
pdps = st.builds(Pdp, st.frozensets(policies, max_size=3), algs)


@given(algs, st.lists(effects, max_size=6), st.randoms(use_true_random=False))
def test_combine_ignores_order(alg, effs, rnd):
    shuffled = list(effs)
    rnd.shuffle(shuffled)
    assert combine(alg, effs) is combine(alg, shuffled)


@given(algs, st.lists(effects, max_size=6))
def test_combine_ignores_duplicates(alg, effs):
    assert combine(alg, effs + effs) is combine(alg, effs)


@given(st.lists(effects, max_size=6))
def test_dominant_effect_wins(effs):
    assert combine(CombAlg.DENY_OVERRIDES, effs + [D]) is D
    assert combine(CombAlg.PERMIT_OVERRIDES, effs + [P]) is P


@given(st.lists(effects, max_size=6))
def test_combining_algorithms_are_dual(effs):
    flip = {P: D, D: P, NA: NA}
    mirrored = [flip[e] for e in effs]
    assert combine(CombAlg.PERMIT_OVERRIDES, effs) is flip[combine(CombAlg.DENY_OVERRIDES, mirrored)]


@given(requests(), targets())
def test_empty_target_field_is_wildcard(r, t):
    widened = Target(frozenset(), t.resources, t.actions)
    assert matches(r.target, widened) or not matches(r.target, t)
    assert matches(r.target, Target())


def _plain_target(t):
    return (tuple(t.subjects), tuple(t.resources), tuple(a.value for a in t.actions))


def _plain_pdp(pdp):
    return (
        tuple(
            (
                _plain_target(p.target),
                tuple((r.effect.value, None if r.target is None else _plain_target(r.target)) for r in p.rules),
                p.rule_comb_alg.value,
            )
            for p in pdp.policies
        ),
        pdp.policy_comb_alg.value,
    )


@given(pdps, requests())
def test_pdp_matches_oracle_on_random_inputs(pdp, r):
    t = r.target
    plain_req = (next(iter(t.subjects)), tuple(t.resources), next(iter(t.actions)).value)
    assert evaluate_pdp(r, pdp).value == pdp_oracle(_plain_pdp(pdp), plain_req)


@given(pdps, requests())
def test_pdp_decision_is_deterministic(pdp, r):
    rebuilt = Pdp(frozenset(reversed(list(pdp.policies))), pdp.policy_comb_alg)
    assert evaluate_pdp(r, pdp) is evaluate_pdp(r, rebuilt)

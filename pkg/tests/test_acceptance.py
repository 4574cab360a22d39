"""One test per acceptance criterion; the terminal summary lists PASS/FAIL."""
import random
import re
import subprocess
import sys
import time

import pytest

from oracles import (
    combine_oracle,
    effect_lists,
    formula_oracle,
    fuzz_corpus,
    random_operation,
    random_scenario,
    sweep_universe,
)
from coalcheck import coalition as cc
from coalcheck import scenarios
from coalcheck.checker import eval_formula, reachable
from coalcheck.cli import main
from coalcheck.dsl import ParseError, parse_scenario, serialize_scenario
from coalcheck.policy import Action, CombAlg, Effect, Policy, Request, Rule, Target, combine, evaluate_policy

V1 = str(scenarios.path("chemical_plant_v1"))
V2 = str(scenarios.path("chemical_plant_v2"))

# Wall-clock limits; the shipped scenarios take milliseconds.
RUN_LIMIT_S = 1.0
ORACLE_LIMIT_S = 10.0

criterion = pytest.mark.criterion


def cli(capsys, *argv):
    code = main(list(argv))
    out, _ = capsys.readouterr()
    return code, out


@criterion(1, "deadlock reproduction")
def test_deadlock_reproduction(capsys):
    start = time.perf_counter()
    code, out = cli(capsys, "check", "--liveness", V1)
    code_run, out_run = cli(capsys, "run", V1)
    elapsed = time.perf_counter() - start

    assert code == 1
    lines = out.splitlines()
    assert lines[0] == "LIVENESS: VIOLATED"
    witness_steps = [ln for ln in lines if "\t" in ln]
    last = witness_steps[-1].split("\t")
    assert last[1:3] == ["n_signoff_check", "CONDITION"]
    # the guard reads the minted plan token, PP#1
    assert re.fullmatch(r"request_info\(compB, coal, READ, \{PP(#\d+)?\}\) = DENY -> .*", last[3])

    assert code_run == 1
    assert out_run.splitlines()[-1] == "OUTCOME: DEADLOCK(n_signoff_check)"
    assert elapsed < RUN_LIMIT_S


@criterion(2, "repaired process")
def test_repaired_process(capsys):
    start = time.perf_counter()
    code, out = cli(capsys, "check", "--liveness", "--safety", "psi", "--variant", "all", V2)
    code_run, out_run = cli(capsys, "run", "--variant", "relaxed", V2)
    elapsed = time.perf_counter() - start

    assert code == 0
    assert "LIVENESS: HOLDS" in out
    assert "SAFETY psi: HOLDS" in out
    assert code_run == 0
    assert out_run.splitlines()[-1] == "OUTCOME: COMPLETED(SUCCESS)"
    assert any("\tn_signoff\tUPDATE\tsignoff(" in ln for ln in out_run.splitlines())
    assert elapsed < RUN_LIMIT_S


@criterion(3, "policy semantics")
def test_policy_semantics():
    rule_a1 = Rule(Effect.PERMIT, Target({"compA"}, {"PP"}, {Action.READ, Action.WRITE}))
    rule_a2 = Rule(Effect.DENY, Target(frozenset(), {"PP"}, {Action.READ, Action.WRITE}))
    pol = Policy(Target(resources={"PP"}), {rule_a1, rule_a2}, CombAlg.PERMIT_OVERRIDES)
    for act in Action:
        assert evaluate_policy(pol, Request(Target({"compA"}, {"PP"}, {act}))) is Effect.PERMIT
        assert evaluate_policy(pol, Request(Target({"compB"}, {"PP"}, {act}))) is Effect.DENY


@criterion(4, "combining-algorithm oracle")
def test_combining_oracle():
    start = time.perf_counter()
    for alg in CombAlg:
        cases = list(effect_lists(3))
        assert len(cases) == 39
        for effs in cases:
            assert combine(alg, [Effect(e) for e in effs]).value == combine_oracle(alg.value, effs)
    result = sweep_universe()
    elapsed = time.perf_counter() - start
    print(f"universe sweep: {result['counts']} in {elapsed:.2f}s")
    assert result["mismatches"] == []
    assert elapsed < ORACLE_LIMIT_S


@criterion(5, "state invariants")
def test_state_invariants():
    rng = random.Random(20261018)
    violations = steps = 0
    for _ in range(1000):
        state = cc.EMPTY_STATE
        for _ in range(rng.randint(1, 50)):
            kind, call = random_operation(rng, state)
            try:
                out = call()
            except cc.CoalitionError:
                continue
            if kind == "request":
                continue
            steps += 1
            grew = all(
                cid in out.coals
                and coal.info <= out.coals[cid].info
                and coal.agents <= out.coals[cid].agents
                for cid, coal in state.coals.items()
            )
            if not (out.membership_ok() and grew):
                violations += 1
            state = out
    print(f"{steps} successful state changes checked")
    assert violations == 0


@criterion(6, "formula evaluator oracle")
def test_formula_oracle():
    v1 = parse_scenario(scenarios.read("chemical_plant_v1"))
    v2 = parse_scenario(scenarios.read("chemical_plant_v2"))
    spaces = [
        reachable(v1.workflow, v1.initial_state(), v1.registry()),
        reachable(v2.workflow, v2.initial_state(), v2.registry(), v2.policy_variants()),
    ]
    formulas = [v1.property("phi").formula, v2.property("psi").formula]
    formulas += [f.negated() for f in formulas]
    checked = 0
    for space in spaces:
        for cfg in space.configs:
            for f in formulas:
                assert eval_formula(f, cfg) == formula_oracle(f, cfg)
                checked += 1
    print(f"{checked} (formula, configuration) pairs agree")
    assert checked == 4 * (5 + 15)


@criterion(7, "DSL round trip and fuzzing")
def test_dsl_round_trip_and_fuzz():
    for name in scenarios.NAMES:
        s = parse_scenario(scenarios.read(name))
        assert parse_scenario(serialize_scenario(s)) == s
    for seed in range(100):
        s = random_scenario(random.Random(seed))
        assert parse_scenario(serialize_scenario(s)) == s
    seeds = [scenarios.read(n).encode() for n in scenarios.NAMES]
    rejected = 0
    for data in fuzz_corpus(seeds, 10_000, seed=1):
        try:
            parse_scenario(data)
        except ParseError:
            rejected += 1
    print(f"fuzz: 10000 inputs, {rejected} rejected with diagnostics, no crashes")


@criterion(8, "determinism")
def test_determinism():
    commands = [
        ["run", V1],
        ["run", V2],
        ["run", "--variant", "relaxed", V2],
        ["check", V1],
        ["check", "--variant", "all", V2],
        ["check", "--workers", "4", V1],
        ["check", "--workers", "4", "--variant", "all", V2],
    ]
    outputs = {}
    for argv in commands:
        runs = [
            subprocess.run([sys.executable, "-m", "coalcheck", *argv], capture_output=True, check=False).stdout
            for _ in range(3)
        ]
        assert runs[0] and runs.count(runs[0]) == 3, argv
        outputs[tuple(argv)] = runs[0]
    assert outputs[("check", V1)] == outputs[("check", "--workers", "4", V1)]
    assert outputs[("check", "--variant", "all", V2)] == outputs[
        ("check", "--workers", "4", "--variant", "all", V2)
    ]

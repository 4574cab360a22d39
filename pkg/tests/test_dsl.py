import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import fuzz_corpus, random_scenario
from coalcheck import scenarios
from coalcheck.dsl import ParseError, parse_formula, parse_guard, parse_scenario, serialize_scenario
from coalcheck.logic import And, EventAtom, Implies, Not, Or, RequestAtom, Sort, render, render_formula
from coalcheck.policy import Action, Effect


def diags(source):
    with pytest.raises(ParseError) as info:
        parse_scenario(source)
    return [(d.line, d.column, d.message) for d in info.value.diagnostics]


# --- round trip -------------------------------------------------------------


@pytest.mark.parametrize("name", scenarios.NAMES)
def test_golden_round_trip(name):
    s = parse_scenario(scenarios.read(name))
    text = serialize_scenario(s)
    assert parse_scenario(text) == s
    assert serialize_scenario(parse_scenario(text)) == text


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_generated_round_trip(seed):
    s = random_scenario(random.Random(seed))
    assert parse_scenario(serialize_scenario(s)) == s


def test_comments_and_layout_do_not_matter():
    a = parse_scenario("workflow { entry = s node s: done }")
    b = parse_scenario("# header\nworkflow {\n  entry = s   # start\n\n  node s:\n done\n}\n")
    assert a == b


# --- formulas ---------------------------------------------------------------


def test_phi_shape(v1):
    f = v1.property("phi").formula
    assert [(q.var, q.sort, q.universal) for q in f.quantifiers] == [
        ("ord", Sort.INFORMATION, False),
        ("HA", Sort.INFORMATION, False),
        ("PP", Sort.INFORMATION, False),
    ]
    assert isinstance(f.body, And)
    ev_ha, ev_pp, req = f.body.operands
    assert ev_ha == EventAtom("createHA", ("compB", "ord"), "HA")
    assert ev_pp == EventAtom("createPP", ("ord", "HA"), "PP")
    assert req == RequestAtom("compB", "coal", Action.READ, ("PP",), Effect.DENY)


def test_implication_form_parses_with_implies_on_top():
    f = parse_formula(
        "exists ord:INFORMATION . exists HA:INFORMATION . exists PP:INFORMATION . "
        "event createHA(compB, ord) -> HA and event createPP(ord, HA) -> PP "
        "and request(compB, coal, READ, {PP}) == PERMIT implies not event sendErr(compB, coal, PP)"
    )
    assert isinstance(f.body, Implies)
    assert isinstance(f.body.lhs, And) and len(f.body.lhs.operands) == 3
    assert f.body.rhs == Not(EventAtom("sendErr", ("compB", "coal", "PP")))


def test_precedence_and_associativity():
    e = parse_guard("event a() or event b() and not event c() implies event d() implies event e()")
    assert isinstance(e, Implies) and isinstance(e.rhs, Implies)
    assert isinstance(e.lhs, Or)
    assert isinstance(e.lhs.operands[1], And)
    assert render(e) == "event a() or event b() and not event c() implies event d() implies event e()"
    left = parse_guard("(event a() implies event b()) implies event c()")
    assert isinstance(left.lhs, Implies)
    assert parse_guard(render(left)) == left


def test_request_info_spelling_accepted():
    assert parse_guard("request_info(a, c, WRITE, {x, y}) == NOT_APPLICABLE") == RequestAtom(
        "a", "c", Action.WRITE, ("x", "y"), Effect.NOT_APPLICABLE
    )


def test_formula_render_round_trip(v2):
    f = v2.property("psi").formula
    assert parse_formula(render_formula(f)) == f


# --- diagnostics ------------------------------------------------------------


def test_trailing_connective_points_at_connective():
    src = "exists x:INFORMATION . event createHA(compB, x) and"
    with pytest.raises(ParseError) as info:
        parse_formula(src)
    (d,) = info.value.diagnostics
    assert (d.line, d.column) == (1, src.index("and") + 1)
    assert "and" in d.message


@pytest.mark.parametrize(
    "source, expected",
    [
        ("", [(1, 1, "scenario has no workflow block")]),
        ("agent a { info = [x }", [(1, 21, "expected ']', found '}'")]),
        ('workflow { entry = s node s: fail "abc', [(1, 35, "unterminated string")]),
        (b"workflow {}\n\xff", [(2, 1, "invalid UTF-8 byte sequence")]),
        ("workflow { entry = s node s: update frob() then s }", [(1, 37, "unknown operation 'frob'")]),
        (
            "agent a { info = [x] }\nworkflow { entry = s\n node s: done }\nagent a {}",
            [(4, 7, "duplicate agent 'a'")],
        ),
        (
            "agent a { info = [x] }\ncoalition c { members = [a] share a [y] }\nworkflow { entry = s node s: done }",
            [(2, 38, "agent 'a' does not hold 'y'")],
        ),
        (
            "policy p { combine = PERMIT_OVERRIDES rule { effect = NOT_APPLICABLE } }\n"
            "workflow { entry = s node s: done }",
            [(1, 8, "policy 'p' needs a target"), (1, 55, "rule effect must be PERMIT or DENY")],
        ),
        ("workflow { node s: if event x() yes t }", [(1, 1, "workflow needs an entry node"), (1, 37, "unknown node 't'")]),
    ],
)
def test_diagnostic_examples(source, expected):
    assert diags(source) == expected


def test_unknown_reference_position_tracks_edits():
    base = scenarios.read("chemical_plant_v1")
    anchor = "policy pp_policy\n"
    idx = base.index(anchor)
    broken = base[:idx] + "policy nope_policy\n" + base[idx + len(anchor):]
    line = base[:idx].count("\n") + 1
    col = idx - base.rfind("\n", 0, idx) + len("policy ")
    assert diags(broken) == [(line, col, "unknown policy 'nope_policy'")]


@settings(max_examples=200)
@given(st.integers(0, 4000), st.sampled_from(scenarios.NAMES))
def test_injected_garbage_is_located(pos, name):
    text = scenarios.read(name)
    pos = min(pos, len(text))
    line_start = text.rfind("\n", 0, pos) + 1
    prefix = text[line_start:pos]
    if "#" in prefix or prefix.count('"') % 2:
        return  # inside a comment or string, where '@' is allowed
    broken = text[:pos] + "@" + text[pos:]
    with pytest.raises(ParseError) as info:
        parse_scenario(broken)
    first = info.value.diagnostics[0]
    assert (first.line, first.column) == (text[:pos].count("\n") + 1, pos - line_start + 1)


# --- totality ---------------------------------------------------------------


def _seeds():
    return [scenarios.read(n).encode() for n in scenarios.NAMES]


@settings(max_examples=300)
@given(st.binary(max_size=300))
def test_random_bytes_only_raise_parse_error(data):
    try:
        parse_scenario(data)
    except ParseError as exc:
        assert exc.diagnostics


def test_mutation_corpus_only_raises_parse_error():
    for data in fuzz_corpus(_seeds(), 1000, seed=7):
        try:
            parse_scenario(data)
        except ParseError as exc:
            assert exc.diagnostics


def test_deep_nesting_is_reported_not_crashing():
    with pytest.raises(ParseError) as info:
        parse_formula("not " * 5000 + "event a()")
    assert "nested too deeply" in info.value.diagnostics[0].message

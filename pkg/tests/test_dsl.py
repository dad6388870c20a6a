import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reokit import dsl, semlog as S
from reokit.circuit import PORT_IN, PORT_OUT, validate_circuit
from reokit.sim import POLICY_ALL_READY, POLICY_CLOSED

from importlib import resources

from util import MINIMAL_SYNC_TEXT, circuit_signature, random_circuit

RULES_TEXT = resources.files("reokit").joinpath("data/rescue.rules").read_text()


# -- circuit parsing ----------------------------------------------------------


def test_parse_minimal_circuit():
    c = dsl.parse_circuit("circuit t { data{ok} ports{in a; out b;} sync(a,b) }")
    assert c.name == "t"
    assert len(c.channels) == 1
    assert {p.name for p in c.ports} == {"a", "b"}


def test_parse_error_at_closing_paren():
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_circuit("circuit t { data{ok} ports{in a;} sync(a,) }")
    (err,) = exc.value.errors
    assert err.span.line == 1
    assert "')'" in err.message


def test_parse_duplicate_port():
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_circuit("circuit t { data{ok} ports{in a; out a;} }")
    assert exc.value.errors[0].code == "DUPLICATE_PORT"


def test_parse_unknown_kind_and_bad_param():
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_circuit("circuit t { data{ok} ports{} zap(a,b) }")
    assert exc.value.errors[0].code == "UNKNOWN_KIND"
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_circuit("circuit t { data{ok} ports{} sync(a,b,init=ok) }")
    assert exc.value.errors[0].code == "BAD_PARAM"


def test_print_parse_roundtrip_minimal():
    c = dsl.parse_circuit(MINIMAL_SYNC_TEXT)
    again = dsl.parse_circuit(dsl.print_circuit(c))
    assert circuit_signature(c) == circuit_signature(again)
    assert dsl.print_circuit(c) == dsl.print_circuit(again)


def test_print_parse_roundtrip_random_circuits():
    rng = random.Random(808)
    for _ in range(200):
        c = random_circuit(rng)
        text = dsl.print_circuit(c)
        again = dsl.parse_circuit(text)
        assert circuit_signature(c) == circuit_signature(again)
        assert dsl.print_circuit(again) == text


MALFORMED = [
    "circuit",
    "circuit t",
    "circuit t {",
    "circuit t { data }",
    "circuit t { data { } }",
    "circuit t { data {ok} }",
    "circuit t { data {ok} ports { a; } }",
    "circuit t { data {ok} ports { in ; } }",
    "circuit t { data {ok} ports { in a } }",
    "circuit t { data {ok} ports {} sync }",
    "circuit t { data {ok} ports {} sync( }",
    "circuit t { data {ok} ports {} sync(a }",
    "circuit t { data {ok} ports {} sync(a, }",
    "circuit t { data {ok} ports {} sync(a,) }",
    "circuit t { data {ok} ports {} sync(a,b }",
    "circuit t { data {ok} ports {} fifo1(a,b,init) }",
    "circuit t { data {ok} ports {} fifo1(a,b,init=) }",
    "circuit t { data {ok} ports {} filter(a,b,accept=ok) }",
    "circuit t { data {ok} ports {} transform(a,b,map={ok}) }",
    "circuit t { data {ok} ports {} transform(a,b,map={ok->}) }",
    "circuit t { data {ok} ports {in a; in a;} }",
    "circuit t { data {ok} ports {} lossysync(a,b,accept={ok}) }",
    "circuit t @ data {ok} }",
    "rule r: =>",
    "rule r: A =>",
    "rule r: A => B",
    "protocol { A }",
    "protocol { A >> }",
    "fact (3)",
    "rule r10: A => A",
]


def test_malformed_corpus_spans_point_at_reported_token():
    lines_by_input = {}
    for text in MALFORMED:
        parse = dsl.parse_rulebase if text.lstrip().startswith(("rule", "protocol", "fact")) else dsl.parse_circuit
        with pytest.raises(dsl.ParseFailure) as exc:
            parse(text)
        err = exc.value.errors[0]
        assert err.span.line >= 1 and err.span.column >= 1
        line = text.splitlines()[err.span.line - 1]
        token = line[err.span.column - 1 : err.span.column - 1 + err.span.length]
        if token:
            assert token in err.message or repr(token) in err.message, (text, err)
        else:  # at end of input
            assert "end of input" in err.message
        lines_by_input[text] = err
    assert len(lines_by_input) == 30


# -- rule DSL -----------------------------------------------------------------


def test_rule_r8_shape():
    rb = dsl.parse_rulebase("rule r8: Forbidden(A) AND A => Failure(A)")
    (rule,) = rb.rules
    assert len(rule.premises) == 2
    assert rule.conclusion == S.Failure(S.Var("A"))


def test_guard_in_and_position_and_where():
    for text in (
        "rule r12: (I)A AND I>2 => P((Very)A)",
        "rule r12: (I)A WHERE I>2 => P((Very)A)",
    ):
        rb = dsl.parse_rulebase(text)
        (rule,) = rb.rules
        assert rule.guards == (S.Guard("I", 2),)
        assert rule.premises == (S.Count(S.Var("I"), S.Var("A")),)


def test_protocol_declaration():
    rb = dsl.parse_rulebase("protocol { AmbulanceRequest >> FireRequest >> PoliceRequest }")
    assert rb.orders == (("AmbulanceRequest", "FireRequest", "PoliceRequest"),)


def test_unbound_conclusion_variable_rejected():
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_rulebase("rule bad: A => B")
    assert exc.value.errors[0].code == "UNBOUND_VAR"


def test_builtin_rule_names_rejected():
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_rulebase("rule r11: A => A")
    assert exc.value.errors[0].code == "BUILTIN_OVERRIDE"


def test_shipped_program_parses_with_fifteen_rules():
    rb = dsl.parse_rulebase(RULES_TEXT)
    assert rb.declaration_count == 13
    assert rb.builtin_count == 2
    assert rb.total_rule_count == 15
    assert rb.orders == (("AmbulanceRequest", "FireRequest", "PoliceRequest"),)
    assert [f.name for f in rb.facts] == ["r6"]
    assert {r.name for r in rb.rules} == {
        "r2", "r3", "r4", "r5", "r7", "r8", "r9", "r12", "r13", "r14", "r15"
    }
    assert [r.name for r in rb.event_implications()] == ["r2", "r3", "r4", "r5"]


# -- terms --------------------------------------------------------------------


def ground_terms(max_depth=4):
    atoms = st.sampled_from(["Alpha", "Beta", "busy_bee", "X9"]).map(S.Atom)
    unary = st.sampled_from(
        [S.P, S.Very, S.Forbidden, S.Warning, S.Failure, S.Resolved, S.DoubleCheck]
    )
    return st.recursive(
        atoms,
        lambda kids: st.one_of(
            st.tuples(unary, kids).map(lambda p: p[0](p[1])),
            st.tuples(st.integers(1, 9), kids).map(lambda p: S.Count(p[0], p[1])),
            st.tuples(kids, kids).map(lambda p: S.Implies(p[0], p[1])),
        ),
        max_leaves=max_depth,
    )


@settings(max_examples=150, deadline=None)
@given(ground_terms())
def test_term_pretty_parse_roundtrip(term):
    assert dsl.parse_term(S.pretty(term)) == term


def test_term_orthography_examples():
    assert dsl.parse_term("Forbidden((Very)BudgetConsuming)") == S.Forbidden(
        S.Very(S.Atom("BudgetConsuming"))
    )
    assert dsl.parse_term("(3)X", allow_vars=False) == S.Count(3, S.Atom("X"))
    t = dsl.parse_term("(I)A", allow_vars=True)
    assert t == S.Count(S.Var("I"), S.Var("A"))
    t = dsl.parse_term("(A=>B)", allow_vars=True)
    assert t == S.Implies(S.Var("A"), S.Var("B"))
    # grouping parentheses are transparent
    assert dsl.parse_term("(P(A))", allow_vars=True) == S.P(S.Var("A"))


# -- events, env, map ---------------------------------------------------------


def test_nested_prefix_terms():
    assert dsl.parse_term("(Very)(3)X") == S.Very(S.Count(3, S.Atom("X")))
    assert dsl.parse_term("P((X=>Y))") == S.P(S.Implies(S.Atom("X"), S.Atom("Y")))
    assert dsl.parse_term("(2)(Very)X") == S.Count(2, S.Very(S.Atom("X")))


def test_env_round_numbering_errors():
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_env("round 0: offer a=ok")
    assert exc.value.errors[0].code == "BAD_ROUND"
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_env("round 1: offer a=ok\nround 1: offer a=ok")
    assert exc.value.errors[0].code == "DUP_ROUND"


def test_parse_events_three_occurrences():
    script = dsl.parse_events("HelicopterMission\nHelicopterMission\nHelicopterMission\n")
    assert script.terms() == [S.Atom("HelicopterMission")] * 3


def test_parse_events_rejects_variables():
    with pytest.raises(dsl.ParseFailure):
        dsl.parse_events("(I)A")


def test_parse_env_offers_and_ready():
    env = dsl.parse_env("round 1: offer citizens=ok; ready case1,case2,case3")
    ((num, rnd),) = env.rounds
    assert num == 1
    assert rnd.offers == (("citizens", "ok"),)
    assert rnd.ready == frozenset({"case1", "case2", "case3"})
    assert len(env) == 1


def test_parse_env_policy_and_defaults():
    env = dsl.parse_env("policy closed\nround 2: offer a=ok")
    assert env.default_policy == POLICY_CLOSED
    offers, ready = env.round(1, frozenset({"x"}))
    assert offers == {} and ready == frozenset()
    env2 = dsl.parse_env("round 1: offer a=ok")
    assert env2.default_policy == POLICY_ALL_READY
    _, ready = env2.round(1, frozenset({"x"}))
    assert ready == frozenset({"x"})


def test_parse_env_cross_checks_circuit():
    c = dsl.parse_circuit(MINIMAL_SYNC_TEXT)
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_env("round 1: offer nope=ok", c)
    assert exc.value.errors[0].code == "UNKNOWN_PORT"
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_env("round 1: offer a=zap", c)
    assert exc.value.errors[0].code == "UNKNOWN_TOKEN"
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_env("round 1: ready a", c)
    assert exc.value.errors[0].code == "UNKNOWN_PORT"


def test_parse_map_entries_and_precedence():
    m = dsl.parse_map("emergency_alarm -> AmbulanceRequest\nport=ok -> Specific\nport -> General")
    assert m.lookup("emergency_alarm", "ok") == "AmbulanceRequest"
    assert m.lookup("port", "ok") == "Specific"
    assert m.lookup("port", "bad") == "General"
    assert m.lookup("other", "ok") is None


def test_parse_map_duplicate_and_unknown_port():
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_map("p -> A\np -> B")
    assert exc.value.errors[0].code == "DUP_MAP_ENTRY"
    c = dsl.parse_circuit(MINIMAL_SYNC_TEXT)
    with pytest.raises(dsl.ParseFailure) as exc:
        dsl.parse_map("zz -> A", c)
    assert exc.value.errors[0].code == "UNKNOWN_PORT"

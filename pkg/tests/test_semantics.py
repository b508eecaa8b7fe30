"""Constant binding, static validation, evaluation, and successor enumeration."""

import pytest

import oracles
from conftest import build, build_graph
from spacheck import (
    BindError,
    Env,
    EvalError,
    action_successors,
    bind_constants,
    eval_expr,
    eval_set,
    initial_states,
    parse_spec,
    successors,
    validate,
)
from spacheck.model import INT_MAX, state_to_record
from spacheck.parser import _Parser, tokenize


def parse_expr(text: str):
    return _Parser(tokenize(text)).expr()


def parse_setexpr(text: str):
    return _Parser(tokenize(text)).setexpr()


def env_for(bound, record: dict | None = None, binders: dict | None = None) -> Env:
    state = None
    if record is not None:
        state = tuple(record[v.name] for v in bound.spec.variables)
    return Env(current=state, binders=binders or {}, bound=bound)


# --- bind_constants ---------------------------------------------------------


def test_bind_math(math_src):
    bound = bind_constants(parse_spec(math_src), {"max_num_q": 5})
    assert bound.constants == {"max_num_q": 5}


def test_bind_clock_empty(clock_src):
    assert bind_constants(parse_spec(clock_src), {}).constants == {}


def test_bind_missing_constant(math_src):
    with pytest.raises(BindError, match="max_num_q unbound"):
        bind_constants(parse_spec(math_src), {})


def test_bind_unknown_and_wrong_kind(math_src):
    spec = parse_spec(math_src)
    with pytest.raises(BindError, match="unknown constant nope"):
        bind_constants(spec, {"max_num_q": 3, "nope": 1})
    with pytest.raises(BindError, match="expects int"):
        bind_constants(spec, {"max_num_q": True})


# --- validate ----------------------------------------------------------------


def test_validate_corpus_clean(math_src, clock_src, buggy_src):
    assert validate(bind_constants(parse_spec(math_src), {"max_num_q": 5})) == []
    assert validate(bind_constants(parse_spec(clock_src), {})) == []
    assert validate(bind_constants(parse_spec(buggy_src), {"max_num_q": 3})) == []


def wrap_action(body: str, extra_vars: str = "") -> str:
    return (
        "spec t\nvar num : int init 1\nvar result : string init \"\"\n"
        f"{extra_vars}action A {{\n{body}\n}}"
    )


def errors_of(source: str, constants=None) -> list:
    return [str(e) for e in validate(bind_constants(parse_spec(source), constants or {}))]


def test_validate_kind_error_bool_into_int():
    errs = errors_of(wrap_action("num' = true"))
    assert any("num' is int but the value is bool" in e for e in errs)


def test_validate_double_assignment_each_path():
    body = (
        "if num = 1 {\n result' = \"Right\"\n} else {\n result' = \"Wrong\"\n}\n"
        "result' = \"\""
    )
    errs = errors_of(wrap_action(body))
    assert any("assigned more than once" in e for e in errs)


def test_validate_reports_all_errors():
    errs = errors_of(wrap_action("num' = true\nresult' = 3\nnope' = 1"))
    assert len(errs) == 3


def test_validate_mixed_kind_equality_rejected():
    errs = errors_of(wrap_action("when result = 0"))
    assert any("compares string with int" in e for e in errs)


def test_validate_unresolved_identifier():
    errs = errors_of(wrap_action("num' = numb + 1"))
    assert any("unresolved identifier numb" in e for e in errs)


def test_validate_binder_shadowing():
    errs = errors_of(wrap_action("any num in {1, 2} {\nresult' = \"x\"\n}"))
    assert any("shadows" in e for e in errs)


def test_validate_variable_in_any_set_rejected():
    errs = errors_of(wrap_action("any b in {num} {\nresult' = \"x\"\n}"))
    assert any("only constants" in e for e in errs)


def test_validate_init_references_variable_rejected():
    src = "spec t\nvar a : int init 1\nvar b : int init a\naction A { when true }"
    errs = errors_of(src)
    assert any("only constants" in e for e in errs)


def test_validate_property_predicate_kinds(math_src):
    src = math_src + "property Bad: eventually (num)\n"
    errs = errors_of(src, {"max_num_q": 2})
    assert any("must be bool" in e for e in errs)


def test_validate_requires_variable_and_action():
    errs = errors_of("spec empty")
    assert any("at least one variable" in e for e in errs)
    assert any("at least one action" in e for e in errs)


# --- eval_expr / eval_set -------------------------------------------------------


def test_eval_clock_conditional(clock_src):
    bound = build(clock_src)
    expr = parse_expr("if hr = 12 then 1 else hr + 1")
    assert eval_expr(expr, env_for(bound, {"hr": 12, "period": "am"})) == 1
    assert eval_expr(expr, env_for(bound, {"hr": 5, "period": "am"})) == 6


def test_eval_overflow(math_src):
    bound = build(math_src, {"max_num_q": 2})
    env = env_for(bound, dict(oracles.math_init(), num=INT_MAX))
    with pytest.raises(EvalError, match="overflow"):
        eval_expr(parse_expr("num + 1"), env)


def test_eval_short_circuit_skips_overflow(math_src):
    bound = build(math_src, {"max_num_q": 2})
    env = env_for(bound, dict(oracles.math_init(), num=INT_MAX))
    assert eval_expr(parse_expr("true or num + 1 = 0"), env) is True
    assert eval_expr(parse_expr("false and num + 1 = 0"), env) is False


def test_eval_set_range(clock_src):
    bound = build(clock_src)
    assert eval_set(parse_setexpr("1..12"), env_for(bound)) == list(range(1, 13))


def test_eval_set_literal_and_empty_range(clock_src):
    bound = build(clock_src)
    assert eval_set(parse_setexpr("{true, false}"), env_for(bound)) == [True, False]
    assert eval_set(parse_setexpr("5..3"), env_for(bound)) == []
    assert eval_set(parse_setexpr("{1, 2, 1}"), env_for(bound)) == [1, 2]


# --- initial_states --------------------------------------------------------------


def test_clock_initial_states(clock_src):
    bound = build(clock_src)
    init = initial_states(bound)
    # brute-force product, lexicographic in declaration order
    expected = [(hr, p) for hr in range(1, 13) for p in ("am", "pm")]
    assert init == expected


def test_math_single_initial_state(math_src):
    bound = build(math_src, {"max_num_q": 5})
    init = initial_states(bound)
    assert len(init) == 1
    assert state_to_record(init[0], bound.spec) == oracles.math_init()


def test_empty_init_set_gives_no_initial_states():
    bound = build("spec t\nvar x : int init in 5..3\naction A { when true }")
    assert initial_states(bound) == []


# --- action_successors / successors ------------------------------------------------


def math_state(bound, **overrides):
    rec = dict(oracles.math_init())
    rec.update(overrides)
    return tuple(rec[v.name] for v in bound.spec.variables)


def test_check_action_branches(math_src):
    bound = build(math_src, {"max_num_q": 5})
    check = bound.spec.actions[1]
    phase_b = math_state(bound, input_enabled=False, check_enabled=True)
    succ = action_successors(phase_b, check, bound)
    records = [state_to_record(s, bound.spec) for s in succ]
    assert records == [
        dict(oracles.math_init(), input_enabled=False, check_enabled=False,
             new_question_enabled=True, count_right=1, result="Right"),
        dict(oracles.math_init(), input_enabled=False, check_enabled=False,
             new_question_enabled=True, count_wrong=1, result="Wrong"),
    ]


def test_terminating_is_a_self_loop(math_src):
    bound = build(math_src, {"max_num_q": 5})
    terminating = bound.spec.actions[3]
    s = math_state(bound, num=5)
    assert action_successors(s, terminating, bound) == [s]


def test_disabled_guard_yields_nothing(math_src):
    bound = build(math_src, {"max_num_q": 5})
    new_question = bound.spec.actions[2]
    assert action_successors(math_state(bound), new_question, bound) == []


def test_successors_at_math_init(math_src):
    bound = build(math_src, {"max_num_q": 5})
    init = initial_states(bound)[0]
    # guard oracle: evaluate each action's guards directly
    enabled = []
    for action in bound.spec.actions:
        env = env_for(bound, state_to_record(init, bound.spec))
        if all(eval_expr(g, env) for g in action.guards):
            enabled.append(action.name)
    assert enabled == ["Input_Answer"]
    succ = successors(init, bound)
    assert [label for label, _ in succ] == ["Input_Answer"]
    assert state_to_record(succ[0][1], bound.spec) == dict(
        oracles.math_init(), input_enabled=False, check_enabled=True
    )


def test_clock_successor_at_11_am(clock_src):
    bound = build(clock_src)
    assert successors((11, "am"), bound) == [("Next", (12, "pm"))]


def test_only_terminating_at_final_phase_c(math_src):
    bound = build(math_src, {"max_num_q": 3})
    s = math_state(
        bound, num=3, count_right=3, result="Right",
        input_enabled=False, check_enabled=False, new_question_enabled=True,
    )
    assert successors(s, bound) == [("Terminating", s)]


# --- semantic invariants -----------------------------------------------------------


def assigned_anywhere(action) -> set:
    from spacheck.model import AnyChoice, Assign, If

    out = set()

    def walk(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                out.add(s.target)
            elif isinstance(s, If):
                walk(s.then)
                walk(s.orelse)
            elif isinstance(s, AnyChoice):
                walk(s.body)

    walk(action.body)
    return out


def test_frame_property_on_math(math_src):
    bound, graph = build_graph(math_src, {"max_num_q": 2})
    writable = {a.name: assigned_anywhere(a) for a in bound.spec.actions}
    names = bound.spec.var_names()
    for i, s in enumerate(graph.states):
        for label, j in graph.edges[i]:
            t = graph.states[j]
            changed = {names[k] for k in range(len(names)) if s[k] != t[k]}
            assert changed <= writable[label]


def test_guard_monotonicity(math_src):
    bound, graph = build_graph(math_src, {"max_num_q": 2})
    for s in graph.states:
        for action in bound.spec.actions:
            env = env_for(bound, state_to_record(s, bound.spec))
            guards_hold = all(eval_expr(g, env) for g in action.guards)
            assert bool(action_successors(s, action, bound)) == guards_hold


def test_successor_determinism(math_src):
    bound, graph = build_graph(math_src, {"max_num_q": 2})
    for s in graph.states:
        assert successors(s, bound) == successors(s, bound)


def test_choice_completeness_on_check(math_src):
    bound, graph = build_graph(math_src, {"max_num_q": 3})
    check = bound.spec.actions[1]
    idx = bound.var_index["check_enabled"]
    for s in graph.states:
        succ = action_successors(s, check, bound)
        assert len(succ) == (2 if s[idx] else 0)


def test_any_over_empty_set_contributes_no_successor():
    bound = build(
        "spec t\nvar x : int init 1\n"
        "action A { when true any b in 5..3 { x' = b } }"
    )
    assert successors((1,), bound) == []


def test_domain_violation_is_an_error():
    bound = build(
        "spec t\nvar x : int domain 0..3 init 0\n"
        "action Up { x' = x + 1 }"
    )
    with pytest.raises(EvalError, match="outside its domain"):
        for s in [(3,)]:
            action_successors(s, bound.spec.actions[0], bound)


def test_if_without_else_keeps_values():
    bound = build(
        "spec t\nvar x : int init 1\nvar y : int init 0\n"
        "action A { if x = 2 { y' = 5 } x' = 2 }"
    )
    assert successors((1, 0), bound) == [("A", (2, 0))]
    assert successors((2, 0), bound) == [("A", (2, 5))]

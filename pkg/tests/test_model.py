"""Core model: canonical keys and state records."""

import itertools

from hypothesis import given
from hypothesis import strategies as st

from conftest import build, build_graph
from spacheck import canonical_key, state_to_record


def clock_state(bound, hr, period):
    return (hr, period)


def test_canonical_key_deterministic(math_src):
    bound = build(math_src, {"max_num_q": 3})
    s1 = (1, 0, 0, "", True, False, False)
    s2 = (1, 0, 0, "", True, False, False)
    assert canonical_key(s1, bound.spec) == canonical_key(s2, bound.spec)


def test_canonical_key_differs_on_any_field(clock_src):
    bound = build(clock_src)
    spec = bound.spec
    assert canonical_key((1, "am"), spec) != canonical_key((1, "pm"), spec)
    assert canonical_key((1, "am"), spec) != canonical_key((2, "am"), spec)


def test_all_clock_states_have_distinct_keys(clock_src):
    # brute-force product of both init sets
    bound = build(clock_src)
    states = [(hr, p) for hr in range(1, 13) for p in ("am", "pm")]
    keys = {canonical_key(s, bound.spec) for s in states}
    assert len(keys) == 24


def test_math_initial_record(math_src):
    bound, graph = build_graph(math_src, {"max_num_q": 5})
    rec = state_to_record(graph.states[graph.initial[0]], bound.spec)
    assert rec == {
        "num": 1,
        "count_right": 0,
        "count_wrong": 0,
        "result": "",
        "input_enabled": True,
        "check_enabled": False,
        "new_question_enabled": False,
    }


def test_clock_record_order(clock_src):
    bound = build(clock_src)
    rec = state_to_record((12, "pm"), bound.spec)
    assert list(rec.items()) == [("hr", 12), ("period", "pm")]


def test_record_key_consistency(clock_src):
    bound = build(clock_src)
    spec = bound.spec
    states = [(hr, p) for hr in range(1, 13) for p in ("am", "pm")]
    for a, b in itertools.combinations(states, 2):
        same_record = state_to_record(a, spec) == state_to_record(b, spec)
        same_key = canonical_key(a, spec) == canonical_key(b, spec)
        assert same_record == same_key


def test_key_injective_on_reachable_corpus_states(clock_src, math_src, buggy_src):
    for src, consts in (
        (clock_src, {}),
        (math_src, {"max_num_q": 3}),
        (buggy_src, {"max_num_q": 3}),
    ):
        bound, graph = build_graph(src, consts)
        keys = {canonical_key(s, bound.spec) for s in graph.states}
        records = {tuple(state_to_record(s, bound.spec).items()) for s in graph.states}
        assert len(keys) == len(graph.states) == len(records)


@given(
    st.lists(
        st.one_of(
            st.booleans(),
            st.integers(min_value=-(2**63), max_value=2**63 - 1),
            st.text(max_size=6),
        ),
        min_size=1,
        max_size=5,
    ),
    st.lists(
        st.one_of(
            st.booleans(),
            st.integers(min_value=-(2**63), max_value=2**63 - 1),
            st.text(max_size=6),
        ),
        min_size=1,
        max_size=5,
    ),
)
def test_key_equality_matches_structural_equality(a, b):
    # the encoding itself is spec-independent: equal keys iff structurally
    # equal value tuples (same kind and same value slot by slot; Python's
    # True == 1 does not count as equal here)
    from spacheck.model import value_kind

    def structurally_equal(xs, ys):
        return len(xs) == len(ys) and all(
            value_kind(x) == value_kind(y) and x == y for x, y in zip(xs, ys)
        )

    assert (canonical_key(tuple(a), None) == canonical_key(tuple(b), None)) == (
        structurally_equal(a, b)
    )

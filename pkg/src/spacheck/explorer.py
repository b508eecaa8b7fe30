"""Breadth-first construction of the reachable state graph, safety checking,
deadlock detection, and counterexample trace handling.

BFS keeps safety counterexamples shortest in steps.  Deadlock here is the
pragmatic check - a state with no successor at all - which is distinct from
liveness quiescence (no state-changing successor): a state whose only move is
a self-loop is quiescent but not deadlocked.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .model import Expr, SpecModel, State, Value, canonical_key
from .semantics import (
    BoundSpec,
    EvalError,
    _compile_expr,
    action_successors,
    initial_states,
    successors,
)


class LimitError(Exception):
    """Exploration hit the state or depth cap; never a silent truncation."""


@dataclass
class ExploreLimits:
    max_states: int = 1_000_000
    max_depth: Optional[int] = None


@dataclass
class StateGraph:
    """The explored reachable state space.

    State indices follow BFS discovery order; `parent` links give a shortest
    discovery path from some initial state to every non-initial state.
    """

    bound: BoundSpec
    states: list  # index -> State
    key_index: dict  # canonical key -> index
    initial: list  # indices of initial states
    edges: list  # index -> ordered list of (action name, target index)
    parent: list  # index -> None (initial) or (predecessor index, action name)
    _analysis: object = field(default=None, compare=False, repr=False)

    @property
    def spec(self) -> SpecModel:
        return self.bound.spec

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return sum(len(e) for e in self.edges)


@dataclass
class Trace:
    """A replayable execution: states joined by named action steps.

    `loop_start` marks a lasso: the execution repeats states[loop_start:]
    forever.  The edge closing the loop (last state back to
    states[loop_start]) is `loop_action` when a real action relates them;
    None means the loop is a perpetual stutter at a quiescent state (a
    deadlocked state has no action to name).
    """

    states: list  # nonempty list of State
    actions: list  # action names, len == len(states) - 1
    loop_start: Optional[int] = None
    loop_action: Optional[str] = None


@dataclass
class Verdict:
    """Outcome of one check; a fail always carries a replayable trace."""

    name: str
    kind: str  # deadlock | invariant | eventually | leadsto | always_eventually
    status: str  # pass | fail | error
    trace: Optional[Trace] = None
    detail: str = ""
    binder: Optional[Value] = None


def explore(bound: BoundSpec, limits: Optional[ExploreLimits] = None) -> StateGraph:
    """Build the graph of states reachable from the initial states.

    FIFO frontier; successors expand in the deterministic order of
    semantics.successors, so two explorations of the same BoundSpec produce
    identical graphs.  Raises EvalError (with the discovery trace of the
    offending state attached), LimitError, or EvalError on zero initial
    states.
    """
    if limits is None:
        limits = ExploreLimits()
    spec = bound.spec
    init = initial_states(bound)
    if not init:
        raise EvalError("spec has no initial states", "init")

    states: list = []
    key_index: dict = {}
    initial: list = []
    edges: list = []
    parent: list = []
    depth: list = []

    def add_state(s: State, par: Optional[tuple], d: int) -> int:
        if len(states) >= limits.max_states:
            raise LimitError(f"state limit of {limits.max_states} exceeded")
        idx = len(states)
        states.append(s)
        key_index[canonical_key(s, spec)] = idx
        edges.append(None)
        parent.append(par)
        depth.append(d)
        return idx

    for s in init:
        k = canonical_key(s, spec)
        if k not in key_index:
            initial.append(add_state(s, None, 0))

    graph = StateGraph(
        bound=bound, states=states, key_index=key_index,
        initial=initial, edges=edges, parent=parent,
    )

    frontier = deque(range(len(states)))
    while frontier:
        i = frontier.popleft()
        try:
            succ = successors(states[i], bound)
        except EvalError as e:
            e.trace = reconstruct_trace(graph, i)
            raise
        out = []
        for label, t in succ:
            k = canonical_key(t, spec)
            j = key_index.get(k)
            if j is None:
                d = depth[i] + 1
                if limits.max_depth is not None and d > limits.max_depth:
                    raise LimitError(f"depth limit of {limits.max_depth} exceeded")
                j = add_state(t, (i, label), d)
                frontier.append(j)
            out.append((label, j))
        edges[i] = out
    return graph


def reconstruct_trace(graph: StateGraph, target: int) -> Trace:
    """Shortest discovery path from an initial state to `target`, following
    parent links."""
    indices = [target]
    actions = []
    while graph.parent[indices[0]] is not None:
        pred, label = graph.parent[indices[0]]
        indices.insert(0, pred)
        actions.insert(0, label)
    return Trace(states=[graph.states[i] for i in indices], actions=actions)


def check_invariant(
    graph: StateGraph,
    pred: Expr,
    bound: Optional[BoundSpec] = None,
    *,
    name: str = "invariant",
    binders: Optional[dict] = None,
) -> Verdict:
    """Pass iff `pred` holds in every stored state; on fail the trace is the
    shortest discovery path to the first violating state in BFS order."""
    bound = bound if bound is not None else graph.bound
    b = binders or {}
    f = _compile_expr(pred, bound, f"property {name}")
    try:
        for i, s in enumerate(graph.states):
            if not f(s, b):
                return Verdict(
                    name=name, kind="invariant", status="fail",
                    trace=reconstruct_trace(graph, i),
                    detail=f"violated at state {i}",
                )
    except EvalError as e:
        return Verdict(name=name, kind="invariant", status="error", detail=str(e))
    return Verdict(
        name=name, kind="invariant", status="pass",
        detail=f"holds in all {graph.n_states} states",
    )


def check_deadlock(graph: StateGraph) -> Verdict:
    """Pass iff every state has at least one outgoing edge (self-loops
    count); on fail the trace leads to the first successor-less state."""
    for i, out in enumerate(graph.edges):
        if not out:
            return Verdict(
                name="deadlock", kind="deadlock", status="fail",
                trace=reconstruct_trace(graph, i),
                detail=f"state {i} has no enabled action",
            )
    return Verdict(
        name="deadlock", kind="deadlock", status="pass",
        detail=f"no deadlock in {graph.n_states} states",
    )


def _is_quiescent(state: State, bound: BoundSpec) -> bool:
    return all(t == state for _, t in successors(state, bound))


def replay_trace(bound: BoundSpec, trace: Trace) -> Optional[int]:
    """Re-validate a trace against the spec semantics.

    Returns None when the trace replays, otherwise the first failing index:
    0 when the first state is not an initial state, i > 0 when the step into
    states[i] is not produced by the named action, and len(states) when the
    lasso's loop-closing edge does not hold.
    """
    if not trace.states:
        return 0
    if trace.states[0] not in initial_states(bound):
        return 0
    by_name = {a.name: a for a in bound.spec.actions}
    for i, label in enumerate(trace.actions):
        action = by_name.get(label)
        if action is None:
            return i + 1
        if trace.states[i + 1] not in action_successors(trace.states[i], action, bound):
            return i + 1
    if trace.loop_start is not None:
        last = trace.states[-1]
        target = trace.states[trace.loop_start]
        if trace.loop_action is not None:
            action = by_name.get(trace.loop_action)
            if action is None or target not in action_successors(last, action, bound):
                return len(trace.states)
        else:
            # A pure stutter loop is only admitted forever at a quiescent state.
            if target != last or not _is_quiescent(last, bound):
                return len(trace.states)
    return None

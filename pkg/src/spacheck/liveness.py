"""Temporal property checking over an explored state graph.

Execution semantics are fixed: behaviors start in an initial state, take
steps of the next-state relation (stuttering allowed), and are weakly fair
with respect to the state-changing next step.  The admitted infinite
behaviors are therefore exactly (a) paths traversing state-changing edges
infinitely often and (b) paths that reach a quiescent state - one with no
edge to a different state - and stutter there forever.  A self-loop edge is
a stuttering step, so a fair cycle needs at least two distinct states; that
makes refuting a liveness property a search for a reachable nontrivial
strongly connected component, or a reachable quiescent state, inside the
region where the target predicate fails.

Pass/fail decisions run on numpy/scipy (predicate vectors over state
columns, compiled SCC and reachability); counterexample lassos are then
extracted in plain Python with deterministic tie-breaking (shortest entry
first, lowest state index on ties).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .model import (
    INT_MAX,
    INT_MIN,
    AlwaysEventually,
    Binary,
    Cond,
    Eventually,
    Expr,
    InSet,
    Invariant,
    LeadsTo,
    Lit,
    Name,
    RangeSet,
    TemporalProperty,
    Unary,
    canonical_key,
    format_value,
)
from .explorer import StateGraph, Trace, Verdict, check_invariant, reconstruct_trace
from .semantics import EvalError, _compile_expr, eval_const_set


def quiescent_states(graph: StateGraph) -> set:
    """Indices of states with no edge to a different state: states with only
    self-loops, and successor-less (deadlocked) states."""
    return {
        i for i, out in enumerate(graph.edges) if all(t == i for _, t in out)
    }


@dataclass
class SccInfo:
    """Strongly connected components of the state-changing edges, optionally
    restricted to a subset of states."""

    comp: list  # state index -> component id, -1 outside the restriction
    members: list  # component id -> ascending state indices
    nontrivial: list  # component id -> has a cycle of state-changing edges


# --- cached numeric view of a graph -------------------------------------------


class _Analysis:
    """Numpy view of a StateGraph: per-variable value columns, state-changing
    edge arrays, quiescence flags, initial mask, and BFS depths."""

    def __init__(self, graph: StateGraph):
        n = graph.n_states
        spec = graph.spec
        self.n = n
        self.columns = []
        for i, decl in enumerate(spec.variables):
            vals = [s[i] for s in graph.states]
            if decl.kind == "int":
                self.columns.append(np.array(vals, dtype=np.int64))
            elif decl.kind == "bool":
                self.columns.append(np.array(vals, dtype=bool))
            else:
                self.columns.append(np.array(vals, dtype=object))
        src, dst = [], []
        quiescent = np.ones(n, dtype=bool)
        for i, out in enumerate(graph.edges):
            for _, j in out:
                if j != i:
                    src.append(i)
                    dst.append(j)
                    quiescent[i] = False
        self.sc_src = np.array(src, dtype=np.int64)
        self.sc_dst = np.array(dst, dtype=np.int64)
        self.quiescent = quiescent
        self.initial_mask = np.zeros(n, dtype=bool)
        self.initial_mask[graph.initial] = True
        depth = np.zeros(n, dtype=np.int64)
        for i in range(n):
            par = graph.parent[i]
            if par is not None:
                depth[i] = depth[par[0]] + 1
        self.depth = depth


def _analysis(graph: StateGraph) -> _Analysis:
    if graph._analysis is None:
        graph._analysis = _Analysis(graph)
    return graph._analysis


# --- vectorized predicate evaluation --------------------------------------------


class _VectorOverflow(Exception):
    """Signal to retry the predicate with the scalar evaluator."""


def _ovf_add(a, b):
    if not isinstance(a, np.ndarray) and not isinstance(b, np.ndarray):
        v = int(a) + int(b)
        if v < INT_MIN or v > INT_MAX:
            raise _VectorOverflow
        return v
    with np.errstate(over="ignore"):
        r = np.add(a, b)
    if np.any(((a ^ r) & (b ^ r)) < 0):
        raise _VectorOverflow
    return r


def _ovf_sub(a, b):
    if not isinstance(a, np.ndarray) and not isinstance(b, np.ndarray):
        v = int(a) - int(b)
        if v < INT_MIN or v > INT_MAX:
            raise _VectorOverflow
        return v
    with np.errstate(over="ignore"):
        r = np.subtract(a, b)
    if np.any(((a ^ b) & (a ^ r)) < 0):
        raise _VectorOverflow
    return r


def _ovf_mul(a, b):
    if not isinstance(a, np.ndarray) and not isinstance(b, np.ndarray):
        v = int(a) * int(b)
        if v < INT_MIN or v > INT_MAX:
            raise _VectorOverflow
        return v
    with np.errstate(over="ignore"):
        r = np.multiply(a, b)
    bb = np.broadcast_to(np.asarray(b, dtype=np.int64), np.shape(r))
    aa = np.broadcast_to(np.asarray(a, dtype=np.int64), np.shape(r))
    safe = np.where(bb == 0, 1, bb)
    with np.errstate(over="ignore"):
        q = np.floor_divide(r, safe)
    if np.any((bb != 0) & (bb != -1) & (q != aa)):
        raise _VectorOverflow
    if np.any((bb == -1) & (aa == INT_MIN)):
        raise _VectorOverflow
    return r


def _compile_vector(e: Expr, graph: StateGraph) -> Callable:
    """Compile a predicate into fn(columns, binders) -> bool column (or a
    scalar when the predicate is state-independent)."""
    bound = graph.bound
    if isinstance(e, Lit):
        v = e.value
        return lambda c, b: v
    if isinstance(e, Name):
        if e.name in bound.var_index:
            i = bound.var_index[e.name]
            return lambda c, b: c[i]
        if e.name in bound.constants:
            v = bound.constants[e.name]
            return lambda c, b: v
        name = e.name
        line, col = e.line, e.col

        def lookup(c, b):
            try:
                return b[name]
            except KeyError:
                raise EvalError(f"unresolved identifier {name}", "", line, col) from None
        return lookup
    if isinstance(e, Unary):
        f = _compile_vector(e.operand, graph)
        return lambda c, b: np.logical_not(f(c, b))
    if isinstance(e, Binary):
        lf = _compile_vector(e.left, graph)
        rf = _compile_vector(e.right, graph)
        op = e.op
        if op == "and":
            return lambda c, b: np.logical_and(lf(c, b), rf(c, b))
        if op == "or":
            return lambda c, b: np.logical_or(lf(c, b), rf(c, b))
        if op == "implies":
            return lambda c, b: np.logical_or(np.logical_not(lf(c, b)), rf(c, b))
        if op == "=":
            return lambda c, b: lf(c, b) == rf(c, b)
        if op == "/=":
            return lambda c, b: lf(c, b) != rf(c, b)
        if op == "<":
            return lambda c, b: lf(c, b) < rf(c, b)
        if op == "<=":
            return lambda c, b: lf(c, b) <= rf(c, b)
        if op == ">":
            return lambda c, b: lf(c, b) > rf(c, b)
        if op == ">=":
            return lambda c, b: lf(c, b) >= rf(c, b)
        if op == "+":
            return lambda c, b: _ovf_add(lf(c, b), rf(c, b))
        if op == "-":
            return lambda c, b: _ovf_sub(lf(c, b), rf(c, b))
        return lambda c, b: _ovf_mul(lf(c, b), rf(c, b))
    if isinstance(e, InSet):
        item = _compile_vector(e.item, graph)
        if isinstance(e.over, RangeSet):
            lo = _compile_vector(e.over.lo, graph)
            hi = _compile_vector(e.over.hi, graph)
            return lambda c, b: np.logical_and(lo(c, b) <= item(c, b), item(c, b) <= hi(c, b))
        elems = [_compile_vector(el, graph) for el in e.over.elems]

        def member(c, b):
            v = item(c, b)
            acc = np.equal(v, elems[0](c, b))
            for f in elems[1:]:
                acc = np.logical_or(acc, np.equal(v, f(c, b)))
            return acc
        return member
    if isinstance(e, Cond):
        cf = _compile_vector(e.cond, graph)
        tf = _compile_vector(e.then, graph)
        ff = _compile_vector(e.orelse, graph)
        return lambda c, b: np.where(cf(c, b), tf(c, b), ff(c, b))
    raise TypeError(f"not an expression: {e!r}")


def _pred_column(graph: StateGraph, vec: Callable, pred: Expr, where: str,
                 binders: dict) -> np.ndarray:
    """Evaluate a predicate over every stored state.

    Runs vectorized; on a detected integer overflow it falls back to the
    scalar evaluator, which short-circuits `and`/`or` exactly as specified
    and raises a located EvalError when the overflow is really evaluated.
    """
    ana = _analysis(graph)
    try:
        res = vec(ana.columns, binders)
    except _VectorOverflow:
        f = _compile_expr(pred, graph.bound, where)
        return np.fromiter(
            (bool(f(s, binders)) for s in graph.states), dtype=bool, count=ana.n
        )
    if isinstance(res, np.ndarray) and res.shape == (ana.n,):
        return res.astype(bool, copy=False)
    return np.full(ana.n, bool(res))


# --- fair-lasso search -----------------------------------------------------------


@dataclass
class _FailInfo:
    quiescent_hits: np.ndarray  # original indices of reached quiescent states
    scc_hits: np.ndarray  # original indices of reached nontrivial-SCC states
    scc_members: dict  # original index -> frozenset of its SCC (original indices)


def _restricted_edges(ana: _Analysis, restrict: np.ndarray):
    ids = np.flatnonzero(restrict)
    pos = np.full(ana.n, -1, dtype=np.int64)
    pos[ids] = np.arange(ids.size)
    if ana.sc_src.size:
        keep = restrict[ana.sc_src] & restrict[ana.sc_dst]
        rs = pos[ana.sc_src[keep]]
        rd = pos[ana.sc_dst[keep]]
    else:
        rs = rd = np.empty(0, dtype=np.int64)
    return ids, pos, rs, rd


def _search_fail(graph: StateGraph, restrict: np.ndarray, starts: np.ndarray,
                 within_restriction: bool) -> Optional[_FailInfo]:
    """Find admitted behaviors that stay in `restrict` forever.

    Starting states are `starts & restrict`; when `within_restriction` is
    true the path from a start must itself stay inside the restriction
    (otherwise every stored state counts as reachable, which is already true
    of the full graph).  Returns None when no such behavior exists.
    """
    ana = _analysis(graph)
    starts = starts & restrict
    if not starts.any():
        return None
    ids, pos, rs, rd = _restricted_edges(ana, restrict)
    m = ids.size
    if within_restriction:
        sp = pos[np.flatnonzero(starts)]
        row = np.concatenate([rs, np.full(sp.size, m, dtype=np.int64)])
        col = np.concatenate([rd, sp])
        g = sparse.csr_matrix(
            (np.ones(row.size, dtype=np.int8), (row, col)), shape=(m + 1, m + 1)
        )
        order = csgraph.breadth_first_order(g, m, directed=True, return_predecessors=False)
        reached = np.zeros(m + 1, dtype=bool)
        reached[order] = True
        reached = reached[:m]
    else:
        reached = np.ones(m, dtype=bool)

    quiescent_hits = ids[ana.quiescent[ids] & reached]

    scc_members: dict = {}
    if rs.size:
        sub = sparse.csr_matrix(
            (np.ones(rs.size, dtype=np.int8), (rs, rd)), shape=(m, m)
        )
        _, labels = csgraph.connected_components(sub, directed=True, connection="strong")
        sizes = np.bincount(labels)
        hit = (sizes[labels] >= 2) & reached
        scc_hits = ids[hit]
        for comp in np.unique(labels[hit]):
            mem = frozenset(int(x) for x in ids[labels == comp])
            for node in mem:
                scc_members[node] = mem
    else:
        scc_hits = np.empty(0, dtype=np.int64)

    if quiescent_hits.size == 0 and scc_hits.size == 0:
        return None
    return _FailInfo(quiescent_hits, scc_hits, scc_members)


def strongly_connected(graph: StateGraph, restrict=None) -> SccInfo:
    """SCCs of the state-changing edges among `restrict` (an iterable of
    state indices, or None for every state)."""
    ana = _analysis(graph)
    mask = np.ones(ana.n, dtype=bool)
    if restrict is not None:
        mask = np.zeros(ana.n, dtype=bool)
        mask[list(restrict)] = True
    ids, _, rs, rd = _restricted_edges(ana, mask)
    m = ids.size
    comp = [-1] * ana.n
    if m == 0:
        return SccInfo(comp=comp, members=[], nontrivial=[])
    sub = sparse.csr_matrix((np.ones(rs.size, dtype=np.int8), (rs, rd)), shape=(m, m))
    _, labels = csgraph.connected_components(sub, directed=True, connection="strong")
    members: list = [[] for _ in range(int(labels.max()) + 1 if m else 0)]
    for local, orig in enumerate(ids):
        comp[int(orig)] = int(labels[local])
        members[int(labels[local])].append(int(orig))
    nontrivial = [len(ms) >= 2 for ms in members]
    return SccInfo(comp=comp, members=members, nontrivial=nontrivial)


# --- lasso extraction (pure python, failure path only) ----------------------------


def _bfs_within(graph: StateGraph, starts: list, allowed: np.ndarray):
    """Multi-source BFS over state-changing edges inside `allowed`; visits
    sources in ascending index order so parents are deterministic."""
    dist: dict = {}
    par: dict = {}
    dq = deque()
    for s in sorted(starts):
        if s not in dist:
            dist[s] = 0
            par[s] = None
            dq.append(s)
    while dq:
        u = dq.popleft()
        for _, v in graph.edges[u]:
            if v != u and allowed[v] and v not in dist:
                dist[v] = dist[u] + 1
                par[v] = u
                dq.append(v)
    return dist, par


def _edge_label(graph: StateGraph, u: int, v: int) -> str:
    for label, t in graph.edges[u]:
        if t == v:
            return label
    raise AssertionError(f"no edge {u} -> {v}")


def _cycle_through(graph: StateGraph, entry: int, members: frozenset) -> list:
    """Depth-first walk over state-changing edges inside one SCC; returns the
    first cycle through `entry`, preferring lower state indices."""

    def nbrs(u: int) -> list:
        return sorted({v for _, v in graph.edges[u] if v != u and v in members})

    path = [entry]
    onpath = {entry}
    iters = [iter(nbrs(entry))]
    while iters:
        try:
            v = next(iters[-1])
        except StopIteration:
            iters.pop()
            onpath.discard(path.pop())
            continue
        if v == entry and len(path) >= 2:
            return path
        if v in onpath or v == entry:
            continue
        path.append(v)
        onpath.add(v)
        iters.append(iter(nbrs(v)))
    raise AssertionError("nontrivial SCC must contain a cycle")


def _self_loop_label(graph: StateGraph, i: int) -> Optional[str]:
    for label, t in graph.edges[i]:
        if t == i:
            return label
    return None


def _assemble(graph: StateGraph, prefix: list, info: _FailInfo, entry: int) -> Trace:
    """Build the lasso trace: `prefix` ends at `entry`; the loop is either a
    perpetual stutter at a quiescent entry or a cycle through its SCC."""
    indices = list(prefix)
    actions = [_edge_label(graph, u, v) for u, v in zip(indices, indices[1:])]
    loop_start = len(indices) - 1
    if entry in info.scc_members:
        cycle = _cycle_through(graph, entry, info.scc_members[entry])
        for node in cycle[1:]:
            actions.append(_edge_label(graph, indices[-1], node))
            indices.append(node)
        loop_action = _edge_label(graph, indices[-1], entry)
    else:
        loop_action = _self_loop_label(graph, entry)
    return Trace(
        states=[graph.states[i] for i in indices],
        actions=actions,
        loop_start=loop_start,
        loop_action=loop_action,
    )


def _pick_entry(candidates: list, dist: dict) -> int:
    reachable = [i for i in candidates if i in dist]
    return min(reachable, key=lambda i: (dist[i], i))


def _walk_back(par: dict, entry: int) -> list:
    path = [entry]
    while par[path[0]] is not None:
        path.insert(0, par[path[0]])
    return path


# --- the four checks ----------------------------------------------------------


def _verdict_error(name: str, kind: str, exc: EvalError) -> Verdict:
    return Verdict(name=name, kind=kind, status="error", detail=str(exc))


def check_eventually(graph: StateGraph, pred: Expr, *, name: str = "eventually",
                     binders: Optional[dict] = None) -> Verdict:
    """Pass iff every admitted behavior from every initial state reaches a
    state satisfying `pred`."""
    binders = binders or {}
    where = f"property {name}"
    try:
        pv = _pred_column(graph, _compile_vector(pred, graph), pred, where, binders)
    except EvalError as e:
        return _verdict_error(name, "eventually", e)
    ana = _analysis(graph)
    restrict = ~pv
    info = _search_fail(graph, restrict, ana.initial_mask, within_restriction=True)
    if info is None:
        return Verdict(
            name=name, kind="eventually", status="pass",
            detail="every admitted behavior reaches the target",
        )
    starts = [i for i in graph.initial if restrict[i]]
    dist, par = _bfs_within(graph, starts, restrict)
    entry = _pick_entry(list(info.quiescent_hits) + list(info.scc_hits), dist)
    trace = _assemble(graph, _walk_back(par, entry), info, entry)
    kind_of_loop = "stutters forever at quiescent state" if entry not in info.scc_members \
        else "cycles forever from state"
    return Verdict(
        name=name, kind="eventually", status="fail", trace=trace,
        detail=f"never reaches the target: {kind_of_loop} {entry}",
    )


def check_leadsto(graph: StateGraph, p: Expr, q: Expr, *, name: str = "leadsto",
                  binders: Optional[dict] = None) -> Verdict:
    """Pass iff from every reachable state satisfying `p`, every admitted
    continuation reaches a state satisfying `q`."""
    binders = binders or {}
    where = f"property {name}"
    try:
        pv = _pred_column(graph, _compile_vector(p, graph), p, where, binders)
        qv = _pred_column(graph, _compile_vector(q, graph), q, where, binders)
    except EvalError as e:
        return _verdict_error(name, "leadsto", e)
    restrict = ~qv
    obligations = pv & restrict
    info = _search_fail(graph, restrict, obligations, within_restriction=True)
    if info is None:
        return Verdict(
            name=name, kind="leadsto", status="pass",
            detail="every premise state leads to the conclusion",
        )
    starts = [int(i) for i in np.flatnonzero(obligations)]
    dist, par = _bfs_within(graph, starts, restrict)
    entry = _pick_entry(list(info.quiescent_hits) + list(info.scc_hits), dist)
    tail = _walk_back(par, entry)  # begins at the witnessing premise state
    witness = tail[0]
    head_idx = _indices_of(graph, reconstruct_trace(graph, witness))
    prefix = head_idx[:-1] + tail
    trace = _assemble(graph, prefix, info, entry)
    return Verdict(
        name=name, kind="leadsto", status="fail", trace=trace,
        detail=f"state {witness} satisfies the premise but can avoid the conclusion forever",
    )


def check_always_eventually(graph: StateGraph, pred: Expr, *,
                            name: str = "always_eventually",
                            binders: Optional[dict] = None) -> Verdict:
    """Pass iff every admitted behavior visits `pred`-states infinitely
    often.  The counterexample prefix may pass through `pred`-states; only
    the loop must avoid them."""
    binders = binders or {}
    where = f"property {name}"
    try:
        pv = _pred_column(graph, _compile_vector(pred, graph), pred, where, binders)
    except EvalError as e:
        return _verdict_error(name, "always_eventually", e)
    restrict = ~pv
    # Every stored state is reachable, so any anchor inside the restriction
    # refutes the property; no path-within-restriction requirement here.
    info = _search_fail(graph, restrict, restrict.copy(), within_restriction=False)
    if info is None:
        return Verdict(
            name=name, kind="always_eventually", status="pass",
            detail="the target recurs on every admitted behavior",
        )
    ana = _analysis(graph)
    candidates = list(info.quiescent_hits) + list(info.scc_hits)
    entry = min(candidates, key=lambda i: (int(ana.depth[i]), i))
    head = reconstruct_trace(graph, int(entry))
    prefix = _indices_of(graph, head)
    trace = _assemble(graph, prefix, info, int(entry))
    return Verdict(
        name=name, kind="always_eventually", status="fail", trace=trace,
        detail=f"after state {int(entry)} the target never holds again",
    )


def _indices_of(graph: StateGraph, trace: Trace) -> list:
    return [graph.key_index[canonical_key(s, graph.spec)] for s in trace.states]


def check_property(graph: StateGraph, prop: TemporalProperty) -> Verdict:
    """Dispatch a declared property; a `forall x in S` binder expands to one
    kernel check per member of S, and a fail names the witnessing value."""
    where = f"property {prop.name}"
    if prop.binder is not None:
        bname, bset = prop.binder
        try:
            values = eval_const_set(bset, graph.bound, where)
        except EvalError as e:
            return _verdict_error(prop.name, prop.kind, e)
        if not values:
            return Verdict(
                name=prop.name, kind=prop.kind, status="pass",
                detail="vacuous: the binder set is empty",
            )
        instances = [({bname: v}, v) for v in values]
    else:
        instances = [({}, None)]

    for binders, value in instances:
        v = _check_shape(graph, prop, binders)
        if v.status != "pass":
            v.binder = value
            if value is not None:
                bname = prop.binder[0]
                v.detail = f"{bname} = {format_value(value)}: {v.detail}"
            return v
    detail = "holds"
    if prop.binder is not None:
        detail = f"holds for all {len(instances)} binder values"
    return Verdict(name=prop.name, kind=prop.kind, status="pass", detail=detail)


def _check_shape(graph: StateGraph, prop: TemporalProperty, binders: dict) -> Verdict:
    shape = prop.shape
    if isinstance(shape, Invariant):
        return check_invariant(graph, shape.pred, graph.bound, name=prop.name, binders=binders)
    if isinstance(shape, Eventually):
        return check_eventually(graph, shape.pred, name=prop.name, binders=binders)
    if isinstance(shape, AlwaysEventually):
        return check_always_eventually(graph, shape.pred, name=prop.name, binders=binders)
    if isinstance(shape, LeadsTo):
        return check_leadsto(graph, shape.lhs, shape.rhs, name=prop.name, binders=binders)
    raise TypeError(f"not a property shape: {shape!r}")

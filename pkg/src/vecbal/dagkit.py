"""DAG machinery: root-path families, non-tree-edge profiles, chains, and the
reduction from DAG prefix discrepancy to tree prefix discrepancy."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Union

import networkx as nx
import numpy as np

from .core import Coloring, DiscrepancyReport, SetSystem, VectorSequence, dag_disc_witness
from .graphs import Dag, GraphError, RootedTree
from .oracle import OracleBudget, dag_prefix_family, herdisc
from .rng import make_rng

Edge = tuple[int, int]

__all__ = [
    "Dag",
    "RootedTree",
    "Forest",
    "NonTreeProfile",
    "ChainReport",
    "ReductionTrace",
    "topological_order",
    "prefix_family",
    "chain_step",
    "chain_length",
    "chain_lengths",
    "linked_chain_lengths",
    "nontree_profile",
    "remove_free_edge",
    "reduce_to_tree",
    "arborescence_from_forest",
    "herdisc_lower_from_chain",
    "dag_disc_solve",
    "characterization_gap",
]


@dataclass(frozen=True)
class Forest:
    """A set of DAG edges that is acyclic as an undirected graph.

    Vertices may have several parents, so this is more general than a rooted
    tree; the tree-building reduction produces one of these.
    """

    num_vertices: int
    edges: frozenset[Edge]
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", frozenset((int(a), int(b)) for a, b in self.edges))
        if not self.check:
            return
        parent = list(range(self.num_vertices))

        def find(v: int) -> int:
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for a, b in self.edges:
            ra, rb = find(a), find(b)
            if ra == rb:
                raise GraphError("edge set contains an undirected cycle")
            parent[ra] = rb

    def edge_set(self) -> frozenset[Edge]:
        return self.edges

    def without(self, e: Edge) -> "Forest":
        return Forest(self.num_vertices, self.edges - {e})


TreeLike = Union[RootedTree, Forest, Iterable[Edge]]


def _edges_of(t: TreeLike) -> frozenset[Edge]:
    if isinstance(t, (RootedTree, Forest)):
        return t.edge_set()
    return frozenset((int(a), int(b)) for a, b in t)


@dataclass(frozen=True)
class NonTreeProfile:
    """m[v] = max number of non-tree edges on a path starting at v."""

    m: tuple[int, ...]

    def __getitem__(self, v: int) -> int:
        return self.m[v]


@dataclass(frozen=True)
class ChainReport:
    """A longest chain: anchors a_1..a_{l+1} and two disjoint paths per step."""

    length: int
    anchors: tuple[int, ...]
    paths: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...] = ()


def topological_order(g: Dag) -> list[int]:
    return list(g.order)


def prefix_family(g: Dag, limit: int = 200_000) -> SetSystem:
    return dag_prefix_family(g, limit)


# ---------------------------------------------------------------- chains


def _split_graph(g: Dag, a: int, b: int) -> nx.DiGraph:
    """Unit-capacity graph with internal vertices split into in/out halves."""
    pa, pb = g.position[a], g.position[b]
    inside = [v for v in range(g.num_vertices) if pa < g.position[v] < pb]
    H = nx.DiGraph()
    for v in inside:
        H.add_edge(("in", v), ("out", v), capacity=1)

    def tail(v: int):
        return ("out", v)

    def head(v: int):
        return ("in", v)

    keep = set(inside) | {a, b}
    for u, v in g.edges:
        if u in keep and v in keep and u != b and v != a:
            H.add_edge(tail(u), head(v), capacity=1)
    return H


def _disjoint_paths(g: Dag, a: int, b: int) -> Optional[tuple[tuple[int, ...], tuple[int, ...]]]:
    if a == b or g.position[a] >= g.position[b]:
        return None
    H = _split_graph(g, a, b)
    src, dst = ("out", a), ("in", b)
    if src not in H or dst not in H:
        return None
    value, flow = nx.maximum_flow(H, src, dst)
    if value < 2:
        return None
    paths = []
    used: set[tuple] = set()
    for _ in range(2):
        node, path = src, [a]
        while node != dst:
            nxt = next(
                w for w, f in flow[node].items() if f > 0.5 and (node, w) not in used
            )
            used.add((node, nxt))
            if nxt[0] == "in" and nxt != dst:
                used.add((nxt, ("out", nxt[1])))
                path.append(nxt[1])
                nxt = ("out", nxt[1])
            node = nxt
        path.append(b)
        paths.append(tuple(path))
    paths.sort(key=len)
    return paths[0], paths[1]


def chain_step(g: Dag, a: int, b: int) -> bool:
    """True iff a and b are joined by two internally vertex-disjoint a->b paths."""
    return _disjoint_paths(g, a, b) is not None


def _chain_table(g: Dag) -> tuple[list[int], list[int]]:
    """best[v]: longest chain starting at v; nxt[v]: its second anchor."""
    n = g.num_vertices
    below: list[set[int]] = [set() for _ in range(n)]
    for u in reversed(g.order):
        for v in g.succ[u]:
            below[u].add(v)
            below[u] |= below[v]
    best = [0] * n
    nxt = [-1] * n
    for a in reversed(g.order):
        for b in sorted(below[a], key=lambda v: g.position[v]):
            if best[b] + 1 > best[a] and chain_step(g, a, b):
                best[a], nxt[a] = best[b] + 1, b
    return best, nxt


def chain_length(g: Dag, start: Optional[int] = None) -> ChainReport:
    """Longest chain inside the sub-DAG reachable from ``start`` (default root).

    The chain may begin at any vertex of that sub-DAG, not only at ``start``.
    """
    v0 = g.root if start is None else start
    best, nxt = _chain_table(g)
    reach = _reachable(g, v0)
    a = max(sorted(reach), key=lambda v: best[v])
    anchors, paths = [a], []
    while nxt[anchors[-1]] >= 0:
        b = nxt[anchors[-1]]
        paths.append(_disjoint_paths(g, anchors[-1], b))
        anchors.append(b)
    return ChainReport(best[a], tuple(anchors), tuple(paths))


def chain_lengths(g: Dag) -> list[int]:
    """ell_v for every vertex v."""
    best, _ = _chain_table(g)
    out = [0] * g.num_vertices
    for u in reversed(g.order):
        out[u] = max([best[u]] + [out[v] for v in g.succ[u]])
    return out


def linked_chain_lengths(g: Dag) -> list[int]:
    """Longest chain in each sub-DAG when consecutive steps may be joined by a
    directed path (b_i -> ... -> a_{i+1}) rather than sharing an anchor.

    Connecting paths add no vertices to the restriction used in the lower
    bound argument, so herdisc >= length / 4 still holds.
    """
    n = g.num_vertices
    below: list[set[int]] = [set() for _ in range(n)]
    for u in reversed(g.order):
        for v in g.succ[u]:
            below[u].add(v)
            below[u] |= below[v]
    out = [0] * n
    for a in reversed(g.order):
        best = max((out[v] for v in g.succ[a]), default=0)
        for b in sorted(below[a], key=lambda v: g.position[v]):
            if out[b] + 1 > best and chain_step(g, a, b):
                best = out[b] + 1
        out[a] = best
    return out


def _reachable(g: Dag, v: int) -> set[int]:
    seen, stack = {v}, [v]
    while stack:
        u = stack.pop()
        for w in g.succ[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def herdisc_lower_from_chain(report: ChainReport) -> Fraction:
    return Fraction(report.length, 4)


# ---------------------------------------------------------------- profiles


def nontree_profile(g: Dag, t: TreeLike) -> NonTreeProfile:
    """Non-tree edge counts via m_v = max_{(v,u)} m_u + [(v,u) not in tree]."""
    tree = _edges_of(t)
    m = [0] * g.num_vertices
    for v in reversed(g.order):
        m[v] = max((m[u] + ((v, u) not in tree) for u in g.succ[v]), default=0)
    return NonTreeProfile(tuple(m))


def remove_free_edge(g: Dag, t: TreeLike, e: Edge) -> Forest:
    """Drop a tree edge (a, b) with m_a > m_b; the whole profile is unchanged."""
    tree = _edges_of(t)
    e = (int(e[0]), int(e[1]))
    if e not in tree:
        raise ValueError(f"edge {e} is not in the tree")
    before = nontree_profile(g, tree)
    a, b = e
    if not before[a] > before[b]:
        raise ValueError(f"need m_a > m_b, got m_{a}={before[a]} and m_{b}={before[b]}")
    out = Forest(g.num_vertices, tree - {e})
    after = nontree_profile(g, out)
    assert after == before, "profile changed after removing a free edge"
    return out


# ---------------------------------------------------------------- reduction


@dataclass
class ReductionTrace:
    """Record of the tree-building run.

    ``forest`` is the edge set the algorithm builds (vertices may keep two
    parents); ``forest_profile`` is its non-tree profile. The returned rooted
    tree is extracted from it afterwards.
    """

    forest: Forest
    forest_profile: NonTreeProfile
    events: list[dict] = field(default_factory=list)
    anomalies: int = 0
    excluded: tuple[int, ...] = ()

    @property
    def case2_removals(self) -> int:
        return sum(1 for ev in self.events if ev["kind"] == "case2")


def _forest_path(
    adj: dict[int, set[int]], s: int, t: int, allowed: Optional[set[int]] = None
) -> Optional[list[int]]:
    """Vertices of the undirected forest path from s to t, or None."""
    prev = {s: s}
    q = deque([s])
    while q:
        u = q.popleft()
        if u == t:
            break
        for w in adj[u]:
            if w not in prev and (allowed is None or w in allowed):
                prev[w] = u
                q.append(w)
    if t not in prev:
        return None
    path = [t]
    while path[-1] != s:
        path.append(prev[path[-1]])
    return path[::-1]


def build_forest(g: Dag, scope: str = "reachable") -> ReductionTrace:
    """The tree-building algorithm.

    Vertices are visited in reverse topological order. At u, only the
    children tied for the largest m-value receive tree edges (the others
    cannot raise m_u). An edge closing an undirected cycle W is handled by
    comparing m at the apex of W (its topologically last vertex) with m at
    the child: equal means stop, smaller means a free edge on W is dropped
    and the child edge added.

    ``scope`` selects which tree edges count when looking for W: those among
    vertices reachable from u ("reachable") or all visited vertices
    ("visited").
    """
    if scope not in ("reachable", "visited"):
        raise ValueError("scope must be 'reachable' or 'visited'")
    n = g.num_vertices
    F: set[Edge] = set()
    adj: dict[int, set[int]] = {v: set() for v in range(n)}
    pos = g.position
    events: list[dict] = []
    anomalies = 0
    m = [0] * n
    below: list[set[int]] = [set() for _ in range(n)]
    for u in reversed(g.order):
        below[u] = {u}.union(*(below[v] for v in g.succ[u]))
        allowed = below[u] if scope == "reachable" else None
        kids = sorted(g.succ[u], key=lambda v: (-m[v], v))
        top = [v for v in kids if m[v] == m[kids[0]]] if kids else []
        for vj in top:
            path = _forest_path(adj, u, vj, allowed)
            if path is None:
                _link(F, adj, (u, vj))
                events.append({"kind": "add", "u": u, "v": vj})
                continue
            apex = max(path, key=lambda v: pos[v])
            if m[apex] == m[vj]:
                events.append({"kind": "case1", "u": u, "v": vj, "apex": apex})
                break
            if m[apex] > m[vj]:
                anomalies += 1
                events.append({"kind": "anomaly", "u": u, "v": vj, "apex": apex})
                break
            e = _free_edge_on_cycle(path, apex, u, F, m)
            if e is None:
                anomalies += 1
                events.append({"kind": "anomaly", "u": u, "v": vj, "apex": apex})
                break
            _unlink(F, adj, e)
            _link(F, adj, (u, vj))
            events.append({"kind": "case2", "u": u, "v": vj, "apex": apex, "removed": e})
        m[u] = max((m[v] + ((u, v) not in F) for v in g.succ[u]), default=0)
    forest = Forest(n, frozenset(F), check=scope == "visited")
    prof = nontree_profile(g, forest)
    return ReductionTrace(forest, prof, events, anomalies)


def _link(F: set[Edge], adj: dict[int, set[int]], e: Edge) -> None:
    F.add(e)
    adj[e[0]].add(e[1])
    adj[e[1]].add(e[0])


def _unlink(F: set[Edge], adj: dict[int, set[int]], e: Edge) -> None:
    F.discard(e)
    adj[e[0]].discard(e[1])
    adj[e[1]].discard(e[0])


def _free_edge_on_cycle(
    path: list[int], apex: int, u: int, F: set[Edge], m: list[int]
) -> Optional[Edge]:
    """A tree edge (b1, b2) on the cycle, away from u, with m_b1 > m_b2; closest to the apex."""
    k = path.index(apex)
    best: Optional[tuple[int, Edge]] = None
    for i in range(1, len(path) - 1):
        x, y = path[i], path[i + 1]
        e = (x, y) if (x, y) in F else (y, x)
        if u in e or not m[e[0]] > m[e[1]]:
            continue
        dist = min(abs(i - k), abs(i + 1 - k))
        if best is None or (dist, e) < best:
            best = (dist, e)
    return None if best is None else best[1]


def arborescence_from_forest(g: Dag, forest: TreeLike) -> RootedTree:
    """A spanning arborescence of the root's reachable set.

    Each vertex keeps one in-edge, preferring forest edges and among those the
    parent with the largest forest profile value (ties to the smaller id).
    """
    F = _edges_of(forest)
    prof = nontree_profile(g, F)
    parent: dict[int, Optional[int]] = {g.root: None}
    for v in g.order:
        if v == g.root or v not in g.reachable:
            continue
        preds = [p for p in g.pred[v] if p in g.reachable]
        in_f = [p for p in preds if (p, v) in F]
        pool = in_f or preds
        parent[v] = min(pool, key=lambda p: (-prof[p], p))
    return RootedTree(parent)


def reduce_to_tree(g: Dag) -> tuple[RootedTree, ReductionTrace]:
    """Run the tree-building algorithm and extract a rooted spanning tree.

    The rooted tree spans the vertices reachable from the root; unreachable
    vertices are listed in ``trace.excluded``.
    """
    trace = build_forest(g)
    tree = arborescence_from_forest(g, trace.forest)
    trace.excluded = tuple(sorted(g.unreachable))
    return tree, trace


# ---------------------------------------------------------------- pipeline


def dag_disc_solve(
    g: Dag, vs: VectorSequence, budget: OracleBudget = OracleBudget()
) -> DiscrepancyReport:
    """Color a DAG through its reduced tree and report value and decomposition bound.

    Every root path of g splits at its non-tree edges into at most m_root + 1
    segments, each a directed path in the tree and hence a difference of two
    tree root paths. So the measured value is at most
    (m_root + 1) * 2 * (tree root-path value).
    """
    from .treesolve import tree_prefix_solve

    if g.num_vertices != vs.count:
        raise ValueError("DAG size and vector count differ")
    tree, trace = reduce_to_tree(g)
    small, old = tree.relabel()
    sub = vs.subset(old)
    rep = tree_prefix_solve(small, sub, budget)
    signs = np.ones(g.num_vertices, dtype=int)
    signs[old] = rep.coloring.signs
    x = Coloring(signs)
    value, path = dag_disc_witness(g, vs, x)
    m_root = nontree_profile(g, tree).m[g.root]
    bound = (m_root + 1) * 2.0 * rep.value
    return DiscrepancyReport(
        value,
        path,
        x,
        exact=False,
        extra={
            "bound": bound,
            "m_root": m_root,
            "forest_m_root": trace.forest_profile.m[g.root],
            "tree_value": rep.value,
            "tree_exact": rep.exact,
            "case2_removals": trace.case2_removals,
        },
    )


@dataclass(frozen=True)
class GapRecord:
    herdisc: int
    ell_root: int
    m_root_reduced: int
    m_root_sampled_min: int
    forest_m_root: int


def random_arborescence(g: Dag, rng: np.random.Generator) -> RootedTree:
    parent: dict[int, Optional[int]] = {g.root: None}
    for v in g.order:
        if v == g.root or v not in g.reachable:
            continue
        preds = [p for p in g.pred[v] if p in g.reachable]
        parent[v] = preds[int(rng.integers(len(preds)))]
    return RootedTree(parent)


def characterization_gap(
    g: Dag, budget: OracleBudget = OracleBudget(), samples: int = 64, seed: int = 0
) -> GapRecord:
    """(herdisc, ell_root, m_root of the reduced tree, best m_root over sampled trees)."""
    h = herdisc(prefix_family(g, budget.max_paths), budget)
    ell = chain_length(g).length
    tree, trace = reduce_to_tree(g)
    m_red = nontree_profile(g, tree).m[g.root]
    best = m_red
    rng = make_rng(seed, g.num_vertices, len(g.edges))
    for _ in range(samples):
        best = min(best, nontree_profile(g, random_arborescence(g, rng)).m[g.root])
    return GapRecord(h, ell, m_red, best, trace.forest_profile.m[g.root])

"""Combinatorial carriers: directed acyclic graphs and rooted trees."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence


class GraphError(ValueError):
    """Raised for malformed graphs (cycles, bad vertices, missing root)."""


def kahn_order(num_vertices: int, edges: Iterable[tuple[int, int]]) -> list[int]:
    """Kahn's algorithm with smallest-id tie-break. Raises GraphError on a cycle."""
    succ: list[list[int]] = [[] for _ in range(num_vertices)]
    indeg = [0] * num_vertices
    for u, v in edges:
        succ[u].append(v)
        indeg[v] += 1
    heap = [v for v in range(num_vertices) if indeg[v] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, v)
    if len(order) != num_vertices:
        raise GraphError("graph contains a directed cycle")
    return order


@dataclass(frozen=True)
class Dag:
    """A DAG on vertices 0..num_vertices-1 with a designated root.

    The root must come first in the stored topological order, i.e. it has no
    in-edges and is the smallest source. Vertices not reachable from the root
    are allowed; they are listed in ``unreachable``.
    """

    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    root: int = 0
    succ: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    pred: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    order: tuple[int, ...] = field(init=False, repr=False, compare=False)
    position: tuple[int, ...] = field(init=False, repr=False, compare=False)
    reachable: frozenset[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = int(self.num_vertices)
        if n < 1:
            raise GraphError("a DAG needs at least one vertex")
        seen: set[tuple[int, int]] = set()
        edges: list[tuple[int, int]] = []
        for e in self.edges:
            u, v = int(e[0]), int(e[1])
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge {(u, v)} has a vertex outside [0, {n})")
            if u == v:
                raise GraphError(f"self-loop at {u}")
            if (u, v) not in seen:
                seen.add((u, v))
                edges.append((u, v))
        if not 0 <= self.root < n:
            raise GraphError(f"root {self.root} missing")
        order = kahn_order(n, edges)
        if order[0] != self.root:
            raise GraphError(
                f"root {self.root} is not first in topological order (got {order[0]})"
            )
        succ: list[list[int]] = [[] for _ in range(n)]
        pred: list[list[int]] = [[] for _ in range(n)]
        for u, v in edges:
            succ[u].append(v)
            pred[v].append(u)
        pos = [0] * n
        for i, v in enumerate(order):
            pos[v] = i
        reach = {self.root}
        stack = [self.root]
        while stack:
            u = stack.pop()
            for v in succ[u]:
                if v not in reach:
                    reach.add(v)
                    stack.append(v)
        object.__setattr__(self, "num_vertices", n)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "succ", tuple(tuple(sorted(s)) for s in succ))
        object.__setattr__(self, "pred", tuple(tuple(sorted(p)) for p in pred))
        object.__setattr__(self, "order", tuple(order))
        object.__setattr__(self, "position", tuple(pos))
        object.__setattr__(self, "reachable", frozenset(reach))

    @property
    def unreachable(self) -> frozenset[int]:
        return frozenset(range(self.num_vertices)) - self.reachable

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.succ[u]

    @classmethod
    def path(cls, n: int) -> "Dag":
        return cls(n, tuple((i, i + 1) for i in range(n - 1)), 0)

    @classmethod
    def from_tree(cls, t: "RootedTree") -> "Dag":
        if t.vertices != tuple(range(len(t.vertices))):
            raise GraphError("tree vertices must be 0..T-1 to convert to a Dag")
        return cls(len(t.vertices), tuple(t.edges()), t.root)


@dataclass(frozen=True)
class RootedTree:
    """A rooted tree given by a parent map (root maps to None).

    Children lists are ordered by vertex id, so in a binary tree the first
    child is the left child.
    """

    parent: Mapping[int, Optional[int]]
    root: int = field(init=False)
    vertices: tuple[int, ...] = field(init=False, repr=False, compare=False)
    children: Mapping[int, tuple[int, ...]] = field(init=False, repr=False, compare=False)
    order: tuple[int, ...] = field(init=False, repr=False, compare=False)
    depth: Mapping[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        par = {int(v): (None if p is None else int(p)) for v, p in dict(self.parent).items()}
        roots = [v for v, p in par.items() if p is None]
        if len(roots) != 1:
            raise GraphError(f"expected exactly one root, found {len(roots)}")
        kids: dict[int, list[int]] = {v: [] for v in par}
        for v, p in par.items():
            if p is not None:
                if p not in par:
                    raise GraphError(f"parent {p} of {v} is not a vertex")
                kids[p].append(v)
        root = roots[0]
        order: list[int] = []
        depth = {root: 0}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            order.append(u)
            for c in sorted(kids[u]):
                depth[c] = depth[u] + 1
                queue.append(c)
        if len(order) != len(par):
            raise GraphError("parent map contains a cycle")
        object.__setattr__(self, "parent", par)
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "vertices", tuple(sorted(par)))
        object.__setattr__(self, "children", {v: tuple(sorted(c)) for v, c in kids.items()})
        object.__setattr__(self, "order", tuple(order))
        object.__setattr__(self, "depth", depth)

    def __len__(self) -> int:
        return len(self.vertices)

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.parent.items(), key=lambda kv: kv[0])))

    @classmethod
    def from_parent_list(cls, parents: Sequence[Optional[int]]) -> "RootedTree":
        return cls({i: p for i, p in enumerate(parents)})

    def parent_list(self) -> list[Optional[int]]:
        if self.vertices != tuple(range(len(self.vertices))):
            raise GraphError("vertices are not 0..T-1")
        return [self.parent[v] for v in self.vertices]

    def edges(self) -> list[tuple[int, int]]:
        return [(p, v) for v, p in sorted(self.parent.items()) if p is not None]

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.edges())

    def leaves(self) -> list[int]:
        return [v for v in self.order if not self.children[v]]

    def path_to(self, v: int) -> list[int]:
        """Vertices from the root down to v, inclusive."""
        out = [v]
        while self.parent[out[-1]] is not None:
            out.append(self.parent[out[-1]])  # type: ignore[arg-type]
        return out[::-1]

    def relabel(self) -> tuple["RootedTree", list[int]]:
        """Relabel to 0..k-1 in BFS order; returns the new tree and old ids."""
        old = list(self.order)
        new_id = {v: i for i, v in enumerate(old)}
        par = {
            new_id[v]: (None if self.parent[v] is None else new_id[self.parent[v]])  # type: ignore[index]
            for v in old
        }
        return RootedTree(par), old

    def is_subgraph_of(self, g: Dag) -> bool:
        return all(g.has_edge(p, v) for p, v in self.edges())

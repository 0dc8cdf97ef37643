"""Prefix colorings for rooted trees.

No constructive procedure is known for the convex-body recursion that gives
the O(sqrt(log dT)) existence bound on trees, so ``tree_prefix_solve`` uses a
root-to-leaf greedy (or exact search on small trees). For scalars the greedy
is optimal up to the trivial bound 1.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import TOL, Coloring, DiscrepancyReport, VectorSequence, dag_disc_witness
from .graphs import Dag, RootedTree
from .oracle import BudgetExceeded, OracleBudget, exact_dag_disc

__all__ = ["tree_prefix_solve", "tree_scalar_solve", "greedy_tree_signs"]


def _check_labels(t: RootedTree, count: int) -> None:
    if count != len(t.vertices):
        raise ValueError(f"tree has {len(t.vertices)} vertices but {count} items were given")
    if tuple(t.vertices) != tuple(range(count)):
        raise ValueError("tree vertices must be labelled 0..T-1; use RootedTree.relabel()")


def greedy_tree_signs(t: RootedTree, V: np.ndarray) -> np.ndarray:
    """Signs chosen in BFS order to minimize ||parent prefix +- v||_inf; ties to +1."""
    T, d = V.shape
    signs = np.ones(T, dtype=int)
    running = np.zeros((T, d))
    for v in t.order:
        p = t.parent[v]
        base = running[p] if p is not None else np.zeros(d)
        plus = np.max(np.abs(base + V[v]), initial=0.0)
        minus = np.max(np.abs(base - V[v]), initial=0.0)
        s = -1 if minus < plus - TOL else 1
        signs[v] = s
        running[v] = base + s * V[v]
    return signs


def tree_prefix_solve(
    t: RootedTree, vs: VectorSequence, budget: OracleBudget = OracleBudget()
) -> DiscrepancyReport:
    """Color a tree so every root-to-node sum is small in the inf-norm.

    Trees within the oracle budget are solved exactly; larger ones, or ones
    whose search runs out of nodes, fall back to the greedy.
    """
    _check_labels(t, vs.count)
    g = Dag.from_tree(t)
    if vs.count <= budget.max_ground_size:
        try:
            return exact_dag_disc(g, vs, budget)
        except BudgetExceeded:
            pass
    x = Coloring(greedy_tree_signs(t, vs.vectors))
    value, path = dag_disc_witness(g, vs, x)
    return DiscrepancyReport(value, path, x, exact=False)


def tree_scalar_solve(t: RootedTree, scalars: Sequence[float]) -> DiscrepancyReport:
    """Greedy for d = 1: each sign opposes the parent's running sum (+1 at zero).

    If |s| <= 1 and |v| <= 1 then the opposing choice keeps |s +- v| <= 1, so
    every root path stays within [-1, 1].
    """
    a = np.asarray(scalars, dtype=float).reshape(-1)
    if np.any(np.abs(a) > 1 + TOL):
        raise ValueError("scalars must lie in [-1, 1]")
    _check_labels(t, a.size)
    signs = np.ones(a.size, dtype=int)
    running = np.zeros(a.size)
    for v in t.order:
        p = t.parent[v]
        base = running[p] if p is not None else 0.0
        s = -1 if base * a[v] > 0 else 1
        signs[v] = s
        running[v] = base + s * a[v]
    x = Coloring(signs)
    vs = VectorSequence(a.reshape(-1, 1))
    value, path = dag_disc_witness(Dag.from_tree(t), vs, x)
    return DiscrepancyReport(value, path, x, exact=False)

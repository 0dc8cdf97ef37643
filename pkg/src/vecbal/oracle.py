"""Exact discrepancy solvers used as ground truth.

Every objective here is a matrix discrepancy min_x max_r |(A x)_r| over
x in {-1, +1}^T, where the rows of A are (constraint, coordinate) pairs.
A depth-first branch and bound assigns signs in index order, trying -1
before +1, so the first optimum it meets is the lexicographically smallest.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (
    TOL,
    Coloring,
    DiscrepancyReport,
    SetSystem,
    VectorSequence,
    comb_disc_witness,
    dag_disc_witness,
    prefix_disc_witness,
)
from .graphs import Dag

__all__ = [
    "BudgetExceeded",
    "OracleBudget",
    "SetSystem",
    "exact_prefix_disc",
    "exact_dag_disc",
    "exact_comb_disc",
    "exact_matrix_disc",
    "set_disc",
    "herdisc",
    "herdisc_report",
    "dag_prefix_family",
]


class BudgetExceeded(RuntimeError):
    """The instance is too large for exact search under the given budget."""


@dataclass(frozen=True)
class OracleBudget:
    max_ground_size: int = 20
    max_nodes: int = 20_000_000
    max_paths: int = 200_000

    def __post_init__(self) -> None:
        if min(self.max_ground_size, self.max_nodes, self.max_paths) <= 0:
            raise ValueError("budget fields must be positive")


def _compress_rows(A: np.ndarray) -> np.ndarray:
    """Drop zero rows and rows equal up to sign; |Ax| is unchanged."""
    if A.shape[0] == 0:
        return A
    keep = []
    seen: set[bytes] = set()
    for row in A:
        nz = np.flatnonzero(row)
        if nz.size == 0:
            continue
        canon = row if row[nz[0]] > 0 else -row
        key = np.round(canon, 12).tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(canon)
    if not keep:
        return np.zeros((0, A.shape[1]))
    return np.array(keep)


def _greedy(A: np.ndarray) -> np.ndarray:
    """Sign each column to minimize the running max |partial row sum|; ties go to +1."""
    p = np.zeros(A.shape[0])
    x = np.ones(A.shape[1])
    for t in range(A.shape[1]):
        col = A[:, t]
        plus = np.max(np.abs(p + col)) if col.size else 0.0
        minus = np.max(np.abs(p - col)) if col.size else 0.0
        x[t] = -1.0 if minus < plus - TOL else 1.0
        p += x[t] * col
    return x


def exact_matrix_disc(A: np.ndarray, max_nodes: int = 20_000_000) -> tuple[float, np.ndarray, int]:
    """Exact min_x ||A x||_inf. Returns (value, lexicographically smallest optimal x, nodes)."""
    A = np.asarray(A, dtype=float)
    T = A.shape[1]
    if T == 0:
        return 0.0, np.zeros(0), 0
    R = _compress_rows(A)
    if R.shape[0] == 0:
        return 0.0, -np.ones(T), 0
    cols = [np.ascontiguousarray(R[:, t]) for t in range(T)]
    absR = np.abs(R)
    rem = np.zeros((T + 1, R.shape[0]))
    for t in range(T - 1, -1, -1):
        rem[t] = rem[t + 1] + absR[:, t]

    xg = _greedy(R)
    inc_val = float(np.max(np.abs(R @ xg)))
    inc_x = xg.copy()
    found = False
    nodes = 0
    x = np.zeros(T)

    def visit(k: int, p: np.ndarray) -> None:
        nonlocal inc_val, inc_x, found, nodes
        nodes += 1
        if nodes > max_nodes:
            raise BudgetExceeded(f"branch and bound exceeded {max_nodes} nodes")
        if k == T:
            val = float(np.max(np.abs(p)))
            if (not found and val <= inc_val + TOL) or val < inc_val - TOL:
                inc_val, inc_x, found = val, x.copy(), True
            return
        signs = (-1.0,) if k == 0 else (-1.0, 1.0)
        for s in signs:
            q = p + s * cols[k]
            lb = float(np.max(np.abs(q) - rem[k + 1]))
            if lb > inc_val + TOL or (found and lb >= inc_val - TOL):
                continue
            x[k] = s
            visit(k + 1, q)

    visit(0, np.zeros(R.shape[0]))
    return inc_val, inc_x, nodes


def _check_size(T: int, budget: OracleBudget) -> None:
    if T > budget.max_ground_size:
        raise BudgetExceeded(f"ground size {T} exceeds budget {budget.max_ground_size}")


def _stack(sets: list[tuple[int, ...]], V: np.ndarray) -> np.ndarray:
    T, d = V.shape
    A = np.zeros((len(sets) * d, T))
    for i, s in enumerate(sets):
        for t in s:
            A[i * d : (i + 1) * d, t] = V[t]
    return A


def exact_prefix_disc(vs: VectorSequence, budget: OracleBudget = OracleBudget()) -> DiscrepancyReport:
    T, d = vs.count, vs.dim
    _check_size(T, budget)
    L = np.tril(np.ones((T, T)))
    A = (L[:, None, :] * vs.vectors.T[None, :, :]).reshape(T * d, T)
    val, x, nodes = exact_matrix_disc(A, budget.max_nodes)
    col = Coloring(x.astype(int))
    value, tau = prefix_disc_witness(vs, col)
    return DiscrepancyReport(value, tau, col, exact=True, extra={"nodes": nodes})


def dag_prefix_family(g: Dag, limit: int) -> SetSystem:
    """Vertex sets of all root-starting paths; raises BudgetExceeded past ``limit``."""
    paths: list[tuple[int, ...]] = []
    stack: list[tuple[int, ...]] = [(g.root,)]
    while stack:
        path = stack.pop()
        paths.append(path)
        if len(paths) > limit:
            raise BudgetExceeded(f"more than {limit} root paths")
        for v in reversed(g.succ[path[-1]]):
            stack.append(path + (v,))
    paths.sort(key=lambda p: (len(p), p))
    return SetSystem(g.num_vertices, tuple(paths))


def exact_dag_disc(g: Dag, vs: VectorSequence, budget: OracleBudget = OracleBudget()) -> DiscrepancyReport:
    if g.num_vertices != vs.count:
        raise ValueError("DAG size and vector count differ")
    _check_size(vs.count, budget)
    fam = dag_prefix_family(g, budget.max_paths)
    val, x, nodes = exact_matrix_disc(_stack(list(fam.sets), vs.vectors), budget.max_nodes)
    col = Coloring(x.astype(int))
    value, path = dag_disc_witness(g, vs, col)
    return DiscrepancyReport(value, path, col, exact=True, extra={"nodes": nodes})


def exact_comb_disc(ss: SetSystem, vs: VectorSequence, budget: OracleBudget = OracleBudget()) -> DiscrepancyReport:
    if ss.ground_size != vs.count:
        raise ValueError("set system ground size and vector count differ")
    _check_size(vs.count, budget)
    val, x, nodes = exact_matrix_disc(_stack(list(ss.sets), vs.vectors), budget.max_nodes)
    col = Coloring(x.astype(int))
    value, idx = comb_disc_witness(ss, vs, col)
    return DiscrepancyReport(value, idx, col, exact=True, extra={"nodes": nodes})


def _incidence(sets: list[tuple[int, ...]], T: int) -> np.ndarray:
    A = np.zeros((len(sets), T))
    for i, s in enumerate(sets):
        A[i, list(s)] = 1.0
    return A


def set_disc(ss: SetSystem, budget: OracleBudget = OracleBudget()) -> int:
    """Combinatorial discrepancy of the family with unit weights."""
    _check_size(ss.ground_size, budget)
    val, _, _ = exact_matrix_disc(_incidence(list(ss.sets), ss.ground_size), budget.max_nodes)
    return int(round(val))


def herdisc_report(ss: SetSystem, budget: OracleBudget = OracleBudget()) -> tuple[int, tuple[int, ...]]:
    """Hereditary discrepancy and a restriction J attaining it.

    Subsets are scanned by decreasing size. A restriction whose largest trace
    is at most the incumbent cannot improve it, and once the size itself drops
    to the incumbent the scan stops.
    """
    T = ss.ground_size
    _check_size(T, budget)
    A = _incidence(list(ss.sets), T)
    if A.shape[0] == 0:
        return 0, ()
    best, best_J = 0, ()
    for k in range(T, 0, -1):
        if k <= best:
            break
        for J in itertools.combinations(range(T), k):
            sub = A[:, J]
            if np.max(sub.sum(axis=1)) <= best:
                continue
            val, _, _ = exact_matrix_disc(sub, budget.max_nodes)
            v = int(round(val))
            if v > best:
                best, best_J = v, J
    return best, best_J


def herdisc(ss: SetSystem, budget: OracleBudget = OracleBudget()) -> int:
    return herdisc_report(ss, budget)[0]


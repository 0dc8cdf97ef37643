"""Domain types and discrepancy evaluation for a fixed coloring.

All indices are 0-based. Comparisons use an absolute tolerance of ``TOL``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Literal, Optional, Sequence

import numpy as np

from .graphs import Dag

TOL = 1e-9

NormClass = Literal["unit_ball", "two_ball"]
_NORM_CAP = {"unit_ball": 1.0, "two_ball": 2.0}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class VectorSequence:
    """T vectors in R^d stored as a read-only (T, d) array."""

    vectors: np.ndarray
    norm_class: NormClass = "unit_ball"

    def __post_init__(self) -> None:
        a = np.asarray(self.vectors, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"expected a nonempty (T, d) array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("vectors must have finite entries")
        if self.norm_class not in _NORM_CAP:
            raise ValueError(f"unknown norm_class {self.norm_class!r}")
        cap = _NORM_CAP[self.norm_class]
        worst = float(np.max(np.linalg.norm(a, axis=1)))
        if worst > cap + TOL:
            raise ValueError(f"vector norm {worst:.6g} exceeds {self.norm_class} bound {cap}")
        object.__setattr__(self, "vectors", _frozen(a))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return self.count

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorSequence):
            return NotImplemented
        return self.norm_class == other.norm_class and np.array_equal(self.vectors, other.vectors)

    __hash__ = None  # type: ignore[assignment]

    def subset(self, idx: Sequence[int]) -> "VectorSequence":
        return VectorSequence(self.vectors[list(idx)], self.norm_class)

    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.vectors, axis=1)))


@dataclass(frozen=True, eq=False)
class Coloring:
    """A signing x in {-1, +1}^T."""

    signs: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.signs)
        if a.ndim != 1:
            raise ValueError("signs must be one-dimensional")
        if not np.all((a == 1) | (a == -1)):
            raise ValueError("every sign must be exactly +1 or -1")
        object.__setattr__(self, "signs", _frozen(a.astype(np.int8)))

    def __len__(self) -> int:
        return self.signs.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Coloring):
            return NotImplemented
        return np.array_equal(self.signs, other.signs)

    __hash__ = None  # type: ignore[assignment]

    def __neg__(self) -> "Coloring":
        return Coloring(-self.signs)

    def as_float(self) -> np.ndarray:
        return self.signs.astype(float)


@dataclass(frozen=True, eq=False)
class FractionalColoring:
    """A fractional signing in [-1, 1]^n; values within 1e-9 of the box are clamped."""

    values: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.values, dtype=float)
        if a.ndim != 1 or not np.all(np.isfinite(a)):
            raise ValueError("values must be a finite 1-d array")
        if np.any(np.abs(a) > 1.0 + TOL):
            raise ValueError("fractional values must lie in [-1, 1]")
        object.__setattr__(self, "values", _frozen(np.clip(a, -1.0, 1.0)))

    def __len__(self) -> int:
        return self.values.shape[0]


Witness = Hashable


@dataclass(frozen=True)
class DiscrepancyReport:
    """Value of a coloring plus the constraint attaining it.

    ``witness_index`` is a prefix index, a root path (tuple of vertices) or a
    set index depending on the objective. ``extra`` carries solver details.
    """

    value: float
    witness_index: Optional[Witness]
    coloring: Coloring
    exact: bool = False
    extra: dict[str, Any] = field(default_factory=dict, compare=False)


def _check_len(vs: VectorSequence, x: Coloring) -> None:
    if len(x) != vs.count:
        raise ValueError(f"coloring length {len(x)} != number of vectors {vs.count}")


def prefix_sums(vs: VectorSequence, x: Coloring) -> np.ndarray:
    """Row tau holds sum_{t <= tau} x_t v_t."""
    _check_len(vs, x)
    return np.cumsum(x.as_float()[:, None] * vs.vectors, axis=0)


def prefix_disc_witness(vs: VectorSequence, x: Coloring) -> tuple[float, int]:
    norms = np.max(np.abs(prefix_sums(vs, x)), axis=1)
    tau = int(np.argmax(norms))
    return float(norms[tau]), tau


def prefix_disc_value(vs: VectorSequence, x: Coloring) -> float:
    return prefix_disc_witness(vs, x)[0]


def dag_disc_witness(g: Dag, vs: VectorSequence, x: Coloring) -> tuple[float, tuple[int, ...]]:
    """Max over root-starting paths of the signed-sum infinity norm.

    Forward dynamic program over the topological order: for each vertex and
    coordinate keep the largest and smallest running sum over root paths
    ending there. Linear in edges times d.
    """
    _check_len(vs, x)
    if g.num_vertices != vs.count:
        raise ValueError("DAG size and vector count differ")
    val = x.as_float()[:, None] * vs.vectors
    n, d = val.shape
    hi = np.full((n, d), -np.inf)
    lo = np.full((n, d), np.inf)
    hi_arg = np.full((n, d), -1, dtype=int)
    lo_arg = np.full((n, d), -1, dtype=int)
    r = g.root
    hi[r] = lo[r] = val[r]
    for u in g.order:
        if u not in g.reachable or u == r:
            continue
        preds = [p for p in g.pred[u] if p in g.reachable]
        ph = hi[preds]
        pl = lo[preds]
        ih = np.argmax(ph, axis=0)
        il = np.argmin(pl, axis=0)
        cols = np.arange(d)
        hi[u] = ph[ih, cols] + val[u]
        lo[u] = pl[il, cols] + val[u]
        hi_arg[u] = np.asarray(preds)[ih]
        lo_arg[u] = np.asarray(preds)[il]
    reach = sorted(g.reachable)
    best, best_v, best_j, use_hi = -1.0, r, 0, True
    for v in reach:
        for j in range(d):
            if hi[v, j] > best:
                best, best_v, best_j, use_hi = float(hi[v, j]), v, j, True
            if -lo[v, j] > best:
                best, best_v, best_j, use_hi = float(-lo[v, j]), v, j, False
    arg = hi_arg if use_hi else lo_arg
    path = [best_v]
    while path[-1] != r:
        path.append(int(arg[path[-1], best_j]))
    return max(best, 0.0), tuple(path[::-1])


def dag_disc_value(g: Dag, vs: VectorSequence, x: Coloring) -> float:
    return dag_disc_witness(g, vs, x)[0]


def comb_disc_witness(ss: "SetSystem", vs: VectorSequence, x: Coloring) -> tuple[float, Optional[int]]:
    _check_len(vs, x)
    if ss.ground_size != vs.count:
        raise ValueError("set system ground size and vector count differ")
    if not ss.sets:
        return 0.0, None
    val = x.as_float()[:, None] * vs.vectors
    best, arg = -1.0, 0
    for i, s in enumerate(ss.sets):
        v = float(np.max(np.abs(val[list(s)].sum(axis=0)))) if s else 0.0
        if v > best:
            best, arg = v, i
    return best, arg


def comb_disc_value(ss: "SetSystem", vs: VectorSequence, x: Coloring) -> float:
    return comb_disc_witness(ss, vs, x)[0]


@dataclass(frozen=True)
class SetSystem:
    """A family of subsets of {0, ..., ground_size-1}; duplicates are dropped."""

    ground_size: int
    sets: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.ground_size < 1:
            raise ValueError("ground_size must be positive")
        seen: set[tuple[int, ...]] = set()
        out: list[tuple[int, ...]] = []
        for s in self.sets:
            key = tuple(sorted({int(i) for i in s}))
            for i in key:
                if not 0 <= i < self.ground_size:
                    raise ValueError(f"set element {i} outside [0, {self.ground_size})")
            if key not in seen:
                seen.add(key)
                out.append(key)
        object.__setattr__(self, "sets", tuple(out))

    @classmethod
    def of(cls, ground_size: int, sets: Iterable[Iterable[int]]) -> "SetSystem":
        return cls(ground_size, tuple(tuple(s) for s in sets))

    def __len__(self) -> int:
        return len(self.sets)

    def restrict(self, keep: Iterable[int]) -> list[tuple[int, ...]]:
        """Traces of the sets on ``keep`` (not deduplicated, not reindexed)."""
        k = set(keep)
        return [tuple(i for i in s if i in k) for s in self.sets]


def path_prefix_family(n: int) -> SetSystem:
    return SetSystem(n, tuple(tuple(range(k + 1)) for k in range(n)))

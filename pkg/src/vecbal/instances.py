"""Instance generators: adversarial and random trees, smoothed sequences,
chains, planted hard blocks, and the canonical-coloring utilities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Mapping, Optional

import numpy as np
from scipy.stats import chi2

from .core import TOL, Coloring, VectorSequence
from .graphs import Dag, RootedTree
from .rng import make_rng, unit_vectors

__all__ = [
    "NoiseModel",
    "CanonicalColoring",
    "PlantedInstance",
    "gen_adversarial_binary_tree",
    "gen_stochastic_lary_tree",
    "find_embedded_binary_tree",
    "canonical_coloring",
    "follow_coloring_to_leaf",
    "gen_smoothed",
    "gen_chain",
    "gen_planted_hard_block",
    "noise_anticoncentration_check",
    "gen_random_dag",
    "gen_random_tree",
    "gen_uniform_sequence",
]

NoiseKind = Literal["uniform_sphere_scaled", "coordinate_flip", "gaussian_truncated"]
MAX_ADVERSARIAL_HEIGHT = 20


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise v_hat with ||v_hat||_2 <= 1.

    uniform_sphere_scaled: eps * (uniform unit vector).
    coordinate_flip: with probability eps, +-eps on one uniform coordinate.
    gaussian_truncated: N(0, eps^2/d I) conditioned on the unit ball.

    Each model's covariance is a multiple of the identity; ``covariance_floor``
    gives that multiple.
    """

    kind: NoiseKind
    epsilon: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("uniform_sphere_scaled", "coordinate_flip", "gaussian_truncated"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")

    def covariance_floor(self, d: int) -> float:
        e = self.epsilon
        if self.kind == "uniform_sphere_scaled":
            return e * e / d
        if self.kind == "coordinate_flip":
            return e**3 / d
        a = d / (e * e)  # chi-square cutoff for the unit ball
        return (e * e / d) * float(chi2.cdf(a, d + 2) / chi2.cdf(a, d))

    def sample(self, count: int, dim: int, *keys: int) -> np.ndarray:
        rng = make_rng(self.seed, *keys)
        e = self.epsilon
        if self.kind == "uniform_sphere_scaled":
            return e * unit_vectors(rng, count, dim)
        if self.kind == "coordinate_flip":
            out = np.zeros((count, dim))
            hit = rng.random(count) < e
            coord = rng.integers(0, dim, size=count)
            sign = rng.choice(np.array([-1.0, 1.0]), size=count)
            rows = np.flatnonzero(hit)
            out[rows, coord[rows]] = e * sign[rows]
            return out
        sd = e / np.sqrt(dim)
        out = rng.standard_normal((count, dim)) * sd
        bad = np.linalg.norm(out, axis=1) > 1
        while np.any(bad):
            out[bad] = rng.standard_normal((int(bad.sum()), dim)) * sd
            bad = np.linalg.norm(out, axis=1) > 1
        return out


@dataclass(frozen=True)
class CanonicalColoring:
    """Signs on the strict ancestors of ``target``: -1 where the path turns left, +1 right."""

    target: int
    assignment: Mapping[int, int] = field(default_factory=dict)

    def agrees_with(self, t: RootedTree, x: Coloring) -> bool:
        idx = {v: i for i, v in enumerate(t.vertices)}
        return all(int(x.signs[idx[j]]) == s for j, s in self.assignment.items())


@dataclass(frozen=True)
class PlantedInstance:
    sequence: VectorSequence
    planted_block: int
    block_size: int
    method: Literal["rejection", "substitution"]
    max_deviation: float

    def block(self, k: int) -> VectorSequence:
        n = self.block_size
        return VectorSequence(self.sequence.vectors[k * n : (k + 1) * n], self.sequence.norm_class)


def _rot(d: np.ndarray) -> np.ndarray:
    """The unit vector obtained by rotating d by +90 degrees."""
    return np.array([-d[1], d[0]]) / np.linalg.norm(d)


def _heap_tree(T: int, arity: int) -> RootedTree:
    parent = {0: None}
    for v in range(1, T):
        parent[v] = (v - 1) // arity
    return RootedTree(parent)


def gen_adversarial_binary_tree(h: int) -> tuple[RootedTree, VectorSequence]:
    """Complete binary tree in heap order (children of i are 2i+1, 2i+2) with
    planar vectors, each orthogonal to its canonical discrepancy vector."""
    if h < 1:
        raise ValueError("height must be at least 1")
    if h > MAX_ADVERSARIAL_HEIGHT:
        raise ValueError(f"height {h} exceeds the size guard {MAX_ADVERSARIAL_HEIGHT}")
    T = 2**h - 1
    V = np.zeros((T, 2))
    D = np.zeros((T, 2))  # canonical sum over strict ancestors
    V[0] = (1.0, 0.0)
    for t in range(T):
        for child, s in ((2 * t + 1, -1.0), (2 * t + 2, 1.0)):
            if child < T:
                D[child] = D[t] + s * V[t]
                V[child] = _rot(D[child])
    return _heap_tree(T, 2), VectorSequence(V)


def gen_stochastic_lary_tree(l: int, h: int, seed: int = 0) -> tuple[RootedTree, VectorSequence]:
    """Complete l-ary tree with h levels and i.i.d. uniform unit vectors in the plane."""
    if l < 1 or h < 1:
        raise ValueError("arity and height must be positive")
    T = h if l == 1 else (l**h - 1) // (l - 1)
    V = unit_vectors(make_rng(seed, l, h), T, 2)
    return _heap_tree(T, l), VectorSequence(V)


def find_embedded_binary_tree(
    t: RootedTree, vs: VectorSequence, threshold: float = 0.25
) -> Optional[RootedTree]:
    """A binary subtree, spanning every level of t, whose left (right) child
    vectors are nearly orthogonal to the negative (positive) canonical
    discrepancy vector of their parent.

    Left children come from the first half of each child list, right
    children from the second half. Candidates are tried in id order with
    backtracking, so the result is absent only when no such subtree exists.
    """
    idx = {v: i for i, v in enumerate(t.vertices)}
    V = vs.vectors

    def embed(u: int, D: np.ndarray) -> Optional[dict[int, int]]:
        kids = t.children[u]
        if not kids:
            return {}
        half = len(kids) // 2
        out: dict[int, int] = {}
        for group, s in ((kids[:half], -1.0), (kids[half:], 1.0)):
            d = D + s * V[idx[u]]
            for c in group:
                if abs(float(V[idx[c]] @ d)) <= threshold:
                    sub = embed(c, d)
                    if sub is not None:
                        out[c] = u
                        out.update(sub)
                        break
            else:
                return None
        return out

    found = embed(t.root, np.zeros(vs.dim))
    if found is None:
        return None
    parent: dict[int, Optional[int]] = {t.root: None}
    parent.update(found)
    return RootedTree(parent)


def canonical_coloring(t: RootedTree, target: int) -> CanonicalColoring:
    path = t.path_to(target)
    out = {}
    for j, nxt in zip(path[:-1], path[1:]):
        kids = t.children[j]
        if len(kids) > 2:
            raise ValueError("canonical colorings are defined on binary trees")
        out[j] = -1 if nxt == kids[0] else 1
    return CanonicalColoring(target, out)


def follow_coloring_to_leaf(t: RootedTree, x: Coloring) -> int:
    """Walk from the root, going left on -1 and right on +1."""
    if len(x) != len(t.vertices):
        raise ValueError("coloring length differs from tree size")
    idx = {v: i for i, v in enumerate(t.vertices)}
    v = t.root
    while t.children[v]:
        kids = t.children[v]
        v = kids[0] if x.signs[idx[v]] < 0 else kids[-1]
    return v


def gen_smoothed(base: VectorSequence, noise: NoiseModel, *keys: int) -> VectorSequence:
    if base.norm_class != "unit_ball":
        raise ValueError("base vectors must lie in the unit ball")
    hat = noise.sample(base.count, base.dim, *keys)
    return VectorSequence(base.vectors + hat, "two_ball")


def gen_uniform_sequence(T: int, d: int, seed: int = 0, *keys: int) -> VectorSequence:
    return VectorSequence(unit_vectors(make_rng(seed, *keys), T, d))


def gen_chain(l: int) -> Dag:
    """Anchors at even ids 0, 2, ..., 2l; vertex 2i+1 subdivides a second
    path from anchor 2i to anchor 2i+2 alongside the direct edge."""
    if l < 0:
        raise ValueError("chain length must be nonnegative")
    edges = []
    for i in range(l):
        a, b, c = 2 * i, 2 * i + 1, 2 * i + 2
        edges += [(a, b), (a, c), (b, c)]
    return Dag(2 * l + 1, tuple(edges), 0)


def gen_planted_hard_block(
    hard: VectorSequence,
    num_blocks: int,
    seed: int = 0,
    max_attempts: int = 200_000,
) -> PlantedInstance:
    """Uniform-sphere blocks of size n = hard.count, one of which is a near copy of ``hard``.

    The near copy is drawn by rejection (uniform sphere samples within 1/n
    of each hard vector, entrywise) when every vector succeeds within
    ``max_attempts`` draws; otherwise each hard vector is moved directly by
    a random offset of length 1/(2n) and pulled back into the unit ball.
    """
    if num_blocks < 1:
        raise ValueError("need at least one block")
    n, d = hard.count, hard.dim
    rng = make_rng(seed, n, d, num_blocks)
    V = unit_vectors(rng, n * num_blocks, d)
    k = int(rng.integers(num_blocks))
    H = hard.vectors
    planted = np.zeros((n, d))
    method: Literal["rejection", "substitution"] = "rejection"
    for i in range(n):
        found = False
        for _ in range(max(1, max_attempts // 4096)):
            cand = unit_vectors(rng, 4096, d)
            ok = np.flatnonzero(np.max(np.abs(cand - H[i]), axis=1) <= 1.0 / n)
            if ok.size:
                planted[i] = cand[ok[0]]
                found = True
                break
        if not found:
            method = "substitution"
            break
    if method == "substitution":
        offs = unit_vectors(rng, n, d) / (2 * n)
        W = H + offs
        planted = W / np.maximum(1.0, np.linalg.norm(W, axis=1, keepdims=True))
    V[k * n : (k + 1) * n] = planted
    dev = float(np.max(np.abs(planted - H)))
    return PlantedInstance(VectorSequence(V), k, n, method, dev)


def noise_anticoncentration_check(noise: NoiseModel, u: np.ndarray, trials: int) -> float:
    """Monte-Carlo estimate of P[|u . X| >= eps ||u||_2 / 2]."""
    u = np.asarray(u, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(u))
    if norm <= TOL:
        raise ValueError("u must be nonzero")
    if trials < 1:
        raise ValueError("trials must be positive")
    X = noise.sample(trials, u.size, 0xA7C)
    return float(np.mean(np.abs(X @ u) >= 0.5 * noise.epsilon * norm))


def gen_random_dag(T: int, p: float, seed: int = 0) -> Dag:
    """Each vertex v > 0 gets one uniform earlier parent (so the root reaches
    everything) plus each other earlier vertex independently with probability p."""
    if T < 1:
        raise ValueError("T must be positive")
    rng = make_rng(seed, T, int(p * 1_000_000))
    edges = set()
    for v in range(1, T):
        edges.add((int(rng.integers(0, v)), v))
        extra = np.flatnonzero(rng.random(v) < p)
        edges.update((int(u), v) for u in extra)
    return Dag(T, tuple(sorted(edges)), 0)


def gen_random_tree(T: int, seed: int = 0) -> RootedTree:
    """Random recursive tree: vertex v > 0 picks a uniform parent among 0..v-1."""
    if T < 1:
        raise ValueError("T must be positive")
    rng = make_rng(seed, T)
    parent: dict[int, Optional[int]] = {0: None}
    for v in range(1, T):
        parent[v] = int(rng.integers(0, v))
    return RootedTree(parent)

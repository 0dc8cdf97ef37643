"""Block-by-block prefix coloring for smoothed inputs.

The sequence is cut into blocks of n vectors. Block 1 is colored directly.
Every later block first solves a feasibility LP for a fractional signing
that cancels the carried discrepancy w while keeping each family interval
small, and then rounds it one bit level at a time with an inner prefix
solver. Everything the theory promises is recorded in the trace so it can
be audited after the run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np

from .core import TOL, Coloring, FractionalColoring, VectorSequence
from .lp import FeasibilityResult, LinearProgram, lp_feasible
from .oracle import BudgetExceeded, exact_matrix_disc
from .rng import make_rng, unit_vectors

log = logging.getLogger(__name__)

Interval = tuple[int, int]  # half-open [start, stop)

# end-of-block overshoot tolerated before delta is reset; covers the 2^-bits truncation term
RESET_SLACK = 1e-6


@dataclass(frozen=True)
class IntervalFamily:
    """Intervals of {0..n-1}; intervals of length >= long_threshold are long."""

    n: int
    intervals: tuple[Interval, ...]
    long_threshold: int

    def __post_init__(self) -> None:
        seen: set[Interval] = set()
        out: list[Interval] = []
        for a, b in self.intervals:
            a, b = int(a), int(b)
            if not 0 <= a < b <= self.n:
                raise ValueError(f"interval [{a}, {b}) is empty or outside [0, {self.n})")
            if (a, b) not in seen:
                seen.add((a, b))
                out.append((a, b))
        object.__setattr__(self, "intervals", tuple(out))

    def __len__(self) -> int:
        return len(self.intervals)

    def __contains__(self, iv: object) -> bool:
        return iv in set(self.intervals)

    def is_long(self, iv: Interval) -> bool:
        return iv[1] - iv[0] >= self.long_threshold

    def prefix_cover(self, k: int) -> Optional[tuple[Interval, ...]]:
        """At most two disjoint members whose union is the prefix [0, k)."""
        members = set(self.intervals)
        if (0, k) in members:
            return ((0, k),)
        for j in range(1, k):
            if (0, j) in members and (j, k) in members:
                return ((0, j), (j, k))
        return None

    def mask(self, iv: Interval) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[iv[0] : iv[1]] = True
        return m


def block_decomposition(n: int, b: int) -> IntervalFamily:
    """Prefixes ending at block boundaries plus prefixes within each block.

    When b does not divide n the last block is shorter; the cover property
    is unaffected.
    """
    if b < 1 or n < 1:
        raise ValueError("n and b must be positive")
    if b > n:
        raise ValueError(f"block length {b} exceeds n={n}")
    nblocks = -(-n // b)
    long = [(0, min(i * b, n)) for i in range(1, nblocks + 1)]
    within = [
        (i * b, min(i * b + r, n))
        for i in range(nblocks)
        for r in range(1, b + 1)
        if i * b + r <= n
    ]
    return IntervalFamily(n, tuple(long + within), b)


@dataclass(frozen=True, eq=False)
class BlockState:
    """One round: block matrix M (d x n), carried discrepancy w, bound delta."""

    M: np.ndarray
    w: np.ndarray
    delta: float
    block_index: int = 1

    def __post_init__(self) -> None:
        M = np.asarray(self.M, dtype=float)
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if M.ndim != 2 or M.shape[0] != w.shape[0]:
            raise ValueError("M must be d x n with d = len(w)")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if np.max(np.abs(w), initial=0.0) > self.delta + TOL:
            raise ValueError("carried discrepancy exceeds delta on entry")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "w", w)

    @property
    def d(self) -> int:
        return self.M.shape[0]

    @property
    def n(self) -> int:
        return self.M.shape[1]


def build_block_lp(s: BlockState, fam: IntervalFamily) -> LinearProgram:
    """Mx = -w; -2 delta <= (M_I x)_i <= 2 delta for I in fam; x in [-1, 1]^n.

    Inequality rows are ordered interval-major, coordinate-minor.
    """
    if fam.n != s.n:
        raise ValueError(f"family is over [{fam.n}] but the block has {s.n} columns")
    rows = [s.M * fam.mask(iv)[None, :] for iv in fam.intervals]
    A_in = np.vstack(rows) if rows else np.zeros((0, s.n))
    bound = 2.0 * s.delta
    k = A_in.shape[0]
    return LinearProgram(
        s.n, s.M, -s.w, A_in, np.full(k, -bound), np.full(k, bound),
        -np.ones(s.n), np.ones(s.n),
    )


def solve_block_lp(s: BlockState, fam: IntervalFamily) -> FeasibilityResult:
    return lp_feasible(build_block_lp(s, fam))


def fractional_signing(s: BlockState, fam: IntervalFamily) -> Optional[FractionalColoring]:
    """A fractional signing cancelling w with small family intervals, or None."""
    res = solve_block_lp(s, fam)
    if res.status == "feasible":
        return FractionalColoring(res.point)
    if res.status == "infeasible":
        log.info("block %d LP infeasible; certificate rhs %.3g", s.block_index,
                 res.certificate.combined_rhs(build_block_lp(s, fam)))
    else:
        log.warning("block %d LP undecided: %s", s.block_index, res.message)
    return None


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """(y, {alpha_I}) with ||y||_1 = d and sum_I ||alpha_I||_1 <= d/2."""

    y: np.ndarray
    alphas: dict[Interval, np.ndarray]

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float).reshape(-1)
        d = y.shape[0]
        alphas = {tuple(k): np.asarray(v, dtype=float).reshape(-1) for k, v in self.alphas.items()}
        if any(a.shape[0] != d for a in alphas.values()):
            raise ValueError("every alpha_I must have the dimension of y")
        if abs(np.abs(y).sum() - d) > 1e-9:
            raise ValueError(f"||y||_1 = {np.abs(y).sum():.12g}, expected {d}")
        total = sum(float(np.abs(a).sum()) for a in alphas.values())
        if total > d / 2 + 1e-9:
            raise ValueError(f"sum of ||alpha_I||_1 = {total:.6g} exceeds d/2")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "alphas", alphas)


def _check_alpha_keys(fam: IntervalFamily, c: DualCertificate) -> None:
    members = set(fam.intervals)
    for iv in c.alphas:
        if iv not in members:
            raise ValueError(f"certificate interval {iv} is not in the family")


def check_dual_certificate(s: BlockState, fam: IntervalFamily, c: DualCertificate) -> tuple[float, bool]:
    """lhs = sum_j |z_j . v_j| with z_j = y - sum_{I containing j} alpha_I; holds iff lhs >= delta*d."""
    _check_alpha_keys(fam, c)
    if c.y.shape[0] != s.d:
        raise ValueError("certificate dimension differs from the block")
    lhs = 0.0
    for j in range(s.n):
        z = c.y.copy()
        for (a, b), alpha in c.alphas.items():
            if a <= j < b:
                z -= alpha
        lhs += abs(float(z @ s.M[:, j]))
    return lhs, lhs >= s.delta * s.d


def dual_lhs_matrix_form(s: BlockState, fam: IntervalFamily, c: DualCertificate) -> float:
    """The same quantity evaluated literally as ||y^T M - sum_I alpha_I^T M_I||_1."""
    _check_alpha_keys(fam, c)
    row = c.y @ s.M
    for iv, alpha in c.alphas.items():
        row = row - alpha @ (s.M * fam.mask(iv)[None, :])
    return float(np.abs(row).sum())


def certificate_from_farkas(s: BlockState, fam: IntervalFamily, res: FeasibilityResult) -> DualCertificate:
    """Rescale an infeasibility certificate of the block LP into the set K.

    The Farkas multipliers give -y.w + 2 delta sum ||a_I||_1 + ||y^T M + sum a_I^T M_I||_1 < 0.
    With alpha_I = -a_I and ||y||_1 scaled to d, ||w||_inf <= delta forces
    sum ||alpha_I||_1 < d/2 and a left-hand side below delta*d.
    """
    if res.status != "infeasible" or res.certificate is None:
        raise ValueError("need an infeasibility certificate")
    cert = res.certificate
    y = np.asarray(cert.eq, dtype=float)
    norm = float(np.abs(y).sum())
    if norm == 0:
        raise ValueError("certificate has no equality component")
    scale = s.d / norm
    mu = (cert.in_up - cert.in_lo).reshape(len(fam.intervals), s.d)
    alphas = {iv: -scale * mu[i] for i, iv in enumerate(fam.intervals) if np.any(mu[i] != 0)}
    y = y * scale
    y *= s.d / np.abs(y).sum()
    return DualCertificate(y, alphas)


# ---------------------------------------------------------------- inner solvers


class PrefixSolver(Protocol):
    def __call__(self, M: np.ndarray) -> tuple[np.ndarray, float]:
        """Sign the columns of a d x k matrix; returns (signs, achieved prefix discrepancy)."""
        ...


def prefix_value(M: np.ndarray, signs: np.ndarray, start: Optional[np.ndarray] = None) -> float:
    """max over prefixes of ||start + sum_{t<=tau} signs_t M[:, t]||_inf."""
    if M.shape[1] == 0:
        return 0.0 if start is None else float(np.max(np.abs(start), initial=0.0))
    s = np.cumsum(M * signs[None, :], axis=1)
    if start is not None:
        s = s + start[:, None]
    return float(np.max(np.abs(s)))


def greedy_prefix_signs(M: np.ndarray, start: Optional[np.ndarray] = None) -> np.ndarray:
    """Pick each sign to minimize the running ||prefix||_inf; ties go to +1."""
    p = np.zeros(M.shape[0]) if start is None else np.array(start, dtype=float)
    x = np.ones(M.shape[1])
    for t in range(M.shape[1]):
        c = M[:, t]
        if np.max(np.abs(p - c)) < np.max(np.abs(p + c)) - TOL:
            x[t] = -1.0
        p += x[t] * c
    return x


def _prefix_rows(M: np.ndarray) -> np.ndarray:
    d, k = M.shape
    L = np.tril(np.ones((k, k)))
    return (L[:, None, :] * M[None, :, :]).reshape(k * d, k)


@dataclass
class DefaultPrefixSolver:
    """Exact branch and bound up to ``exact_limit`` columns, greedy beyond."""

    exact_limit: int = 22
    max_nodes: int = 2_000_000
    calls: list[tuple[int, float, bool]] = field(default_factory=list, repr=False)

    def __call__(self, M: np.ndarray) -> tuple[np.ndarray, float]:
        M = np.asarray(M, dtype=float)
        k = M.shape[1]
        exact = False
        if k == 0:
            return np.zeros(0), 0.0
        signs = None
        if k <= self.exact_limit:
            try:
                _, signs, _ = exact_matrix_disc(_prefix_rows(M), self.max_nodes)
                exact = True
            except BudgetExceeded:
                signs = None
        if signs is None:
            signs = greedy_prefix_signs(M)
        val = prefix_value(M, signs)
        self.calls.append((k, val, exact))
        return signs, val


def calibrate_delta(
    d: int,
    n: int,
    inner: PrefixSolver,
    samples: int = 16,
    seed: int = 0,
    scale: float = 1.0,
) -> float:
    """Twice the worst prefix discrepancy the inner solver reaches on random unit columns."""
    worst = 0.0
    for i in range(samples):
        M = scale * unit_vectors(make_rng(seed, 0xCA11B, i), n, d).T
        _, val = inner(M)
        worst = max(worst, val)
    return 2.0 * worst


# ---------------------------------------------------------------- rounding


@dataclass(frozen=True)
class RoundingResult:
    coloring: Coloring
    bound: float
    level_values: tuple[float, ...]  # achieved inner discrepancy per processed level
    level_sizes: tuple[int, ...]


def round_block(
    s: BlockState,
    x: FractionalColoring,
    inner: Optional[PrefixSolver] = None,
    bits: int = 32,
) -> RoundingResult:
    """Bit-by-bit rounding of a fractional signing to +-1.

    With y = (x+1)/2 truncated to ``bits`` binary digits, level k collects the
    columns whose k-th digit is 1, signs them with the inner solver and adds
    2^-k times that signing to y, which clears the digit. Then x* = 2y - 1
    and every prefix obeys ||M_I (x* - x)||_inf <= bound with
    bound = 2 (sum_k 2^-k delta_k + sum_j |y_j - trunc(y_j)| ||v_j||_inf).
    """
    if inner is None:
        inner = DefaultPrefixSolver()
    if not 1 <= bits <= 60:
        raise ValueError("bits must be in [1, 60]")
    if len(x) != s.n:
        raise ValueError("fractional coloring length differs from block width")
    y = (x.values + 1.0) / 2.0
    scale = 1 << bits
    Y = np.floor(y * scale).astype(np.int64)
    trunc_err = y - Y / scale
    col_inf = np.max(np.abs(s.M), axis=0) if s.n else np.zeros(0)
    bound = 2.0 * float(trunc_err @ col_inf)
    levels, sizes = [], []
    for k in range(bits, 0, -1):
        shift = bits - k
        idx = np.flatnonzero((Y >> shift) & 1)
        if idx.size == 0:
            continue
        chi, val = inner(s.M[:, idx])
        chi = np.asarray(chi)
        if chi.shape != (idx.size,) or not np.all(np.abs(chi) == 1):
            raise ValueError("inner solver must return one +-1 sign per column")
        Y[idx] += chi.astype(np.int64) << shift
        bound += 2.0 * val / float(1 << k)
        levels.append(val)
        sizes.append(int(idx.size))
    assert np.all((Y == 0) | (Y == scale))
    signs = np.where(Y == scale, 1, -1)
    return RoundingResult(Coloring(signs), bound, tuple(levels), tuple(sizes))


def max_prefix_deviation(M: np.ndarray, x_star: np.ndarray, x: np.ndarray) -> float:
    """max over prefixes I of ||M_I (x* - x)||_inf."""
    return prefix_value(M, np.asarray(x_star, dtype=float) - np.asarray(x, dtype=float))


# ---------------------------------------------------------------- pipeline


@dataclass
class BlockRecord:
    block_index: int
    feasible: bool
    degraded: bool
    reason: str
    delta: float
    end_norm: float
    block_max_prefix: float
    max_prefix_so_far: float
    inner_max: float
    rounding_bound: float = 0.0


@dataclass
class SmoothedTrace:
    n: int
    b: int
    bits: int
    delta_initial: float
    delta_final: float
    blocks: list[BlockRecord] = field(default_factory=list)
    trailing_count: int = 0
    trailing_value: float = 0.0
    full_prefix_value: float = 0.0
    total_prefix_value: float = 0.0

    @property
    def degraded(self) -> bool:
        return any(r.degraded for r in self.blocks)

    @property
    def reported_bound(self) -> float:
        """6 delta on the full blocks, plus the trailing block's own discrepancy."""
        return 6.0 * self.delta_final + self.trailing_value


def theory_block_length(n: int) -> int:
    """The asymptotic choice b = n^0.1, at least 1."""
    return max(1, int(round(n**0.1)))


def _color_directly(M: np.ndarray, w: np.ndarray, inner: PrefixSolver) -> tuple[np.ndarray, float]:
    """Inner-solver signing, globally flipped if that lowers ||w + Mx||_inf."""
    signs, val = inner(M)
    signs = np.asarray(signs, dtype=float)
    if np.max(np.abs(w - M @ signs)) < np.max(np.abs(w + M @ signs)) - TOL:
        signs = -signs
    return signs, val


def smoothed_prefix_solve(
    vs: VectorSequence,
    n: int,
    b: Optional[int] = None,
    delta: Optional[float] = None,
    inner: Optional[PrefixSolver] = None,
    bits: int = 32,
    calibration_samples: int = 16,
    seed: int = 0,
) -> tuple[Coloring, SmoothedTrace]:
    """Color ``vs`` block by block; returns the coloring and an auditable trace."""
    T, d = vs.count, vs.dim
    if not 1 <= n <= T:
        raise ValueError(f"block size n={n} must be in [1, T={T}]")
    if b is None:
        b = math.ceil(math.sqrt(n))
    if inner is None:
        inner = DefaultPrefixSolver()
    if delta is None:
        delta = calibrate_delta(d, n, inner, calibration_samples, seed, vs.max_norm())
    if delta <= 0:
        raise ValueError("delta must be positive")
    fam = block_decomposition(n, b)
    V = vs.vectors.T  # d x T
    nfull = T // n
    x = np.zeros(T)
    trace = SmoothedTrace(n, b, bits, float(delta), float(delta))
    w = np.zeros(d)
    running_max = 0.0

    for r in range(nfull):
        M = V[:, r * n : (r + 1) * n]
        feasible, reasons, bound, inner_max = True, [], 0.0, 0.0
        if r == 0:
            signs, inner_max = inner(M)
            signs = np.asarray(signs, dtype=float)
        else:
            state = BlockState(M, w, delta, r + 1)
            frac = fractional_signing(state, fam)
            if frac is None:
                feasible = False
                reasons.append("lp_infeasible")
                signs, inner_max = _color_directly(M, w, inner)
            else:
                rr = round_block(state, frac, inner, bits)
                signs = rr.coloring.as_float()
                bound = rr.bound
                inner_max = max(rr.level_values, default=0.0)
        if inner_max > delta / 2 + TOL:
            reasons.append("inner_above_half_delta")
        block_max = prefix_value(M, signs, w)
        w = w + M @ signs
        x[r * n : (r + 1) * n] = signs
        end = float(np.max(np.abs(w)))
        running_max = max(running_max, block_max)
        if end > delta + RESET_SLACK:
            reasons.append("delta_reset")
            delta = end
        trace.blocks.append(
            BlockRecord(r + 1, feasible, bool(reasons), ",".join(reasons), delta, end,
                        block_max, running_max, inner_max, bound)
        )

    trace.full_prefix_value = running_max
    rest = T - nfull * n
    if rest:
        M = V[:, nfull * n :]
        signs, val = _color_directly(M, w, inner)
        x[nfull * n :] = signs
        trace.trailing_count = rest
        trace.trailing_value = val
        running_max = max(running_max, prefix_value(M, signs, w))
    trace.total_prefix_value = running_max
    trace.delta_final = float(delta)
    return Coloring(x.astype(int)), trace

"""Factorization-norm estimates and the set-system bound checks built on them.

For probability vectors p (rows) and q (columns), write
W = D_p^{1/2} A D_q^{1/2} = U S V^T. Then A = B C with
B = D_p^{-1/2} U S^{1/2} and C = S^{1/2} V^T D_q^{-1/2} is an exact
factorization, so r(B) c(C) bounds gamma_2(A) from above, while the trace
norm ||W||_* bounds it from below. At the optimal weights the two meet.
The weights are improved by the fixed-point map p_i <- (U S U^T)_ii / ||W||_*,
q_j <- (V S V^T)_jj / ||W||_*, which equalizes the row and column norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SetSystem, VectorSequence
from .oracle import OracleBudget, exact_comb_disc, herdisc

__all__ = [
    "Gamma2Estimate",
    "incidence_matrix",
    "stacked_matrix",
    "gamma2_upper",
    "gamma2_lower",
    "transfer_factorization",
    "comb_bound_check",
    "herdisc_sandwich_check",
    "CombBoundRecord",
    "SandwichRecord",
]

RESIDUAL_TOL = 1e-7
SLACK = 2.0


def _r(B: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(B, axis=1), initial=0.0))


def _c(C: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(C, axis=0), initial=0.0))


@dataclass(frozen=True)
class Gamma2Estimate:
    upper: float
    lower: float
    B: np.ndarray
    C: np.ndarray
    residual: float
    history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.residual > RESIDUAL_TOL:
            raise ValueError(f"factorization residual {self.residual:.3g} too large")
        if self.lower > self.upper * (1 + 1e-9) + 1e-12:
            raise ValueError("lower bound exceeds upper bound")


def incidence_matrix(ss: SetSystem) -> np.ndarray:
    A = np.zeros((len(ss.sets), ss.ground_size))
    for i, s in enumerate(ss.sets):
        A[i, list(s)] = 1.0
    return A


def stacked_matrix(ss: SetSystem, vs: VectorSequence) -> np.ndarray:
    """Rows grouped by coordinate: block j is A_S diag(v_1(j), ..., v_T(j))."""
    if ss.ground_size != vs.count:
        raise ValueError("set system ground size and vector count differ")
    A = incidence_matrix(ss)
    return np.vstack([A * vs.vectors[:, j][None, :] for j in range(vs.dim)])


def gamma2_lower(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=float)
    return float(np.max(np.abs(A), initial=0.0))


def _weighted_factor(A: np.ndarray, p: np.ndarray, q: np.ndarray):
    sp, sq = np.sqrt(p), np.sqrt(q)
    W = sp[:, None] * A * sq[None, :]
    U, S, Vt = np.linalg.svd(W, full_matrices=False)
    rs = np.sqrt(S)
    B = (U * rs[None, :]) / sp[:, None]
    C = (Vt * rs[:, None]) / sq[None, :]
    return B, C, float(S.sum()), U, S, Vt


def _balance(B: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r, c = _r(B), _c(C)
    if r > 0 and c > 0:
        s = math.sqrt(c / r)
        return B * s, C / s
    return B, C


def gamma2_upper(A: np.ndarray, restarts: int = 8, iters: int = 200, seed: int = 0) -> Gamma2Estimate:
    """Best weighted-SVD factorization over ``restarts`` weight initializations.

    The first start uses uniform weights and later ones Dirichlet draws.
    ``history`` holds the best upper bound after each restart.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    rows = np.flatnonzero(np.any(A != 0, axis=1))
    cols = np.flatnonzero(np.any(A != 0, axis=0))
    if rows.size == 0:
        k = max(1, min(m, n))
        return Gamma2Estimate(0.0, 0.0, np.zeros((m, k)), np.zeros((k, n)), 0.0, (0.0,))
    Ar = A[np.ix_(rows, cols)]
    mr, nr = Ar.shape
    rng = np.random.default_rng(seed)
    best = (math.inf, None, None)
    lower = gamma2_lower(A)
    history = []
    for trial in range(max(1, restarts)):
        if trial == 0:
            p, q = np.full(mr, 1.0 / mr), np.full(nr, 1.0 / nr)
        else:
            p, q = rng.dirichlet(np.ones(mr)), rng.dirichlet(np.ones(nr))
        prev = math.inf
        for _ in range(iters):
            B, C, nuc, U, S, Vt = _weighted_factor(Ar, p, q)
            lower = max(lower, nuc)
            up = _r(B) * _c(C)
            ok = float(np.max(np.abs(Ar - B @ C))) <= 1e-10 * max(1.0, up)
            if ok and up < best[0]:
                best = (up, B, C)
            if prev - up < 1e-9 and up <= prev:
                break
            prev = min(prev, up)
            # floors keep every weight positive so the factor stays defined
            p = np.maximum(np.einsum("ik,k,ik->i", U, S, U) / nuc, 1e-9)
            q = np.maximum(np.einsum("ki,k,ki->i", Vt, S, Vt) / nuc, 1e-9)
            p, q = p / p.sum(), q / q.sum()
        history.append(best[0])
    up, Br, Cr = best
    Br, Cr = _balance(Br, Cr)
    k = Br.shape[1]
    B = np.zeros((m, k))
    C = np.zeros((k, n))
    B[rows] = Br
    C[:, cols] = Cr
    residual = float(np.max(np.abs(A - B @ C)))
    upper = _r(B) * _c(C)
    return Gamma2Estimate(upper, min(lower, upper), B, C, residual, tuple(history))


def transfer_factorization(ss: SetSystem, vs: VectorSequence, est: Gamma2Estimate) -> Gamma2Estimate:
    """Factor A_S^D as blockdiag(B, ..., B) times the stack of C D_j.

    Column t of the right factor has norm ||v_t||_2 ||C_t||_2, so with all
    ||v_t||_2 <= 1 the product r * c cannot grow.
    """
    d = vs.dim
    B, C = est.B, est.C
    BD = np.kron(np.eye(d), B)
    CD = np.vstack([C * vs.vectors[:, j][None, :] for j in range(d)])
    AD = stacked_matrix(ss, vs)
    residual = float(np.max(np.abs(AD - BD @ CD), initial=0.0))
    upper = _r(BD) * _c(CD)
    return Gamma2Estimate(upper, min(gamma2_lower(AD), upper), BD, CD, residual)


@dataclass(frozen=True)
class CombBoundRecord:
    """``bound`` carries no constant; ``holds`` allows the declared slack factor."""

    exact: float
    gamma2_upper: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.exact <= SLACK * self.bound + 1e-9

    @property
    def strict_holds(self) -> bool:
        """Constant 1; fails on some inputs, e.g. three unit vectors in R^3 in a single set."""
        return self.exact <= self.bound + 1e-9


def comb_bound_check(
    ss: SetSystem, vs: VectorSequence, budget: OracleBudget = OracleBudget(), restarts: int = 8
) -> CombBoundRecord:
    """Exact vector-balancing value against gamma_2(A_S) * sqrt(ln d + ln |S|)."""
    exact = exact_comb_disc(ss, vs, budget).value
    up = gamma2_upper(incidence_matrix(ss), restarts=restarts).upper
    logs = math.log(vs.dim) + math.log(max(1, len(ss.sets)))
    bound = max(up * math.sqrt(logs), up)
    return CombBoundRecord(exact, up, bound)


@dataclass(frozen=True)
class SandwichRecord:
    herdisc: int
    gamma2_lower: float
    gamma2_upper: float
    rank: int
    m: int

    @property
    def upper_side(self) -> bool:
        """herdisc <= slack * sqrt(log2 m) * gamma_2."""
        return self.herdisc <= SLACK * math.sqrt(max(math.log2(max(self.m, 1)), 1.0)) * self.gamma2_upper + 1e-9

    @property
    def lower_side(self) -> bool:
        """gamma_2 / log2 r <= slack * herdisc."""
        return self.gamma2_lower / max(math.log2(max(self.rank, 1)), 1.0) <= SLACK * self.herdisc + 1e-9

    @property
    def holds(self) -> bool:
        return self.upper_side and self.lower_side


def herdisc_sandwich_check(
    ss: SetSystem, budget: OracleBudget = OracleBudget(), restarts: int = 8
) -> SandwichRecord:
    A = incidence_matrix(ss)
    est = gamma2_upper(A, restarts=restarts)
    rank = int(np.linalg.matrix_rank(A)) if A.size else 0
    return SandwichRecord(herdisc(ss, budget), est.lower, est.upper, rank, A.shape[0])

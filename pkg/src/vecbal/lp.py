"""Dense LP feasibility by a bounded-variable two-phase simplex.

The objective is always zero, so phase 2 is vacuous: phase 1 either drives
the artificial mass to zero (feasible) or stops at a positive optimum, whose
duals give a Farkas certificate of infeasibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """Feasibility problem: A_eq x = b_eq, lo_in <= A_in x <= up_in, lb <= x <= ub."""

    num_vars: int
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_in: np.ndarray
    lo_in: np.ndarray
    up_in: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self) -> None:
        n = self.num_vars
        A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        A_in = np.asarray(self.A_in, dtype=float).reshape(-1, n)
        b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        lo_in = np.asarray(self.lo_in, dtype=float).reshape(-1)
        up_in = np.asarray(self.up_in, dtype=float).reshape(-1)
        lb = np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        ub = np.broadcast_to(np.asarray(self.ub, dtype=float), (n,)).copy()
        if b_eq.shape[0] != A_eq.shape[0] or lo_in.shape[0] != A_in.shape[0] or up_in.shape[0] != A_in.shape[0]:
            raise ValueError("row counts and right-hand sides disagree")
        if np.any(lo_in > up_in) or np.any(lb > ub):
            raise ValueError("every range needs lower <= upper")
        for name, a in (("A_eq", A_eq), ("b_eq", b_eq), ("A_in", A_in)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be finite")
        for name, val in (("A_eq", A_eq), ("b_eq", b_eq), ("A_in", A_in), ("lo_in", lo_in),
                          ("up_in", up_in), ("lb", lb), ("ub", ub)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def build(
        cls,
        num_vars: int,
        equalities: Sequence[tuple[Sequence[float], float]] = (),
        inequalities: Sequence[tuple[Sequence[float], float, float]] = (),
        box: Optional[Sequence[tuple[float, float]]] = None,
    ) -> "LinearProgram":
        """Row-list constructor; ``box`` defaults to free variables."""
        n = num_vars
        A_eq = np.array([r for r, _ in equalities], dtype=float).reshape(-1, n)
        b_eq = np.array([b for _, b in equalities], dtype=float)
        A_in = np.array([r for r, _, _ in inequalities], dtype=float).reshape(-1, n)
        lo = np.array([lo for _, lo, _ in inequalities], dtype=float)
        up = np.array([up for _, _, up in inequalities], dtype=float)
        if box is None:
            lb, ub = np.full(n, -np.inf), np.full(n, np.inf)
        else:
            if len(box) != n:
                raise ValueError("box needs one (lower, upper) per variable")
            lb = np.array([b[0] for b in box], dtype=float)
            ub = np.array([b[1] for b in box], dtype=float)
        return cls(n, A_eq, b_eq, A_in, lo, up, lb, ub)

    def max_violation(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        viol = [0.0]
        if self.A_eq.shape[0]:
            viol.append(float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        if self.A_in.shape[0]:
            ax = self.A_in @ x
            viol.append(float(np.max(np.maximum(self.lo_in - ax, ax - self.up_in))))
        viol.append(float(np.max(np.maximum(self.lb - x, x - self.ub))))
        return max(viol)


@dataclass(frozen=True, eq=False)
class FarkasCertificate:
    """Multipliers proving infeasibility.

    Combined row: eq . A_eq + (in_up - in_lo) . A_in + (box_up - box_lo) = 0.
    Combined rhs: eq . b_eq + in_up . up - in_lo . lo + box_up . ub - box_lo . lb < 0.
    All multipliers except ``eq`` are nonnegative.
    """

    eq: np.ndarray
    in_lo: np.ndarray
    in_up: np.ndarray
    box_lo: np.ndarray
    box_up: np.ndarray

    def combined_row(self, p: LinearProgram) -> np.ndarray:
        return self.eq @ p.A_eq + (self.in_up - self.in_lo) @ p.A_in + (self.box_up - self.box_lo)

    def combined_rhs(self, p: LinearProgram) -> float:
        def dot(m: np.ndarray, b: np.ndarray) -> float:
            nz = m > 0
            return float(m[nz] @ b[nz])

        return (
            float(self.eq @ p.b_eq)
            + dot(self.in_up, p.up_in)
            - dot(self.in_lo, p.lo_in)
            + dot(self.box_up, p.ub)
            - dot(self.box_lo, p.lb)
        )

    def verify(self, p: LinearProgram, tol: float = FEAS_TOL) -> bool:
        mults = (self.in_lo, self.in_up, self.box_lo, self.box_up)
        if any(np.any(m < 0) for m in mults):
            return False
        row = self.combined_row(p)
        scale = max(1.0, max(float(np.max(np.abs(m), initial=0.0)) for m in (self.eq,) + mults))
        return bool(np.max(np.abs(row), initial=0.0) <= tol * scale and self.combined_rhs(p) < 0)


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    status: Literal["feasible", "infeasible", "budget_exceeded"]
    point: Optional[np.ndarray] = None
    certificate: Optional[FarkasCertificate] = None
    iterations: int = 0
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


@dataclass
class _Tableau:
    T: np.ndarray  # B^{-1} A, m x N
    basis: list[int]
    x: np.ndarray  # all N variable values
    lo: np.ndarray
    up: np.ndarray
    cost: np.ndarray
    dj: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.dj = self.cost - self.cost[self.basis] @ self.T

    def pivot(self, r: int, j: int) -> None:
        piv = self.T[r, j]
        self.T[r] /= piv
        col = self.T[:, j].copy()
        col[r] = 0.0
        self.T -= np.outer(col, self.T[r])
        self.dj -= self.dj[j] * self.T[r]
        self.basis[r] = j


def _simplex_phase1(tab: _Tableau, max_iter: int) -> tuple[str, int]:
    """Bland's rule on the bounded-variable tableau. Returns (status, iterations)."""
    m, N = tab.T.shape
    it = 0
    while True:
        if it >= max_iter:
            return "iteration_limit", it
        basic = np.zeros(N, dtype=bool)
        basic[tab.basis] = True
        enter, direction = -1, 0.0
        for j in range(N):
            if basic[j]:
                continue
            dj = tab.dj[j]
            if dj < -PIVOT_TOL and tab.x[j] < tab.up[j] - PIVOT_TOL:
                enter, direction = j, 1.0
                break
            if dj > PIVOT_TOL and tab.x[j] > tab.lo[j] + PIVOT_TOL:
                enter, direction = j, -1.0
                break
        if enter < 0:
            return "optimal", it
        it += 1
        alpha = direction * tab.T[:, enter]
        best, leave, leave_to = np.inf, -1, 0.0
        for i in range(m):
            b = tab.basis[i]
            a = alpha[i]
            if a > PIVOT_TOL:
                ratio, bound = (tab.x[b] - tab.lo[b]) / a, tab.lo[b]
            elif a < -PIVOT_TOL:
                ratio, bound = (tab.up[b] - tab.x[b]) / (-a), tab.up[b]
            else:
                continue
            if not np.isfinite(ratio):
                continue
            ratio = max(ratio, 0.0)
            if ratio < best - PIVOT_TOL or (abs(ratio - best) <= PIVOT_TOL and b < tab.basis[leave]):
                best, leave, leave_to = ratio, i, bound
        flip = tab.up[enter] - tab.lo[enter]
        if flip <= best:
            if not np.isfinite(flip):
                return "unbounded", it
            step, leave = flip, -1
        else:
            step = best
        tab.x[enter] += direction * step
        tab.x[tab.basis] -= step * alpha
        if leave >= 0:
            b = tab.basis[leave]
            tab.x[b] = leave_to
            if tab.cost[b] > 0:
                # an artificial that left the basis never comes back
                tab.up[b] = 0.0
            tab.pivot(leave, enter)


def lp_feasible(p: LinearProgram, max_iter: Optional[int] = None) -> FeasibilityResult:
    """Decide feasibility of ``p``; returns a point or a verified Farkas certificate."""
    n = p.num_vars
    me, mi = p.A_eq.shape[0], p.A_in.shape[0]
    m = me + mi

    # equality rows scaled to unit max-abs coefficient; rows below the pivot
    # tolerance are numerically zero and left alone
    scale = np.ones(me)
    for i in range(me):
        mx = float(np.max(np.abs(p.A_eq[i]), initial=0.0))
        if mx > PIVOT_TOL:
            scale[i] = mx
    A_eq = p.A_eq / scale[:, None]
    b_eq = p.b_eq / scale

    if m == 0:
        x = np.where(np.isfinite(p.lb), p.lb, np.where(np.isfinite(p.ub), p.ub, 0.0))
        return FeasibilityResult("feasible", x, iterations=0)

    # columns: x (n), range slacks (mi), artificials (m)
    N = n + mi + m
    A = np.zeros((m, N))
    A[:me, :n] = A_eq
    A[me:, :n] = p.A_in
    A[me:, n : n + mi] = -np.eye(mi)
    b = np.concatenate([b_eq, np.zeros(mi)])
    lo = np.concatenate([p.lb, p.lo_in, np.zeros(m)])
    up = np.concatenate([p.ub, p.up_in, np.full(m, np.inf)])

    x = np.zeros(N)
    for j in range(n + mi):
        if np.isfinite(lo[j]) and np.isfinite(up[j]):
            x[j] = lo[j] if abs(lo[j]) <= abs(up[j]) else up[j]
        elif np.isfinite(lo[j]):
            x[j] = lo[j]
        elif np.isfinite(up[j]):
            x[j] = up[j]
    resid = b - A[:, : n + mi] @ x[: n + mi]
    sigma = np.where(resid >= 0, 1.0, -1.0)
    art = np.arange(n + mi, N)
    A[np.arange(m), art] = sigma
    x[art] = np.abs(resid)

    cost = np.zeros(N)
    cost[art] = 1.0
    tab = _Tableau(sigma[:, None] * A, list(art), x, lo, up.copy(), cost)
    limit = max_iter if max_iter is not None else 50 * (m + N) + 1000
    status, it = _simplex_phase1(tab, limit)
    if status != "optimal":
        return FeasibilityResult("budget_exceeded", iterations=it, message=f"phase 1 stopped: {status}")

    # recompute basic values from the original columns for accuracy
    basis = tab.basis
    nonbasic = np.setdiff1d(np.arange(N), basis)
    Bmat = A[:, basis]
    try:
        xb = np.linalg.solve(Bmat, b - A[:, nonbasic] @ tab.x[nonbasic])
        tab.x[basis] = xb
    except np.linalg.LinAlgError:
        return FeasibilityResult("budget_exceeded", iterations=it, message="singular basis")

    infeas = float(np.sum(np.abs(tab.x[art])))
    if infeas <= FEAS_TOL:
        point = tab.x[:n].copy()
        point = np.clip(point, p.lb, p.ub)
        if p.max_violation(point) <= FEAS_TOL:
            return FeasibilityResult("feasible", point, iterations=it)
        return FeasibilityResult(
            "budget_exceeded", iterations=it, message="feasible basis failed the residual check"
        )

    # phase-1 duals: y^T = c_B^T B^{-1}; B^{-1} = T[:, art] diag(sigma)
    try:
        y = np.linalg.solve(Bmat.T, cost[basis])
    except np.linalg.LinAlgError:
        return FeasibilityResult("budget_exceeded", iterations=it, message="singular basis")
    cert = _certificate(p, y[:me] / scale, y[me:])
    if cert.verify(p):
        return FeasibilityResult("infeasible", certificate=cert, iterations=it)
    return FeasibilityResult("budget_exceeded", iterations=it, message="certificate failed verification")


def _certificate(p: LinearProgram, y_eq: np.ndarray, y_in: np.ndarray) -> FarkasCertificate:
    """Turn phase-1 duals into nonnegative Farkas multipliers.

    The phase-1 optimum says y.b > sum of the best bound terms, so negating y
    gives a combination whose right-hand side is negative. Box multipliers are
    chosen to cancel the combined row exactly.
    """
    lam = -y_eq
    mu = -y_in
    in_up = np.maximum(mu, 0.0)
    in_lo = np.maximum(-mu, 0.0)
    g = lam @ p.A_eq + (in_up - in_lo) @ p.A_in
    box_up = np.maximum(-g, 0.0)
    box_lo = np.maximum(g, 0.0)
    return FarkasCertificate(lam, in_lo, in_up, box_lo, box_up)

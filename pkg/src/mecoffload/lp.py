"""Dense linear programming with a bounded-variable two-phase primal simplex.

Node relaxations in the tree search are small (a few dozen variables), so a
dense tableau-free simplex with an explicitly maintained basis inverse is
both simple and fast enough.  Branching constraints arrive as variable-bound
tightenings, which the bounded-variable method absorbs without growing the
constraint matrix.

The solver is deterministic: pricing and ratio-test ties always break toward
the smallest variable index, and a Bland's-rule fallback engages when no
objective progress is made for a full pass, so degenerate instances
terminate.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "LpStatus",
    "LinearProgram",
    "LpResult",
    "solve_lp",
    "format_lp",
    "FEASIBILITY_TOL",
    "OPTIMALITY_TOL",
]

#: Absolute tolerance on constraint residuals.
FEASIBILITY_TOL = 1e-9
#: Tolerance on reduced costs when declaring optimality.
OPTIMALITY_TOL = 1e-9
#: Entries of a pivot column smaller than this are treated as zero.
_PIVOT_TOL = 1e-10
#: Refresh the maintained basis inverse this often to cap drift.
_REFACTOR_EVERY = 64


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """min c.v  s.t.  a_eq.v = b_eq,  a_ub.v <= b_ub,  lower <= v <= upper.

    ``upper`` entries may be ``+inf`` and ``lower`` entries ``-inf``.
    Dimension mismatches and inverted bounds are construction-time errors.
    """

    c: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        if self.a_eq is None:
            self.a_eq = np.zeros((0, n))
            self.b_eq = np.zeros(0)
        if self.a_ub is None:
            self.a_ub = np.zeros((0, n))
            self.b_ub = np.zeros(0)
        self.a_eq = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
        self.a_ub = np.atleast_2d(np.asarray(self.a_ub, dtype=float))
        self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        self.b_ub = np.asarray(self.b_ub, dtype=float).ravel()
        self.lower = (
            np.zeros(n) if self.lower is None
            else np.asarray(self.lower, dtype=float).ravel()
        )
        self.upper = (
            np.full(n, np.inf) if self.upper is None
            else np.asarray(self.upper, dtype=float).ravel()
        )
        if self.a_eq.shape[1] != n and self.a_eq.shape[0] > 0:
            raise ValueError("a_eq column count does not match c")
        if self.a_ub.shape[1] != n and self.a_ub.shape[0] > 0:
            raise ValueError("a_ub column count does not match c")
        if self.a_eq.size == 0:
            self.a_eq = self.a_eq.reshape(0, n)
        if self.a_ub.size == 0:
            self.a_ub = self.a_ub.reshape(0, n)
        if self.b_eq.size != self.a_eq.shape[0]:
            raise ValueError("b_eq length does not match a_eq rows")
        if self.b_ub.size != self.a_ub.shape[0]:
            raise ValueError("b_ub length does not match a_ub rows")
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bound vectors must match c in length")
        if not (np.all(np.isfinite(self.c))
                and np.all(np.isfinite(self.a_eq))
                and np.all(np.isfinite(self.a_ub))
                and np.all(np.isfinite(self.b_eq))
                and np.all(np.isfinite(self.b_ub))):
            raise ValueError("objective and constraint data must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def num_vars(self) -> int:
        return self.c.size


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray | None = None
    value: float | None = None


def solve_lp(lp: LinearProgram) -> LpResult:
    """Solve ``lp`` to a vertex optimum; Infeasible/Unbounded are statuses."""
    n = lp.num_vars
    m_eq, m_ub = lp.a_eq.shape[0], lp.a_ub.shape[0]
    m = m_eq + m_ub

    if m == 0:
        return _solve_bounds_only(lp)

    # Rows: equalities first, then inequalities with one slack column each.
    a = np.zeros((m, n + m_ub))
    a[:m_eq, :n] = lp.a_eq
    a[m_eq:, :n] = lp.a_ub
    a[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([lp.b_eq, lp.b_ub])
    lower = np.concatenate([lp.lower, np.zeros(m_ub)])
    upper = np.concatenate([lp.upper, np.full(m_ub, np.inf)])

    slack_of_row = np.full(m, -1)
    slack_of_row[m_eq:] = n + np.arange(m_ub)
    sim = _BoundedSimplex(a, b, lower, upper, slack_of_row)
    if not sim.phase1():
        return LpResult(LpStatus.INFEASIBLE)
    c_full = np.zeros(sim.num_cols)
    c_full[:n] = lp.c
    status = sim.phase2(c_full)
    if status is LpStatus.UNBOUNDED:
        return LpResult(LpStatus.UNBOUNDED)
    x = sim.solution()[:n]
    return LpResult(LpStatus.OPTIMAL, x, float(lp.c @ x))


def _solve_bounds_only(lp: LinearProgram) -> LpResult:
    """No rows: each variable independently sits at its cheaper bound."""
    x = np.where(np.isfinite(lp.lower), lp.lower,
                 np.where(np.isfinite(lp.upper), lp.upper, 0.0))
    for j in range(lp.num_vars):
        if lp.c[j] > 0:
            if not np.isfinite(lp.lower[j]):
                return LpResult(LpStatus.UNBOUNDED)
            x[j] = lp.lower[j]
        elif lp.c[j] < 0:
            if not np.isfinite(lp.upper[j]):
                return LpResult(LpStatus.UNBOUNDED)
            x[j] = lp.upper[j]
    return LpResult(LpStatus.OPTIMAL, x, float(lp.c @ x))


class _BoundedSimplex:
    """Primal simplex over ``a.x = b`` with two-sided variable bounds.

    Nonbasic variables rest exactly on a bound (free ones at zero); the
    values of basic variables are maintained incrementally and refreshed
    from the basis inverse every :data:`_REFACTOR_EVERY` pivots.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray, lower: np.ndarray,
                 upper: np.ndarray, slack_of_row: np.ndarray) -> None:
        self.m = a.shape[0]
        n_real = a.shape[1]

        # Nonbasic starting point: finite lower bound, else finite upper,
        # else zero (free).
        x0 = np.where(np.isfinite(lower), lower,
                      np.where(np.isfinite(upper), upper, 0.0))
        residual = b - a @ x0

        # One artificial per row, signed so it starts nonnegative.
        art_sign = np.where(residual >= 0, 1.0, -1.0)
        self.a = np.hstack([a, np.diag(art_sign)])
        self.b = b
        self.lower = np.concatenate([lower, np.zeros(self.m)])
        self.upper = np.concatenate([upper, np.full(self.m, np.inf)])
        self.num_cols = n_real + self.m
        self.art_start = n_real

        # Crash basis: an inequality row whose slack starts feasible is
        # covered by that slack; only the rest need their artificial.
        self.basis = np.arange(n_real, n_real + self.m)
        diag = art_sign.copy()
        for i in range(self.m):
            col = slack_of_row[i]
            if col >= 0 and residual[i] >= 0.0 and x0[col] == 0.0:
                self.basis[i] = col
                diag[i] = 1.0
        self.in_basis = np.zeros(self.num_cols, dtype=bool)
        self.in_basis[self.basis] = True
        # Nonbasic resting position: True means at the upper bound.
        self.at_upper = np.isfinite(self.upper) & ~np.isfinite(self.lower)
        self.at_upper[self.basis] = False
        self.binv = np.diag(diag)  # inverse of a diagonal of +-1
        self.xb = np.abs(residual)
        self.pivots_since_refactor = 0

    # -- current point ----------------------------------------------------

    def _nonbasic_values(self) -> np.ndarray:
        vals = np.where(np.isfinite(self.lower), self.lower,
                        np.where(np.isfinite(self.upper), self.upper, 0.0))
        vals = np.where(self.at_upper, self.upper, vals)
        return vals

    def _value_of(self, j: int) -> float:
        if self.at_upper[j]:
            return float(self.upper[j])
        if np.isfinite(self.lower[j]):
            return float(self.lower[j])
        if np.isfinite(self.upper[j]):
            return float(self.upper[j])
        return 0.0

    def solution(self) -> np.ndarray:
        x = self._nonbasic_values()
        x[self.basis] = self.xb
        return x

    def _refresh(self) -> None:
        bmat = self.a[:, self.basis]
        self.binv = np.linalg.inv(bmat)
        x = self._nonbasic_values()
        x[self.basis] = 0.0
        self.xb = self.binv @ (self.b - self.a @ x)
        self.pivots_since_refactor = 0

    # -- phases ------------------------------------------------------------

    def phase1(self) -> bool:
        """Minimize the artificial sum; True iff a feasible point exists."""
        c = np.zeros(self.num_cols)
        c[self.art_start:] = 1.0
        status = self._iterate(c)
        if status is not LpStatus.OPTIMAL:
            raise ArithmeticError("phase-1 objective is bounded below by zero")
        infeas = float(self.xb[self._basic_artificial_positions()].sum())
        scale = max(1.0, float(np.abs(self.b).max(initial=0.0)))
        if infeas > FEASIBILITY_TOL * scale:
            return False
        self._fix_artificials()
        return True

    def phase2(self, c: np.ndarray) -> LpStatus:
        return self._iterate(c)

    def _basic_artificial_positions(self) -> np.ndarray:
        return np.where(self.basis >= self.art_start)[0]

    def _fix_artificials(self) -> None:
        """Clamp artificials to zero; pivot basic ones out where possible."""
        self.upper[self.art_start:] = 0.0
        for pos in self._basic_artificial_positions():
            row = self.binv[pos] @ self.a
            candidates = np.where(
                (~self.in_basis)
                & (np.arange(self.num_cols) < self.art_start)
                & (np.abs(row) > 1e-7)
            )[0]
            if candidates.size == 0:
                continue  # redundant row; the artificial stays basic at 0
            entering = int(candidates[0])
            w = self.binv @ self.a[:, entering]
            self._pivot(pos, entering, w, entering_value=self._value_of(entering))

    # -- simplex core -------------------------------------------------------

    def _iterate(self, c: np.ndarray) -> LpStatus:
        fixed = self.lower == self.upper  # pinned variables never enter
        free = ~np.isfinite(self.lower) & ~np.isfinite(self.upper)
        bland = False
        stall = 0
        stall_limit = self.num_cols + self.m
        max_iter = 10_000 + 200 * (self.num_cols + self.m)

        for _ in range(max_iter):
            y = c[self.basis] @ self.binv
            reduced = c - y @ self.a

            nonbasic = ~self.in_basis
            at_hi = nonbasic & self.at_upper
            is_free = nonbasic & free
            at_lo = nonbasic & ~self.at_upper & ~free

            eligible = (~fixed) & (
                (at_lo & (reduced < -OPTIMALITY_TOL))
                | (at_hi & (reduced > OPTIMALITY_TOL))
                | (is_free & (np.abs(reduced) > OPTIMALITY_TOL))
            )
            idx = np.where(eligible)[0]
            if idx.size == 0:
                return LpStatus.OPTIMAL

            if bland:
                entering = int(idx[0])
            else:
                entering = int(idx[np.argmax(np.abs(reduced[idx]))])
            d_enter = reduced[entering]
            direction = 1.0 if (at_lo[entering] or (is_free[entering] and d_enter < 0)) else -1.0

            w = self.binv @ self.a[:, entering]
            step, leave_pos, leave_to_upper = self._ratio_test(entering, direction, w, bland)
            if step is None:
                return LpStatus.UNBOUNDED

            improvement = abs(d_enter) * step
            stall = 0 if improvement > 1e-12 else stall + 1
            if stall > stall_limit:
                bland = True

            if leave_pos is None:
                # Bound flip: the entering variable crosses to its other bound.
                self.xb -= direction * step * w
                self.at_upper[entering] = direction > 0
                self.pivots_since_refactor += 1
                if self.pivots_since_refactor >= _REFACTOR_EVERY:
                    self._refresh()
                continue

            start = self._value_of(entering)
            self.xb -= direction * step * w
            self._pivot(leave_pos, entering, w,
                        entering_value=start + direction * step,
                        leave_to_upper=leave_to_upper)

        raise ArithmeticError("simplex iteration limit exceeded")

    def _ratio_test(self, entering: int, direction: float, w: np.ndarray,
                    bland: bool):
        """Largest step for the entering variable; smallest-index tie-break.

        Returns (step, leaving_position_or_None, leaving_hits_upper).  A
        ``None`` position with finite step means a bound flip; a ``None``
        step means the problem is unbounded in this direction.
        """
        lo_b = self.lower[self.basis]
        hi_b = self.upper[self.basis]
        rate = direction * w

        with np.errstate(divide="ignore", invalid="ignore"):
            dec = rate > _PIVOT_TOL   # basic value moves down toward its lower bound
            inc = rate < -_PIVOT_TOL  # basic value moves up toward its upper bound
            ratios = np.full(self.m, np.inf)
            ratios[dec] = (self.xb[dec] - lo_b[dec]) / rate[dec]
            ratios[inc] = (self.xb[inc] - hi_b[inc]) / rate[inc]
        ratios = np.where(np.isnan(ratios), np.inf, ratios)
        ratios = np.maximum(ratios, 0.0)  # clip tiny negative fp residue

        span = self.upper[entering] - self.lower[entering]
        flip = span if np.isfinite(span) else np.inf

        best = float(ratios.min(initial=np.inf))
        if flip < best - 1e-12:
            return flip, None, False
        if not np.isfinite(best):
            if np.isfinite(flip):
                return flip, None, False
            return None, None, False

        tie = np.where(ratios <= best + 1e-12)[0]
        # Deterministic: leave the candidate with the smallest variable index.
        leave_pos = int(tie[np.argmin(self.basis[tie])])
        leave_to_upper = bool(inc[leave_pos])
        return best, leave_pos, leave_to_upper

    def _pivot(self, pos: int, entering: int, w: np.ndarray,
               entering_value: float, leave_to_upper: bool = False) -> None:
        leaving = int(self.basis[pos])
        self.in_basis[leaving] = False
        self.at_upper[leaving] = leave_to_upper
        self.in_basis[entering] = True
        self.at_upper[entering] = False
        self.basis[pos] = entering

        pivot = w[pos]
        if abs(pivot) < _PIVOT_TOL:
            raise ArithmeticError("numerically singular pivot")
        row = self.binv[pos] / pivot
        scale = w.copy()
        scale[pos] = 0.0
        self.binv -= np.outer(scale, row)
        self.binv[pos] = row

        # The leaving variable's value is now derived from its resting
        # status, which lands it exactly on the bound it hit.
        self.xb[pos] = entering_value
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= _REFACTOR_EVERY:
            self._refresh()


def format_lp(lp: LinearProgram) -> str:
    """Debug dump: ``min`` / ``eq`` / ``ub`` / ``bnd`` sections, one row per line."""

    def nums(values) -> str:
        return " ".join(format(float(v), ".17g") for v in values)

    lines = [f"min {nums(lp.c)}"]
    for row, rhs in zip(lp.a_eq, lp.b_eq):
        lines.append(f"eq {nums(row)} | {format(float(rhs), '.17g')}")
    for row, rhs in zip(lp.a_ub, lp.b_ub):
        lines.append(f"ub {nums(row)} | {format(float(rhs), '.17g')}")
    for lo, hi in zip(lp.lower, lp.upper):
        lines.append(f"bnd {format(float(lo), '.17g')} {format(float(hi), '.17g')}")
    return "\n".join(lines) + "\n"

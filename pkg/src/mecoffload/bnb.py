"""Exact branch-and-bound over the channel indicators, with trace recording.

The search keeps a FIFO node list (breadth-first), solves the node
relaxation on every pop, branches on the first fractional indicator, and
prunes by bound against the incumbent.  Every popped node is appended to
the trace, which later becomes classifier training data, so the records
carry the full relaxation point and the bound that was active at pop time.

An exhaustive enumerator over channel-to-device maps provides the
ground-truth optimum for desk-scale instances.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .lp import LpStatus, solve_lp
from .relax import (
    INTEGRALITY_TOL,
    NodeConstraints,
    RelaxationSolution,
    build_relaxation,
    extract_solution,
    solve_split,
)
from .scenario import Scenario

__all__ = [
    "SolveStatus",
    "NodeAction",
    "SolveOptions",
    "Node",
    "NodeRecord",
    "SolveReport",
    "BudgetExceededError",
    "branch",
    "solve_bnb",
    "solve_exhaustive",
    "write_trace_csv",
]


class SolveStatus(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    BUDGET_EXHAUSTED = "BudgetExhausted"


class NodeAction(Enum):
    BRANCHED = "Branched"
    PRUNED_BY_BOUND = "PrunedByBound"
    PRUNED_INFEASIBLE = "PrunedInfeasible"
    PRUNED_BY_MODEL = "PrunedByModel"
    NEW_INCUMBENT = "NewIncumbent"


class BudgetExceededError(RuntimeError):
    """Raised when the exhaustive enumeration would exceed its budget."""


@dataclass
class SolveOptions:
    max_nodes: int = 500_000
    enum_budget: int = 1_000_000
    integrality_tol: float = INTEGRALITY_TOL

    def __post_init__(self) -> None:
        if self.max_nodes < 1 or self.enum_budget < 1:
            raise ValueError("budgets must be positive")


@dataclass
class Node:
    """One search-tree node; the relaxation is attached when it is popped."""

    node_id: int
    depth: int
    parent_id: int | None
    constraints: NodeConstraints
    relaxation: RelaxationSolution | None = None
    feasible_flag: int = 1


@dataclass
class NodeRecord:
    """Trace row: node attributes plus the processing outcome."""

    node_id: int
    depth: int
    parent_id: int | None
    feasible_flag: int            # 0 iff the node relaxation was infeasible
    action: NodeAction
    psi: float                    # nan when infeasible
    zub_at_pop: float             # incumbent bound when the node was popped
    x: np.ndarray                 # (S*K,) zeros when infeasible
    split_bits: np.ndarray        # (S*K,) zeros when infeasible


@dataclass
class SolveReport:
    status: SolveStatus
    best_x: np.ndarray | None     # (S, K) binary, present iff OPTIMAL
    best_split: np.ndarray | None  # (S, K) bits
    best_psi: float | None
    nodes_searched: int
    trace: list[NodeRecord]
    wall_time: float


def branch(
    parent: Node,
    index: int,
    value: float,
    first_child_id: int,
    tol: float = INTEGRALITY_TOL,
) -> tuple[Node, Node]:
    """Split a node on indicator ``index`` at fractional ``value``.

    The children pin the indicator below floor(value) and above
    floor(value)+1 respectively; for a binary variable that is (0,0) and
    (1,1).  Branching on an integral value or an already-pinned index is a
    contract violation.
    """
    if abs(value - round(value)) <= tol:
        raise ValueError(f"value {value!r} is integral at tolerance {tol}")
    existing = parent.constraints.get(index)
    if existing is not None and existing[0] == existing[1]:
        raise ValueError(f"indicator {index} is already fixed to {existing[0]}")
    floor = int(np.floor(value))
    down = dict(parent.constraints)
    down[index] = (floor, floor)
    up = dict(parent.constraints)
    up[index] = (floor + 1, floor + 1)
    child_down = Node(first_child_id, parent.depth + 1, parent.node_id, down)
    child_up = Node(first_child_id + 1, parent.depth + 1, parent.node_id, up)
    return child_down, child_up


def _incumbent_from(scenario: Scenario, sol: RelaxationSolution):
    s_n, k_n = scenario.num_mds, scenario.num_channels
    x = np.round(sol.x).astype(int).reshape(s_n, k_n)
    split = sol.split_bits.reshape(s_n, k_n).copy()
    return x, split


def solve_bnb(scenario: Scenario, opts: SolveOptions | None = None) -> SolveReport:
    """Exact search for the optimal offloading assignment.

    Returns the global optimum whenever one exists (enough channels for
    the devices); otherwise the infeasible status.  Exceeding the node
    budget is reported explicitly, never as a silent incumbent.
    """
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    n = scenario.num_mds * scenario.num_channels

    queue: list[Node] = [Node(0, 0, None, {})]
    head = 0
    next_id = 1
    z_ub = np.inf
    best: tuple[np.ndarray, np.ndarray] | None = None
    best_psi: float | None = None
    trace: list[NodeRecord] = []
    exhausted = False

    while head < len(queue):
        if len(trace) >= opts.max_nodes:
            exhausted = True
            break
        node = queue[head]
        head += 1
        zub_at_pop = z_ub

        result = solve_lp(build_relaxation(scenario, node.constraints))
        if result.status is not LpStatus.OPTIMAL:
            node.feasible_flag = 0
            trace.append(NodeRecord(
                node.node_id, node.depth, node.parent_id, 0,
                NodeAction.PRUNED_INFEASIBLE, float("nan"), zub_at_pop,
                np.zeros(n), np.zeros(n),
            ))
            continue

        sol = extract_solution(scenario, result, opts.integrality_tol)
        node.relaxation = sol
        if sol.integral:
            if sol.psi < z_ub:
                z_ub = sol.psi
                best = _incumbent_from(scenario, sol)
                best_psi = sol.psi
                action = NodeAction.NEW_INCUMBENT
            else:
                action = NodeAction.PRUNED_BY_BOUND
        else:
            if sol.psi <= z_ub:
                child_down, child_up = branch(
                    node, sol.first_fractional, sol.x[sol.first_fractional],
                    next_id, opts.integrality_tol,
                )
                next_id += 2
                queue.append(child_down)
                queue.append(child_up)
                action = NodeAction.BRANCHED
            else:
                action = NodeAction.PRUNED_BY_BOUND
        trace.append(NodeRecord(
            node.node_id, node.depth, node.parent_id, 1, action,
            sol.psi, zub_at_pop, sol.x.copy(), sol.split_bits.copy(),
        ))

    if exhausted:
        status = SolveStatus.BUDGET_EXHAUSTED
    elif best is None:
        status = SolveStatus.INFEASIBLE
    else:
        status = SolveStatus.OPTIMAL
    return SolveReport(
        status=status,
        best_x=best[0] if best else None,
        best_split=best[1] if best else None,
        best_psi=best_psi,
        nodes_searched=len(trace),
        trace=trace,
        wall_time=time.perf_counter() - t0,
    )


def solve_exhaustive(scenario: Scenario, opts: SolveOptions | None = None) -> SolveReport:
    """Ground-truth oracle: enumerate every channel-to-device map.

    Each channel is given to one device or left idle, which bakes in
    channel exclusivity; maps leaving some device with no channel are
    skipped.  ``nodes_searched`` counts the evaluated maps (the trace of a
    tree search has no analogue here and is left empty).
    """
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    s_n, k_n = scenario.num_mds, scenario.num_channels
    total = (s_n + 1) ** k_n
    if total > opts.enum_budget:
        raise BudgetExceededError(
            f"enumeration of {total} maps exceeds budget {opts.enum_budget}"
        )

    best_psi = np.inf
    best: tuple[np.ndarray, np.ndarray] | None = None
    evaluated = 0
    for owners in itertools.product(range(s_n + 1), repeat=k_n):
        if len(set(owners) - {0}) < s_n:
            continue  # some device got no channel
        x = np.zeros((s_n, k_n), dtype=int)
        for k, owner in enumerate(owners):
            if owner > 0:
                x[owner - 1, k] = 1
        split = solve_split(scenario, x)
        evaluated += 1
        if split is not None and split.psi < best_psi:
            best_psi = split.psi
            best = (x, split.split_bits)

    status = SolveStatus.OPTIMAL if best is not None else SolveStatus.INFEASIBLE
    return SolveReport(
        status=status,
        best_x=best[0] if best else None,
        best_split=best[1] if best else None,
        best_psi=best_psi if best is not None else None,
        nodes_searched=evaluated,
        trace=[],
        wall_time=time.perf_counter() - t0,
    )


def _csv_float(value: float) -> str:
    return format(float(value), ".17g")


def write_trace_csv(path, passes, num_indicators: int) -> None:
    """Write trace records as versioned CSV.

    ``passes`` is a list of ``(theta, restart_index, records)`` tuples; the
    exact search uses a single pass with ``theta=None``, learned-pruning
    runs annotate each pass with its threshold.
    """
    cols = ["j", "g", "parent", "f", "action", "psi", "zub_at_pop"]
    cols += [f"x{i}" for i in range(num_indicators)]
    cols += [f"l{i}" for i in range(num_indicators)]
    lines = ["# trace-v1", ",".join(cols)]
    for theta, restart, records in passes:
        if theta is not None:
            lines.append(f"# theta={_csv_float(theta)} restart={restart}")
        for rec in records:
            parent = -1 if rec.parent_id is None else rec.parent_id
            row = [
                str(rec.node_id), str(rec.depth), str(parent),
                str(rec.feasible_flag), rec.action.value,
                _csv_float(rec.psi), _csv_float(rec.zub_at_pop),
            ]
            row += [_csv_float(v) for v in rec.x]
            row += [_csv_float(v) for v in rec.split_bits]
            lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

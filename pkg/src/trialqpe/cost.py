"""Exponential, query and qubit counts of a run, set against the analytic count bound."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

from .errors import RejectedInputError
from .grid_hamiltonian import HamiltonianParts
from .splitting import (
    ErrorBudget,
    ExponentialSchedule,
    exponential_count_bound,
    optimal_order,
    order_cost_factor,
)


@dataclass(frozen=True)
class CostReport:
    runs: int
    executions_factor: int
    exponentials: int
    exponentials_unmerged: int
    h1_exponentials: int
    h2_exponentials: int
    bound_total: int
    queries: int
    non_query_ops: int
    qubits: int
    k: int
    k_star: int
    k_star_eps: float
    k_star_factors: dict
    k_star_local_min: bool

    @property
    def dominated(self) -> bool:
        return self.exponentials_unmerged <= self.bound_total and self.exponentials <= self.bound_total

    def to_dict(self) -> dict:
        out = asdict(self)
        out["k_star_factors"] = {str(k): v for k, v in self.k_star_factors.items()}
        out["bound_dominates_actual"] = self.dominated
        return out


def bound_per_run(ham: HamiltonianParts, budget: ErrorBudget, k: int) -> int:
    """``sum_tau N_tau`` for one QPE run."""
    return sum(
        exponential_count_bound(tau, k, ham.h1_norm_bound, ham.h2_norm_bound, budget.eps_tau[tau])
        for tau in range(budget.b + budget.t0)
    )


def kstar_check(g_value: float, eps: float, chat: float = 1.0) -> tuple[int, dict, bool]:
    """``k*`` and whether it minimizes the ``k``-dependent bound factor over ``{k*-1, k*, k*+1}``."""
    ks = optimal_order(g_value, eps, chat)
    factors = {k: order_cost_factor(k, g_value, eps, chat) for k in (ks - 1, ks, ks + 1) if k >= 1}
    return ks, factors, all(factors[ks] <= v for v in factors.values())


def cost_report(
    ham: HamiltonianParts,
    schedules: Sequence[ExponentialSchedule],
    budget: ErrorBudget,
    j: int,
    r: int,
    cardinality: int,
    runs: int,
    t: int,
    kstar_eps: float,
    chat: float = 1.0,
) -> CostReport:
    """Counts for ``runs`` QPE executions with the given per-power schedules.

    The bound is ``j r |S| sum_tau N_tau``. Queries count two per ``H2``
    exponential. The non-query estimate charges each ``H1`` exponential two
    ``d``-fold sine transforms of ``n^2`` gates plus ``d n`` phase gates
    (``n = log2 N``), each ``H2`` exponential ``d n`` phase gates, and the
    final inverse Fourier transform ``t^2`` gates; all constants are one.
    """
    if not schedules:
        raise RejectedInputError("no schedules")
    k = schedules[0].order_k
    merged = sum(s.count for s in schedules)
    unmerged = sum(s.unmerged_count for s in schedules)
    h1 = sum(s.h1_count for s in schedules)
    h2 = sum(s.h2_count for s in schedules)
    factor = j * r * cardinality
    n = math.ceil(math.log2(ham.grid.N))
    d = ham.grid.d
    per_run_ops = h1 * (2 * d * n * n + d * n) + h2 * d * n + t * t
    ks, factors, local = kstar_check(budget.g_value, kstar_eps, chat)
    return CostReport(
        runs=runs,
        executions_factor=factor,
        exponentials=runs * merged,
        exponentials_unmerged=runs * unmerged,
        h1_exponentials=runs * h1,
        h2_exponentials=runs * h2,
        bound_total=factor * bound_per_run(ham, budget, k),
        queries=2 * runs * h2,
        non_query_ops=runs * per_run_ops,
        qubits=d * n + t,
        k=k,
        k_star=ks,
        k_star_eps=float(kstar_eps),
        k_star_factors=factors,
        k_star_local_min=local,
    )

"""Suzuki product formulas unfolded into alternating ``H1``/``H2`` exponential schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import CapacityError, RejectedInputError
from .grid_hamiltonian import HamiltonianParts

H1, H2 = "H1", "H2"

# unfolded exponentials across all powers before schedules are refused
DEFAULT_SCHEDULE_CAP = 10**7


@dataclass(frozen=True)
class ExponentialSchedule:
    """Flat product ``exp(i H1 a_0) exp(i H2 b_1) exp(i H1 a_1) ...`` applied left to right in time order.

    ``unmerged_count`` is the exponential count before adjacent ``H1`` halves
    are fused, which is what the analytic count bound refers to.
    """

    steps: tuple
    order_k: int
    tau: Optional[int] = None
    substeps: int = 1
    unmerged_count: int = 0

    @property
    def count(self) -> int:
        return len(self.steps)

    @property
    def h1_count(self) -> int:
        return sum(1 for tag, _ in self.steps if tag == H1)

    @property
    def h2_count(self) -> int:
        return sum(1 for tag, _ in self.steps if tag == H2)

    def duration(self, tag: str) -> float:
        return math.fsum(z for t, z in self.steps if t == tag)

    def apply(self, ham: HamiltonianParts, state: np.ndarray) -> np.ndarray:
        """Apply the schedule to a state or a batch of states (last axis)."""
        out = np.array(state, dtype=complex)
        for tag, z in self.steps:
            out = ham.exp_h1(out, z) if tag == H1 else ham.exp_h2(out, z)
        return out

    def rows(self) -> list[tuple[str, float]]:
        return [(tag, float(z)) for tag, z in self.steps]


@dataclass(frozen=True)
class ErrorBudget:
    eps_tau: tuple
    g_value: float
    b: int
    t0: int

    @property
    def total(self) -> float:
        return math.fsum(self.eps_tau)

    @property
    def cap(self) -> float:
        return 1.0 / (20.0 * self.g_value)


def suzuki_p(k: int) -> float:
    return 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k - 1)))


def _raw_steps(k: int, dt: float) -> list[tuple[str, float]]:
    if k == 1:
        return [(H1, dt / 2), (H2, dt), (H1, dt / 2)]
    p = suzuki_p(k)
    outer = _raw_steps(k - 1, p * dt)
    return outer * 2 + _raw_steps(k - 1, (1 - 4 * p) * dt) + outer * 2


def merge_steps(steps: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
    merged: list[tuple[str, float]] = []
    for tag, z in steps:
        if merged and merged[-1][0] == tag:
            merged[-1] = (tag, merged[-1][1] + z)
        else:
            merged.append((tag, z))
    return merged


def minimal_exponentials(k: int) -> int:
    """Unmerged exponentials in one ``S_2k`` step, ``3 * 5^(k-1)``."""
    return 3 * 5 ** (k - 1)


def suzuki_schedule(k: int, dt: float) -> ExponentialSchedule:
    """One ``S_2k(H1, H2, dt)`` step, unfolded with adjacent ``H1`` factors merged."""
    if k < 1:
        raise RejectedInputError("Suzuki order k must be >= 1")
    if dt == 0:
        raise RejectedInputError("dt must be non-zero")
    return ExponentialSchedule(
        tuple(merge_steps(_raw_steps(k, dt))), k, None, 1, minimal_exponentials(k)
    )


def power_schedule(k: int, total_time: float, substeps: int, tau: Optional[int] = None):
    """``substeps`` consecutive ``S_2k`` steps covering ``total_time``."""
    if substeps < 1:
        raise RejectedInputError("need at least one substep")
    one = _raw_steps(k, total_time / substeps)
    return ExponentialSchedule(
        tuple(merge_steps(one * substeps)), k, tau, substeps, substeps * minimal_exponentials(k)
    )


def error_budget(b: int, t0: int, g_value: float) -> ErrorBudget:
    """Per-power error ``eps_tau = 2^(tau+1-(b+t0)) / (40 g)`` for ``tau = 0..b+t0-1``."""
    if b < 1 or t0 < 1:
        raise RejectedInputError("b and t0 must be >= 1")
    if g_value <= 0:
        raise RejectedInputError("g must be positive")
    t = b + t0
    eps = tuple(2.0 ** (tau + 1 - t) / (40.0 * g_value) for tau in range(t))
    return ErrorBudget(eps, float(g_value), int(b), int(t0))


def exponential_count_formula(tau: int, k: int, h1n: float, h2n: float, eps: float) -> float:
    """``16e |H1| 2^tau (25/3)^(k-1) (8e 2^tau |H2| / eps)^(1/(2k))``, unrounded."""
    if eps <= 0:
        raise RejectedInputError("eps must be positive")
    if k < 1:
        raise RejectedInputError("k must be >= 1")
    T = 2.0**tau
    return (
        16 * math.e * h1n * T * (25.0 / 3.0) ** (k - 1)
        * (8 * math.e * T * h2n / eps) ** (1.0 / (2 * k))
    )


def exponential_count_bound(tau: int, k: int, h1n: float, h2n: float, eps: float) -> int:
    """Ceiling of the count formula, floored at one ``S_2k`` step (3 exponentials for k=1)."""
    return max(math.ceil(exponential_count_formula(tau, k, h1n, h2n, eps)), minimal_exponentials(k))


def substeps_for(count_bound: int, k: int) -> int:
    """Whole ``S_2k`` steps that fit in the exponential budget (at least one)."""
    return max(1, count_bound // minimal_exponentials(k))


def trotterized_power(
    ham: HamiltonianParts, tau: int, budget: ErrorBudget, k: int
) -> ExponentialSchedule:
    """Schedule approximating ``W^(2^tau)`` within ``budget.eps_tau[tau]``.

    With an identically zero potential ``H1`` and ``H2`` commute trivially and
    the schedule is the single exact exponential ``exp(i H1 2^tau)``.
    """
    if not 0 <= tau < len(budget.eps_tau):
        raise RejectedInputError(f"tau must lie in [0, {len(budget.eps_tau)})")
    T = 2.0**tau
    bound = exponential_count_bound(tau, k, ham.h1_norm_bound, ham.h2_norm_bound, budget.eps_tau[tau])
    if not ham.has_potential:
        return ExponentialSchedule(((H1, T),), k, tau, 1, 1)
    return power_schedule(k, T, substeps_for(bound, k), tau)


@dataclass(frozen=True)
class ScheduleCounts:
    """Exponential counts of a power schedule, computed without unfolding it."""

    order_k: int
    tau: int
    substeps: int
    count: int
    unmerged_count: int
    h1_count: int
    h2_count: int
    bound: int


def power_counts(ham: HamiltonianParts, tau: int, budget: ErrorBudget, k: int) -> ScheduleCounts:
    """Counts of ``trotterized_power(ham, tau, budget, k)``; consecutive steps share one fused H1."""
    bound = exponential_count_bound(tau, k, ham.h1_norm_bound, ham.h2_norm_bound, budget.eps_tau[tau])
    if not ham.has_potential:
        return ScheduleCounts(k, tau, 1, 1, 1, 1, 0, bound)
    s = substeps_for(bound, k)
    one = merge_steps(_raw_steps(k, 1.0))
    h2 = sum(1 for tag, _ in one if tag == H2)
    h1 = len(one) - h2
    return ScheduleCounts(
        k, tau, s, s * len(one) - (s - 1), s * minimal_exponentials(k), s * h1 - (s - 1), s * h2, bound
    )


def qpe_counts(ham: HamiltonianParts, budget: ErrorBudget, k: int) -> list[ScheduleCounts]:
    return [power_counts(ham, tau, budget, k) for tau in range(budget.b + budget.t0)]


def qpe_schedules(
    ham: HamiltonianParts, budget: ErrorBudget, k: int, cap: int = DEFAULT_SCHEDULE_CAP
) -> list[ExponentialSchedule]:
    """Schedules for every ``tau``; refused up front when their total length exceeds ``cap``."""
    total = sum(c.count for c in qpe_counts(ham, budget, k))
    if total > cap:
        raise CapacityError(
            f"schedules need {total} exponentials (cap {cap}); lower b + t0 or use the exact backend"
        )
    return [trotterized_power(ham, tau, budget, k) for tau in range(budget.b + budget.t0)]


def schedule_unitary(ham: HamiltonianParts, schedule: ExponentialSchedule) -> np.ndarray:
    """Dense matrix of the schedule product (columns are images of basis vectors)."""
    return schedule.apply(ham, np.eye(ham.grid.dim, dtype=complex)).T


def exact_power(eigenvalues: np.ndarray, eigenvectors: np.ndarray, R: float, time: float) -> np.ndarray:
    """``exp(i M_h time / R)`` from a symmetric eigendecomposition."""
    phases = np.exp(1j * np.asarray(eigenvalues) * time / R)
    return (eigenvectors * phases) @ eigenvectors.conj().T


def measured_error(ham: HamiltonianParts, schedule: ExponentialSchedule, spectrum, time: Optional[float] = None) -> float:
    """Spectral-norm distance between the schedule product and the exact propagator."""
    if time is None:
        time = 2.0**schedule.tau
    exact = exact_power(spectrum.eigenvalues, spectrum.eigenvectors, ham.R, time)
    return float(np.linalg.norm(schedule_unitary(ham, schedule) - exact, 2))


def optimal_order(g_value: float, eps: float, chat: float = 1.0) -> int:
    """``floor(sqrt(log_{25/3}(chat g^2 / eps) / 2) + 1/2)``, at least 1.

    This targets the asymptotic factor of :func:`order_cost_factor`; the
    rounding can land one off its discrete minimizer, and the finite per-power
    counts of a concrete instance may favour yet another order.
    """
    arg = chat * g_value**2 / eps
    if arg <= 1.0:
        return 1
    return max(1, math.floor(math.sqrt(0.5 * math.log(arg) / math.log(25.0 / 3.0)) + 0.5))


def order_cost_factor(k: int, g_value: float, eps: float, chat: float = 1.0) -> float:
    """The ``k``-dependent factor ``(25/3)^(k-1) (chat g^2/eps)^(1/(2k))`` of the total-cost bound."""
    return (25.0 / 3.0) ** (k - 1) * (chat * g_value**2 / eps) ** (1.0 / (2 * k))

"""Repeated QPE over the trial set, outcome selection and success checks.

One pass runs QPE ``r`` times on every trial vector and keeps the truncated
outcomes. The first pass takes the minimum outcome; every later pass takes the
minimum outcome at least two above the previous selection.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EmptyTrialSetError,
    ExhaustionError,
    PartialResultError,
    RejectedInputError,
)
from .grid_hamiltonian import HamiltonianParts
from .qpe_engine import (
    OutcomeDistribution,
    QpeConfig,
    exact_outcome_distribution,
    outcome_to_energy,
    sample_measurement,
    trotterized_qpe,
    truncate_outcome,
)
from .reference_spectrum import LevelClusters, SpectrumTable
from .rng import derive_seed, stream
from .splitting import ExponentialSchedule
from .trial_set import TrialSet

DEFAULT_RUN_BUDGET = 10**7
DEFAULT_SLACK = 2.0
DEFAULT_GAP_FACTOR = 3.0


def asymptotic_t0(g_value: float) -> int:
    """Boost bits ``floor(log2(5 g + 2))``."""
    return int(math.floor(math.log2(5.0 * g_value + 2.0)))


@dataclass(frozen=True)
class RunConfig:
    j: int
    r: int
    qpe: QpeConfig
    trial: TrialSet
    seed: int
    g_value: float = 1.0
    reuse_records: bool = False
    asymptotic_mode: bool = False
    run_budget: int = DEFAULT_RUN_BUDGET

    def __post_init__(self):
        if self.j < 1:
            raise RejectedInputError("j must be >= 1")
        if self.r < 1:
            raise RejectedInputError("r must be >= 1")
        if self.trial.cardinality == 0:
            raise EmptyTrialSetError("trial set is empty")
        if self.runs > self.run_budget:
            raise RejectedInputError(f"j*r*|S| = {self.runs} exceeds the run budget {self.run_budget}")
        if self.asymptotic_mode and self.qpe.t0 != asymptotic_t0(self.g_value):
            raise RejectedInputError(
                f"t0 = {self.qpe.t0} but g = {self.g_value} requires t0 = {asymptotic_t0(self.g_value)}"
            )

    @property
    def runs(self) -> int:
        passes = 1 if self.reuse_records else self.j
        return passes * self.r * self.trial.cardinality


@dataclass(frozen=True)
class MeasurementRecord:
    pass_index: int
    trial_index: int
    repetition: int
    m_raw: int
    m: int
    selected: bool = False

    def row(self) -> dict:
        return {
            "pass": self.pass_index,
            "trial_index": self.trial_index,
            "repetition": self.repetition,
            "m_raw": self.m_raw,
            "m": self.m,
            "selected": int(self.selected),
        }


@dataclass(frozen=True)
class LevelEstimates:
    energies: tuple
    selected_outcomes: tuple
    records: tuple
    selected_records: tuple
    seed: int

    def __len__(self):
        return len(self.energies)


class ExactBackend:
    """Outcome laws from the analytic QPE kernel, one per trial vector (cached)."""

    name = "exact"

    def __init__(self, spectrum: SpectrumTable, vectors: np.ndarray, cfg: QpeConfig):
        self.spectrum = spectrum
        self.vectors = np.asarray(vectors)
        self.cfg = cfg
        self._cache: dict[int, OutcomeDistribution] = {}

    def distribution(self, i: int) -> OutcomeDistribution:
        if i not in self._cache:
            self._cache[i] = exact_outcome_distribution(self.vectors[i], self.spectrum, self.cfg)
        return self._cache[i]

    def prepare(self):
        for i in range(len(self.vectors)):
            self.distribution(i)
        return self


class TrotterBackend(ExactBackend):
    """Outcome laws from the full split-operator QPE statevector."""

    name = "trotter"

    def __init__(
        self,
        ham: HamiltonianParts,
        schedules: Sequence[ExponentialSchedule],
        vectors: np.ndarray,
        cfg: QpeConfig,
    ):
        self.ham = ham
        self.schedules = list(schedules)
        self.vectors = np.asarray(vectors)
        self.cfg = cfg
        self._cache = {}

    def distribution(self, i: int) -> OutcomeDistribution:
        if i not in self._cache:
            self._cache[i] = trotterized_qpe(self.vectors[i], self.ham, self.schedules, self.cfg)
        return self._cache[i]


def collect_records(cfg: RunConfig, backend, pass_index: int) -> list[MeasurementRecord]:
    """``r`` sweeps over the trial set; each run draws from its own ``(pass, rep, trial)`` stream."""
    out = []
    for rep in range(cfg.r):
        for i in range(cfg.trial.cardinality):
            m_raw = sample_measurement(backend.distribution(i), stream(cfg.seed, pass_index, rep, i))
            out.append(MeasurementRecord(pass_index, i, rep, m_raw, truncate_outcome(m_raw, cfg.qpe)))
    return out


def select_next(records: Sequence, last_selected: int) -> int:
    """Smallest outcome ``m >= last_selected + 2``; pass ``-2`` to accept any ``m``."""
    if len(records) == 0:
        raise RejectedInputError("no records to select from")
    values = [r.m if isinstance(r, MeasurementRecord) else int(r) for r in records]
    eligible = [m for m in values if m >= last_selected + 2]
    if not eligible:
        raise ExhaustionError(f"no outcome >= {last_selected + 2} among {len(values)} records")
    return min(eligible)


def _mark(records: list[MeasurementRecord], m: int) -> tuple[list[MeasurementRecord], MeasurementRecord]:
    # first matching record in (repetition, trial_index) order wins ties
    order = sorted(range(len(records)), key=lambda n: (records[n].repetition, records[n].trial_index))
    hit = next(n for n in order if records[n].m == m)
    records = list(records)
    records[hit] = replace(records[hit], selected=True)
    return records, records[hit]


def run_algorithm2(cfg: RunConfig, backend) -> LevelEstimates:
    """``j`` passes; pass ``i`` picks the least outcome at least two above pass ``i-1``'s pick."""
    last = -2
    energies, picks, all_records, chosen = [], [], [], []
    base = None
    for i in range(cfg.j):
        if cfg.reuse_records and base is not None:
            recs = [replace(rec, pass_index=i, selected=False) for rec in base]
        else:
            recs = collect_records(cfg, backend, i)
            base = recs
        try:
            m = select_next(recs, last)
        except ExhaustionError as exc:
            all_records.extend(recs)
            raise PartialResultError(
                f"pass {i}: {exc}", levels=energies, outcomes=picks, records=all_records
            ) from exc
        recs, hit = _mark(recs, m)
        all_records.extend(recs)
        chosen.append(hit)
        picks.append(m)
        energies.append(outcome_to_energy(m, cfg.qpe))
        last = m
    return LevelEstimates(tuple(energies), tuple(picks), tuple(all_records), tuple(chosen), cfg.seed)


def run_algorithm1(cfg: RunConfig, backend) -> tuple[float, list[MeasurementRecord]]:
    """Single pass: the least truncated outcome over all ``r |S|`` runs, as an energy."""
    est = run_algorithm2(replace(cfg, j=1, reuse_records=False), backend)
    return est.energies[0], list(est.records)


@dataclass(frozen=True)
class VerificationReport:
    c1: bool
    c2: bool
    assignments: tuple
    distances: tuple
    skipped: tuple
    eps: float
    slack: float
    gap_threshold: float

    @property
    def passed(self) -> bool:
        return self.c1 and self.c2

    def to_dict(self) -> dict:
        return {
            "C1": self.c1,
            "C2": self.c2,
            "passed": self.passed,
            "assignments": list(self.assignments),
            "distances": list(self.distances),
            "skipped_levels": list(self.skipped),
            "eps": self.eps,
            "slack_K": self.slack,
            "gap_threshold": self.gap_threshold,
        }


def verify_conditions(
    est,
    ref,
    eps: float,
    slack: float = DEFAULT_SLACK,
    gap_factor: float = DEFAULT_GAP_FACTOR,
) -> VerificationReport:
    """Check the distinctness (C1) and no-skip (C2) conditions against reference levels.

    C1: every estimate lies within ``slack * eps`` of its nearest reference
    level and no two estimates share a level. C2: no reference level sits
    below the first estimate, or strictly between two consecutive estimates
    whose gap exceeds ``gap_factor * eps``, at distance more than
    ``slack * eps`` from the neighbouring estimates.
    """
    energies = np.asarray(est.energies if isinstance(est, LevelEstimates) else est, dtype=float)
    levels = np.asarray(ref.levels if isinstance(ref, LevelClusters) else ref, dtype=float)
    if levels.size == 0:
        raise RejectedInputError("reference levels are empty")
    tol = slack * eps
    assign, dist = [], []
    for E in energies:
        n = int(np.argmin(np.abs(levels - E)))
        assign.append(n)
        dist.append(float(abs(levels[n] - E)))
    c1 = all(x <= tol for x in dist) and len(set(assign)) == len(assign)
    skipped = []
    if energies.size:
        lows = levels[levels < energies[0] - tol]
        skipped.extend(float(x) for x in lows)
        for lo, hi in zip(energies, energies[1:]):
            if hi - lo > gap_factor * eps:
                between = levels[(levels > lo + tol) & (levels < hi - tol)]
                skipped.extend(float(x) for x in between)
    return VerificationReport(
        c1, not skipped, tuple(assign), tuple(dist), tuple(skipped), float(eps), float(slack),
        float(gap_factor * eps),
    )


def failure_bound(r: int, cardinality: int, t0: int) -> dict:
    """Per-level failure decomposition: no good outcome in ``r|S|`` runs, plus a stray low outcome."""
    p = 1.0 - 1.0 / (2**t0 - 2)
    miss = math.exp(-r * 0.75 / cardinality * p)
    stray = r * cardinality / (2**t0 - 2)
    return {"miss": miss, "stray": stray, "total": miss + stray}


def success_probability_bound(r: int, cardinality: int, t0: int, j: int) -> float:
    """``(1 - exp(-r 3p/(4|S|)) - r|S|/(2^t0 - 2))^j`` with ``p = 1 - 1/(2^t0 - 2)``; may be vacuous."""
    base = 1.0 - failure_bound(r, cardinality, t0)["total"]
    if base <= 0:
        return base
    return base**j


def default_r(cardinality: int, t0: int, target: float = 0.05) -> int:
    """Least ``r`` with ``exp(-r 3p/(4|S|)) <= target``."""
    p = 1.0 - 1.0 / (2**t0 - 2)
    return max(1, math.ceil(-math.log(target) * 4.0 * cardinality / (3.0 * p) - 1e-12))


@dataclass(frozen=True)
class SuccessTrial:
    empirical: float
    bound: float
    stderr: float
    passed: bool
    vacuous: bool
    trials: int
    successes: int
    outcomes: tuple = field(repr=False, default=())

    def to_dict(self) -> dict:
        return {
            "empirical": self.empirical,
            "bound": self.bound,
            "stderr": self.stderr,
            "passed": self.passed,
            "vacuous_bound": self.vacuous,
            "trials": self.trials,
            "successes": self.successes,
        }


def trial_seed(seed: int, trial: int) -> int:
    return derive_seed(seed, trial)


def _one_trial(cfg: RunConfig, backend, ref, eps, slack, gap_factor, n) -> bool:
    sub = replace(cfg, seed=trial_seed(cfg.seed, n))
    try:
        est = run_algorithm2(sub, backend)
    except PartialResultError:
        return False
    return verify_conditions(est, ref, eps, slack, gap_factor).passed


def success_probability_trial(
    cfg: RunConfig,
    backend,
    trials: int,
    ref,
    eps: Optional[float] = None,
    slack: float = DEFAULT_SLACK,
    gap_factor: float = DEFAULT_GAP_FACTOR,
    workers: int = 1,
) -> SuccessTrial:
    """Monte Carlo success rate of the full ``j``-level search against the analytic bound.

    Passes when the empirical rate is at least the bound minus three binomial
    standard errors ``sqrt(e (1 - e) / trials)``.
    """
    if trials < 30:
        raise RejectedInputError("need at least 30 trials")
    eps = cfg.qpe.resolution if eps is None else eps
    backend.prepare()
    args = (cfg, backend, ref, eps, slack, gap_factor)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda n: _one_trial(*args, n), range(trials)))
    else:
        results = [_one_trial(*args, n) for n in range(trials)]
    wins = sum(results)
    emp = wins / trials
    se = math.sqrt(emp * (1.0 - emp) / trials)
    bound = success_probability_bound(cfg.r, cfg.trial.cardinality, cfg.qpe.t0, cfg.j)
    return SuccessTrial(emp, bound, se, emp >= bound - 3.0 * se, bound <= 0, trials, wins, tuple(results))

"""End-to-end orchestration: config to grid, spectrum, trial set, QPE runs, checks and artifacts."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .cost import CostReport, cost_report
from .errors import ConfigError, PartialResultError, TrialQPEError
from .grid_hamiltonian import (
    GridSpec,
    HamiltonianParts,
    Potential,
    assemble_hamiltonian,
    build_grid,
    flat_position,
    sample_potential,
)
from .level_finder import (
    ExactBackend,
    LevelEstimates,
    RunConfig,
    TrotterBackend,
    default_r,
    asymptotic_t0,
    run_algorithm2,
    success_probability_bound,
    success_probability_trial,
    verify_conditions,
)
from .params import asymptotic_b
from .qpe_engine import QpeConfig
from .reference_spectrum import LevelClusters, SpectrumTable, analytic_spectrum, dense_spectrum, distinct_levels
from .reports import write_csv, write_json
from .splitting import ErrorBudget, error_budget, qpe_counts, qpe_schedules
from .trial_set import TrialSet, build_trial_set, trial_vectors

log = logging.getLogger(__name__)


class ExperimentError(TrialQPEError):
    """A stage failed; carries the module name and the config fingerprint."""

    def __init__(self, module: str, fingerprint: str, cause: Exception):
        super().__init__(f"[{module}] {type(cause).__name__}: {cause} (config {fingerprint})")
        self.module = module
        self.fingerprint = fingerprint
        self.cause = cause


@dataclass
class Instance:
    cfg: ExperimentConfig
    grid: GridSpec
    potential: Potential
    ham: HamiltonianParts
    spectrum: SpectrumTable
    reference: LevelClusters
    trial: TrialSet
    qpe: QpeConfig
    budget: ErrorBudget
    r: int
    M: float

    @property
    def run_config(self) -> RunConfig:
        a = self.cfg.algorithm
        return RunConfig(
            a.j, self.r, self.qpe, self.trial, self.cfg.execution.seed, self.cfg.g_value,
            a.reuse_records, asymptotic_mode=a.g is not None,
        )

    def resolved(self) -> dict:
        a = self.cfg.algorithm
        return {
            "d": self.grid.d,
            "N": self.grid.N,
            "h": self.grid.h,
            "R": self.ham.R,
            "sigma": self.qpe.sigma,
            "M": self.M,
            "C": self.potential.C,
            "potential_family": self.potential.family_tag,
            "b": self.qpe.b,
            "t0": self.qpe.t0,
            "t": self.qpe.t,
            "g": self.cfg.g_value,
            "j": a.j,
            "r": self.r,
            "c": a.c,
            "k": a.k,
            "backend": self.qpe.backend,
            "seed": self.cfg.execution.seed,
            "trial_set_size": self.trial.cardinality,
            "trial_cutoff": self.trial.cutoff,
            "B_discrete": self.trial.B,
            "resolution": self.qpe.resolution,
            "verification_slack_K": 2.0,
            "verification_gap_threshold": 3.0 * self.qpe.resolution,
            "spectrum_source": self.spectrum.source,
            "success_bound": success_probability_bound(self.r, self.trial.cardinality, self.qpe.t0, a.j),
        }


def _stage(module: str, cfg: ExperimentConfig, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ExperimentError:
        raise
    except TrialQPEError as exc:
        raise ExperimentError(module, cfg.fingerprint(), exc) from exc


def reference_levels(spectrum: SpectrumTable) -> LevelClusters:
    top = float(np.max(np.abs(spectrum.eigenvalues)))
    return distinct_levels(spectrum, 1e-9 * max(1.0, top))


def build_instance(cfg: ExperimentConfig) -> Instance:
    p, a = cfg.problem, cfg.algorithm
    grid = _stage("grid_hamiltonian", cfg, build_grid, p.d, p.resolved_N())
    pot = _stage("grid_hamiltonian", cfg, p.potential.build, grid, cfg.base_dir, p.M, p.C)
    M = float(pot.M if p.M is None else p.M)
    if p.M is not None and pot.family_tag != "tabulated":
        pot = replace(pot, M=M)
    v = _stage("grid_hamiltonian", cfg, sample_potential, pot, grid)
    ham = _stage("grid_hamiltonian", cfg, assemble_hamiltonian, grid, v, M)
    if ham.has_potential:
        spec = _stage("reference_spectrum", cfg, dense_spectrum, ham)
    else:
        spec = analytic_spectrum(grid)
    trial = _stage("trial_set", cfg, build_trial_set, grid, M, a.j, a.c)
    if a.b is not None:
        b = a.b
    elif p.eps is not None:
        b = asymptotic_b(p.d, p.eps)
    else:
        raise ExperimentError("cli_reporting", cfg.fingerprint(), ConfigError("algorithm.b is required when N is explicit"))
    t0 = a.t0 if a.t0 is not None else asymptotic_t0(a.g)
    qpe = _stage("qpe_engine", cfg, QpeConfig, b, t0, ham.R, 0.0, a.backend, a.k)
    r = a.r if a.r is not None else default_r(trial.cardinality, t0)
    budget = error_budget(b, t0, cfg.g_value)
    return Instance(cfg, grid, pot, ham, spec, reference_levels(spec), trial, qpe, budget, r, M)


def make_backend(inst: Instance):
    vectors = trial_vectors(inst.grid, inst.trial)
    if inst.qpe.backend == "trotter":
        schedules = _stage("splitting", inst.cfg, qpe_schedules, inst.ham, inst.budget, inst.qpe.k_order)
        return TrotterBackend(inst.ham, schedules, vectors, inst.qpe)
    return ExactBackend(inst.spectrum, vectors, inst.qpe)


def instance_cost(inst: Instance, runs: Optional[int] = None) -> CostReport:
    counts = qpe_counts(inst.ham, inst.budget, inst.qpe.k_order)
    rc = inst.run_config
    eps = inst.cfg.problem.eps if inst.cfg.problem.eps is not None else inst.qpe.resolution
    return cost_report(
        inst.ham, counts, inst.budget, rc.j, rc.r, inst.trial.cardinality,
        rc.runs if runs is None else runs, inst.qpe.t, eps,
    )


# --------------------------------------------------------------------------
# Artifact writers


def spectrum_rows(inst: Instance, limit: Optional[int] = None):
    spec = inst.spectrum
    idx = spec.multi_indices
    clusters = np.searchsorted(np.asarray(inst.reference.levels) + inst.reference.tol, spec.eigenvalues)
    n = len(spec) if limit is None else min(limit, len(spec))
    for s in range(n):
        label = ";".join(map(str, idx[s])) if idx is not None else ""
        yield s, float(spec.eigenvalues[s]), int(clusters[s]), label


def write_spectrum(inst: Instance, out: Path, limit: Optional[int] = None) -> Path:
    return write_csv(out / "spectrum.csv", ["index", "eigenvalue", "cluster", "multi_index"],
                     spectrum_rows(inst, limit))


def write_trialset(inst: Instance, out: Path) -> Path:
    rows = (
        (n, flat_position(inst.grid, k), ";".join(map(str, k)), E)
        for n, (k, E) in enumerate(zip(inst.trial.indices, inst.trial.eigenvalues))
    )
    return write_csv(out / "trialset.csv", ["trial_index", "position", "multi_index", "laplacian_eigenvalue"], rows)


def write_records(records, seed: int, out: Path) -> Path:
    rows = (
        (n, r.pass_index, r.trial_index, r.repetition, seed,
         f"{seed}:{r.pass_index}:{r.repetition}:{r.trial_index}", r.m_raw, r.m, int(r.selected))
        for n, r in enumerate(records)
    )
    return write_csv(out / "records.csv",
                     ["run_id", "pass", "trial_index", "repetition", "seed", "stream_key", "m_raw", "m", "selected"],
                     rows)


def write_schedule_counts(inst: Instance, out: Path) -> Path:
    counts = qpe_counts(inst.ham, inst.budget, inst.qpe.k_order)
    rows = (
        (c.tau, inst.budget.eps_tau[c.tau], c.substeps, c.count, c.unmerged_count, c.h1_count, c.h2_count, c.bound)
        for c in counts
    )
    return write_csv(out / "schedule.csv",
                     ["tau", "eps_tau", "substeps", "exponentials", "unmerged", "h1", "h2", "count_bound"], rows)


def estimates_dict(est: LevelEstimates) -> dict:
    return {
        "energies": list(est.energies),
        "selected_outcomes": list(est.selected_outcomes),
        "selected_records": [r.row() for r in est.selected_records],
    }


def run_experiment(
    cfg: ExperimentConfig,
    out: Optional[Path] = None,
    trials: Optional[int] = None,
) -> tuple[int, dict]:
    """Run the configured search, verify it and write all artifacts.

    Returns ``(status, report)``: 0 on completion, 2 when a pass ran out of
    qualifying outcomes (partial levels are reported), 3 when a requested
    success trial misses its bound.
    """
    out = Path(cfg.execution.out if out is None else out)
    if not out.is_absolute():
        out = Path.cwd() / out
    out.mkdir(parents=True, exist_ok=True)
    inst = build_instance(cfg)
    report = {
        "config": cfg.to_dict(),
        "fingerprint": cfg.fingerprint(),
        "resolved": inst.resolved(),
        "reference_levels": list(inst.reference.levels[: max(2 * cfg.algorithm.j, 8)]),
    }
    write_spectrum(inst, out)
    write_trialset(inst, out)
    cost = instance_cost(inst)
    write_json(out / "cost.json", cost.to_dict())
    report["cost"] = cost.to_dict()
    backend = make_backend(inst)
    status = 0
    rc = inst.run_config
    try:
        est = _stage("level_finder", cfg, run_algorithm2, rc, backend)
    except ExperimentError as exc:
        if not isinstance(exc.cause, PartialResultError):
            write_json(out / "report.json", {**report, "status": "error", "error": str(exc)})
            raise
        partial = exc.cause
        write_records(partial.records, rc.seed, out)
        report.update(status="partial", error=str(exc),
                      estimates={"energies": partial.levels, "selected_outcomes": partial.outcomes})
        write_json(out / "report.json", report)
        return 2, report
    write_records(est.records, rc.seed, out)
    report["status"] = "complete"
    report["estimates"] = estimates_dict(est)
    report["verification"] = verify_conditions(est, inst.reference, inst.qpe.resolution).to_dict()
    n_trials = cfg.execution.trials if trials is None else trials
    if n_trials:
        st = _stage(
            "level_finder", cfg, success_probability_trial, rc, backend, n_trials, inst.reference,
            workers=cfg.execution.workers,
        )
        report["success_trial"] = st.to_dict()
        if not st.passed:
            status = 3
    write_json(out / "report.json", report)
    return status, report

"""Classical ground truth: dense spectra, level clustering, discretization error rates."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CapacityError, RejectedInputError, TrialQPEError
from .grid_hamiltonian import (
    GridSpec,
    HamiltonianParts,
    build_grid,
    laplacian_eigenvalue_grid,
    multi_index_at,
)

DEFAULT_DENSE_CAP = 4096


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Eigenvalues in non-decreasing order with aligned eigenvectors (columns).

    Analytic Laplacian tables carry ``positions`` (flat sine-mode index per
    eigenvalue) instead of vectors.
    """

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    source: str
    grid: Optional[GridSpec] = None
    positions: Optional[np.ndarray] = None

    @property
    def multi_indices(self) -> Optional[list]:
        if self.positions is None:
            return None
        return [multi_index_at(self.grid, int(p)) for p in self.positions]

    def __len__(self):
        return len(self.eigenvalues)


@dataclass(frozen=True)
class LevelClusters:
    levels: tuple
    multiplicities: tuple
    tol: float

    @property
    def members(self) -> list[range]:
        out, start = [], 0
        for m in self.multiplicities:
            out.append(range(start, start + m))
            start += m
        return out

    def __len__(self):
        return len(self.levels)


def dense_matrix(ham: HamiltonianParts, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Materialize ``M_h`` as a Kronecker sum of tridiagonal stencils."""
    g = ham.grid
    if g.dim > cap:
        raise CapacityError(
            f"N^d = {g.dim} exceeds the dense cap {cap}; use the analytic "
            "spectrum (V = 0) or an iterative solver"
        )
    T = g.inv_h2 * (np.eye(g.N) - 0.5 * np.eye(g.N, k=1) - 0.5 * np.eye(g.N, k=-1))
    lap = np.zeros((g.dim, g.dim))
    for axis in range(g.d):
        term = np.ones((1, 1))
        for a in range(g.d):
            term = np.kron(term, T if a == axis else np.eye(g.N))
        lap += term
    return lap + np.diag(ham.v_diag)


def dense_spectrum(ham: HamiltonianParts, cap: int = DEFAULT_DENSE_CAP) -> SpectrumTable:
    vals, vecs = np.linalg.eigh(dense_matrix(ham, cap))
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return SpectrumTable(vals, vecs, "dense", ham.grid)


def analytic_spectrum(grid: GridSpec) -> SpectrumTable:
    """Spectrum of ``-1/2 Delta_h`` (``V = 0``) without materializing anything."""
    flat = laplacian_eigenvalue_grid(grid)
    order = np.argsort(flat, kind="stable")
    vals = flat[order]
    vals.setflags(write=False)
    order.setflags(write=False)
    return SpectrumTable(vals, None, "analytic-laplacian", grid, order)


def distinct_levels(table, tol: float) -> LevelClusters:
    """Greedy clustering: a new level starts once a value exceeds the current minimum by more than ``tol``."""
    if tol <= 0:
        raise RejectedInputError("clustering tolerance must be positive")
    values = table.eigenvalues if isinstance(table, SpectrumTable) else table
    values = np.sort(np.asarray(values, dtype=float))
    levels, mult = [], []
    for v in values:
        if levels and v - levels[-1] <= tol:
            mult[-1] += 1
        else:
            levels.append(float(v))
            mult.append(1)
    return LevelClusters(tuple(levels), tuple(mult), float(tol))


def _excess_multisets(d: int, budget: int):
    """Yield ``(sum of k_i^2, multiplicity)`` over k in N^d with sum(k_i^2 - 1) <= budget."""

    def rec(max_k, remaining, slots, chosen):
        yield chosen
        if slots == 0:
            return
        for k in range(min(max_k, math.isqrt(remaining + 1)), 1, -1):
            cost = k * k - 1
            if cost <= remaining:
                yield from rec(k, remaining - cost, slots - 1, chosen + (k,))

    for chosen in rec(budget + 2, budget, d, ()):
        m = len(chosen)
        mult = math.factorial(d) // math.factorial(d - m)
        for c in Counter(chosen).values():
            mult //= math.factorial(c)
        yield (d - m) + sum(k * k for k in chosen), mult


def continuum_level_keys(d: int, bound: float) -> list[tuple[int, int]]:
    """Distinct values of ``sum k_i^2`` (with multiplicity) whose level ``pi^2/2 * s`` is <= bound."""
    smax = math.floor(2.0 * bound / math.pi**2 + 1e-12)
    if smax < d:
        return []
    acc: dict[int, int] = {}
    for s, mult in _excess_multisets(d, smax - d):
        acc[s] = acc.get(s, 0) + mult
    return sorted(acc.items())


def continuum_levels(d: int, count: Optional[int] = None, bound: Optional[float] = None) -> LevelClusters:
    """Exact distinct eigenvalues ``pi^2/2 * sum k_i^2`` of ``-1/2 Delta`` on the unit cube.

    Returns levels up to ``bound``; if ``count`` is given, at most ``count``
    levels (the bound grows as needed when ``bound`` is omitted).
    """
    ground = d * math.pi**2 / 2
    if bound is not None and bound < ground - 1e-12:
        raise RejectedInputError(f"bound {bound} is below the ground level {ground}")
    if bound is None:
        if count is None:
            raise RejectedInputError("continuum_levels needs a count or a bound")
        b = ground + 3 * math.pi**2
        while len(keys := continuum_level_keys(d, b)) < count:
            b *= 2
    else:
        keys = continuum_level_keys(d, bound)
    if count is not None:
        keys = keys[:count]
    return LevelClusters(
        tuple(math.pi**2 / 2 * s for s, _ in keys), tuple(m for _, m in keys), 0.0
    )


def discrete_laplacian_levels(grid: GridSpec, count: int) -> LevelClusters:
    flat = np.sort(laplacian_eigenvalue_grid(grid))
    clusters = distinct_levels(flat, tol=1e-9 * float(flat[-1]))
    return LevelClusters(clusters.levels[:count], clusters.multiplicities[:count], clusters.tol)


def discretization_errors(d: int, k: int, N_sequence: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Mesh sizes and ``|E0_{h,(k)} - E0_{(k)}|`` for each ``N``."""
    exact = continuum_levels(d, count=k + 1).levels[k]
    hs, errs = [], []
    for N in N_sequence:
        grid = build_grid(d, N)
        levels = discrete_laplacian_levels(grid, k + 1)
        if len(levels) <= k:
            raise RejectedInputError(f"grid N={N} has fewer than {k + 1} distinct levels")
        hs.append(grid.h)
        errs.append(abs(levels.levels[k] - exact))
    return np.array(hs), np.array(errs)


def weinberger_check(d: int, k: int, N_sequence: Sequence[int]) -> tuple[float, float]:
    """Fit ``err ~ C d h^p`` by least squares in log-log space; return ``(p, C)``."""
    N_sequence = list(N_sequence)
    if len(N_sequence) < 3 or any(b <= a for a, b in zip(N_sequence, N_sequence[1:])):
        raise RejectedInputError("N_sequence must be strictly increasing with length >= 3")
    hs, errs = discretization_errors(d, k, N_sequence)
    if np.any(errs <= 0):
        raise TrialQPEError("zero discretization error; log-log fit is undefined")
    slope, intercept = np.polyfit(np.log(hs), np.log(errs), 1)
    return float(slope), float(math.exp(intercept) / d)

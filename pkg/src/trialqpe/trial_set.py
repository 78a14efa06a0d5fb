"""Trial eigenvectors: the low Laplacian sine modes used as QPE initial states.

Membership is decided by the discrete Laplacian eigenvalue against a cutoff
built from a gap-separated subsequence of continuum levels. The overlap
routines expand an eigenvector of ``M_h`` in the sine basis to check that
enough of its weight sits on the trial set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import EmptyTrialSetError, RejectedInputError
from .grid_hamiltonian import (
    GridSpec,
    build_grid,
    flat_position,
    laplacian_eigenvalue_grid,
    laplacian_eigenvalues_1d,
    laplacian_eigenvector,
    sine_transform,
)
from .reference_spectrum import continuum_levels

DEFAULT_C = 2.0


@dataclass(frozen=True)
class LevelSubsequence:
    """``j+1`` continuum levels, consecutive picks more than ``M`` apart."""

    selected: tuple
    M: float
    j: int

    @property
    def top(self) -> float:
        return self.selected[-1]

    @property
    def c_prime(self) -> float:
        return self.selected[-1] - self.selected[0]

    @property
    def B(self) -> float:
        """Continuum bound on the sought part of the spectrum, ``M + E0_(s_j)``."""
        return self.M + self.selected[-1]

    @property
    def B_discrete(self) -> float:
        """``B`` raised by one to absorb discretization error."""
        return self.B + 1.0

    def cutoff(self, c: float = DEFAULT_C) -> float:
        """Largest admitted Laplacian eigenvalue; ``3M + E0_(s_j) + 1`` for ``c = 2``."""
        return self.B_discrete + c * self.M


@dataclass(frozen=True)
class TrialSet:
    indices: tuple
    eigenvalues: tuple
    cutoff: float
    B: float
    c: float = DEFAULT_C

    @property
    def cardinality(self) -> int:
        return len(self.indices)

    def __len__(self):
        return len(self.indices)

    @property
    def q(self) -> float:
        return 1.0 - 1.0 / self.c**2


@dataclass(frozen=True, eq=False)
class OverlapProfile:
    betas: np.ndarray
    in_set_mass: float
    residual: float
    q: float
    max_overlap: float
    best_index: tuple

    @property
    def total_mass(self) -> float:
        return float(self.betas.sum())


def build_level_subsequence(d: int, M: float, j: int) -> LevelSubsequence:
    """Greedy pick over exact distinct continuum levels: each next level exceeds the previous pick by more than ``M``."""
    if j < 1:
        raise RejectedInputError("j must be at least 1")
    if M < 0:
        raise RejectedInputError("M must be non-negative")
    count = 8 * (j + 1)
    while True:
        levels = continuum_levels(d, count=count).levels
        picks = [levels[0]]
        for E in levels[1:]:
            if E - picks[-1] > M:
                picks.append(E)
                if len(picks) == j + 1:
                    return LevelSubsequence(tuple(picks), float(M), int(j))
        count *= 2


def enumerate_trial_indices(
    grid: GridSpec, sub: LevelSubsequence, c: float = DEFAULT_C
) -> TrialSet:
    """All multi-indices with ``E0_{h,k} <= cutoff`` in lexicographic order."""
    cutoff = sub.cutoff(c)
    e1 = laplacian_eigenvalues_1d(grid)
    if grid.d * e1[0] > cutoff:
        raise EmptyTrialSetError(
            f"cutoff {cutoff:.6g} is below the discrete ground level {grid.d * e1[0]:.6g}"
        )
    slack = 1e-12 * cutoff
    out_idx, out_val = [], []

    def rec(prefix, partial):
        axis = len(prefix)
        if axis == grid.d:
            if partial <= cutoff:
                out_idx.append(prefix)
                out_val.append(partial)
            return
        rest = (grid.d - axis - 1) * e1[0]
        for k in range(1, grid.N + 1):
            if partial + e1[k - 1] + rest > cutoff + slack:
                break
            rec(prefix + (k,), partial + e1[k - 1])

    rec((), 0.0)
    return TrialSet(tuple(out_idx), tuple(float(v) for v in out_val), float(cutoff),
                    float(sub.B_discrete), float(c))


def build_trial_set(grid: GridSpec, M: float, j: int, c: float = DEFAULT_C) -> TrialSet:
    return enumerate_trial_indices(grid, build_level_subsequence(grid.d, M, j), c)


def trial_vectors(grid: GridSpec, trial: TrialSet) -> np.ndarray:
    """Rows are the unit sine vectors of the trial set, in trial order."""
    return np.array([laplacian_eigenvector(grid, k) for k in trial.indices])


def overlap_profile(
    u: np.ndarray, E: float, grid: GridSpec, trial: TrialSet, norm_tol: float = 1e-8
) -> OverlapProfile:
    """Squared sine-basis coefficients of ``u`` and the overlap statistics on the trial set."""
    u = np.asarray(u)
    if u.shape != (grid.dim,):
        raise RejectedInputError(f"u must have shape ({grid.dim},)")
    if abs(np.linalg.norm(u) - 1.0) > norm_tol:
        raise RejectedInputError(f"u is not a unit vector (norm {np.linalg.norm(u):.12g})")
    betas = np.abs(sine_transform(u, grid)) ** 2
    E0 = laplacian_eigenvalue_grid(grid)
    positions = np.array([flat_position(grid, k) for k in trial.indices], dtype=int)
    in_set = betas[positions]
    best = int(np.argmax(in_set))
    return OverlapProfile(
        betas=betas,
        in_set_mass=float(in_set.sum()),
        residual=float(np.sum(betas * (E0 - E) ** 2)),
        q=trial.q,
        max_overlap=float(in_set[best]),
        best_index=trial.indices[best],
    )


def pigeonhole_holds(profile: OverlapProfile, trial: TrialSet) -> bool:
    return profile.max_overlap >= profile.q / trial.cardinality


def cardinality_scan(
    d_values: Iterable[int], N: int, M: float, j: int = 1, c: float = DEFAULT_C
) -> list[tuple[int, int]]:
    return [(d, build_trial_set(build_grid(d, N), M, j, c).cardinality) for d in d_values]


def max_excited_components(M: float, c_prime: float) -> int:
    """Largest ``m`` with ``3 m pi^2 <= 2 (3M + c')``: how many axes may exceed 1."""
    return int(math.floor(2.0 * (3.0 * M + c_prime) / (3.0 * math.pi**2)))


def fit_cardinality_exponent(scan: list[tuple[int, int]]) -> float:
    """Slope of ``log |S|`` against ``log d``."""
    d = np.array([s[0] for s in scan], dtype=float)
    n = np.array([s[1] for s in scan], dtype=float)
    slope, _ = np.polyfit(np.log(d), np.log(n), 1)
    return float(slope)

"""Quantum phase estimation of ``W = exp(i M_h / R)``, simulated two ways.

The exact backend mixes the textbook ``t``-bit outcome kernel over the
eigenphases of ``M_h`` with the spectral weights of the initial state. The
Trotter backend evolves the joint ``(ancilla, system)`` statevector through
the controlled schedule products and an inverse Fourier transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CapacityError, InvalidScalingError, RejectedInputError
from .grid_hamiltonian import HamiltonianParts, sine_transform
from .reference_spectrum import SpectrumTable
from .rng import stream
from .splitting import ExponentialSchedule

MAX_T = 24
DEFAULT_STATE_CAP = 1 << 24
BACKENDS = ("exact", "trotter")


@dataclass(frozen=True)
class QpeConfig:
    b: int
    t0: int
    R: float
    sigma: float = 0.0
    backend: str = "exact"
    k_order: int = 1

    def __post_init__(self):
        if self.b < 1:
            raise RejectedInputError("b must be >= 1")
        if self.t0 < 2:
            raise RejectedInputError("t0 must be >= 2")
        if self.t > MAX_T:
            raise RejectedInputError(f"t = b + t0 = {self.t} exceeds the cap {MAX_T}")
        if self.R <= 0:
            raise RejectedInputError("R must be positive")
        if self.backend not in BACKENDS:
            raise RejectedInputError(f"backend must be one of {BACKENDS}")
        if self.k_order < 1:
            raise RejectedInputError("k_order must be >= 1")

    @property
    def t(self) -> int:
        return self.b + self.t0

    @property
    def p(self) -> float:
        """Per-run success floor with splitting error, ``1 - 1/(2^t0 - 2)``."""
        return 1.0 - 1.0 / (2**self.t0 - 2)

    @property
    def exact_eigvec_success(self) -> float:
        return 1.0 - 1.0 / (2.0 * (2**self.t0 - 2))

    @property
    def resolution(self) -> float:
        """Energy width of one truncated outcome, ``2 pi R / 2^b``."""
        return 2.0 * math.pi * self.R / 2**self.b


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    probs: np.ndarray
    phases: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "cdf", np.cumsum(probs))

    @property
    def t(self) -> int:
        return int(round(math.log2(self.probs.size)))


def check_unit(x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    x = np.asarray(x)
    norm = float(np.linalg.norm(x))
    if abs(norm - 1.0) > tol:
        raise RejectedInputError(f"initial state is not normalized (norm {norm:.15g})")
    return x


def eigenphases(eigenvalues: np.ndarray, cfg: QpeConfig) -> np.ndarray:
    phases = (np.asarray(eigenvalues, dtype=float) - cfg.sigma) / (2.0 * math.pi * cfg.R)
    bad = (phases < 0.0) | (phases >= 1.0)
    if np.any(bad):
        worst = float(phases[bad][0])
        raise InvalidScalingError(
            f"eigenphase {worst:.6g} outside [0, 1); R = {cfg.R} does not bound the shifted spectrum"
        )
    return phases


def spectral_weights(initial: np.ndarray, spectrum: SpectrumTable) -> np.ndarray:
    """``|<u_s, initial>|^2`` for every eigenvector of the table."""
    if spectrum.eigenvectors is not None:
        return np.abs(spectrum.eigenvectors.T.conj() @ initial) ** 2
    if spectrum.positions is None or spectrum.grid is None:
        raise RejectedInputError("spectrum carries neither eigenvectors nor sine-mode positions")
    betas = np.abs(sine_transform(initial, spectrum.grid)) ** 2
    return betas[spectrum.positions]


def qpe_kernel(t: int, phase: float) -> np.ndarray:
    """Outcome probabilities ``|sin(2^t pi delta) / (2^t sin(pi delta))|^2`` for an exact eigenvector."""
    T = 2**t
    x = T * phase - np.arange(T, dtype=float)
    frac = np.mod(x / T, 1.0)
    den = T * np.sin(np.pi * frac)
    num = np.sin(np.pi * np.mod(x, 2.0))
    near = (np.minimum(frac, 1.0 - frac) * T) < 1e-9
    out = np.empty(T)
    out[~near] = (num[~near] / den[~near]) ** 2
    out[near] = 1.0
    return out


def exact_outcome_distribution(
    initial: np.ndarray, spectrum: SpectrumTable, cfg: QpeConfig, prune: float = 1e-15
) -> OutcomeDistribution:
    """Outcome law ``sum_s |c_s|^2 K_t(phi_s - l/2^t)`` of ideal QPE.

    Weights below ``prune`` are dropped from the mixture (their kernels are
    not evaluated); the discarded mass is at most ``N^d * prune``.
    """
    initial = check_unit(initial)
    phases = eigenphases(spectrum.eigenvalues, cfg)
    weights = spectral_weights(initial, spectrum)
    probs = np.zeros(2**cfg.t)
    for s in np.flatnonzero(weights > prune):
        probs += weights[s] * qpe_kernel(cfg.t, phases[s])
    return OutcomeDistribution(probs, phases, weights)


def trotterized_qpe(
    initial: np.ndarray,
    ham: HamiltonianParts,
    schedules: Sequence[ExponentialSchedule],
    cfg: QpeConfig,
    state_cap: int = DEFAULT_STATE_CAP,
) -> OutcomeDistribution:
    """Statevector QPE with ``controlled-W~^(2^tau)`` realized by the schedules.

    Ancilla basis index ``a = sum_tau a_tau 2^tau``; the control on bit ``tau``
    applies ``schedules[tau]`` to exactly the rows whose bit ``tau`` is set.
    A nonzero ``sigma`` enters as the phase ``exp(-i sigma 2^tau / R)`` on
    those rows, i.e. the circuit estimates the spectrum of ``M_h - sigma``.
    """
    initial = check_unit(initial)
    T = 2**cfg.t
    if T * ham.grid.dim > state_cap:
        raise CapacityError(
            f"joint register needs {T * ham.grid.dim} amplitudes (cap {state_cap}); "
            "use the exact backend"
        )
    if len(schedules) < cfg.t or any(s.tau != tau for tau, s in enumerate(schedules[: cfg.t])):
        raise RejectedInputError(f"need schedules for tau = 0..{cfg.t - 1} in order")
    psi = np.tile(np.asarray(initial, dtype=complex) / math.sqrt(T), (T, 1))
    a = np.arange(T)
    for tau in range(cfg.t):
        rows = np.flatnonzero((a >> tau) & 1)
        psi[rows] = schedules[tau].apply(ham, psi[rows])
        if cfg.sigma:
            psi[rows] *= np.exp(-1j * cfg.sigma * 2.0**tau / cfg.R)
    psi = np.fft.fft(psi, axis=0) / math.sqrt(T)
    probs = np.sum(np.abs(psi) ** 2, axis=1)
    return OutcomeDistribution(probs)


def sample_measurement(dist: OutcomeDistribution, rng_seed) -> int:
    """Inverse-CDF draw of a ``t``-bit outcome.

    ``rng_seed`` is an integer seed or a ``numpy.random.Generator``.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else stream(int(rng_seed))
    u = rng.random() * dist.cdf[-1]
    return int(min(np.searchsorted(dist.cdf, u, side="right"), dist.cdf.size - 1))


def truncate_outcome(m_raw: int, cfg: QpeConfig) -> int:
    if not 0 <= m_raw < 2**cfg.t:
        raise RejectedInputError(f"outcome {m_raw} outside [0, 2^{cfg.t})")
    return int(m_raw) >> cfg.t0


def outcome_to_energy(m: int, cfg: QpeConfig) -> float:
    """``2 pi R m / 2^b + sigma``."""
    if not 0 <= m < 2**cfg.b:
        raise RejectedInputError(f"truncated outcome {m} outside [0, 2^{cfg.b})")
    return 2.0 * math.pi * cfg.R * m / 2**cfg.b + cfg.sigma


def circular_distance(a, b):
    diff = np.mod(np.asarray(a) - np.asarray(b), 1.0)
    return np.minimum(diff, 1.0 - diff)


def failure_mass(dist: OutcomeDistribution, cfg: QpeConfig, weight_floor: float = 1e-15) -> float:
    """Probability of outcomes ``l`` farther than ``2^-b`` (on the phase circle) from every populated phase."""
    if dist.phases is None or dist.weights is None:
        raise RejectedInputError("distribution lacks phase information")
    grid = np.arange(dist.probs.size) / dist.probs.size
    ok = np.zeros(dist.probs.size, dtype=bool)
    for phi in dist.phases[dist.weights > weight_floor]:
        ok |= circular_distance(grid, phi) <= 2.0**-cfg.b
    return float(dist.probs[~ok].sum())


def total_variation(p: OutcomeDistribution, q: OutcomeDistribution) -> float:
    return 0.5 * float(np.abs(p.probs - q.probs).sum())

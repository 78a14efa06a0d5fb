"""Finite-difference Schroedinger operator on the unit cube.

The discretized operator is ``M_h = -1/2 Delta_h + V_h`` on an ``N^d`` grid
with mesh size ``h = 1/(N+1)`` and homogeneous Dirichlet boundary values.
States are flat vectors of length ``N^d`` in C order over the axes
``(x_1, ..., x_d)``, so ``x_d`` varies fastest and the tensor-product
eigenvector ``v_{k_1} (x) ... (x) v_{k_d}`` equals ``np.kron`` of the factors.
Every routine accepts a batch of states with the state on the last axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft

from .errors import BoundViolationError, CapacityError, RejectedInputError

POTENTIAL_FAMILIES = ("zero", "constant", "product-sine", "well", "tabulated")
WELL_PROFILES = ("harmonic", "linear", "parabolic")


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class GridSpec:
    d: int
    N: int

    @property
    def h(self) -> float:
        return 1.0 / (self.N + 1)

    @property
    def h_exact(self) -> Fraction:
        return Fraction(1, self.N + 1)

    @property
    def inv_h2(self) -> int:
        return (self.N + 1) ** 2

    @property
    def dim(self) -> int:
        return self.N**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def truncation_bits(self) -> int:
        """``ceil(log2(1/h))`` fractional bits kept when sampling ``V``."""
        return self.N.bit_length()

    @property
    def register_qubits(self) -> int:
        return self.d * math.ceil(math.log2(self.N))


def build_grid(d: int, N: int) -> GridSpec:
    """Validate and return the grid for ``d`` axes with ``N`` interior points each.

    ``N`` must be a power of two or one less than a power of two, so that
    either the register size or ``1/h`` is dyadic.
    """
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise RejectedInputError(f"d must be a positive integer, got {d!r}")
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise RejectedInputError(f"N must be an integer >= 2, got {N!r}")
    d, N = int(d), int(N)
    if not (_is_power_of_two(N) or _is_power_of_two(N + 1)):
        raise RejectedInputError(
            f"N={N} is not a power of two (nor one less than a power of two)"
        )
    if d * math.log2(N) >= math.log2(np.iinfo(np.intp).max):
        raise CapacityError(f"N^d = {N}^{d} exceeds the addressable index range")
    return GridSpec(d=d, N=N)


def check_multi_index(grid: GridSpec, k: Sequence[int]) -> tuple[int, ...]:
    k = tuple(int(ki) for ki in k)
    if len(k) != grid.d:
        raise RejectedInputError(f"multi-index {k} has {len(k)} entries, need {grid.d}")
    if any(ki < 1 or ki > grid.N for ki in k):
        raise RejectedInputError(f"multi-index {k} outside [1, {grid.N}]^{grid.d}")
    return k


def laplacian_eigenvalues_1d(grid: GridSpec) -> np.ndarray:
    """One-axis eigenvalues ``(2/h^2) sin^2(pi h k / 2)`` for ``k = 1..N``."""
    k = np.arange(1, grid.N + 1)
    return 2.0 * grid.inv_h2 * np.sin(np.pi * grid.h * k / 2.0) ** 2


def laplacian_eigenvalue_grid(grid: GridSpec) -> np.ndarray:
    """Eigenvalue of ``-1/2 Delta_h`` for every multi-index, as a flat array.

    Entry ``i`` belongs to the multi-index whose C-order position is ``i``.
    """
    e1 = laplacian_eigenvalues_1d(grid)
    total = np.zeros(grid.shape)
    for axis in range(grid.d):
        shape = [1] * grid.d
        shape[axis] = grid.N
        total = total + e1.reshape(shape)
    return total.reshape(-1)


def laplacian_eigenvalue(grid: GridSpec, k: Sequence[int]) -> float:
    k = check_multi_index(grid, k)
    e1 = laplacian_eigenvalues_1d(grid)
    return float(sum(e1[ki - 1] for ki in k))


def sine_vector(grid: GridSpec, k: int) -> np.ndarray:
    ell = np.arange(1, grid.N + 1)
    return np.sqrt(2.0 * grid.h) * np.sin(k * ell * np.pi * grid.h)


def laplacian_eigenvector(grid: GridSpec, k: Sequence[int]) -> np.ndarray:
    k = check_multi_index(grid, k)
    vec = np.ones(1)
    for ki in k:
        vec = np.kron(vec, sine_vector(grid, ki))
    return vec


def laplacian_eigenpair(grid: GridSpec, k: Sequence[int]) -> tuple[float, np.ndarray]:
    return laplacian_eigenvalue(grid, k), laplacian_eigenvector(grid, k)


def flat_position(grid: GridSpec, k: Sequence[int]) -> int:
    k = check_multi_index(grid, k)
    return int(np.ravel_multi_index(tuple(ki - 1 for ki in k), grid.shape))


def multi_index_at(grid: GridSpec, position: int) -> tuple[int, ...]:
    return tuple(int(i) + 1 for i in np.unravel_index(position, grid.shape))


def sine_matrix(N: int) -> np.ndarray:
    """Orthogonal, symmetric, involutory matrix with rows ``v_k``."""
    idx = np.arange(1, N + 1)
    return np.sqrt(2.0 / (N + 1)) * np.sin(np.outer(idx, idx) * np.pi / (N + 1))


def sine_transform(x: np.ndarray, grid: GridSpec, method: str = "fft") -> np.ndarray:
    """Coefficients of ``x`` in the tensor sine basis (the transform is its own inverse).

    ``method="fft"`` uses a type-I DST per axis; ``"matrix"`` multiplies by the
    explicit ``N x N`` sine matrix, O(N^2) per axis.
    """
    x = np.asarray(x)
    if x.shape[-1] != grid.dim:
        raise RejectedInputError(
            f"state length {x.shape[-1]} does not match grid dimension {grid.dim}"
        )
    batch = x.shape[:-1]
    y = x.reshape(batch + grid.shape)
    axes = tuple(range(len(batch), len(batch) + grid.d))
    if method == "fft":
        y = scipy.fft.dstn(y, type=1, norm="ortho", axes=axes)
    elif method == "matrix":
        S = sine_matrix(grid.N)
        for ax in axes:
            y = np.moveaxis(np.tensordot(y, S, axes=([ax], [1])), -1, ax)
    else:
        raise RejectedInputError(f"unknown transform method {method!r}")
    return y.reshape(batch + (grid.dim,))


# --------------------------------------------------------------------------
# Potentials


@dataclass(frozen=True)
class Potential:
    """A non-negative potential on ``[0,1]^d`` with bounds ``M`` (values) and ``C`` (partials).

    ``evaluator`` maps an ``(P, d)`` array of points to ``P`` values. Tabulated
    potentials carry ``table`` (grid-aligned samples) instead.
    """

    evaluator: Optional[Callable[[np.ndarray], np.ndarray]]
    M: float
    C: float
    family_tag: str
    params: dict = field(default_factory=dict)
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family_tag not in POTENTIAL_FAMILIES:
            raise RejectedInputError(f"unknown potential family {self.family_tag!r}")
        if self.M < 0 or self.C < 0:
            raise RejectedInputError("potential bounds M and C must be non-negative")
        if self.family_tag == "tabulated":
            if self.table is None:
                raise RejectedInputError("tabulated potential needs a table")
        elif self.evaluator is None:
            raise RejectedInputError(f"{self.family_tag} potential needs an evaluator")

    @property
    def is_zero(self) -> bool:
        return self.family_tag == "zero"


def zero_potential() -> Potential:
    return Potential(lambda x: np.zeros(len(x)), 0.0, 0.0, "zero")


def constant_potential(value: float) -> Potential:
    value = float(value)
    return Potential(
        lambda x: np.full(len(x), value), value, 0.0, "constant", {"value": value}
    )


def product_sine_potential(amplitude: float = 1.0) -> Potential:
    """``V(x) = A prod_i sin(pi x_i)``."""
    a = float(amplitude)
    return Potential(
        lambda x: a * np.prod(np.sin(np.pi * x), axis=1),
        a,
        a * np.pi,
        "product-sine",
        {"amplitude": a},
    )


def well_potential(amplitude: float = 1.0, profile: str = "harmonic", d: int = 1) -> Potential:
    """``V(x) = (A/d) sum_i w(x_i)`` with ``w`` one of three unit-height profiles.

    ``harmonic``: ``(2x-1)^2``; ``linear``: ``x``; ``parabolic``: ``4x(1-x)``.
    """
    a = float(amplitude)
    profiles = {
        "harmonic": (lambda s: (2.0 * s - 1.0) ** 2, 4.0),
        "linear": (lambda s: s, 1.0),
        "parabolic": (lambda s: 4.0 * s * (1.0 - s), 4.0),
    }
    if profile not in profiles:
        raise RejectedInputError(f"unknown well profile {profile!r}")
    w, slope = profiles[profile]
    return Potential(
        lambda x: a * np.mean(w(x), axis=1),
        a,
        a * slope / d,
        "well",
        {"amplitude": a, "profile": profile},
    )


def tabulated_potential(values, M: Optional[float] = None, C: float = 0.0) -> Potential:
    table = np.asarray(values, dtype=float).reshape(-1).copy()
    table.setflags(write=False)
    bound = float(table.max()) if M is None else float(M)
    return Potential(None, bound, float(C), "tabulated", {}, table)


def read_table(path) -> np.ndarray:
    """Read ``N^d`` samples: whitespace text for .txt/.dat/.csv, raw little-endian float64 otherwise."""
    path = Path(path)
    if path.suffix.lower() in (".txt", ".dat", ".csv"):
        return np.loadtxt(path, delimiter="," if path.suffix.lower() == ".csv" else None).reshape(-1)
    return np.fromfile(path, dtype="<f8")


def write_table(path, values) -> None:
    path = Path(path)
    values = np.asarray(values, dtype="<f8").reshape(-1)
    if path.suffix.lower() in (".txt", ".dat"):
        np.savetxt(path, values, fmt="%.17g")
    else:
        values.tofile(path)


def load_tabulated(path, grid: GridSpec, M: Optional[float] = None, C: float = 0.0) -> Potential:
    values = read_table(path)
    if values.size != grid.dim:
        raise RejectedInputError(
            f"{path}: {values.size} values, grid needs N^d = {grid.dim}"
        )
    return tabulated_potential(values, M=M, C=C)


def grid_points(grid: GridSpec) -> np.ndarray:
    """Interior points ``(l_1 h, ..., l_d h)`` in C order, shape ``(N^d, d)``."""
    axes = [np.arange(1, grid.N + 1) * grid.h] * grid.d
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def truncate_bits(values: np.ndarray, bits: int) -> np.ndarray:
    """Truncate non-negative values toward zero to ``bits`` fractional bits."""
    scale = float(2**bits)
    return np.floor(np.asarray(values, dtype=float) * scale) / scale


def sample_potential(p: Potential, grid: GridSpec) -> np.ndarray:
    if p.family_tag == "tabulated":
        if p.table.size != grid.dim:
            raise RejectedInputError(
                f"tabulated potential has {p.table.size} values, grid needs {grid.dim}"
            )
        raw = np.array(p.table, dtype=float)
    else:
        raw = np.asarray(p.evaluator(grid_points(grid)), dtype=float).reshape(-1)
    bad = np.flatnonzero(~((raw >= 0.0) & (raw <= p.M)))
    if bad.size:
        pos = int(bad[0])
        point = tuple(float(c) for c in grid_points(grid)[pos]) if grid.dim <= 1 << 22 else pos
        raise BoundViolationError(
            f"V={raw[pos]!r} at grid point {point} (index {multi_index_at(grid, pos)}) "
            f"outside [0, {p.M}]"
        )
    return truncate_bits(raw, grid.truncation_bits)


# --------------------------------------------------------------------------
# Hamiltonian


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HamiltonianParts:
    """``M_h`` split as ``R (H_1 + H_2)`` with ``H_1 = -Delta_h/(2R)`` and ``H_2 = V_h/R``."""

    grid: GridSpec
    v_diag: np.ndarray
    R: float
    sigma: float = 0.0
    M: float = 0.0
    laplacian_diag: np.ndarray = field(repr=False, default=None)

    @property
    def h1_norm_bound(self) -> float:
        return 2.0 / 3.0

    @property
    def h2_norm_bound(self) -> float:
        return self.M / self.R

    @property
    def has_potential(self) -> bool:
        return bool(np.any(self.v_diag != 0.0))

    def laplacian_matvec(self, x: np.ndarray) -> np.ndarray:
        """``(-1/2 Delta_h) x`` through the 2d+1 point stencil."""
        g = self.grid
        x = np.asarray(x)
        if x.shape[-1] != g.dim:
            raise RejectedInputError(f"state length {x.shape[-1]} != {g.dim}")
        batch = x.shape[:-1]
        y = x.reshape(batch + g.shape)
        out = g.d * g.inv_h2 * y.astype(np.result_type(y, float))
        off = -0.5 * g.inv_h2
        nb = len(batch)
        for axis in range(nb, nb + g.d):
            lo = [slice(None)] * y.ndim
            hi = [slice(None)] * y.ndim
            lo[axis] = slice(0, -1)
            hi[axis] = slice(1, None)
            out[tuple(lo)] += off * y[tuple(hi)]
            out[tuple(hi)] += off * y[tuple(lo)]
        return out.reshape(batch + (g.dim,))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.laplacian_matvec(x) + self.v_diag * np.asarray(x)

    def exp_h1(self, state: np.ndarray, z: float, method: str = "fft") -> np.ndarray:
        """``exp(i z H_1) state`` via the sine eigenbasis of the Laplacian."""
        state = np.asarray(state, dtype=complex)
        if z == 0.0:
            return state.copy()
        coeffs = sine_transform(state, self.grid, method)
        coeffs *= np.exp(1j * z * self.laplacian_diag / self.R)
        return sine_transform(coeffs, self.grid, method)

    def exp_h2(self, state: np.ndarray, z: float) -> np.ndarray:
        state = np.asarray(state, dtype=complex)
        if state.shape[-1] != self.grid.dim:
            raise RejectedInputError(f"state length {state.shape[-1]} != {self.grid.dim}")
        if z == 0.0:
            return state.copy()
        return state * np.exp(1j * z * self.v_diag / self.R)


def assemble_hamiltonian(
    grid: GridSpec, v: np.ndarray, M: Optional[float] = None, sigma: float = 0.0
) -> HamiltonianParts:
    """Bundle the sampled potential with the stencil; ``R = 3 d h^-2``.

    ``M`` defaults to the largest sampled value.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != grid.dim:
        raise RejectedInputError(f"potential has {v.size} samples, grid needs {grid.dim}")
    bound = float(v.max()) if M is None else float(M)
    if np.any(v > bound):
        raise BoundViolationError(f"sampled potential exceeds declared bound M={bound}")
    return HamiltonianParts(
        grid=grid,
        v_diag=_frozen(v),
        R=float(3 * grid.d * grid.inv_h2),
        sigma=float(sigma),
        M=bound,
        laplacian_diag=_frozen(laplacian_eigenvalue_grid(grid)),
    )


def apply_h1_exponential(ham: HamiltonianParts, state: np.ndarray, z: float) -> np.ndarray:
    return ham.exp_h1(state, z)


def apply_h2_exponential(ham: HamiltonianParts, state: np.ndarray, z: float) -> np.ndarray:
    return ham.exp_h2(state, z)

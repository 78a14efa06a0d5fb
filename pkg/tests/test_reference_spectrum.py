import math

import numpy as np
import pytest

from trialqpe.errors import CapacityError, RejectedInputError
from trialqpe.grid_hamiltonian import (
    assemble_hamiltonian,
    build_grid,
    product_sine_potential,
    sample_potential,
    tabulated_potential,
)
from trialqpe.reference_spectrum import (
    analytic_spectrum,
    continuum_levels,
    dense_matrix,
    dense_spectrum,
    discretization_errors,
    distinct_levels,
    weinberger_check,
)

from oracles import continuum_brute, stencil_matrix


def smooth_potential(seed, N, top=2.0):
    """A few random sine modes shifted and scaled into ``[0, top]``."""
    rng = np.random.default_rng(seed)
    x = np.arange(1, N + 1) / (N + 1)
    f = sum(rng.normal() * np.sin((m + 1) * np.pi * x) / (m + 1) for m in range(4))
    f = f - f.min()
    return top * f / f.max()


class TestDense:
    def test_three_point(self):
        g = build_grid(1, 3)
        spec = dense_spectrum(assemble_hamiltonian(g, np.zeros(3), M=0.0))
        expect = [32 * math.sin(k * math.pi / 8) ** 2 for k in (1, 2, 3)]
        assert np.allclose(spec.eigenvalues, expect, atol=1e-12)
        assert spec.source == "dense"

    def test_tensor_sums(self):
        g = build_grid(2, 4)
        spec = dense_spectrum(assemble_hamiltonian(g, np.zeros(16), M=0.0))
        one = [50 * math.sin(k * math.pi / 10) ** 2 for k in range(1, 5)]
        sums = sorted(a + b for a in one for b in one)
        assert np.allclose(spec.eigenvalues, sums, atol=1e-10)

    def test_sine_ground_window(self):
        g = build_grid(1, 7)
        v = sample_potential(product_sine_potential(1.0), g)
        E = dense_spectrum(assemble_hamiltonian(g, v, M=1.0)).eigenvalues[0]
        E0 = 128 * math.sin(math.pi / 16) ** 2
        assert E0 <= E <= E0 + 1

    def test_matrix_matches_oracle(self):
        g = build_grid(2, 4)
        v = sample_potential(product_sine_potential(1.0), g)
        assert np.allclose(dense_matrix(assemble_hamiltonian(g, v, M=1.0)), stencil_matrix(2, 4, v))

    def test_cap(self):
        g = build_grid(2, 16)
        with pytest.raises(CapacityError, match="analytic"):
            dense_spectrum(assemble_hamiltonian(g, np.zeros(256), M=0.0), cap=128)

    @pytest.mark.parametrize("d,N", [(1, 8), (1, 16), (2, 4), (2, 8), (2, 16)])
    def test_analytic_agrees(self, d, N):
        g = build_grid(d, N)
        dense = dense_spectrum(assemble_hamiltonian(g, np.zeros(g.dim), M=0.0))
        assert np.allclose(dense.eigenvalues, analytic_spectrum(g).eigenvalues, atol=1e-8)

    def test_table_invariants(self):
        g = build_grid(2, 7)
        v = sample_potential(product_sine_potential(1.0), g)
        ham = assemble_hamiltonian(g, v, M=1.0)
        spec = dense_spectrum(ham)
        assert np.all(np.diff(spec.eigenvalues) >= 0)
        U = spec.eigenvectors
        assert np.max(np.abs(U.T @ U - np.eye(g.dim))) < 1e-8
        for s in range(g.dim):
            r = ham.matvec(U[:, s]) - spec.eigenvalues[s] * U[:, s]
            assert np.linalg.norm(r) < 1e-8 * max(1.0, abs(spec.eigenvalues[s]))

    def test_analytic_positions(self):
        g = build_grid(2, 4)
        spec = analytic_spectrum(g)
        assert spec.multi_indices[0] == (1, 1)
        assert set(spec.multi_indices[1:3]) == {(1, 2), (2, 1)}

    @pytest.mark.parametrize("seed", range(5))
    def test_monotone_under_potential(self, seed):
        g = build_grid(1, 15)
        v = sample_potential(tabulated_potential(smooth_potential(seed, 15), M=2.0), g)
        base = analytic_spectrum(g).eigenvalues
        pert = dense_spectrum(assemble_hamiltonian(g, v, M=2.0)).eigenvalues
        assert np.all(pert >= base - 1e-10)
        assert np.all(pert <= base + 2.0 + 1e-10)


class TestClusters:
    def test_exact_duplicates(self):
        c = distinct_levels(np.array([1.0, 1.0, 2.0]), 0.1)
        assert c.levels == (1.0, 2.0) and c.multiplicities == (2, 1)

    def test_within_tol(self):
        assert distinct_levels(np.array([1.0, 1.05, 2.0]), 0.1).levels == (1.0, 2.0)

    def test_chain_uses_minimum(self):
        c = distinct_levels(np.array([0.0, 0.08, 0.16]), 0.1)
        assert c.levels == (0.0, 0.16)
        assert [list(r) for r in c.members] == [[0, 1], [2]]

    def test_square_degeneracy(self):
        c = distinct_levels(analytic_spectrum(build_grid(2, 8)), 1e-9)
        assert c.multiplicities[1] == 2

    def test_bad_tol(self):
        with pytest.raises(RejectedInputError):
            distinct_levels(np.array([1.0]), 0.0)


class TestContinuum:
    def test_square(self):
        c = continuum_levels(2, count=2)
        assert c.levels[0] == pytest.approx(math.pi**2)
        assert c.levels[1] == pytest.approx(2.5 * math.pi**2)
        assert c.multiplicities == (1, 2)

    @pytest.mark.parametrize("d", [3, 5, 8])
    def test_first_excited_multiplicity(self, d):
        c = continuum_levels(d, count=2)
        assert c.levels[0] == pytest.approx(d * math.pi**2 / 2)
        assert c.levels[1] == pytest.approx((d + 3) * math.pi**2 / 2)
        assert c.multiplicities[1] == d

    def test_line(self):
        c = continuum_levels(1, count=6)
        assert np.allclose(c.levels, [math.pi**2 / 2 * k * k for k in range(1, 7)])
        assert set(c.multiplicities) == {1}

    def test_cube_single(self):
        c = continuum_levels(3, bound=3 * math.pi**2 * (1 - 1e-9))
        assert c.levels == (pytest.approx(1.5 * math.pi**2),)
        # the bound is inclusive: k = (1,1,2) sits exactly on 3 pi^2
        c = continuum_levels(3, bound=3 * math.pi**2)
        assert c.levels == (pytest.approx(1.5 * math.pi**2), pytest.approx(3 * math.pi**2))
        assert c.multiplicities == (1, 3)

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_brute_force(self, d):
        kmax = 7
        brute = [(s, m) for s, m in continuum_brute(d, kmax) if s <= kmax**2]
        c = continuum_levels(d, bound=math.pi**2 / 2 * (kmax**2 + d - 1))
        got = [(round(2 * E / math.pi**2), m) for E, m in zip(c.levels, c.multiplicities)]
        assert got[: len(brute)] == brute

    def test_below_ground(self):
        with pytest.raises(RejectedInputError):
            continuum_levels(2, bound=1.0)


class TestWeinberger:
    def test_direct_error_value(self):
        _, errs = discretization_errors(1, 0, [8])
        assert errs[0] == pytest.approx(abs(math.pi**2 / 2 - 2 * 81 * math.sin(math.pi / 18) ** 2), rel=1e-12)

    def test_line_rate(self):
        p, C = weinberger_check(1, 0, [8, 16, 32, 64])
        assert 1.8 <= p <= 2.2 and C > 0

    def test_square_rate(self):
        p, _ = weinberger_check(2, 0, [4, 8, 16])
        assert 1.8 <= p <= 2.2

    def test_sequence_rules(self):
        with pytest.raises(RejectedInputError):
            weinberger_check(1, 0, [8, 16])
        with pytest.raises(RejectedInputError):
            weinberger_check(1, 0, [16, 8, 32])

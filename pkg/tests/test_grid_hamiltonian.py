import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trialqpe.errors import BoundViolationError, CapacityError, RejectedInputError
from trialqpe.grid_hamiltonian import (
    apply_h1_exponential,
    apply_h2_exponential,
    assemble_hamiltonian,
    build_grid,
    constant_potential,
    flat_position,
    grid_points,
    laplacian_eigenpair,
    laplacian_eigenvalue_grid,
    load_tabulated,
    multi_index_at,
    product_sine_potential,
    sample_potential,
    sine_transform,
    tabulated_potential,
    well_potential,
    write_table,
    zero_potential,
)

from oracles import expm_hermitian, laplacian_value, stencil_matrix


def rand_state(rng, n):
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    return x / np.linalg.norm(x)


class TestBuildGrid:
    def test_mesh_size(self):
        g = build_grid(1, 3)
        assert g.h == 0.25
        assert g.h_exact == Fraction(1, 4)
        assert g.h_exact * (g.N + 1) == 1

    def test_two_dim(self):
        g = build_grid(2, 4)
        assert g.h == pytest.approx(0.2)
        assert g.dim == 16

    def test_not_power_of_two(self):
        with pytest.raises(RejectedInputError):
            build_grid(1, 5)

    @pytest.mark.parametrize("N", [2, 3, 4, 7, 8, 15, 16, 31, 32])
    def test_accepted_sizes(self, N):
        assert build_grid(1, N).N == N

    @pytest.mark.parametrize("d,N", [(0, 4), (1, 1), (1, 6), (2, 12)])
    def test_rejected(self, d, N):
        with pytest.raises(RejectedInputError):
            build_grid(d, N)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            build_grid(40, 4)

    def test_register_size(self):
        g = build_grid(3, 8)
        assert g.register_qubits == 9
        assert g.truncation_bits == math.ceil(math.log2(9))


class TestEigenpairs:
    def test_closed_form(self):
        E, u = laplacian_eigenpair(build_grid(1, 3), (1,))
        assert E == pytest.approx(32 * math.sin(math.pi / 8) ** 2, rel=1e-14)
        assert E == pytest.approx(4.68629, abs=1e-5)

    def test_positive_ground_vector(self):
        for N in (4, 7, 8):
            _, u = laplacian_eigenpair(build_grid(2, N), (1, 1))
            assert np.all(u > 0)

    def test_stencil_residual(self):
        g = build_grid(1, 7)
        E, u = laplacian_eigenpair(g, (3,))
        A = stencil_matrix(1, 7)
        assert np.linalg.norm(A @ u - E * u) < 1e-10

    @pytest.mark.parametrize("d,N", [(1, 8), (1, 16), (2, 4), (2, 7), (2, 8)])
    def test_orthonormal_and_residual(self, d, N):
        g = build_grid(d, N)
        idx = [multi_index_at(g, p) for p in range(g.dim)]
        U = np.array([laplacian_eigenpair(g, k)[1] for k in idx])
        assert np.max(np.abs(U @ U.T - np.eye(g.dim))) < 1e-10
        ham = assemble_hamiltonian(g, np.zeros(g.dim), M=0.0)
        for k, u in zip(idx, U):
            E = laplacian_value(N, k)
            assert np.linalg.norm(ham.laplacian_matvec(u) - E * u) < 1e-9 * E

    def test_eigenvalue_grid_order(self):
        g = build_grid(2, 4)
        flat = laplacian_eigenvalue_grid(g)
        for p in range(g.dim):
            assert flat[p] == pytest.approx(laplacian_value(4, multi_index_at(g, p)), rel=1e-13)

    def test_out_of_range(self):
        g = build_grid(2, 4)
        with pytest.raises(RejectedInputError):
            laplacian_eigenpair(g, (0, 1))
        with pytest.raises(RejectedInputError):
            laplacian_eigenpair(g, (1, 5))
        with pytest.raises(RejectedInputError):
            laplacian_eigenpair(g, (1,))

    @given(st.integers(1, 3), st.sampled_from([2, 3, 4, 7, 8]), st.data())
    @settings(max_examples=40, deadline=None)
    def test_position_roundtrip(self, d, N, data):
        g = build_grid(d, N)
        k = tuple(data.draw(st.integers(1, N)) for _ in range(d))
        assert multi_index_at(g, flat_position(g, k)) == k


class TestSineTransform:
    @pytest.mark.parametrize("d,N", [(1, 7), (2, 4), (3, 3)])
    def test_matches_explicit_basis(self, d, N):
        g = build_grid(d, N)
        rng = np.random.default_rng(3)
        x = rand_state(rng, g.dim)
        U = np.array([laplacian_eigenpair(g, multi_index_at(g, p))[1] for p in range(g.dim)])
        assert np.allclose(sine_transform(x, g), U @ x, atol=1e-13)
        assert np.allclose(sine_transform(x, g, method="matrix"), U @ x, atol=1e-13)

    def test_involution(self):
        g = build_grid(2, 8)
        x = rand_state(np.random.default_rng(0), g.dim)
        assert np.allclose(sine_transform(sine_transform(x, g), g), x, atol=1e-13)


class TestSampling:
    def test_zero(self):
        g = build_grid(2, 4)
        assert np.all(sample_potential(zero_potential(), g) == 0)

    def test_constant_exact(self):
        v = sample_potential(constant_potential(1.0), build_grid(1, 3))
        assert np.all(v == 1.0)

    def test_sine_midpoint(self):
        g = build_grid(1, 7)
        v = sample_potential(product_sine_potential(1.0), g)
        assert v[3] == 1.0
        # truncation oracle: floor(sin(l pi/8) * 8) / 8
        expect = [math.floor(math.sin(l * math.pi / 8) * 8) / 8 for l in range(1, 8)]
        assert v.tolist() == expect

    def test_truncation_toward_zero(self):
        g = build_grid(1, 15)
        raw = product_sine_potential(1.0).evaluator(grid_points(g))
        v = sample_potential(product_sine_potential(1.0), g)
        assert np.all(v <= raw) and np.all(raw - v < 2.0**-4)
        assert np.all(v * 16 == np.round(v * 16))

    def test_bound_violation_names_point(self):
        g = build_grid(1, 3)
        bad = constant_potential(2.0)
        bad = type(bad)(bad.evaluator, 1.0, 0.0, "constant", {"value": 2.0})
        with pytest.raises(BoundViolationError, match="grid point"):
            sample_potential(bad, g)

    def test_negative_rejected(self):
        g = build_grid(1, 3)
        with pytest.raises(BoundViolationError):
            sample_potential(tabulated_potential([-0.1, 0.0, 0.0], M=1.0), g)

    def test_well_profiles(self):
        g = build_grid(2, 7)
        for prof in ("harmonic", "linear", "parabolic"):
            v = sample_potential(well_potential(2.0, prof, 2), g)
            assert v.min() >= 0 and v.max() <= 2.0

    def test_tabulated_file(self, tmp_path):
        g = build_grid(2, 3)
        vals = np.arange(9) / 8.0 // 0.25 * 0.25
        write_table(tmp_path / "v.bin", vals)
        write_table(tmp_path / "v.txt", vals)
        for name in ("v.bin", "v.txt"):
            p = load_tabulated(tmp_path / name, g)
            assert np.array_equal(sample_potential(p, g), vals)
        # row-major: the last coordinate runs fastest
        pts = grid_points(g)
        assert np.allclose(pts[1] - pts[0], [0.0, g.h])

    def test_tabulated_wrong_size(self, tmp_path):
        write_table(tmp_path / "v.bin", np.zeros(5))
        with pytest.raises(RejectedInputError):
            load_tabulated(tmp_path / "v.bin", build_grid(2, 3))


class TestHamiltonian:
    def test_stencil_row(self):
        g = build_grid(1, 3)
        ham = assemble_hamiltonian(g, np.zeros(3), M=0.0)
        e1 = np.array([1.0, 0.0, 0.0])
        assert np.allclose(ham.matvec(e1), 16 * np.array([1.0, -0.5, 0.0]))
        assert np.allclose(ham.matvec(e1), stencil_matrix(1, 3)[:, 0])

    def test_matches_dense_oracle(self):
        g = build_grid(2, 4)
        v = sample_potential(product_sine_potential(1.0), g)
        ham = assemble_hamiltonian(g, v, M=1.0)
        A = stencil_matrix(2, 4, v)
        x = np.random.default_rng(1).normal(size=16)
        assert np.allclose(ham.matvec(x), A @ x, atol=1e-12)

    def test_symmetry_random_pairs(self):
        g = build_grid(2, 4)
        ham = assemble_hamiltonian(g, sample_potential(constant_potential(1.0), g), M=1.0)
        rng = np.random.default_rng(7)
        for _ in range(20):
            x, y = rng.normal(size=16), rng.normal(size=16)
            assert abs(x @ ham.matvec(y) - ham.matvec(x) @ y) < 1e-10

    def test_scaling_and_bounds(self):
        g = build_grid(2, 7)
        v = sample_potential(product_sine_potential(1.0), g)
        ham = assemble_hamiltonian(g, v, M=1.0)
        assert ham.R == 3 * 2 * 64
        assert ham.h1_norm_bound == pytest.approx(2 / 3)
        assert ham.h2_norm_bound == 1.0 / ham.R
        assert np.max(np.abs(v)) / ham.R <= ham.h2_norm_bound
        H1 = stencil_matrix(2, 7) / ham.R
        assert np.linalg.norm(H1, 2) <= 2 / 3
        assert ham.sigma <= np.linalg.eigvalsh(stencil_matrix(2, 7, v))[0]

    def test_length_mismatch(self):
        with pytest.raises(RejectedInputError):
            assemble_hamiltonian(build_grid(1, 4), np.zeros(5))

    def test_v_above_M(self):
        with pytest.raises(BoundViolationError):
            assemble_hamiltonian(build_grid(1, 3), np.ones(3), M=0.5)


class TestExponentials:
    @pytest.fixture
    def sine7(self):
        g = build_grid(1, 7)
        v = sample_potential(product_sine_potential(1.0), g)
        return assemble_hamiltonian(g, v, M=1.0)

    def test_zero_time_identity(self, sine7):
        x = rand_state(np.random.default_rng(0), 7)
        assert np.array_equal(apply_h1_exponential(sine7, x, 0.0), x)
        assert np.array_equal(apply_h2_exponential(sine7, x, 0.0), x)

    def test_h2_identity_without_potential(self):
        g = build_grid(2, 4)
        ham = assemble_hamiltonian(g, np.zeros(16), M=0.0)
        x = rand_state(np.random.default_rng(0), 16)
        assert np.allclose(apply_h2_exponential(ham, x, 3.7), x, atol=0)

    def test_h1_eigenvector_phase(self, sine7):
        E, u = laplacian_eigenpair(sine7.grid, (2,))
        z = 0.9
        out = apply_h1_exponential(sine7, u.astype(complex), z)
        assert np.allclose(out, np.exp(1j * z * E / sine7.R) * u, atol=1e-12)

    def test_h1_matches_expm(self, sine7):
        x = rand_state(np.random.default_rng(2), 7)
        H1 = stencil_matrix(1, 7) / sine7.R
        assert np.allclose(apply_h1_exponential(sine7, x, 0.3), expm_hermitian(H1, 0.3) @ x, atol=1e-8)

    def test_h2_matches_expm(self, sine7):
        x = rand_state(np.random.default_rng(4), 7)
        H2 = np.diag(sine7.v_diag) / sine7.R
        assert np.allclose(apply_h2_exponential(sine7, x, 1.1), expm_hermitian(H2, 1.1) @ x, atol=1e-12)

    @given(st.floats(-50, 50), st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_unitary(self, z, seed):
        g = build_grid(2, 4)
        ham = assemble_hamiltonian(g, sample_potential(product_sine_potential(1.0), g), M=1.0)
        x = rand_state(np.random.default_rng(seed), 16)
        for fn in (apply_h1_exponential, apply_h2_exponential):
            assert abs(np.linalg.norm(fn(ham, x, z)) - 1.0) < 1e-10

    def test_batched(self, sine7):
        X = np.stack([rand_state(np.random.default_rng(s), 7) for s in range(3)])
        out = apply_h1_exponential(sine7, X, 0.4)
        for row, x in zip(out, X):
            assert np.allclose(row, apply_h1_exponential(sine7, x, 0.4))

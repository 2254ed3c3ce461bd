import numpy as np
import pytest

from wfe_lab.grid import Grid1D, GridSpecError, make_gaussian_packet
from wfe_lab.states import (
    NormalizationError,
    ParticleCapError,
    ProductState,
    ProductSuperposition,
    WaveFunctionFull,
    inner_product,
    make_cat_state,
    make_product_cat,
    state_norm,
)


@pytest.fixture
def grid():
    return Grid1D.from_bounds(-10.0, 10.0, 64, periodic=True)


def random_full(grid, n_particles, rng):
    shape = (grid.n_points,) * n_particles
    amps = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return WaveFunctionFull(grid, amps).normalized()


class TestWaveFunctionFull:
    def test_norm_and_normalized(self, grid, rng):
        psi = random_full(grid, 2, rng)
        assert psi.norm == pytest.approx(1.0, abs=1e-13)
        assert psi.probability_masses().sum() == pytest.approx(1.0, abs=1e-12)

    def test_axis_shape_must_match_grid(self, grid):
        with pytest.raises(GridSpecError):
            WaveFunctionFull(grid, np.ones((64, 32), dtype=complex))

    def test_nonfinite_amplitudes_rejected(self, grid):
        amps = np.ones(64, dtype=complex)
        amps[10] = np.nan
        with pytest.raises(ValueError):
            WaveFunctionFull(grid, amps)

    def test_zero_state_cannot_be_normalized(self, grid):
        with pytest.raises(NormalizationError):
            WaveFunctionFull(grid, np.zeros(64, dtype=complex)).normalized()

    def test_particle_cap(self, grid):
        with pytest.raises(ParticleCapError):
            WaveFunctionFull(grid, np.ones((8,) * 5, dtype=complex), cap=4)


class TestProductState:
    def test_factor_normalization_enforced(self, grid):
        with pytest.raises(NormalizationError):
            ProductState(grid, (np.full(64, 2.0 + 0j),))

    def test_from_factors_normalizes(self, grid):
        raw = np.exp(-grid.x**2) * (3.0 + 0j)
        state = ProductState.from_factors(grid, [raw, 2.0 * raw])
        for factor in state.factors:
            norm2 = (np.abs(factor) ** 2).sum() * grid.dx
            assert norm2 == pytest.approx(1.0, abs=1e-13)
        assert state.norm == 1.0

    def test_from_factors_rejects_zero(self, grid):
        with pytest.raises(NormalizationError):
            ProductState.from_factors(grid, [np.zeros(64)])

    def test_factor_shape_checked(self, grid):
        with pytest.raises(GridSpecError):
            ProductState.from_factors(grid, [np.ones(32)])

    def test_to_full_is_outer_product(self, grid):
        f = make_gaussian_packet(grid, -1.0, 1.0)
        g = make_gaussian_packet(grid, 1.5, 1.1, momentum=0.4)
        full = ProductState(grid, (f, g)).to_full()
        assert np.abs(full.amplitudes - np.outer(f, g)).max() < 1e-15
        assert full.norm == pytest.approx(1.0, abs=1e-12)

    def test_to_full_respects_element_guard(self):
        g = Grid1D.from_bounds(-10.0, 10.0, 512, periodic=True)
        f = make_gaussian_packet(g, 0.0, 1.0)
        state = ProductState(g, (f, f, f))
        with pytest.raises(ParticleCapError):
            state.to_full(cap=8)  # 512**3 amplitudes trip the memory guard


class TestProductSuperposition:
    def test_coefficient_count_checked(self, grid):
        f = make_gaussian_packet(grid, 0.0, 1.0)
        branch = ProductState(grid, (f,))
        with pytest.raises(ValueError):
            ProductSuperposition(grid, (1.0, 0.5), (branch,))

    def test_branch_particle_numbers_must_agree(self, grid):
        f = make_gaussian_packet(grid, 0.0, 1.0)
        with pytest.raises(ValueError):
            ProductSuperposition(
                grid,
                (1.0, 1.0),
                (ProductState(grid, (f,)), ProductState(grid, (f, f))),
            )

    def test_gram_norm_matches_full_tensor(self, grid):
        left = make_gaussian_packet(grid, -1.0, 1.0)
        right = make_gaussian_packet(grid, 1.5, 1.2)
        branches = (
            ProductState(grid, (left, left)),
            ProductState(grid, (right, right)),
        )
        sup = ProductSuperposition(grid, (0.8, 0.6j), branches)
        dense = 0.8 * branches[0].to_full().amplitudes + 0.6j * branches[1].to_full().amplitudes
        dense_norm = WaveFunctionFull(grid, dense).norm
        assert sup.norm == pytest.approx(dense_norm, rel=1e-13)

    def test_normalized(self, grid):
        f = make_gaussian_packet(grid, -2.0, 1.0)
        g = make_gaussian_packet(grid, 2.0, 1.0)
        sup = ProductSuperposition(
            grid, (3.0, 4.0), (ProductState(grid, (f,)), ProductState(grid, (g,)))
        )
        assert sup.normalized().norm == pytest.approx(1.0, abs=1e-12)


class TestInnerProduct:
    def test_conjugate_symmetry_full(self, grid, rng):
        a = random_full(grid, 2, rng)
        b = random_full(grid, 2, rng)
        assert inner_product(a, b) == pytest.approx(np.conj(inner_product(b, a)))

    def test_product_route_matches_dense_route(self, grid):
        f = make_gaussian_packet(grid, -1.0, 1.0, momentum=0.3)
        g = make_gaussian_packet(grid, 1.0, 1.1)
        h = make_gaussian_packet(grid, 0.0, 1.0, momentum=-0.2)
        a = ProductState(grid, (f, g))
        b = ProductState(grid, (g, h))
        via_product = inner_product(a, b)
        via_dense = inner_product(a.to_full(), b.to_full())
        assert via_product == pytest.approx(via_dense, abs=1e-12)

    def test_grid_mismatch_rejected(self, grid, rng):
        other = Grid1D.from_bounds(-10.0, 10.0, 128, periodic=True)
        a = random_full(grid, 1, rng)
        b = WaveFunctionFull(other, np.ones(128, dtype=complex)).normalized()
        with pytest.raises(GridSpecError):
            inner_product(a, b)

    def test_particle_number_mismatch_rejected(self, grid, rng):
        with pytest.raises(ValueError):
            inner_product(random_full(grid, 1, rng), random_full(grid, 2, rng))

    def test_mixed_representations_unsupported(self, grid, rng):
        f = make_gaussian_packet(grid, 0.0, 1.0)
        with pytest.raises(TypeError):
            inner_product(ProductState(grid, (f,)), random_full(grid, 1, rng))


class TestCatStates:
    def test_cat_normalized_and_exchange_symmetric(self, grid):
        cat = make_cat_state(grid, 2, 6.0, 1.0)
        assert cat.norm == pytest.approx(1.0, abs=1e-12)
        assert np.abs(cat.amplitudes - cat.amplitudes.T).max() < 1e-15

    def test_product_cat_matches_dense_cat(self, grid):
        separation, sigma = 6.0, 1.0
        dense = make_cat_state(grid, 2, separation, sigma)
        sparse = make_product_cat(grid, 2, separation, sigma)
        rebuilt = sum(
            c * branch.to_full().amplitudes
            for c, branch in zip(sparse.coefficients, sparse.branches)
        )
        assert np.abs(rebuilt - dense.amplitudes).max() < 1e-14
        assert state_norm(sparse) == pytest.approx(1.0, abs=1e-12)

    def test_product_cat_scales_past_full_cap(self, grid):
        sparse = make_product_cat(grid, 12, 6.0, 1.0)
        assert sparse.n_particles == 12
        assert sparse.norm == pytest.approx(1.0, abs=1e-10)

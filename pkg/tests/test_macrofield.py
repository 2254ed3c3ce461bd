import numpy as np
import pytest

from wfe_lab.grid import Grid1D, RealField, TailMassError, make_gaussian_density
from wfe_lab.macrofield import (
    ResidualError,
    boundary_report,
    coupling_strength,
    lagrangian_value,
    poisson_residual,
    quadratic_kernel_energy,
    solve_poisson_pair,
    solve_third_order,
    third_order_residual,
)
from wfe_lab.observables import WfeParams, marginal_com_density, wfe_kernel
from wfe_lab.states import make_cat_state

PARAMS = WfeParams(w=1.0, n_particles=2)


def mixture_density(grid, centers=(-2.5, 2.5), sigmas=(1.2, 1.2), weights=None):
    if weights is None:
        weights = np.ones(len(centers))
    total = np.zeros(grid.n_points)
    for c, s, w in zip(centers, sigmas, weights):
        total += w * make_gaussian_density(grid, c, s).values
    return RealField(grid, total).normalized()


@pytest.fixture
def fine_grid():
    return Grid1D.from_bounds(-16.0, 16.0, 1536)


@pytest.fixture
def kernel_grid():
    # coarse enough for the O(n^2) kernel quadrature used as the oracle
    return Grid1D.from_bounds(-16.0, 16.0, 768)


class TestPoissonPair:
    def test_reconstruction_matches_direct_quadrature(self, kernel_grid):
        h = mixture_density(kernel_grid)
        sol = solve_poisson_pair(h, PARAMS)
        x = kernel_grid.x
        oracle = np.trapezoid(
            np.abs(x[:, None] - x[None, :]) * sol.source.values[None, :], x, axis=1
        )
        combined = sol.combined().values
        scale = np.abs(oracle).max()
        assert np.abs(combined - oracle).max() < 1e-8 * scale

    def test_one_sided_ends_vanish_exactly(self, fine_grid):
        sol = solve_poisson_pair(mixture_density(fine_grid), PARAMS)
        assert sol.phi_minus.values[0] == 0.0
        assert sol.phi_plus.values[-1] == 0.0

    def test_linear_tail_beyond_support(self, fine_grid):
        h = mixture_density(fine_grid)
        sol = solve_poisson_pair(h, PARAMS)
        x = fine_grid.x
        total = np.trapezoid(sol.source.values, x)
        first_moment = np.trapezoid(x * sol.source.values, x)
        mean = first_moment / total
        # to the right of the support phi_minus(x) = total * (x - mean)
        # and phi_plus vanishes; mirror relations hold on the left
        tail = x > 10.0
        expected = total * (x[tail] - mean)
        assert np.abs(sol.phi_minus.values[tail] - expected).max() < 1e-10
        assert np.abs(sol.phi_plus.values[tail]).max() < 1e-10

    def test_interior_residual_small_when_resolved(self, fine_grid):
        sol = solve_poisson_pair(mixture_density(fine_grid), PARAMS)
        report = poisson_residual(sol, tolerance=1e-4)
        assert report.passed
        assert report.phi_minus_residual < 1e-4
        assert report.phi_plus_residual < 1e-4

    def test_residual_fails_honestly_on_coarse_grid(self):
        g = Grid1D.from_bounds(-16.0, 16.0, 96)
        sol = solve_poisson_pair(mixture_density(g), PARAMS)
        report = poisson_residual(sol, tolerance=1e-4)
        assert not report.passed  # quadrature error scales as dx^2

    def test_boundary_report(self, fine_grid):
        sol = solve_poisson_pair(mixture_density(fine_grid), PARAMS)
        report = boundary_report(sol, tolerance=1e-6)
        assert report.passed
        assert report.phi_minus_at_min == 0.0
        assert report.phi_plus_at_max == 0.0

    def test_edge_mass_guard(self):
        g = Grid1D.from_bounds(-16.0, 16.0, 512)
        values = np.exp(-0.5 * (g.x - 14.0) ** 2)
        h = RealField(g, values).normalized()
        with pytest.raises(TailMassError):
            solve_poisson_pair(h, PARAMS)

    def test_coupling_strength_closed_form(self):
        assert coupling_strength(WfeParams(w=2.0, n_particles=1)) == pytest.approx(1.0)
        assert coupling_strength(PARAMS) == pytest.approx(np.sqrt(2.0))


class TestLagrangianValue:
    def test_matches_absolute_kernel_on_random_mixtures(self, kernel_grid, rng):
        for _ in range(10):
            k = int(rng.integers(2, 4))
            centers = rng.uniform(-4.0, 4.0, size=k)
            sigmas = rng.uniform(0.8, 1.5, size=k)
            weights = rng.uniform(0.2, 1.0, size=k)
            h = mixture_density(kernel_grid, centers, sigmas, weights)
            sol = solve_poisson_pair(h, PARAMS)
            via_fields = lagrangian_value(h, sol, PARAMS)
            via_kernel = wfe_kernel(h, "absolute", PARAMS)
            assert abs(via_fields - via_kernel) <= 1e-6 * max(1.0, abs(via_kernel))

    def test_two_bin_density_closed_form(self):
        g = Grid1D.from_bounds(-8.0, 8.0, 129)  # dx = 1/8, nodes on +-5
        values = np.zeros(129)
        values[np.isclose(g.x, -5.0)] = 0.5 / g.dx
        values[np.isclose(g.x, 5.0)] = 0.5 / g.dx
        h = RealField(g, values)
        sol = solve_poisson_pair(h, PARAMS)
        # E|X - Y| = 5 for equal masses at +-5, so the energy is
        # (1/2) w N^2 * 5 = 10
        assert lagrangian_value(h, sol, PARAMS) == pytest.approx(10.0, abs=1e-10)
        assert wfe_kernel(h, "absolute", PARAMS) == pytest.approx(10.0, abs=1e-10)

    def test_state_route_matches_density_route(self):
        g = Grid1D.from_bounds(-16.0, 16.0, 256, periodic=True)
        cat = make_cat_state(g, 2, 10.0, 1.0)
        h = marginal_com_density(cat)
        sol = solve_poisson_pair(h, PARAMS)
        via_state = lagrangian_value(cat, sol, PARAMS)
        via_density = lagrangian_value(h, sol, PARAMS)
        assert via_state == pytest.approx(via_density, rel=1e-12)

    def test_zero_coupling_returns_zero(self, kernel_grid):
        h = mixture_density(kernel_grid)
        params = WfeParams(w=0.0, n_particles=2)
        sol = solve_poisson_pair(h, params)
        assert lagrangian_value(h, sol, params) == 0.0
        assert quadratic_kernel_energy(h, params) == 0.0

    def test_grid_mismatch_rejected(self, kernel_grid, fine_grid):
        sol = solve_poisson_pair(mixture_density(kernel_grid), PARAMS)
        with pytest.raises(ValueError, match="grid"):
            lagrangian_value(mixture_density(fine_grid), sol, PARAMS)

    def test_inconsistent_density_rejected(self, kernel_grid):
        sol = solve_poisson_pair(mixture_density(kernel_grid), PARAMS)
        other = mixture_density(kernel_grid, centers=(-1.0, 3.0))
        with pytest.raises(ValueError, match="inconsistent"):
            lagrangian_value(other, sol, PARAMS)

    def test_mismatched_params_rejected(self, kernel_grid):
        h = mixture_density(kernel_grid)
        sol = solve_poisson_pair(h, PARAMS)
        with pytest.raises(ValueError, match="coupling"):
            lagrangian_value(h, sol, WfeParams(w=2.0, n_particles=2))


class TestThirdOrder:
    def test_interior_identity_both_sides(self, fine_grid):
        h = mixture_density(fine_grid)
        for side in ("right", "left"):
            field = solve_third_order(h, PARAMS, side=side)
            assert third_order_residual(field, h, PARAMS) < 1e-3

    def test_linearity_in_the_source(self, fine_grid):
        h1 = mixture_density(fine_grid, centers=(-3.0,), sigmas=(1.0,))
        h2 = mixture_density(fine_grid, centers=(2.0,), sigmas=(1.4,))
        blend = RealField(fine_grid, 0.3 * h1.values + 0.7 * h2.values)
        direct = solve_third_order(blend, PARAMS, side="right").values
        combined = (
            0.3 * solve_third_order(h1, PARAMS, side="right").values
            + 0.7 * solve_third_order(h2, PARAMS, side="right").values
        )
        scale = np.abs(direct).max()
        assert np.abs(direct - combined).max() < 1e-10 * scale

    def test_quadratic_tail_closed_form(self, fine_grid):
        h = mixture_density(fine_grid)
        field = solve_third_order(h, PARAMS, side="right")
        x = fine_grid.x
        source = -coupling_strength(PARAMS) * h.values
        total = np.trapezoid(source, x)
        mean = np.trapezoid(x * source, x) / total
        var = np.trapezoid((x - mean) ** 2 * source, x) / total
        # below the support the right-sided integral covers everything:
        # field = -(1/2) * total * ((x - mean)^2 + var)
        tail = x < -10.0
        expected = -0.5 * total * ((x[tail] - mean) ** 2 + var)
        scale = np.abs(field.values).max()
        assert np.abs(field.values[tail] - expected).max() < 1e-10 * scale

    def test_unresolved_source_raises(self):
        g = Grid1D.from_bounds(-16.0, 16.0, 96)
        with pytest.raises(ResidualError):
            solve_third_order(mixture_density(g), PARAMS)

    def test_side_argument_validated(self, fine_grid):
        with pytest.raises(ValueError, match="side"):
            solve_third_order(mixture_density(fine_grid), PARAMS, side="up")

    def test_combination_recovers_quadratic_kernel(self, kernel_grid):
        h = mixture_density(kernel_grid, centers=(-2.0, 1.0, 3.5), sigmas=(1.0, 1.3, 0.9))
        via_fields = quadratic_kernel_energy(h, PARAMS)
        via_kernel = wfe_kernel(h, "quadratic", PARAMS)
        assert abs(via_fields - via_kernel) <= 1e-6 * max(1.0, abs(via_kernel))

import math

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid
from scipy.special import gamma

from wfe_lab.fractional import (
    OperatorKind,
    Side,
    antisymmetry_witness,
    build_fd,
    composition_refutation,
    euler_lagrange_dropout_check,
    fractional_integral_weights,
    moment_collapse_witness,
    repeated_application_residual,
    standard_decay_fields,
    transpose_identity_check,
)
from wfe_lab.grid import (
    Grid1D,
    LinearGridOperator,
    RealField,
    TailMassError,
    fd_derivative_matrix,
    padded_spectral_derivative,
    padded_spectral_matrix,
)


@pytest.fixture
def grid():
    return Grid1D.from_bounds(-16.0, 16.0, 1024)


class TestIntegralWeights:
    def test_constant_operand_closed_form(self, grid):
        # piecewise-linear assembly integrates constants exactly:
        # (I^mu 1)(x) = (x - x_min)^mu / Gamma(mu + 1)
        mu = 0.5
        w = fractional_integral_weights(grid, mu)
        measured = w @ np.ones(grid.n_points)
        expected = (grid.x - grid.x_min) ** mu / gamma(mu + 1.0)
        assert np.abs(measured - expected).max() < 1e-12 * max(1.0, expected.max())

    def test_linear_operand_closed_form(self, grid):
        mu = 0.5
        w = fractional_integral_weights(grid, mu)
        measured = w @ grid.x
        span = grid.x - grid.x_min
        expected = grid.x * span**mu / gamma(mu + 1.0) - mu * span ** (mu + 1.0) / gamma(
            mu + 2.0
        )
        scale = np.abs(expected).max()
        assert np.abs(measured - expected).max() < 1e-12 * scale

    def test_order_zero_is_identity(self, grid):
        assert np.array_equal(
            fractional_integral_weights(grid, 0.0), np.eye(grid.n_points)
        )

    def test_order_one_is_trapezoid_cumulative(self, grid):
        w = fractional_integral_weights(grid, 1.0)
        f = np.exp(-0.5 * grid.x**2) * (1.0 + 0.3 * grid.x)
        expected = cumulative_trapezoid(f, grid.x, initial=0.0)
        assert np.abs(w @ f - expected).max() < 1e-12

    def test_order_range_validated(self, grid):
        with pytest.raises(ValueError):
            fractional_integral_weights(grid, 1.5)
        with pytest.raises(ValueError):
            fractional_integral_weights(grid, -0.1)

    def test_point_cap(self):
        g = Grid1D.from_bounds(0.0, 1.0, 5000)
        with pytest.raises(ValueError, match="capped"):
            fractional_integral_weights(g, 0.5)


class TestOperatorAssembly:
    def test_order_two_collapses_to_plain_second_derivative(self, grid):
        rl = build_fd(OperatorKind.RIEMANN_LIOUVILLE, Side.LEFT_INFINITE, 2.0, grid)
        assert np.array_equal(rl.matrix, fd_derivative_matrix(grid, 2))
        caputo = build_fd(OperatorKind.CAPUTO, Side.LEFT_INFINITE, 2.0, grid)
        assert np.abs(caputo.matrix - padded_spectral_matrix(grid, 2)).max() < 1e-12

    def test_mirror_side_is_exact_flip(self, grid):
        left = build_fd("riemann_liouville", "left_infinite", 1.5, grid)
        right = build_fd("riemann_liouville", "right_infinite", 1.5, grid)
        assert np.array_equal(right.matrix, left.matrix[::-1, ::-1])

    def test_exponential_eigenrelation(self):
        # on operands anchored at -infinity, the half-integral pair obeys
        # D^1.5 e^x = e^x; the truncated grid reproduces it away from the
        # anchor edge
        g = Grid1D.from_bounds(-30.0, 10.0, 1024)
        op = build_fd(OperatorKind.RIEMANN_LIOUVILLE, Side.LEFT_INFINITE, 1.5, g)
        f = np.exp(g.x)
        out = op.apply(f)
        mask = g.x > g.x_min + 8.0
        mask[-5:] = False  # one-sided closure rows at the far end
        rel = np.abs(out - f)[mask] / f[mask]
        assert rel.max() < 1e-3

    def test_order_range_validated(self, grid):
        with pytest.raises(ValueError):
            build_fd(OperatorKind.RIEMANN_LIOUVILLE, Side.LEFT_INFINITE, 1.0, grid)
        with pytest.raises(ValueError):
            build_fd(OperatorKind.RIEMANN_LIOUVILLE, Side.LEFT_INFINITE, 2.5, grid)

    def test_grid_required(self):
        with pytest.raises(ValueError, match="grid"):
            build_fd(OperatorKind.CAPUTO, Side.LEFT_INFINITE, 1.5, None)

    def test_apply_guards_anchored_edge(self, grid):
        rising_to_the_left = np.exp(-grid.x)
        left_op = build_fd(OperatorKind.RIEMANN_LIOUVILLE, Side.LEFT_INFINITE, 1.5, grid)
        with pytest.raises(TailMassError):
            left_op.apply(rising_to_the_left)
        right_op = build_fd(OperatorKind.RIEMANN_LIOUVILLE, Side.RIGHT_INFINITE, 1.5, grid)
        right_op.apply(rising_to_the_left)  # decays at the anchored edge

    def test_caputo_guards_both_edges(self, grid):
        op = build_fd(OperatorKind.CAPUTO, Side.LEFT_INFINITE, 1.5, grid)
        with pytest.raises(TailMassError):
            op.apply(np.exp(-grid.x))


class TestTransposeIdentity:
    def test_gaussian_pair_satisfies_adjoint_relation(self, grid):
        fields = dict(standard_decay_fields(grid))
        report = transpose_identity_check(
            fields["gaussian"], fields["gaussian_derivative"], grid
        )
        assert not report.skipped
        assert report.passed
        assert report.relative < 1e-4  # stated criterion
        assert report.relative < 1e-6  # measured headroom on this grid

    def test_non_decaying_operand_skips(self, grid):
        report = transpose_identity_check(
            np.ones(grid.n_points), np.exp(-0.5 * grid.x**2), grid
        )
        assert report.skipped
        assert not report.passed
        assert "edge magnitude" in report.message


class TestCompositionRefutation:
    @pytest.fixture
    def omega(self, grid):
        return build_fd(OperatorKind.RIEMANN_LIOUVILLE, Side.LEFT_INFINITE, 1.5, grid)

    def test_transpose_composition_is_far_from_third_derivative(self, omega):
        report = composition_refutation(omega)
        assert report.passed
        assert report.min_residual > 0.1
        # the defect is order one, not marginal: the composition flips the
        # sign structure, so the residual lands near sqrt(2)
        assert report.min_residual > 1.0

    def test_self_target_sanity_inversion(self, omega):
        report = composition_refutation(omega, target="self")
        assert report.min_residual == 0.0
        assert not report.passed

    def test_plain_repeated_application_is_close(self, omega):
        residuals = repeated_application_residual(omega)
        # without the transpose the two half-order factors do stack into a
        # third derivative on decaying operands
        assert all(value < 0.05 for value in residuals.values())


class TestWitnesses:
    def test_antisymmetry_witness_vanishes(self, grid):
        phi = RealField(grid, np.exp(-0.5 * grid.x**2))
        third = padded_spectral_derivative(phi.values, grid, 3)
        scale = math.sqrt(float((phi.values**2).sum() * grid.dx)) * math.sqrt(
            float((third**2).sum() * grid.dx)
        )
        assert abs(antisymmetry_witness(phi)) < 1e-8 * scale

    def test_moment_collapse(self):
        g = Grid1D.from_bounds(-16.0, 16.0, 512)
        op = LinearGridOperator(g, fd_derivative_matrix(g, 3))
        report = moment_collapse_witness(op)
        assert report.passed
        assert report.output_difference < 1e-8
        assert report.density_separation > 0.1
        for a, b in zip(report.moments_first, report.moments_second):
            assert a == pytest.approx(b, abs=1e-9)

    def test_moment_collapse_accepts_identical_pair(self):
        g = Grid1D.from_bounds(-16.0, 16.0, 256)
        op = LinearGridOperator(g, fd_derivative_matrix(g, 3))
        f = RealField(g, np.exp(-0.5 * g.x**2) / np.sqrt(2.0 * np.pi))
        report = moment_collapse_witness(op, pair=(f, f))
        assert report.output_difference == 0.0
        assert report.passed

    def test_dropout_report(self):
        g = Grid1D.from_bounds(-16.0, 16.0, 512)
        report = euler_lagrange_dropout_check(g)
        assert report.passed
        assert report.d3_interior_max == 0.0  # antisymmetric stencil, exact
        assert report.d2_interior_max * g.dx**2 == pytest.approx(4.0)
        assert abs(report.gradient_fd - report.gradient_form) <= 1e-8 * report.gradient_scale
        assert abs(report.gradient2_fd - report.gradient2_form) <= 1e-8 * report.gradient_scale

    def test_dropout_deterministic_for_fixed_seed(self):
        g = Grid1D.from_bounds(-16.0, 16.0, 256)
        a = euler_lagrange_dropout_check(g, seed=7)
        b = euler_lagrange_dropout_check(g, seed=7)
        assert a.gradient_fd == b.gradient_fd
        assert a.gradient2_fd == b.gradient2_fd

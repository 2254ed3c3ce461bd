"""Center-of-mass functionals: moments, dispersion, and the collective
energy in its three equivalent forms.

With ``X = (1/N) sum_k x_k`` the dispersion ``S_N = <X^2> - <X>^2`` sets
the energy ``w * N**2 * S_N``.  The same number can be reached three ways:

* ``wfe_direct``: moments of the state itself,
* ``wfe_doubled``: the doubled-variable expression
  ``(1/2) w N^2 <(X - Y)^2>`` over two independent copies, expanded into
  single-copy moments (the doubled tensor is never materialized),
* ``wfe_kernel``: ``(1/2) w N^2 int h(x) K(x-y) h(y) dx dy`` over the
  marginal density ``h`` of ``X`` with the quadratic kernel.

The discrete bookkeeping is arranged so the three agree to roundoff, not
merely to quadrature accuracy: ``marginal_com_density`` deposits mass on
the natural CoM lattice (spacing ``dx/N``), where every attainable value
of ``X`` is a bin center.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import Grid1D, RealField
from .states import (
    NormalizationError,
    ProductState,
    ProductSuperposition,
    State,
    WaveFunctionFull,
)

MAX_KERNEL_POINTS = 4096

NORM_PRECONDITION_TOL = 1e-9


class QuadratureInconsistencyError(RuntimeError):
    """Raised when moment quadratures disagree beyond roundoff headroom."""


@dataclass(frozen=True)
class WfeParams:
    """Coupling and particle number entering the w * N**2 prefactor.

    The coupling is an unknown positive parameter physically; ``w = 0`` is
    accepted as the exact linear limit used throughout the dynamics tests.
    """

    w: float
    n_particles: int

    def __post_init__(self) -> None:
        if not (self.w >= 0.0) or not math.isfinite(self.w):
            raise ValueError(f"coupling w must be finite and >= 0, got {self.w}")
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be >= 1, got {self.n_particles}")

    @property
    def prefactor(self) -> float:
        return self.w * float(self.n_particles) ** 2


def _require_normalized(state: State, tol: float = NORM_PRECONDITION_TOL) -> None:
    norm = state.norm
    if abs(norm - 1.0) > tol:
        raise NormalizationError(
            f"state norm {norm} deviates from 1 beyond {tol}; normalize first"
        )


def _require_matching_n(state: State, params: WfeParams) -> None:
    if state.n_particles != params.n_particles:
        raise ValueError(
            f"params.n_particles={params.n_particles} does not match the "
            f"state ({state.n_particles} particles)"
        )


# ---------------------------------------------------------------------------
# first and second CoM moments per representation


def _full_moments(state: WaveFunctionFull) -> tuple[float, float]:
    masses = state.probability_masses()
    x = state.grid.x
    n = state.n_particles
    axes = range(n)
    singles_first = []
    singles_second = []
    for axis in axes:
        marginal = masses.sum(axis=tuple(a for a in axes if a != axis))
        singles_first.append(float(marginal @ x))
        singles_second.append(float(marginal @ (x * x)))
    cross = 0.0
    for a in axes:
        for b in range(a + 1, n):
            joint = masses.sum(axis=tuple(c for c in axes if c not in (a, b)))
            cross += float(x @ joint @ x)
    mean = sum(singles_first) / n
    mean_sq = (sum(singles_second) + 2.0 * cross) / n**2
    return mean, mean_sq


def _product_moments(state: ProductState) -> tuple[float, float]:
    dx = state.grid.dx
    x = state.grid.x
    n = state.n_particles
    firsts = np.empty(n)
    seconds = np.empty(n)
    for k, factor in enumerate(state.factors):
        density = (np.abs(factor) ** 2) * dx
        firsts[k] = float(density @ x)
        seconds[k] = float(density @ (x * x))
    total_first = firsts.sum()
    # sum_{k != l} <x>_k <x>_l = (sum <x>)^2 - sum <x>^2
    cross = total_first**2 - (firsts**2).sum()
    mean = total_first / n
    mean_sq = (seconds.sum() + cross) / n**2
    return mean, mean_sq


def _branch_pair_sums(
    grid: Grid1D, bra: ProductState, ket: ProductState
) -> tuple[complex, complex, complex]:
    """(<A|B>, <A|sum_k x_k|B>, <A|(sum_k x_k)^2|B>) for product states.

    Matrix elements factorize over particles; products excluding one or two
    factors are assembled from prefix/suffix cumulative products so zero
    overlaps need no special casing.
    """
    dx = grid.dx
    x = grid.x
    n = bra.n_particles
    o = np.empty(n, dtype=complex)
    m = np.empty(n, dtype=complex)
    q = np.empty(n, dtype=complex)
    for k, (fa, fb) in enumerate(zip(bra.factors, ket.factors)):
        o[k] = np.vdot(fa, fb) * dx
        m[k] = np.vdot(fa, x * fb) * dx
        q[k] = np.vdot(fa, x * x * fb) * dx
    prefix = np.ones(n + 1, dtype=complex)
    for k in range(n):
        prefix[k + 1] = prefix[k] * o[k]
    suffix = np.ones(n + 1, dtype=complex)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] * o[k]
    excl_one = prefix[:n] * suffix[1:]
    overlap = prefix[n]
    sum_x = complex((m * excl_one).sum())
    sum_xx = complex((q * excl_one).sum())
    for k in range(n):
        mid = 1.0 + 0.0j
        for l in range(k + 1, n):
            sum_xx += 2.0 * m[k] * m[l] * prefix[k] * mid * suffix[l + 1]
            mid *= o[l]
    return overlap, sum_x, sum_xx


def _superposition_moments(state: ProductSuperposition) -> tuple[float, float]:
    n = state.n_particles
    total_x = 0.0j
    total_xx = 0.0j
    for a, ca in enumerate(state.coefficients):
        for b, cb in enumerate(state.coefficients):
            _, sum_x, sum_xx = _branch_pair_sums(state.grid, state.branches[a], state.branches[b])
            weight = np.conj(ca) * cb
            total_x += weight * sum_x
            total_xx += weight * sum_xx
    return total_x.real / n, total_xx.real / n**2


def _com_moments(state: State) -> tuple[float, float]:
    if isinstance(state, WaveFunctionFull):
        return _full_moments(state)
    if isinstance(state, ProductState):
        return _product_moments(state)
    if isinstance(state, ProductSuperposition):
        return _superposition_moments(state)
    raise TypeError(f"unsupported state type {type(state).__name__}")


# ---------------------------------------------------------------------------
# public functionals


def com_mean(state: State) -> float:
    """<X> with X the center of mass (1/N) sum_k x_k."""
    _require_normalized(state)
    return _com_moments(state)[0]


def com_dispersion(state: State) -> float:
    """S_N = <X^2> - <X>^2, the squared dispersion of the center of mass."""
    _require_normalized(state)
    mean, mean_sq = _com_moments(state)
    dispersion = mean_sq - mean * mean
    if dispersion < -1e-12:
        raise QuadratureInconsistencyError(
            f"dispersion {dispersion} is negative beyond roundoff headroom"
        )
    return max(dispersion, 0.0)


def wfe_direct(state: State, params: WfeParams) -> float:
    """w * N**2 * S_N straight from the state's moments."""
    _require_matching_n(state, params)
    return params.prefactor * com_dispersion(state)


def wfe_doubled(state: State, params: WfeParams) -> float:
    """(1/2) w N^2 <(X - Y)^2> over two independent copies of the state.

    The doubled wavefunction psi(x) * psi(y) is never formed; expanding the
    square gives <X^2> + <Y^2> - 2 <X> <Y> in single-copy moments, with the
    X and Y factors evaluated independently.
    """
    _require_matching_n(state, params)
    _require_normalized(state)
    x_mean, x_mean_sq = _com_moments(state)
    y_mean, y_mean_sq = _com_moments(state)
    return 0.5 * params.prefactor * (x_mean_sq + y_mean_sq - 2.0 * x_mean * y_mean)


# ---------------------------------------------------------------------------
# marginal density of the center of mass


def natural_com_grid(grid: Grid1D, n_particles: int) -> Grid1D:
    """CoM lattice: every attainable X = x_min + (dx/N) * integer is a node."""
    return Grid1D(
        n_points=n_particles * (grid.n_points - 1) + 1,
        x_min=grid.x_min,
        dx=grid.dx / n_particles,
        periodic=False,
    )


def _fold_sum_index(masses: np.ndarray) -> np.ndarray:
    """Collapse a mass tensor onto the index-sum lattice, axis by axis."""
    out = masses
    while out.ndim > 1:
        a, b = out.shape[0], out.shape[1]
        merged = np.zeros((a + b - 1,) + out.shape[2:])
        for i in range(a):
            merged[i : i + b] += out[i]
        out = merged
    return out


def _lattice_masses(state: State) -> np.ndarray:
    """Probability masses of X on the natural CoM lattice."""
    if isinstance(state, WaveFunctionFull):
        return _fold_sum_index(state.probability_masses())
    if isinstance(state, ProductState):
        masses = (np.abs(state.factors[0]) ** 2) * state.grid.dx
        for factor in state.factors[1:]:
            masses = np.convolve(masses, (np.abs(factor) ** 2) * state.grid.dx)
        return masses
    if isinstance(state, ProductSuperposition):
        dx = state.grid.dx
        n_lattice = state.n_particles * (state.grid.n_points - 1) + 1
        total = np.zeros(n_lattice, dtype=complex)
        for a, ca in enumerate(state.coefficients):
            for b, cb in enumerate(state.coefficients):
                cross = np.conj(state.branches[a].factors[0]) * state.branches[b].factors[0] * dx
                for fa, fb in zip(state.branches[a].factors[1:], state.branches[b].factors[1:]):
                    cross = np.convolve(cross, np.conj(fa) * fb * dx)
                total += np.conj(ca) * cb * cross
        masses = total.real
        floor = masses.min()
        if floor < -1e-10:
            raise QuadratureInconsistencyError(
                f"interference masses dip to {floor}; expected >= 0 up to roundoff"
            )
        return np.maximum(masses, 0.0)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def marginal_com_density(state: State, com_grid: Grid1D | None = None) -> RealField:
    """Marginal probability density h of the center of mass.

    Full states deposit |psi|^2 * dx**N into the bin containing X; product
    states and superpositions convolve factor masses.  Both land exactly on
    the natural CoM lattice (spacing dx/N), the default representation; a
    caller-supplied ``com_grid`` re-bins by nearest node, which stays
    nonnegative and mass-preserving but can bias the variance by
    O(bin width squared).
    """
    _require_normalized(state)
    masses = _lattice_masses(state)
    natural = natural_com_grid(state.grid, state.n_particles)
    if com_grid is None or com_grid.same_as(natural):
        return RealField(natural, masses / natural.dx)
    if state.n_particles * com_grid.dx < state.grid.dx * (1.0 - 1e-12):
        warnings.warn(
            f"CoM bins (dx={com_grid.dx:.3g}) are finer than the CoM lattice "
            f"(dx/N={state.grid.dx / state.n_particles:.3g}); expect comb artifacts",
            stacklevel=2,
        )
    index = np.rint((natural.x - com_grid.x_min) / com_grid.dx).astype(int)
    index = np.clip(index, 0, com_grid.n_points - 1)
    binned = np.bincount(index, weights=masses, minlength=com_grid.n_points)
    return RealField(com_grid, binned / com_grid.dx)


def wfe_kernel(h: RealField, kernel, params: WfeParams) -> float:
    """(1/2) w N^2 double sum of h(x) K(x - y) h(y) over the density grid.

    ``kernel`` is ``"quadratic"`` for (x-y)^2, ``"absolute"`` for |x-y|, or
    a table ``(differences, values)`` interpolated linearly in x - y.  The
    double sum is O(n^2); grids are capped at ``MAX_KERNEL_POINTS``.
    """
    n = h.grid.n_points
    if n > MAX_KERNEL_POINTS:
        raise ValueError(f"kernel quadrature capped at {MAX_KERNEL_POINTS} points, got {n}")
    h.require_density()
    x = h.grid.x
    diff = x[:, None] - x[None, :]
    if isinstance(kernel, str):
        if kernel == "quadratic":
            k_matrix = diff * diff
        elif kernel == "absolute":
            k_matrix = np.abs(diff)
        else:
            raise ValueError(f"unknown kernel {kernel!r}; use 'quadratic' or 'absolute'")
    else:
        table_x, table_k = kernel
        k_matrix = np.interp(diff, np.asarray(table_x, float), np.asarray(table_k, float))
    value = float(h.values @ (k_matrix @ h.values)) * h.grid.dx**2
    return 0.5 * params.prefactor * value

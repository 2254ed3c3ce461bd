"""Many-body wavefunctions on a shared 1D grid.

Three containers cover the regimes the energy functionals are studied in:

* ``WaveFunctionFull`` stores the complex rank-N tensor outright; memory is
  ``n_points**N`` so a particle cap (default 4) and an element-count guard
  keep it at desk scale,
* ``ProductState`` stores N normalized single-particle factors and scales
  to thousands of particles,
* ``ProductSuperposition`` stores a few product states with complex
  coefficients, enough to represent widely separated superpositions
  exactly at large N without ever forming the tensor.

All containers are immutable; operations return new objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .grid import Grid1D, GridSpecError, make_gaussian_packet

DEFAULT_PARTICLE_CAP = 4
MAX_FULL_ELEMENTS = 2**24  # 16.7M complex entries, 256 MiB

NORMALIZATION_TOL = 1e-12


class ParticleCapError(ValueError):
    """Raised when a full tensor would exceed the particle or memory cap."""


class NormalizationError(ValueError):
    """Raised when a precondition on the state norm is violated."""


def _check_full_size(n_points: int, n_particles: int, cap: int) -> None:
    if n_particles < 1:
        raise ValueError("need at least one particle")
    if n_particles > cap:
        raise ParticleCapError(
            f"full tensors are capped at {cap} particles, got {n_particles}"
        )
    if n_points**n_particles > MAX_FULL_ELEMENTS:
        raise ParticleCapError(
            f"{n_points}^{n_particles} amplitudes exceed the "
            f"{MAX_FULL_ELEMENTS} element guard"
        )


@dataclass(frozen=True, eq=False)
class WaveFunctionFull:
    """Dense N-particle wavefunction psi(x_1, ..., x_N).

    Every tensor axis lives on the same grid.  ``cap`` bounds the particle
    number at construction (memory grows as ``n_points**N``).
    """

    grid: Grid1D
    amplitudes: np.ndarray
    cap: int = DEFAULT_PARTICLE_CAP

    def __post_init__(self) -> None:
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        _check_full_size(self.grid.n_points, amplitudes.ndim, self.cap)
        if any(s != self.grid.n_points for s in amplitudes.shape):
            raise GridSpecError(
                f"every tensor axis must have {self.grid.n_points} points, "
                f"got shape {amplitudes.shape}"
            )
        if not np.all(np.isfinite(amplitudes.view(float))):
            raise ValueError("amplitudes contain non-finite entries")
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def n_particles(self) -> int:
        return self.amplitudes.ndim

    @property
    def norm(self) -> float:
        dv = self.grid.dx**self.n_particles
        return math.sqrt(float((np.abs(self.amplitudes) ** 2).sum() * dv))

    def normalized(self) -> "WaveFunctionFull":
        norm = self.norm
        if norm == 0.0:
            raise NormalizationError("cannot normalize the zero state")
        return WaveFunctionFull(self.grid, self.amplitudes / norm, self.cap)

    def probability_masses(self) -> np.ndarray:
        """|psi|^2 times the volume element; sums to the squared norm."""
        return (np.abs(self.amplitudes) ** 2) * self.grid.dx**self.n_particles


@dataclass(frozen=True, eq=False)
class ProductState:
    """psi = prod_k f_k(x_k) with each factor normalized on the grid."""

    grid: Grid1D
    factors: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.factors) < 1:
            raise ValueError("need at least one factor")
        checked = []
        for k, factor in enumerate(self.factors):
            factor = np.asarray(factor, dtype=complex)
            if factor.shape != (self.grid.n_points,):
                raise GridSpecError(f"factor {k} shape {factor.shape} does not match grid")
            norm2 = float((np.abs(factor) ** 2).sum() * self.grid.dx)
            if abs(norm2 - 1.0) > NORMALIZATION_TOL:
                raise NormalizationError(
                    f"factor {k} has squared norm {norm2}; normalize factors "
                    f"to 1 within {NORMALIZATION_TOL} (see from_factors)"
                )
            checked.append(factor)
        object.__setattr__(self, "factors", tuple(checked))

    @classmethod
    def from_factors(cls, grid: Grid1D, factors) -> "ProductState":
        """Build a product state, normalizing each factor first."""
        normalized = []
        for factor in factors:
            factor = np.asarray(factor, dtype=complex)
            norm = math.sqrt(float((np.abs(factor) ** 2).sum() * grid.dx))
            if norm == 0.0:
                raise NormalizationError("cannot normalize a zero factor")
            normalized.append(factor / norm)
        return cls(grid, tuple(normalized))

    @property
    def n_particles(self) -> int:
        return len(self.factors)

    @property
    def norm(self) -> float:
        return 1.0  # each factor is normalized by the constructor

    def to_full(self, cap: int = DEFAULT_PARTICLE_CAP) -> WaveFunctionFull:
        _check_full_size(self.grid.n_points, self.n_particles, cap)
        tensor = reduce(np.multiply.outer, self.factors)
        return WaveFunctionFull(self.grid, tensor, cap)


@dataclass(frozen=True, eq=False)
class ProductSuperposition:
    """Linear combination sum_a c_a * (product state a).

    Exact moment and density formulas only need single-factor overlap
    integrals, so superpositions of far-separated branches stay cheap at
    particle numbers far beyond the full-tensor cap.
    """

    grid: Grid1D
    coefficients: tuple[complex, ...]
    branches: tuple[ProductState, ...]

    def __post_init__(self) -> None:
        if len(self.branches) < 1:
            raise ValueError("need at least one branch")
        if len(self.coefficients) != len(self.branches):
            raise ValueError("one coefficient per branch required")
        n = self.branches[0].n_particles
        for branch in self.branches:
            if not branch.grid.same_as(self.grid):
                raise GridSpecError("all branches must share the superposition grid")
            if branch.n_particles != n:
                raise ValueError("all branches must have the same particle number")
        object.__setattr__(
            self, "coefficients", tuple(complex(c) for c in self.coefficients)
        )

    @property
    def n_particles(self) -> int:
        return self.branches[0].n_particles

    def branch_overlap(self, a: int, b: int) -> complex:
        """<branch_a | branch_b> as a product of factor overlaps."""
        result = 1.0 + 0.0j
        dx = self.grid.dx
        for fa, fb in zip(self.branches[a].factors, self.branches[b].factors):
            result *= np.vdot(fa, fb) * dx
        return result

    @property
    def norm(self) -> float:
        total = 0.0j
        for a, ca in enumerate(self.coefficients):
            for b, cb in enumerate(self.coefficients):
                total += np.conj(ca) * cb * self.branch_overlap(a, b)
        return math.sqrt(max(total.real, 0.0))

    def normalized(self) -> "ProductSuperposition":
        norm = self.norm
        if norm == 0.0:
            raise NormalizationError("cannot normalize the zero state")
        return ProductSuperposition(
            self.grid, tuple(c / norm for c in self.coefficients), self.branches
        )


State = WaveFunctionFull | ProductState | ProductSuperposition


def state_norm(state: State) -> float:
    return state.norm


def inner_product(a: State, b: State) -> complex:
    """<a|b> for two states of compatible type on the same grid."""
    if not a.grid.same_as(b.grid):
        raise GridSpecError("states live on different grids")
    if isinstance(a, WaveFunctionFull) and isinstance(b, WaveFunctionFull):
        if a.n_particles != b.n_particles:
            raise ValueError("particle numbers differ")
        dv = a.grid.dx**a.n_particles
        return complex(np.vdot(a.amplitudes, b.amplitudes) * dv)
    if isinstance(a, ProductState):
        a = ProductSuperposition(a.grid, (1.0,), (a,))
    if isinstance(b, ProductState):
        b = ProductSuperposition(b.grid, (1.0,), (b,))
    if isinstance(a, ProductSuperposition) and isinstance(b, ProductSuperposition):
        if a.n_particles != b.n_particles:
            raise ValueError("particle numbers differ")
        dx = a.grid.dx
        total = 0.0j
        for ca, branch_a in zip(a.coefficients, a.branches):
            for cb, branch_b in zip(b.coefficients, b.branches):
                overlap = 1.0 + 0.0j
                for fa, fb in zip(branch_a.factors, branch_b.factors):
                    overlap *= np.vdot(fa, fb) * dx
                total += np.conj(ca) * cb * overlap
        return complex(total)
    raise TypeError(
        f"no inner product between {type(a).__name__} and {type(b).__name__}"
    )


def make_cat_state(
    grid: Grid1D,
    n_particles: int,
    separation: float,
    sigma: float,
    cap: int = DEFAULT_PARTICLE_CAP,
) -> WaveFunctionFull:
    """Equal superposition of two product-Gaussian branches at -+L/2.

    Returns the normalized full tensor; the branch overlap (significant
    when ``separation`` is small against ``sigma``) is absorbed by the
    final normalization.
    """
    _check_full_size(grid.n_points, n_particles, cap)
    left = make_gaussian_packet(grid, -0.5 * separation, sigma)
    right = make_gaussian_packet(grid, +0.5 * separation, sigma)
    branch_left = reduce(np.multiply.outer, [left] * n_particles)
    branch_right = reduce(np.multiply.outer, [right] * n_particles)
    tensor = (branch_left + branch_right) / math.sqrt(2.0)
    return WaveFunctionFull(grid, tensor, cap).normalized()


def make_product_cat(
    grid: Grid1D, n_particles: int, separation: float, sigma: float
) -> ProductSuperposition:
    """The same two-branch cat without forming the tensor (any N)."""
    left = make_gaussian_packet(grid, -0.5 * separation, sigma)
    right = make_gaussian_packet(grid, +0.5 * separation, sigma)
    branches = (
        ProductState(grid, tuple([left] * n_particles)),
        ProductState(grid, tuple([right] * n_particles)),
    )
    amp = 1.0 / math.sqrt(2.0)
    return ProductSuperposition(grid, (amp, amp), branches).normalized()

"""Uniform 1D grids, fields sampled on them, and derivative machinery.

Everything downstream (moment functionals, field solvers, fractional
operators, integrators) works on the same uniform-grid conventions defined
here:

* a grid is ``n_points`` nodes starting at ``x_min`` with spacing ``dx``;
  periodic grids identify ``x_min + n_points * dx`` with ``x_min``,
* scalar integrals use the rectangle rule ``sum(values) * dx`` so that
  discrete mass bookkeeping is exact under bin deposition,
* derivatives come in two independent flavours: banded finite differences
  (interior central stencils, one-sided closures) and Fourier
  differentiation (periodic, or on a zero-padded periodic embedding for
  decaying fields).  The two flavours deliberately share no code so they
  can serve as cross-checks of each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import toeplitz


class GridSpecError(ValueError):
    """Raised when grid parameters are inconsistent or unusable."""


class ResolutionError(ValueError):
    """Raised when a requested feature is too narrow for the grid spacing."""


class TailMassError(ValueError):
    """Raised when a field carries non-negligible weight at the grid edge."""


MIN_POINTS = 8


@dataclass(frozen=True)
class Grid1D:
    """Uniform one-dimensional grid.

    Parameters
    ----------
    n_points : int
        Number of nodes, at least ``MIN_POINTS``.
    x_min : float
        Coordinate of the first node.
    dx : float
        Node spacing, strictly positive.
    periodic : bool
        If True the domain is the half-open interval
        ``[x_min, x_min + n_points * dx)`` and Fourier differentiation is
        available.  If False the last node is ``x_min + (n_points - 1) * dx``.
    """

    n_points: int
    x_min: float
    dx: float
    periodic: bool = False

    def __post_init__(self) -> None:
        if self.n_points < MIN_POINTS:
            raise GridSpecError(
                f"need at least {MIN_POINTS} points, got {self.n_points}"
            )
        if not (self.dx > 0.0) or not math.isfinite(self.dx):
            raise GridSpecError(f"grid spacing must be positive, got {self.dx}")
        if not math.isfinite(self.x_min):
            raise GridSpecError(f"x_min must be finite, got {self.x_min}")

    @classmethod
    def from_bounds(
        cls, x_min: float, x_max: float, n_points: int, periodic: bool = False
    ) -> "Grid1D":
        """Build a grid covering ``[x_min, x_max]``.

        For a periodic grid ``x_max`` is the identified (excluded) right
        edge, so ``dx = (x_max - x_min) / n_points``; otherwise the last
        node sits exactly on ``x_max``.
        """
        if not x_max > x_min:
            raise GridSpecError(f"x_max must exceed x_min, got [{x_min}, {x_max}]")
        if periodic:
            dx = (x_max - x_min) / n_points
        else:
            dx = (x_max - x_min) / (n_points - 1)
        return cls(n_points=n_points, x_min=x_min, dx=dx, periodic=periodic)

    @cached_property
    def x(self) -> np.ndarray:
        """Node coordinates."""
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def x_max(self) -> float:
        """Right domain edge (identified node if periodic, last node if not)."""
        if self.periodic:
            return self.x_min + self.n_points * self.dx
        return self.x_min + (self.n_points - 1) * self.dx

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Fourier wavenumbers matching ``numpy.fft.fft`` ordering."""
        if not self.periodic:
            raise GridSpecError("wavenumbers are defined for periodic grids only")
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    def integrate(self, values: np.ndarray) -> complex | float:
        """Rectangle-rule integral ``sum(values) * dx``."""
        return values.sum() * self.dx

    def same_as(self, other: "Grid1D") -> bool:
        return (
            self.n_points == other.n_points
            and self.periodic == other.periodic
            and math.isclose(self.x_min, other.x_min, rel_tol=0.0, abs_tol=1e-12)
            and math.isclose(self.dx, other.dx, rel_tol=1e-14, abs_tol=0.0)
        )


@dataclass(frozen=True)
class RealField:
    """Real-valued samples on a grid.

    Used both for densities (nonnegative, unit mass) and for generic real
    fields such as the collective potentials; density-specific checks are
    opt-in via :meth:`require_density`.
    """

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise GridSpecError(
                f"field shape {values.shape} does not match grid "
                f"({self.grid.n_points} points)"
            )
        if not np.all(np.isfinite(values)):
            raise GridSpecError("field contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.dx)

    def mean(self) -> float:
        """First moment of the field treated as a (signed) measure."""
        return float((self.values * self.grid.x).sum() * self.grid.dx)

    def second_moment(self) -> float:
        return float((self.values * self.grid.x**2).sum() * self.grid.dx)

    def variance(self) -> float:
        m = self.mean()
        return self.second_moment() - m * m

    def require_density(self, mass_tol: float = 1e-9, neg_tol: float = 1e-12) -> None:
        """Check unit mass and nonnegativity, raising ``ValueError`` if violated."""
        if abs(self.mass - 1.0) > mass_tol:
            raise ValueError(f"density mass {self.mass} deviates from 1 beyond {mass_tol}")
        if self.values.min() < -neg_tol:
            raise ValueError(f"density has negative values below -{neg_tol}")

    def normalized(self) -> "RealField":
        m = self.mass
        if m <= 0.0:
            raise ValueError("cannot normalize a field with non-positive mass")
        return RealField(self.grid, self.values / m)

    def edge_mass(self, n_bins: int = 5) -> float:
        """Absolute mass within ``n_bins`` of either grid edge."""
        v = np.abs(self.values)
        return float((v[:n_bins].sum() + v[-n_bins:].sum()) * self.grid.dx)


@dataclass(frozen=True)
class LinearGridOperator:
    """Dense linear operator acting on fields sampled on one grid."""

    grid: Grid1D
    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix)
        n = self.grid.n_points
        if matrix.shape != (n, n):
            raise GridSpecError(
                f"operator matrix shape {matrix.shape} does not match grid ({n})"
            )
        object.__setattr__(self, "matrix", matrix)

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.shape != (self.grid.n_points,):
            raise GridSpecError("operand shape does not match operator grid")
        return self.matrix @ values

    def transposed(self) -> "LinearGridOperator":
        """Adjoint with respect to the rectangle-rule inner product.

        On a uniform grid the ``dx`` weights cancel, so this is the plain
        matrix transpose.
        """
        return LinearGridOperator(self.grid, self.matrix.T.copy())

    def flipped(self) -> "LinearGridOperator":
        """Conjugation by spatial reflection, ``J M J`` with J the index flip."""
        return LinearGridOperator(self.grid, self.matrix[::-1, ::-1].copy())

    def compose(self, other: "LinearGridOperator") -> "LinearGridOperator":
        if not self.grid.same_as(other.grid):
            raise GridSpecError("cannot compose operators on different grids")
        return LinearGridOperator(self.grid, self.matrix @ other.matrix)


# ---------------------------------------------------------------------------
# finite-difference machinery

MAX_DERIVATIVE_ORDER = 4


def _check_order(order: int) -> None:
    if not 1 <= order <= MAX_DERIVATIVE_ORDER:
        raise ValueError(
            f"derivative order must be in 1..{MAX_DERIVATIVE_ORDER}, got {order}"
        )


def fd_stencil(offsets: np.ndarray, derivative_order: int) -> np.ndarray:
    """Finite-difference weights on integer ``offsets`` for one derivative.

    Solves the moment conditions sum_j w_j s_j^p / p! = delta_{p,m} for
    p = 0 .. len(offsets)-1, which determines weights exact on polynomials
    of degree < len(offsets).  Weights are in units of ``dx**-m``; divide
    by ``dx**m`` when applying.
    """
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    if derivative_order >= n:
        raise ValueError("stencil too short for requested derivative order")
    rows = np.vander(offsets, n, increasing=True).T  # rows[p] = offsets**p
    rhs = np.zeros(n)
    rhs[derivative_order] = math.factorial(derivative_order)
    return np.linalg.solve(rows, rhs)


def fd_derivative_matrix(grid: Grid1D, order: int, accuracy: int = 4) -> np.ndarray:
    """Dense banded differentiation matrix with one-sided edge closures.

    Interior rows use the central stencil of the requested ``accuracy``;
    the first and last few rows switch to one-sided stencils of the same
    polynomial exactness.  Periodic grids wrap the central stencil instead.
    """
    _check_order(order)
    if accuracy % 2 != 0:
        raise ValueError("accuracy must be even")
    half = (order + 1) // 2 + accuracy // 2 - 1
    width = 2 * half + 1
    n = grid.n_points
    if width > n:
        raise GridSpecError("grid too small for requested stencil")
    central = fd_stencil(np.arange(-half, half + 1), order)
    scale = grid.dx**order
    m = np.zeros((n, n))
    if grid.periodic:
        cols = (np.arange(n)[:, None] + np.arange(-half, half + 1)[None, :]) % n
        for r in range(n):
            m[r, cols[r]] += central
        return m / scale
    for r in range(half, n - half):
        m[r, r - half : r + half + 1] = central
    # one-sided closures, same number of points as the interior stencil
    for r in range(half):
        offsets = np.arange(width) - r
        m[r, :width] = fd_stencil(offsets, order)
        m[n - 1 - r, n - width :] = fd_stencil(-offsets, order)[::-1]
    return m / scale


def fd_derivative(values: np.ndarray, grid: Grid1D, order: int, accuracy: int = 4) -> np.ndarray:
    """Apply the banded finite-difference derivative without building the matrix."""
    _check_order(order)
    if accuracy % 2 != 0:
        raise ValueError("accuracy must be even")
    values = np.asarray(values, dtype=float)
    half = (order + 1) // 2 + accuracy // 2 - 1
    width = 2 * half + 1
    n = grid.n_points
    if width > n:
        raise GridSpecError("grid too small for requested stencil")
    central = fd_stencil(np.arange(-half, half + 1), order)
    scale = grid.dx**order
    if grid.periodic:
        out = np.zeros_like(values)
        for w, s in zip(central, range(-half, half + 1)):
            out += w * np.roll(values, -s)
        return out / scale
    out = np.convolve(values, central[::-1], mode="same")
    for r in range(half):
        offsets = np.arange(width) - r
        out[r] = fd_stencil(offsets, order) @ values[:width]
        out[n - 1 - r] = fd_stencil(-offsets, order)[::-1] @ values[n - width :]
    return out / scale


# ---------------------------------------------------------------------------
# Fourier machinery


def _spectral_symbol(k: np.ndarray, order: int) -> np.ndarray:
    symbol = (1j * k) ** order
    if order % 2 == 1 and k.size % 2 == 0:
        symbol[k.size // 2] = 0.0  # drop the unpaired Nyquist mode
    return symbol


def spectral_derivative(values: np.ndarray, order: int, grid: Grid1D) -> np.ndarray:
    """d^order/dx^order with the best method the grid supports.

    Periodic grids use Fourier differentiation (spectrally accurate; real
    input produces real output, the Nyquist mode is dropped for odd
    orders).  Non-periodic grids fall back to the banded O(dx^4) finite
    differences of :func:`fd_derivative`.
    """
    _check_order(order)
    values = np.asarray(values)
    if not grid.periodic:
        if np.iscomplexobj(values):
            return fd_derivative(values.real, grid, order) + 1j * fd_derivative(
                values.imag, grid, order
            )
        return fd_derivative(values, grid, order)
    symbol = _spectral_symbol(grid.wavenumbers, order)
    out = np.fft.ifft(symbol * np.fft.fft(values))
    if np.isrealobj(values):
        return out.real
    return out


def padded_spectral_derivative(
    values: np.ndarray, grid: Grid1D, order: int, pad_factor: int = 2
) -> np.ndarray:
    """Fourier derivative of a decaying field on a non-periodic grid.

    The field is embedded in a periodic box ``pad_factor`` times longer
    (zero-padded), differentiated spectrally, and restricted back.  Only
    meaningful when the field is negligible near both grid edges; callers
    monitor that separately.
    """
    if pad_factor < 1:
        raise ValueError("pad_factor must be >= 1")
    values = np.asarray(values)
    n = grid.n_points
    n_pad = pad_factor * n
    k = 2.0 * np.pi * np.fft.fftfreq(n_pad, d=grid.dx)
    symbol = _spectral_symbol(k, order)
    padded = np.zeros(n_pad, dtype=complex)
    padded[:n] = values
    out = np.fft.ifft(symbol * np.fft.fft(padded))[:n]
    if np.isrealobj(values):
        return out.real
    return out


def padded_spectral_matrix(grid: Grid1D, order: int, pad_factor: int = 2) -> np.ndarray:
    """Matrix of :func:`padded_spectral_derivative` restricted to the grid block.

    The padded-periodic derivative is a circulant on the embedding, so the
    restriction is Toeplitz; build it from the circulant's first column.
    """
    n = grid.n_points
    n_pad = pad_factor * n
    k = 2.0 * np.pi * np.fft.fftfreq(n_pad, d=grid.dx)
    symbol = _spectral_symbol(k, order)
    # impulse response; the symbol is Hermitian so the response is real
    col = np.fft.ifft(symbol).real
    first_col = col[:n]
    first_row = np.concatenate(([col[0]], col[-1 : -n : -1]))
    return toeplitz(first_col, first_row)


# ---------------------------------------------------------------------------
# packet builders


def gaussian_tail_mass(grid: Grid1D, center: float, sigma: float) -> float:
    """Probability mass of N(center, sigma^2) outside the grid domain."""
    left = 0.5 * math.erfc((center - grid.x_min) / (sigma * math.sqrt(2.0)))
    right = 0.5 * math.erfc((grid.x_max - center) / (sigma * math.sqrt(2.0)))
    return left + right


def make_gaussian_packet(
    grid: Grid1D,
    center: float,
    sigma: float,
    momentum: float = 0.0,
    tail_tol: float = 1e-10,
) -> np.ndarray:
    """Normalized Gaussian wavepacket with position variance ``sigma**2``.

    Parameters
    ----------
    grid : Grid1D
        Target grid.
    center, sigma : float
        Mean position and position standard deviation of the probability
        density ``|psi|^2``.
    momentum : float
        Carrier wavenumber of the plane-wave factor ``exp(i * momentum * x)``.
    tail_tol : float
        Maximum admissible probability mass outside the grid domain.

    Returns
    -------
    numpy.ndarray
        Complex amplitudes, normalized so ``sum(|psi|^2) * dx == 1``.

    Raises
    ------
    ResolutionError
        If ``sigma < 3 * dx`` (packet unresolvable on the grid).
    TailMassError
        If the analytic tail mass outside the domain exceeds ``tail_tol``.
    """
    if sigma < 3.0 * grid.dx:
        raise ResolutionError(
            f"sigma={sigma} narrower than 3*dx={3.0 * grid.dx}; refine the grid"
        )
    tail = gaussian_tail_mass(grid, center, sigma)
    if tail > tail_tol:
        raise TailMassError(
            f"packet at center={center}, sigma={sigma} leaves mass {tail:.3e} "
            f"outside the domain (tolerance {tail_tol:.1e})"
        )
    x = grid.x
    psi = np.exp(-((x - center) ** 2) / (4.0 * sigma**2)) * np.exp(1j * momentum * x)
    norm = math.sqrt(float((np.abs(psi) ** 2).sum() * grid.dx))
    return psi / norm


def make_gaussian_density(
    grid: Grid1D, center: float, sigma: float, tail_tol: float = 1e-10
) -> RealField:
    """Unit-mass Gaussian density (rectangle-rule normalized)."""
    if sigma < 3.0 * grid.dx:
        raise ResolutionError(
            f"sigma={sigma} narrower than 3*dx={3.0 * grid.dx}; refine the grid"
        )
    tail = gaussian_tail_mass(grid, center, sigma)
    if tail > tail_tol:
        raise TailMassError(
            f"density at center={center}, sigma={sigma} leaves mass {tail:.3e} "
            f"outside the domain (tolerance {tail_tol:.1e})"
        )
    values = np.exp(-((grid.x - center) ** 2) / (2.0 * sigma**2))
    values /= values.sum() * grid.dx
    return RealField(grid, values)

"""Time evolution on periodic grids: split-step flow plus an independent
Crank-Nicolson reference integrator.

The equation of motion is ``i psi_t = -(1/2) Laplacian psi + V psi +
U psi`` with the nonlinear collective term ``U = w N^2 (X^2 - 2 <X> X)``,
the functional derivative of the dispersion energy.  Cubic dependence on
psi enters only through the scalar ``<X>``, which makes both integrators
cheap: U is a diagonal multiplication refreshed from the evolving state.

``step_split`` is Strang splitting with an exact Fourier kinetic step and
one fixed-point refresh of ``<X>`` at the half step.  ``step_reference``
is Crank-Nicolson with the nonlinearity frozen at the step start and one
Picard correction; it shares the spectral spatial discretization (so the
two integrators approximate the same discrete Hamiltonian and differ only
in time stepping) but no stepping code.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np
from scipy.linalg import circulant
from scipy.sparse.linalg import LinearOperator, gmres

from .grid import Grid1D, GridSpecError
from .observables import WfeParams, _com_moments, com_mean, com_dispersion, wfe_direct
from .states import WaveFunctionFull

DENSE_SOLVER_LIMIT = 512

_GMRES_TOL_KW = "rtol" if "rtol" in inspect.signature(gmres).parameters else "tol"


class StabilityError(RuntimeError):
    """Raised when the split-step stability heuristic is violated."""


class NormDriftError(RuntimeError):
    """Raised when evolution loses normalization beyond tolerance."""


class SolverSizeError(ValueError):
    """Raised when the reference integrator is asked for too many particles."""


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Kinetic term (coefficient 1/2), optional external potential, optional
    collective coupling.

    The external potential is a real tensor over the full configuration
    grid; use :meth:`separable` to build it from per-particle profiles.
    """

    grid: Grid1D
    n_particles: int
    potential: np.ndarray | None = None
    wfe: WfeParams | None = None

    def __post_init__(self) -> None:
        if not self.grid.periodic:
            raise GridSpecError("dynamics requires a periodic grid (Fourier kinetic step)")
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.potential is not None:
            potential = np.asarray(self.potential, dtype=float)
            expected = (self.grid.n_points,) * self.n_particles
            if potential.shape != expected:
                raise GridSpecError(
                    f"potential shape {potential.shape}, expected {expected}"
                )
            if not np.all(np.isfinite(potential)):
                raise ValueError("potential contains non-finite entries")
            object.__setattr__(self, "potential", potential)
        if self.wfe is not None and self.wfe.n_particles != self.n_particles:
            raise ValueError("wfe.n_particles does not match the Hamiltonian")

    @classmethod
    def free(cls, grid: Grid1D, n_particles: int, wfe: WfeParams | None = None) -> "Hamiltonian":
        return cls(grid, n_particles, None, wfe)

    @classmethod
    def separable(
        cls,
        grid: Grid1D,
        per_particle: np.ndarray,
        n_particles: int,
        wfe: WfeParams | None = None,
    ) -> "Hamiltonian":
        """V(x_1, ..., x_N) = sum_k v(x_k) from one single-particle profile."""
        v = np.asarray(per_particle, dtype=float)
        if v.shape != (grid.n_points,):
            raise GridSpecError("per-particle potential must match the grid")
        shapes = []
        for axis in range(n_particles):
            shape = [1] * n_particles
            shape[axis] = grid.n_points
            shapes.append(v.reshape(shape))
        return cls(grid, n_particles, reduce(np.add, shapes), wfe)

    @classmethod
    def harmonic(
        cls, grid: Grid1D, n_particles: int, omega: float = 1.0, wfe: WfeParams | None = None
    ) -> "Hamiltonian":
        return cls.separable(grid, 0.5 * omega**2 * grid.x**2, n_particles, wfe)

    @cached_property
    def com_tensor(self) -> np.ndarray:
        """X = (1/N) sum_k x_k over the configuration grid."""
        n = self.n_particles
        parts = []
        for axis in range(n):
            shape = [1] * n
            shape[axis] = self.grid.n_points
            parts.append(self.grid.x.reshape(shape))
        return reduce(np.add, parts) / n

    @cached_property
    def kinetic_symbol(self) -> np.ndarray:
        """sum_a k_a^2 / 2 over the configuration grid's Fourier lattice."""
        k2 = 0.5 * self.grid.wavenumbers**2
        parts = []
        for axis in range(self.n_particles):
            shape = [1] * self.n_particles
            shape[axis] = self.grid.n_points
            parts.append(k2.reshape(shape))
        return reduce(np.add, parts)

    @cached_property
    def dense_matrix(self) -> np.ndarray:
        """Dense Hamiltonian (kinetic + external potential) for small systems."""
        dim = self.grid.n_points**self.n_particles
        if dim > DENSE_SOLVER_LIMIT:
            raise SolverSizeError(f"dense Hamiltonian capped at {DENSE_SOLVER_LIMIT}, got {dim}")
        kinetic_1d = circulant(np.fft.ifft(0.5 * self.grid.wavenumbers**2).real)
        matrix = kinetic_1d
        if self.n_particles == 2:
            eye = np.eye(self.grid.n_points)
            matrix = np.kron(kinetic_1d, eye) + np.kron(eye, kinetic_1d)
        elif self.n_particles > 2:
            raise SolverSizeError("dense Hamiltonian supports one or two particles")
        if self.potential is not None:
            matrix = matrix + np.diag(self.potential.ravel())
        return matrix


def wfe_nonlinear_potential(state: WaveFunctionFull, params: WfeParams) -> np.ndarray:
    """Diagonal operator U = w N^2 (X^2 - 2 <X> X) for the current state.

    This is the functional derivative of the raw dispersion energy
    ``w N^2 (<psi|X^2|psi> - <psi|X|psi>^2)`` divided by psi, so
    ``2 Re <dpsi|U|psi>`` reproduces the finite-difference derivative of
    that functional exactly (at unit norm it coincides with the energy).
    The constant ``+<X>^2`` gauge term is dropped: it only shifts the
    global phase.
    """
    if params.n_particles != state.n_particles:
        raise ValueError("params.n_particles does not match the state")
    mean = com_mean(state)
    h = Hamiltonian(state.grid, state.n_particles)
    x = h.com_tensor
    return params.prefactor * (x * x - 2.0 * mean * x)


def _wfe_tensor(state: WaveFunctionFull, hamiltonian: Hamiltonian) -> np.ndarray | float:
    if hamiltonian.wfe is None or hamiltonian.wfe.w == 0.0:
        return 0.0
    mean = com_mean(state)
    x = hamiltonian.com_tensor
    return hamiltonian.wfe.prefactor * (x * x - 2.0 * mean * x)


def kinetic_energy(state: WaveFunctionFull) -> float:
    """(1/2) sum_a int |d_a psi|^2 over the configuration volume."""
    if not state.grid.periodic:
        raise GridSpecError("kinetic energy uses the Fourier lattice; grid must be periodic")
    n = state.grid.n_points
    k2 = 0.5 * state.grid.wavenumbers**2
    dv = state.grid.dx**state.n_particles
    total = 0.0
    for axis in range(state.n_particles):
        shape = [1] * state.n_particles
        shape[axis] = n
        transformed = np.fft.fft(state.amplitudes, axis=axis)
        total += float((k2.reshape(shape) * np.abs(transformed) ** 2).sum()) * dv / n
    return total


def potential_energy(state: WaveFunctionFull, hamiltonian: Hamiltonian) -> float:
    if hamiltonian.potential is None:
        return 0.0
    return float((hamiltonian.potential * state.probability_masses()).sum())


@dataclass(frozen=True)
class EvolutionRecord:
    time: float
    norm: float
    energy_kinetic: float
    energy_potential: float
    wfe: float
    com_mean: float
    com_dispersion: float

    @property
    def energy_total(self) -> float:
        return self.energy_kinetic + self.energy_potential + self.wfe

    FIELDS = ("t", "norm", "energy_kinetic", "energy_potential", "wfe",
              "energy_total", "com_mean", "com_dispersion")

    def as_row(self) -> tuple[float, ...]:
        return (self.time, self.norm, self.energy_kinetic, self.energy_potential,
                self.wfe, self.energy_total, self.com_mean, self.com_dispersion)


def observe(state: WaveFunctionFull, hamiltonian: Hamiltonian, time: float) -> EvolutionRecord:
    wfe_value = 0.0
    if hamiltonian.wfe is not None:
        wfe_value = wfe_direct(state, hamiltonian.wfe)
    return EvolutionRecord(
        time=time,
        norm=state.norm,
        energy_kinetic=kinetic_energy(state),
        energy_potential=potential_energy(state, hamiltonian),
        wfe=wfe_value,
        com_mean=com_mean(state),
        com_dispersion=com_dispersion(state),
    )


def step_split(state: WaveFunctionFull, hamiltonian: Hamiltonian, dt: float) -> WaveFunctionFull:
    """One Strang step: half phase, exact Fourier kinetic step, half phase.

    The collective term is refreshed once from the post-kinetic state, so
    the scalar ``<X>`` enters the two half phases at different times; this
    keeps the scheme second order without a fixed-point loop.
    """
    u_start = _wfe_tensor(state, hamiltonian)
    if hamiltonian.wfe is not None and hamiltonian.wfe.w != 0.0:
        u_sup = float(np.abs(u_start).max())
        if dt * u_sup >= 0.5:
            raise StabilityError(
                f"dt * max|U| = {dt * u_sup:.3f} >= 0.5; reduce dt or shrink the domain"
            )
    v = hamiltonian.potential if hamiltonian.potential is not None else 0.0
    psi = state.amplitudes * np.exp(-0.5j * dt * (v + u_start))
    psi = np.fft.ifftn(np.fft.fftn(psi) * np.exp(-1j * dt * hamiltonian.kinetic_symbol))
    mid = WaveFunctionFull(state.grid, psi, state.cap)
    u_mid = _wfe_tensor(mid, hamiltonian)
    psi = psi * np.exp(-0.5j * dt * (v + u_mid))
    return WaveFunctionFull(state.grid, psi, state.cap)


def _apply_hamiltonian(flat: np.ndarray, hamiltonian: Hamiltonian, w_diag: np.ndarray) -> np.ndarray:
    shape = (hamiltonian.grid.n_points,) * hamiltonian.n_particles
    psi = flat.reshape(shape)
    out = np.fft.ifftn(np.fft.fftn(psi) * hamiltonian.kinetic_symbol)
    out += w_diag.reshape(shape) * psi
    return out.ravel()


def _cn_solve(
    flat: np.ndarray,
    hamiltonian: Hamiltonian,
    w_diag: np.ndarray,
    dt: float,
    solver: str,
    rtol: float,
) -> np.ndarray:
    """Solve (1 + i dt/2 H) psi' = (1 - i dt/2 H) psi."""
    dim = flat.size
    if solver == "auto":
        solver = "dense" if dim <= DENSE_SOLVER_LIMIT else "gmres"
    apply_h = lambda v: _apply_hamiltonian(v, hamiltonian, w_diag)
    rhs = flat - 0.5j * dt * apply_h(flat)
    if solver == "dense":
        h_matrix = hamiltonian.dense_matrix.astype(complex)
        if hamiltonian.wfe is not None:
            base = hamiltonian.potential.ravel() if hamiltonian.potential is not None else 0.0
            h_matrix = h_matrix + np.diag(w_diag - base)
        lhs = np.eye(dim, dtype=complex) + 0.5j * dt * h_matrix
        return np.linalg.solve(lhs, rhs)
    operator = LinearOperator(
        (dim, dim), matvec=lambda v: v + 0.5j * dt * apply_h(v), dtype=complex
    )
    kwargs = {_GMRES_TOL_KW: rtol, "atol": 0.0, "maxiter": 500}
    solution, info = gmres(operator, rhs, x0=flat.copy(), **kwargs)
    if info != 0:
        raise RuntimeError(f"GMRES did not converge (info={info})")
    return solution


def step_reference(
    state: WaveFunctionFull,
    hamiltonian: Hamiltonian,
    dt: float,
    solver: str = "auto",
    rtol: float = 1e-12,
) -> WaveFunctionFull:
    """Crank-Nicolson step with one Picard correction of the collective term.

    Freezes U at the step start, solves, refreshes U from the normalized
    midpoint state, and solves once more.  Supports one or two particles
    (dense solve for small systems, matrix-free GMRES above that).
    """
    if state.n_particles > 2:
        raise SolverSizeError("reference integrator supports one or two particles")
    v = (
        hamiltonian.potential.ravel()
        if hamiltonian.potential is not None
        else np.zeros(state.grid.n_points**state.n_particles)
    )
    flat = state.amplitudes.ravel()
    shape = state.amplitudes.shape

    def diag_for(reference_state: WaveFunctionFull) -> np.ndarray:
        u = _wfe_tensor(reference_state, hamiltonian)
        return v + (u.ravel() if isinstance(u, np.ndarray) else 0.0)

    first = _cn_solve(flat, hamiltonian, diag_for(state), dt, solver, rtol)
    if hamiltonian.wfe is None or hamiltonian.wfe.w == 0.0:
        return WaveFunctionFull(state.grid, first.reshape(shape), state.cap)
    midpoint = WaveFunctionFull(state.grid, (0.5 * (flat + first)).reshape(shape), state.cap)
    corrected = _cn_solve(flat, hamiltonian, diag_for(midpoint.normalized()), dt, solver, rtol)
    return WaveFunctionFull(state.grid, corrected.reshape(shape), state.cap)


def evolve(
    state: WaveFunctionFull,
    hamiltonian: Hamiltonian,
    dt: float,
    n_steps: int,
    record_every: int = 1,
    norm_tol: float = 1e-6,
    stepper=None,
) -> tuple[list[EvolutionRecord], WaveFunctionFull]:
    """Drive ``stepper`` (default :func:`step_split`) for ``n_steps`` steps.

    Records observables at t=0, every ``record_every`` steps, and at the
    final step.  Aborts with a diagnostic when the norm drifts beyond
    ``norm_tol`` (evolution should be unitary to roundoff).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    if stepper is None:
        stepper = step_split
    records = [observe(state, hamiltonian, 0.0)]
    current = state
    for step in range(1, n_steps + 1):
        current = stepper(current, hamiltonian, dt)
        norm = current.norm
        if abs(norm - 1.0) > norm_tol:
            raise NormDriftError(
                f"norm drifted to {norm} at step {step} (t={step * dt}); "
                f"tolerance {norm_tol}"
            )
        if step % record_every == 0 or step == n_steps:
            records.append(observe(current, hamiltonian, step * dt))
    return records, current


# ---------------------------------------------------------------------------
# discrete action (variational bookkeeping)


def raw_energy(state: WaveFunctionFull, hamiltonian: Hamiltonian) -> float:
    """Kinetic + potential + collective energy without norm division.

    Defined on unnormalized states so its finite-difference gradient is
    comparable with the multiplication operator of
    :func:`wfe_nonlinear_potential`.
    """
    total = kinetic_energy(state) + potential_energy(state, hamiltonian)
    if hamiltonian.wfe is not None and hamiltonian.wfe.w != 0.0:
        mean, mean_sq = _com_moments_raw(state)
        total += hamiltonian.wfe.prefactor * (mean_sq - mean * mean)
    return total


def _com_moments_raw(state: WaveFunctionFull) -> tuple[float, float]:
    # same contractions as the observables module, without requiring norm 1
    return _com_moments(state)


def discrete_action(
    trajectory: list[WaveFunctionFull], hamiltonian: Hamiltonian, dt: float
) -> float:
    """Midpoint discretization of the action along a stored trajectory.

    ``S = sum_m dt * [ -Im <psi_mid | psi_dot> - E(psi_mid) ]`` with E the
    raw energy; stationary points of the continuum limit satisfy
    ``i psi_t = delta E / delta psi*``.
    """
    if len(trajectory) < 2:
        raise ValueError("need at least two snapshots")
    dv = trajectory[0].grid.dx ** trajectory[0].n_particles
    action = 0.0
    for left, right in zip(trajectory[:-1], trajectory[1:]):
        mid = WaveFunctionFull(
            left.grid, 0.5 * (left.amplitudes + right.amplitudes), left.cap
        )
        dot = (right.amplitudes - left.amplitudes) / dt
        phase_term = -float(np.imag(np.vdot(mid.amplitudes, dot)) * dv)
        action += dt * (phase_term - raw_energy(mid, hamiltonian))
    return action

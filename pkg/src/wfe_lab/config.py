"""Scenario configuration: strict INI parsing with typed sections.

Configs are flat INI files with a fixed set of sections and keys; any
unknown section or key is rejected so typos fail loudly instead of
silently running defaults.  Every tolerance a scenario reports lives in
the ``[tolerances]`` section (seeded from ``DEFAULT_TOLERANCES``), so
checks are data, not code.
"""

from __future__ import annotations

import configparser
import enum
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration (unknown keys, bad values, missing file)."""


class Scenario(enum.Enum):
    FREE = "free"
    HARMONIC = "harmonic"
    CAT = "cat"
    WFE_EQUIVALENCE = "wfe-equivalence"
    GREENS_VERIFY = "greens-verify"
    THIRD_ORDER_VERIFY = "third-order-verify"
    FD_VERIFY = "fd-verify"
    NOGO_VERIFY = "nogo-verify"
    DROPOUT_VERIFY = "dropout-verify"
    N2_SCALING = "n2-scaling"


#: Named tolerances; every check a scenario emits reads from this table
#: (possibly overridden per config).  Values mirror the shipped checks.
DEFAULT_TOLERANCES: dict[str, float] = {
    "wfe_agreement": 1e-8,
    "n2_slope_window": 0.05,
    "spreading": 1e-4,
    "stationarity_per_time": 1e-8,
    "norm_drift": 1e-9,
    "energy_drift": 1e-6,
    "cat_wfe_window": 1.2,
    "reconstruction": 1e-8,
    "poisson_residual": 1e-4,
    "boundary": 1e-6,
    "lagrangian_match": 1e-6,
    "effective_gap_min": 0.1,
    "third_order_residual": 1e-3,
    "third_order_linearity": 1e-10,
    "quadratic_combination": 1e-6,
    "eigenrelation": 1e-3,
    "order_two_limit": 1e-4,
    "transpose": 1e-4,
    "composition_min": 0.1,
    "antisymmetry": 1e-8,
    "collapse_agreement": 1e-8,
    "collapse_separation_min": 0.1,
    "dropout_d2_min": 1.0,
    "dropout_gradient": 1e-8,
}

_GRID_KEYS = {"n", "x_min", "x_max", "periodic"}
_PHYSICS_KEYS = {"n_particles", "w", "sigma", "separation", "momentum", "potential"}
_INTEGRATION_KEYS = {"dt", "t_final", "record_every"}
_OUTPUT_KEYS = {"dir", "plots"}
_RUN_KEYS = {"seed"}
_SECTIONS = {
    "scenario": {"name"},
    "grid": _GRID_KEYS,
    "physics": _PHYSICS_KEYS,
    "integration": _INTEGRATION_KEYS,
    "output": _OUTPUT_KEYS,
    "run": _RUN_KEYS,
    "tolerances": set(DEFAULT_TOLERANCES),
}

MAX_PARTICLES = 8


@dataclass(frozen=True)
class GridConfig:
    n: int = 256
    x_min: float = -16.0
    x_max: float = 16.0
    periodic: bool = True


@dataclass(frozen=True)
class PhysicsConfig:
    n_particles: int = 1
    w: float = 0.0
    sigma: float = 1.0
    separation: float = 10.0
    momentum: float = 0.0
    potential: str = "none"  # "none" or "harmonic:<omega>"


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float = 1e-3
    t_final: float = 1.0
    record_every: int = 50


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    grid: GridConfig = GridConfig()
    physics: PhysicsConfig = PhysicsConfig()
    integration: IntegrationConfig = IntegrationConfig()
    output_dir: Path | None = None
    plots: bool = True
    seed: int = 0
    tolerances: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def __post_init__(self) -> None:
        g = self.grid
        if g.n < 8:
            raise ConfigError(f"grid.n must be >= 8, got {g.n}")
        if not g.x_max > g.x_min:
            raise ConfigError(f"grid needs x_max > x_min, got [{g.x_min}, {g.x_max}]")
        p = self.physics
        if not 1 <= p.n_particles <= MAX_PARTICLES:
            raise ConfigError(
                f"physics.n_particles must be in [1, {MAX_PARTICLES}], got {p.n_particles}"
            )
        if p.w < 0.0:
            raise ConfigError(f"physics.w must be >= 0, got {p.w}")
        if p.sigma <= 0.0:
            raise ConfigError(f"physics.sigma must be > 0, got {p.sigma}")
        if p.separation < 0.0:
            raise ConfigError(f"physics.separation must be >= 0, got {p.separation}")
        if p.potential != "none" and not p.potential.startswith("harmonic:"):
            raise ConfigError(
                f"physics.potential must be 'none' or 'harmonic:<omega>', got {p.potential!r}"
            )
        if p.potential.startswith("harmonic:"):
            try:
                float(p.potential.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"bad harmonic frequency in {p.potential!r}") from exc
        i = self.integration
        if i.dt <= 0.0:
            raise ConfigError(f"integration.dt must be > 0, got {i.dt}")
        if i.t_final < 0.0:
            raise ConfigError(f"integration.t_final must be >= 0, got {i.t_final}")
        if i.record_every < 1:
            raise ConfigError(f"integration.record_every must be >= 1, got {i.record_every}")
        if self.seed < 0:
            raise ConfigError(f"run.seed must be >= 0, got {self.seed}")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
        for key, value in self.tolerances.items():
            if not value > 0.0:
                raise ConfigError(f"tolerances.{key} must be > 0, got {value}")

    def harmonic_omega(self) -> float | None:
        if self.physics.potential.startswith("harmonic:"):
            return float(self.physics.potential.split(":", 1)[1])
        return None


def _parse_bool(raw: str, where: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {raw!r}")


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: expected an integer, got {raw!r}") from exc


def _parse_float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: expected a number, got {raw!r}") from exc


def _apply_overrides(parser: configparser.ConfigParser, overrides: list[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        section, key = dotted.split(".", 1)
        section = section.strip()
        key = key.strip()
        if section not in _SECTIONS or key not in _SECTIONS[section]:
            raise ConfigError(f"unknown option {section}.{key}")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value.strip())


def parse_config(path: str | Path, overrides: list[str] | None = None) -> ScenarioConfig:
    """Read and validate one scenario config file.

    ``overrides`` are ``section.key=value`` strings applied after the
    file, matching the CLI's ``--set`` flag.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as handle:
            parser.read_file(handle)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    _apply_overrides(parser, overrides or [])

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}] in {path.name}")
        for key in parser.options(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown option {section}.{key} in {path.name}")

    if not parser.has_option("scenario", "name"):
        raise ConfigError(f"{path.name} is missing scenario.name")
    raw_name = parser.get("scenario", "name").strip()
    try:
        scenario = Scenario(raw_name)
    except ValueError as exc:
        valid = ", ".join(s.value for s in Scenario)
        raise ConfigError(f"unknown scenario {raw_name!r}; one of: {valid}") from exc

    def pick(section: str, key: str, conv, default):
        if parser.has_option(section, key):
            return conv(parser.get(section, key), f"{section}.{key}")
        return default

    grid = GridConfig(
        n=pick("grid", "n", _parse_int, GridConfig.n),
        x_min=pick("grid", "x_min", _parse_float, GridConfig.x_min),
        x_max=pick("grid", "x_max", _parse_float, GridConfig.x_max),
        periodic=pick("grid", "periodic", _parse_bool, GridConfig.periodic),
    )
    physics = PhysicsConfig(
        n_particles=pick("physics", "n_particles", _parse_int, PhysicsConfig.n_particles),
        w=pick("physics", "w", _parse_float, PhysicsConfig.w),
        sigma=pick("physics", "sigma", _parse_float, PhysicsConfig.sigma),
        separation=pick("physics", "separation", _parse_float, PhysicsConfig.separation),
        momentum=pick("physics", "momentum", _parse_float, PhysicsConfig.momentum),
        potential=pick("physics", "potential", lambda raw, _w: raw.strip(), PhysicsConfig.potential),
    )
    integration = IntegrationConfig(
        dt=pick("integration", "dt", _parse_float, IntegrationConfig.dt),
        t_final=pick("integration", "t_final", _parse_float, IntegrationConfig.t_final),
        record_every=pick("integration", "record_every", _parse_int, IntegrationConfig.record_every),
    )
    output_dir = None
    if parser.has_option("output", "dir"):
        output_dir = Path(parser.get("output", "dir").strip())
    plots = pick("output", "plots", _parse_bool, True)
    seed = pick("run", "seed", _parse_int, 0)
    tolerances = dict(DEFAULT_TOLERANCES)
    if parser.has_section("tolerances"):
        for key in parser.options("tolerances"):
            tolerances[key] = _parse_float(
                parser.get("tolerances", key), f"tolerances.{key}"
            )
    return ScenarioConfig(
        scenario=scenario,
        grid=grid,
        physics=physics,
        integration=integration,
        output_dir=output_dir,
        plots=plots,
        seed=seed,
        tolerances=tolerances,
    )

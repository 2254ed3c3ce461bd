"""Artifact writers: delimited tables, JSON summaries, rendered figures.

CSV values use 17 significant digits so downstream diff/plot tooling
sees exactly the numbers the checks saw; newlines are pinned to ``\\n``
for byte-identical reruns.  Figures are rendered with the Agg backend
straight to PNG files next to the tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TIMESERIES_HEADER = (
    "t,norm,energy_kinetic,energy_potential,wfe,energy_total,com_mean,com_dispersion"
)


def _format(value: float) -> str:
    return format(float(value), ".17g")


@dataclass(frozen=True)
class CheckResult:
    """One named pass/fail check with the number and bound behind it."""

    name: str
    passed: bool
    value: float
    tolerance: float
    comparison: str  # "<" value must stay below tolerance, ">" above
    detail: str = ""

    def as_dict(self) -> dict:
        out = {
            "passed": bool(self.passed),
            "value": float(self.value),
            "tolerance": float(self.tolerance),
            "comparison": self.comparison,
        }
        if self.detail:
            out["detail"] = self.detail
        return out

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name}: value {self.value:.6g} "
            f"{self.comparison} tolerance {self.tolerance:.6g}"
        )


def check_less(name: str, value: float, tolerance: float, detail: str = "") -> CheckResult:
    return CheckResult(name, value < tolerance, value, tolerance, "<", detail)


def check_greater(name: str, value: float, tolerance: float, detail: str = "") -> CheckResult:
    return CheckResult(name, value > tolerance, value, tolerance, ">", detail)


def write_timeseries(path: Path, records) -> None:
    """Write evolution records under the pinned eight-column header."""
    lines = [TIMESERIES_HEADER]
    for record in records:
        lines.append(",".join(_format(v) for v in record.as_row()))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def write_table(path: Path, columns: dict[str, np.ndarray]) -> None:
    """Write named columns as CSV (full precision, pinned newlines)."""
    names = list(columns)
    arrays = [np.asarray(columns[name], dtype=float) for name in names]
    length = arrays[0].shape[0]
    for name, arr in zip(names, arrays):
        if arr.shape != (length,):
            raise ValueError(f"column {name} has shape {arr.shape}, expected ({length},)")
    lines = [",".join(names)]
    for i in range(length):
        lines.append(",".join(_format(arr[i]) for arr in arrays))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def write_summary(path: Path, summary: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")


# ---------------------------------------------------------------------------
# figure rendering (Agg, file output only)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render_timeseries(path: Path, records) -> None:
    """Four-panel overview: norm drift, energies, CoM mean, CoM dispersion."""
    plt = _pyplot()
    t = np.array([r.time for r in records])
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    axes[0, 0].plot(t, [abs(r.norm - 1.0) for r in records])
    axes[0, 0].set_yscale("symlog", linthresh=1e-16)
    axes[0, 0].set_ylabel("|norm - 1|")
    axes[0, 1].plot(t, [r.energy_kinetic for r in records], label="kinetic")
    axes[0, 1].plot(t, [r.energy_potential for r in records], label="potential")
    axes[0, 1].plot(t, [r.wfe for r in records], label="wfe")
    axes[0, 1].plot(t, [r.energy_total for r in records], "k--", label="total")
    axes[0, 1].set_ylabel("energy")
    axes[0, 1].legend(fontsize=8)
    axes[1, 0].plot(t, [r.com_mean for r in records])
    axes[1, 0].set_ylabel("<X>")
    axes[1, 0].set_xlabel("t")
    axes[1, 1].plot(t, [r.com_dispersion for r in records])
    axes[1, 1].set_ylabel("S_N")
    axes[1, 1].set_xlabel("t")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_fields(path: Path, columns: dict[str, np.ndarray], x_label: str = "x") -> None:
    """Overlay the named field columns against the first column (the axis)."""
    plt = _pyplot()
    names = list(columns)
    x = np.asarray(columns[names[0]], dtype=float)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name in names[1:]:
        ax.plot(x, np.asarray(columns[name], dtype=float), label=name)
    ax.set_xlabel(x_label)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_scaling(path: Path, sizes: np.ndarray, values: np.ndarray, slope: float) -> None:
    """Log-log scaling plot with the fitted power law."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(sizes, values, "o", label="measured")
    anchor = values[0] / sizes[0] ** slope
    ax.loglog(sizes, anchor * sizes**slope, "--", label=f"slope {slope:.3f}")
    ax.set_xlabel("N")
    ax.set_ylabel("WFE")
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)

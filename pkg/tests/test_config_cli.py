import json

import numpy as np
import pytest

from wfe_lab import cli
from wfe_lab.config import (
    DEFAULT_TOLERANCES,
    ConfigError,
    Scenario,
    parse_config,
)
from wfe_lab.dynamics import EvolutionRecord
from wfe_lab.reporting import (
    TIMESERIES_HEADER,
    check_greater,
    check_less,
    render_timeseries,
    write_summary,
    write_table,
    write_timeseries,
)

MINIMAL = """\
[scenario]
name = free
"""

FAST_FREE = """\
[scenario]
name = free

[grid]
n = 128

[integration]
dt = 1e-3
t_final = 0.05
record_every = 10

[output]
plots = false
"""


def write_cfg(tmp_path, text, name="scenario.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParseConfig:
    def test_defaults(self, tmp_path):
        config = parse_config(write_cfg(tmp_path, MINIMAL))
        assert config.scenario is Scenario.FREE
        assert config.grid.n == 256
        assert config.grid.periodic is True
        assert config.physics.n_particles == 1
        assert config.physics.w == 0.0
        assert config.integration.dt == pytest.approx(1e-3)
        assert config.tolerances == DEFAULT_TOLERANCES
        assert config.output_dir is None
        assert config.plots is True

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "absent.cfg")

    def test_unknown_section_rejected(self, tmp_path):
        path = write_cfg(tmp_path, MINIMAL + "\n[widgets]\ncount = 3\n")
        with pytest.raises(ConfigError, match=r"unknown section \[widgets\]"):
            parse_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = write_cfg(tmp_path, MINIMAL + "\n[grid]\nshape = round\n")
        with pytest.raises(ConfigError, match="unknown option grid.shape"):
            parse_config(path)

    def test_unknown_scenario_rejected(self, tmp_path):
        path = write_cfg(tmp_path, "[scenario]\nname = warp\n")
        with pytest.raises(ConfigError, match="unknown scenario"):
            parse_config(path)

    def test_missing_scenario_name(self, tmp_path):
        path = write_cfg(tmp_path, "[grid]\nn = 64\n")
        with pytest.raises(ConfigError, match="missing scenario.name"):
            parse_config(path)

    def test_bad_integer(self, tmp_path):
        path = write_cfg(tmp_path, MINIMAL + "\n[grid]\nn = many\n")
        with pytest.raises(ConfigError, match="expected an integer"):
            parse_config(path)

    def test_bad_boolean(self, tmp_path):
        path = write_cfg(tmp_path, MINIMAL + "\n[grid]\nperiodic = maybe\n")
        with pytest.raises(ConfigError, match="expected a boolean"):
            parse_config(path)

    @pytest.mark.parametrize(
        "snippet",
        [
            "[physics]\nn_particles = 9\n",
            "[physics]\nsigma = 0\n",
            "[physics]\nw = -1\n",
            "[physics]\npotential = coulomb\n",
            "[physics]\npotential = harmonic:abc\n",
            "[integration]\ndt = 0\n",
            "[integration]\nrecord_every = 0\n",
            "[grid]\nn = 4\n",
            "[grid]\nx_min = 5\nx_max = -5\n",
            "[run]\nseed = -1\n",
            "[tolerances]\nspreading = -1e-4\n",
        ],
    )
    def test_range_validation(self, tmp_path, snippet):
        path = write_cfg(tmp_path, MINIMAL + "\n" + snippet)
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_harmonic_omega(self, tmp_path):
        path = write_cfg(tmp_path, MINIMAL + "\n[physics]\npotential = harmonic:2.5\n")
        assert parse_config(path).harmonic_omega() == pytest.approx(2.5)
        assert parse_config(write_cfg(tmp_path, MINIMAL, "b.cfg")).harmonic_omega() is None

    def test_overrides_apply_after_file(self, tmp_path):
        path = write_cfg(tmp_path, MINIMAL + "\n[grid]\nn = 64\n")
        config = parse_config(path, ["grid.n=96", "tolerances.spreading=0.5"])
        assert config.grid.n == 96
        assert config.tolerances["spreading"] == pytest.approx(0.5)

    def test_malformed_override(self, tmp_path):
        path = write_cfg(tmp_path, MINIMAL)
        with pytest.raises(ConfigError, match="--set expects"):
            parse_config(path, ["grid.n"])
        with pytest.raises(ConfigError, match="--set expects"):
            parse_config(path, ["n=96"])

    def test_unknown_override_key(self, tmp_path):
        path = write_cfg(tmp_path, MINIMAL)
        with pytest.raises(ConfigError, match="unknown option physics.mass"):
            parse_config(path, ["physics.mass=2"])


class TestReportingWriters:
    def records(self):
        return [
            EvolutionRecord(0.0, 1.0, 0.25, 0.0, 0.1, 0.0, 1.0),
            EvolutionRecord(0.5, 1.0, 0.26, 0.0, 0.1, 0.01, 1.02),
        ]

    def test_check_results(self):
        good = check_less("alpha", 0.5, 1.0)
        assert good.passed
        assert good.line() == "PASS alpha: value 0.5 < tolerance 1"
        bad = check_greater("beta", 0.05, 0.1)
        assert not bad.passed
        assert bad.line().startswith("FAIL beta")
        assert check_less("c", 2.0, 1.0).as_dict()["passed"] is False

    def test_timeseries_header_and_shape(self, tmp_path):
        path = tmp_path / "timeseries.csv"
        write_timeseries(path, self.records())
        lines = path.read_text().splitlines()
        assert lines[0] == TIMESERIES_HEADER
        assert len(lines) == 3
        first = dict(zip(TIMESERIES_HEADER.split(","), lines[1].split(",")))
        assert float(first["com_dispersion"]) == 1.0
        # full precision round trip
        assert float(first["energy_kinetic"]) == 0.25

    def test_table_round_trip(self, tmp_path):
        path = tmp_path / "table.csv"
        x = np.linspace(0.0, 1.0, 7)
        write_table(path, {"x": x, "y": x**2})
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert np.array_equal(data["x"], x)
        assert np.array_equal(data["y"], x**2)

    def test_table_shape_mismatch(self, tmp_path):
        with pytest.raises(ValueError, match="shape"):
            write_table(tmp_path / "bad.csv", {"x": np.ones(3), "y": np.ones(4)})

    def test_summary_round_trip(self, tmp_path):
        path = tmp_path / "summary.json"
        write_summary(path, {"b": 2, "a": {"passed": True}})
        loaded = json.loads(path.read_text())
        assert loaded == {"b": 2, "a": {"passed": True}}
        # keys are sorted for stable diffs
        assert path.read_text().index('"a"') < path.read_text().index('"b"')

    def test_render_timeseries_writes_png(self, tmp_path):
        path = tmp_path / "timeseries.png"
        render_timeseries(path, self.records())
        assert path.stat().st_size > 0


class TestCliRun:
    def test_successful_run(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, FAST_FREE)
        out = tmp_path / "out"
        code = cli.main(["run", "--config", str(cfg), "--out", str(out)])
        captured = capsys.readouterr()
        assert code == 0
        assert "PASS free_spreading_law" in captured.out
        assert (out / "timeseries.csv").is_file()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["all_passed"] is True
        assert summary["scenario"] == "free"
        assert any((out / "fields").glob("*.csv"))

    def test_timeseries_is_byte_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path, FAST_FREE)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
            outs.append(out)
        first = (outs[0] / "timeseries.csv").read_bytes()
        second = (outs[1] / "timeseries.csv").read_bytes()
        assert first == second
        for field_csv in sorted((outs[0] / "fields").glob("*.csv")):
            twin = outs[1] / "fields" / field_csv.name
            assert field_csv.read_bytes() == twin.read_bytes()

    def test_failing_check_exits_one_and_names_it(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, FAST_FREE)
        code = cli.main(
            [
                "run",
                "--config",
                str(cfg),
                "--out",
                str(tmp_path / "out"),
                "--set",
                "tolerances.spreading=1e-18",
            ]
        )
        captured = capsys.readouterr()
        assert code == 1
        assert "FAIL free_spreading_law" in captured.out
        assert "free_spreading_law" in captured.err

    def test_missing_config_exits_two(self, tmp_path, capsys):
        code = cli.main(["run", "--config", str(tmp_path / "absent.cfg")])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_bad_override_exits_two(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, FAST_FREE)
        code = cli.main(["run", "--config", str(cfg), "--set", "physics.mass=2"])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_invalid_value_exits_two(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, FAST_FREE + "\n[physics]\nsigma = -1\n")
        code = cli.main(["run", "--config", str(cfg)])
        assert code == 2
        assert "config error" in capsys.readouterr().err


class TestCliVerify:
    def test_empty_suite_passes_vacuously(self, tmp_path, capsys):
        suite = tmp_path / "suite"
        suite.mkdir()
        code = cli.main(["verify", "--suite", str(suite), "--out", str(tmp_path / "out")])
        captured = capsys.readouterr()
        assert code == 0
        assert "total: 0 scenarios" in captured.out

    def test_missing_suite_exits_two(self, tmp_path, capsys):
        code = cli.main(["verify", "--suite", str(tmp_path / "nowhere")])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_single_scenario_suite(self, tmp_path, capsys):
        suite = tmp_path / "suite"
        suite.mkdir()
        (suite / "quick.cfg").write_text(FAST_FREE)
        out = tmp_path / "out"
        code = cli.main(["verify", "--suite", str(suite), "--out", str(out)])
        captured = capsys.readouterr()
        assert code == 0
        assert "PASS quick" in captured.out
        report = json.loads((out / "report.json").read_text())
        assert report["all_passed"] is True
        assert report["scenarios"]["quick"]["passed"] is True

    def test_failing_scenario_exits_one(self, tmp_path, capsys):
        suite = tmp_path / "suite"
        suite.mkdir()
        (suite / "quick.cfg").write_text(FAST_FREE)
        code = cli.main(
            [
                "verify",
                "--suite",
                str(suite),
                "--out",
                str(tmp_path / "out"),
                "--set",
                "tolerances.spreading=1e-18",
            ]
        )
        captured = capsys.readouterr()
        assert code == 1
        assert "FAIL quick" in captured.out
        assert "free_spreading_law" in captured.err

"""CLI command tests: exit codes, file outputs, round trips."""

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from pidspace.cli import main
from pidspace.region import RegionMap

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
VEHICLE = str(FIXTURES / "vehicle.json")
EXAMPLE = str(FIXTURES / "example_plant.json")


@pytest.fixture
def runner():
    return CliRunner()


def _write_config(tmp_path, **edits):
    raw = json.loads(Path(VEHICLE).read_text())
    raw.update(edits)
    p = tmp_path / "config.json"
    p.write_text(json.dumps(raw))
    return str(p)


class TestDiscretize:
    def test_vehicle_matches_printed_discretization(self, runner, tmp_path):
        out = tmp_path / "plant.json"
        result = runner.invoke(main, ["discretize", "-c", VEHICLE, "-o", str(out)])
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert doc["domain"] == "discrete"
        assert doc["sample_time"] == 0.01
        np.testing.assert_allclose(doc["num"], [0.01147, -0.008747, -0.01145, 0.009058], rtol=5e-4)
        np.testing.assert_allclose(doc["den"], [1.0, -3.798, 5.397, -3.4, 0.8012], rtol=5e-4)

    def test_integrator(self, runner, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "version": 1,
            "plant": {"domain": "continuous", "num": [1.0], "den": [1.0, 0.0]},
            "sample_time": 0.01,
            "controller_structure": "P",
            "plane": {"x_axis": "kp", "y_axis": "ki"},
            "constraints": {"require_stability": True},
        }))
        # P structure cannot span a (kp, ki) plane
        result = runner.invoke(main, ["discretize", "-c", str(cfg)])
        assert result.exit_code == 2

        cfg.write_text(json.dumps({
            "version": 1,
            "plant": {"domain": "continuous", "num": [1.0], "den": [1.0, 0.0]},
            "sample_time": 0.01,
            "controller_structure": "PI",
            "plane": {"x_axis": "kp", "y_axis": "ki"},
            "constraints": {"require_stability": True},
        }))
        out = tmp_path / "d.json"
        result = runner.invoke(main, ["discretize", "-c", str(cfg), "-o", str(out)])
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        np.testing.assert_allclose(doc["num"], [0.01], rtol=1e-12)
        np.testing.assert_allclose(doc["den"], [1.0, -1.0], rtol=1e-12)

    def test_improper_plant_exits_2(self, runner, tmp_path):
        cfg = _write_config(tmp_path, plant={"domain": "continuous", "num": [1.0, 0.0, 0.0], "den": [1.0, 1.0]})
        result = runner.invoke(main, ["discretize", "-c", cfg])
        assert result.exit_code == 2
        assert "improper" in result.output

    def test_unknown_key_exits_2(self, runner, tmp_path):
        cfg = _write_config(tmp_path, bogus_key=1)
        result = runner.invoke(main, ["discretize", "-c", cfg])
        assert result.exit_code == 2
        assert "config error" in result.output


class TestRegion:
    def test_region_map_contains_design_point(self, runner, tmp_path):
        out = tmp_path / "map.json"
        result = runner.invoke(main, ["region", "-c", VEHICLE, "-o", str(out),
                                      "--svg", str(tmp_path / "map.svg"),
                                      "--csv", str(tmp_path / "cells.csv")])
        assert result.exit_code == 0, result.output
        m = RegionMap.from_dict(json.loads(out.read_text()))
        ix, iy = m.cell_containing(0.07, 0.2)
        assert m.feasible_cells()[iy, ix]
        assert (tmp_path / "map.svg").stat().st_size > 1000
        rows = (tmp_path / "cells.csv").read_text().strip().splitlines()
        assert rows[0] == "kd,kp"
        assert len(rows) - 1 == m.metadata["feasible_cells"]

    def test_empty_intersection_notice_exit_zero(self, runner, tmp_path):
        raw = json.loads(Path(VEHICLE).read_text())
        raw["constraints"]["pm_min"] = 179.0
        raw["constraints"]["pm_max"] = 179.5
        raw["grid"]["nx"] = raw["grid"]["ny"] = 9
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(raw))
        out = tmp_path / "m.json"
        result = runner.invoke(main, ["region", "-c", str(cfg), "-o", str(out)])
        assert result.exit_code == 0, result.output
        assert "empty region" in result.output
        m = RegionMap.from_dict(json.loads(out.read_text()))
        assert m.metadata["feasible_cells"] == 0

    def test_sweep_emits_slices(self, runner, tmp_path):
        raw = json.loads(Path(EXAMPLE).read_text())
        raw["grid"].update({"nx": 9, "ny": 9})
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(raw))
        out = tmp_path / "sweep.json"
        result = runner.invoke(main, ["region", "-c", str(cfg), "--sweep", "sample_time:1.0,2.0", "-o", str(out)])
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert doc["axis"] == "sample_time"
        assert len(doc["maps"]) == 2 and all(m is not None for m in doc["maps"])

    def test_bad_sweep_spec_exits_2(self, runner):
        result = runner.invoke(main, ["region", "-c", EXAMPLE, "--sweep", "bogus:1"])
        assert result.exit_code == 2


class TestAnalyze:
    def test_design_point_flags_all_true(self, runner, tmp_path):
        out = tmp_path / "report.json"
        result = runner.invoke(main, ["analyze", "-c", VEHICLE, "0.2", "0", "0.07", "-o", str(out)])
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert all(f["satisfied"] for f in doc["flags"].values())
        assert doc["flags"].keys() == {"stable", "pm", "ms"}

    def test_zero_gains_pi_structure_unstable(self, runner, tmp_path):
        raw = json.loads(Path(EXAMPLE).read_text())
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(raw))
        result = runner.invoke(main, ["analyze", "-c", str(cfg), "0", "0", "0", "-o", str(tmp_path / "r.json")])
        assert result.exit_code == 0, result.output
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["flags"]["stable"]["satisfied"] is False

    def test_structure_mismatch_exits_2(self, runner):
        # ki must be zero for the PD project
        result = runner.invoke(main, ["analyze", "-c", VEHICLE, "0.2", "0.5", "0.07"])
        assert result.exit_code == 2

    def test_unstable_simulation_without_force_exits_4(self, runner):
        result = runner.invoke(main, ["analyze", "-c", VEHICLE, "5.0", "0", "0.001", "--simulate", "step", "100"])
        assert result.exit_code == 4
        result = runner.invoke(main, ["analyze", "-c", VEHICLE, "5.0", "0", "0.001",
                                      "--simulate", "step", "100", "--force"])
        assert result.exit_code == 0

    def test_svg_figures(self, runner, tmp_path):
        result = runner.invoke(main, ["analyze", "-c", VEHICLE, "0.2", "0", "0.07",
                                      "--simulate", "step", "500", "--svg-dir", str(tmp_path / "figs")])
        assert result.exit_code == 0, result.output
        for name in ("bode.svg", "robust_performance.svg", "response.svg"):
            assert (tmp_path / "figs" / name).stat().st_size > 1000


class TestSimulate:
    def test_step_outputs(self, runner, tmp_path):
        out = tmp_path / "sim.json"
        csv_path = tmp_path / "sim.csv"
        result = runner.invoke(main, ["simulate", "-c", VEHICLE, "0.2", "0", "0.07",
                                      "--ref", "step", "-n", "300",
                                      "-o", str(out), "--csv", str(csv_path)])
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert len(doc["time"]) == 300
        header, *rows = csv_path.read_text().strip().splitlines()
        assert header == "time,reference,output,error,control"
        assert len(rows) == 300

    def test_round_trip_via_export(self, runner, tmp_path):
        sim_json = tmp_path / "sim.json"
        runner.invoke(main, ["simulate", "-c", VEHICLE, "0.2", "0", "0.07", "-n", "100", "-o", str(sim_json)])
        result = runner.invoke(main, ["export", "--sim", str(sim_json),
                                      "--svg", str(tmp_path / "r.svg"), "--csv", str(tmp_path / "r.csv")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "r.svg").stat().st_size > 1000


class TestExport:
    def test_map_export(self, runner, tmp_path):
        raw = json.loads(Path(EXAMPLE).read_text())
        raw["grid"].update({"nx": 15, "ny": 15})
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(raw))
        map_json = tmp_path / "map.json"
        runner.invoke(main, ["region", "-c", str(cfg), "-o", str(map_json)])
        result = runner.invoke(main, ["export", "--map", str(map_json),
                                      "--svg", str(tmp_path / "m.svg"), "--csv", str(tmp_path / "m.csv")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "m.svg").stat().st_size > 1000

    def test_boundaries_csv(self, runner, tmp_path):
        raw = json.loads(Path(EXAMPLE).read_text())
        raw["grid"].update({"nx": 9, "ny": 9, "theta_points": 64})
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(raw))
        map_json = tmp_path / "map.json"
        runner.invoke(main, ["region", "-c", str(cfg), "-o", str(map_json)])
        result = runner.invoke(main, ["export", "--map", str(map_json),
                                      "--boundaries-csv", str(tmp_path / "b.csv")])
        assert result.exit_code == 0, result.output
        header, *rows = (tmp_path / "b.csv").read_text().strip().splitlines()
        assert header == "kind,x,y,theta,theta_l"
        assert len(rows) >= 64

    def test_region_export_all_uses_config_paths(self, runner, tmp_path):
        raw = json.loads(Path(EXAMPLE).read_text())
        raw["grid"].update({"nx": 9, "ny": 9, "theta_points": 64})
        raw["outputs"] = {"directory": str(tmp_path / "out"), "basename": "demo"}
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(raw))
        result = runner.invoke(main, ["region", "-c", str(cfg), "--export-all"])
        assert result.exit_code == 0, result.output
        for ext in ("json", "svg", "csv"):
            assert (tmp_path / "out" / f"demo.region.{ext}").exists()

    def test_requires_exactly_one_input(self, runner):
        result = runner.invoke(main, ["export", "--svg", "x.svg"])
        assert result.exit_code == 2

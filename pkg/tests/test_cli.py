import json
from pathlib import Path

import numpy as np
import pytest

from spikelqr import cli, runner
from spikelqr.config import (ConfigError, parse_config, parse_config_dict,
                             profile_names, resolved_dict)


def minimal_doc(**overrides):
    doc = {
        "schema": 1,
        "name": "unit",
        "plant": {"n_links": 1, "cart_mass": 5.0, "link_masses": [1.0],
                  "link_lengths": [2.0]},
        "weights": {"q_position": 1.0, "q_angle": 10.0, "q_velocity": 1.0,
                    "q_angular_velocity": 10.0, "r": 1.0},
        "controller": {"kind": "lqr"},
        "initial_angles": [0.2],
        "duration": 1.0,
        "dt": 0.001,
        "seeds": [0],
    }
    doc.update(overrides)
    return doc


class TestConfigParsing:
    def test_minimal_roundtrip(self):
        cfg = parse_config_dict(minimal_doc())
        assert cfg.plant.n_links == 1
        assert cfg.x0[1] == 0.2
        assert cfg.controller.kind == "lqr"

    def test_profiles_all_parse(self):
        for name in profile_names():
            cfg = parse_config(name)
            assert cfg.duration > 0
            assert cfg.name == name

    def test_shipped_two_neuron_profile_matches_experiment_row(self):
        cfg = parse_config("cartpole-2neuron-4syn")
        assert cfg.controller.kind == "spiking-lqr-2"
        assert cfg.controller.dendrites == 4
        d = np.diag(cfg.controller.weights.Q)
        assert list(d) == [1.0, 10.0, 1.0, 10.0]
        assert cfg.controller.weights.R == 1e-4

    def test_empty_document_names_missing_field(self):
        with pytest.raises(ConfigError, match="schema"):
            parse_config_dict({})

    def test_negative_mass_range_error(self):
        doc = minimal_doc()
        doc["plant"]["link_masses"] = [-1.0]
        with pytest.raises(ConfigError, match=r"plant.link_masses\[0\]"):
            parse_config_dict(doc)

    def test_unknown_key_rejected(self):
        doc = minimal_doc()
        doc["plant"]["wheels"] = 4
        with pytest.raises(ConfigError, match="plant.wheels"):
            parse_config_dict(doc)
        with pytest.raises(ConfigError, match="config.flux"):
            parse_config_dict(minimal_doc(flux=1))

    def test_bad_schema_version(self):
        with pytest.raises(ConfigError, match="schema"):
            parse_config_dict(minimal_doc(schema=99))

    def test_wrong_ic_length(self):
        with pytest.raises(ConfigError, match="initial_angles"):
            parse_config_dict(minimal_doc(initial_angles=[0.1, 0.2]))

    def test_resolved_config_reparses_identically(self):
        cfg = parse_config("cartpole-ensemble-100")
        echo = resolved_dict(cfg)
        cfg2 = parse_config_dict(echo)
        assert np.array_equal(cfg.x0, cfg2.x0)
        assert resolved_dict(cfg2) == echo  # echo is a fixed point
        assert cfg.duration == cfg2.duration
        assert cfg.seeds == cfg2.seeds


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    doc = minimal_doc()
    doc["controller"] = {
        "kind": "spiking-lqr-ensemble",
        "ensemble": {"n_neurons": 16},
    }
    cfg = parse_config_dict(doc)
    runner.run(cfg, out, seeds=[0])
    return out


class TestRunnerArtifacts:
    def test_artifact_set_complete(self, run_dir):
        assert (run_dir / "resolved_config.json").exists()
        assert (run_dir / "runs.json").exists()
        seed_dir = run_dir / "seed0"
        for name in ("trace.csv", "raster.csv", "metrics.json"):
            assert (seed_dir / name).exists()

    def test_trace_csv_columns(self, run_dir):
        header = (run_dir / "seed0" / "trace.csv").read_text().splitlines()[0]
        assert header == "t,x,xdot,theta_1,thetadot_1,u"

    def test_raster_csv_columns(self, run_dir):
        lines = (run_dir / "seed0" / "raster.csv").read_text().splitlines()
        assert lines[0] == "t,neuron_id"
        assert len(lines) > 1

    def test_metrics_json_has_channels(self, run_dir):
        report = json.loads((run_dir / "seed0" / "metrics.json").read_text())
        assert "theta_1" in report["channels"]
        assert report["outcome"] == "ok"
        assert "neuromorphic" in report
        assert "runtime" in report

    def test_rerun_byte_identical(self, run_dir, tmp_path):
        doc = minimal_doc()
        doc["controller"] = {
            "kind": "spiking-lqr-ensemble",
            "ensemble": {"n_neurons": 16},
        }
        cfg = parse_config_dict(doc)
        runner.run(cfg, tmp_path, seeds=[0])
        for name in ("trace.csv", "raster.csv"):
            a = (run_dir / "seed0" / name).read_bytes()
            b = (tmp_path / "seed0" / name).read_bytes()
            assert a == b

    def test_failure_recorded(self, tmp_path):
        doc = minimal_doc()
        doc["plant"] = {"n_links": 4, "cart_mass": 5.0,
                        "link_masses": [0.25] * 4, "link_lengths": [0.5] * 4}
        doc["weights"] = {"q_position": 1000.0, "q_angle": 10000.0,
                          "q_velocity": 1000.0, "q_angular_velocity": 1000.0,
                          "r": 20.0}
        doc["controller"] = {"kind": "spiking-lqr-ensemble",
                             "ensemble": {"n_neurons": 2}}
        doc["initial_angles"] = [0.2, 0.18, 0.16, 0.14]
        doc["duration"] = 10.0
        cfg = parse_config_dict(doc)
        summary = runner.run(cfg, tmp_path, seeds=[1])
        assert summary["failed"]
        assert summary["seeds"]["1"]["outcome"] == "pole_fell"


class TestSweep:
    def test_single_value_sweep_equals_run(self, tmp_path):
        doc = minimal_doc()
        doc["controller"] = {"kind": "spiking-lqr-ensemble",
                             "ensemble": {"n_neurons": 16}}
        cfg = parse_config_dict(doc)
        rows = runner.sweep(cfg, "neurons", [16], tmp_path / "sweep", seeds=[0])
        runner.run(cfg, tmp_path / "run", seeds=[0])
        report = json.loads((tmp_path / "run" / "seed0" / "metrics.json").read_text())
        direct = report["channels"]["theta_1"]
        assert rows[0]["iae_rad_s_mean"] == pytest.approx(direct["iae_rad_s"], rel=1e-12)
        assert rows[0]["isc_n2_s_mean"] == pytest.approx(direct["isc_n2_s"], rel=1e-12)
        assert rows[0]["n_failed"] == 0

    def test_axis_values_parser(self):
        assert runner.parse_axis_values("neurons", "2,4,8") == [2, 4, 8]
        assert runner.parse_axis_values("ki", "0.0,0.5") == [0.0, 0.5]
        assert runner.parse_axis_values("max_rates", "200:400,300:400") == [
            (200.0, 400.0), (300.0, 400.0)]
        with pytest.raises(ValueError):
            runner.parse_axis_values("max_rates", "200")

    def test_sweep_continues_past_failures(self, tmp_path):
        doc = minimal_doc()
        doc["plant"] = {"n_links": 4, "cart_mass": 5.0,
                        "link_masses": [0.25] * 4, "link_lengths": [0.5] * 4}
        doc["weights"] = {"q_position": 1000.0, "q_angle": 10000.0,
                          "q_velocity": 1000.0, "q_angular_velocity": 1000.0,
                          "r": 20.0}
        doc["controller"] = {"kind": "spiking-lqr-ensemble",
                             "ensemble": {"n_neurons": 2}}
        doc["initial_angles"] = [0.2, 0.18, 0.16, 0.14]
        doc["duration"] = 10.0
        cfg = parse_config_dict(doc)
        rows = runner.sweep(cfg, "neurons", [2, 64], tmp_path, seeds=[1])
        assert rows[0]["n_failed"] == 1
        assert rows[1]["n_failed"] == 0
        assert rows[1]["iae_rad_s_mean"] is not None


class TestCliEntry:
    def test_gains_command(self, capsys):
        assert cli.main(["gains", "--config", "cartpole-ensemble-100"]) == 0
        out = capsys.readouterr().out
        assert "theta_1,-190.61" in out

    def test_unknown_profile_errors(self, capsys):
        assert cli.main(["gains", "--config", "does-not-exist"]) == 2
        assert "neither a file nor a shipped profile" in capsys.readouterr().err

    def test_run_and_plot_flow(self, tmp_path, capsys):
        rc = cli.main(["run", "--config", "cartpole-2neuron-4syn",
                       "--seeds", "0", "--out", str(tmp_path)])
        assert rc == 0
        run_dir = tmp_path / "cartpole-2neuron-4syn" / "seed0"
        rc = cli.main(["plot", "--run", str(run_dir)])
        assert rc == 0
        for name in ("states.svg", "control_raster.svg", "phase.svg"):
            assert (run_dir / name).exists()

    def test_plot_missing_artifacts(self, tmp_path, capsys):
        assert cli.main(["plot", "--run", str(tmp_path)]) == 2

    def test_failure_exit_code(self, tmp_path):
        doc = minimal_doc()
        doc["plant"] = {"n_links": 4, "cart_mass": 5.0,
                        "link_masses": [0.25] * 4, "link_lengths": [0.5] * 4}
        doc["weights"] = {"q_position": 1000.0, "q_angle": 10000.0,
                          "q_velocity": 1000.0, "q_angular_velocity": 1000.0,
                          "r": 20.0}
        doc["controller"] = {"kind": "spiking-lqr-ensemble",
                             "ensemble": {"n_neurons": 2}}
        doc["initial_angles"] = [0.2, 0.18, 0.16, 0.14]
        doc["duration"] = 10.0
        path = tmp_path / "fall.json"
        path.write_text(json.dumps(doc))
        assert cli.main(["run", "--config", str(path), "--seeds", "1",
                         "--out", str(tmp_path)]) == 1


class TestPlots:
    def test_empty_raster_renders(self, tmp_path):
        from spikelqr import plots
        doc = minimal_doc()  # plain lqr: no spikes
        cfg = parse_config_dict(doc)
        runner.run(cfg, tmp_path, seeds=[0])
        outputs = plots.render_run_plots(tmp_path / "seed0")
        assert len(outputs) == 3

    def test_deterministic_svg_bytes(self, tmp_path):
        from spikelqr import plots
        cfg = parse_config_dict(minimal_doc())
        runner.run(cfg, tmp_path / "a", seeds=[0])
        runner.run(cfg, tmp_path / "b", seeds=[0])
        pa = plots.render_run_plots(tmp_path / "a" / "seed0")
        pb = plots.render_run_plots(tmp_path / "b" / "seed0")
        for f1, f2 in zip(pa, pb):
            assert f1.read_bytes() == f2.read_bytes()

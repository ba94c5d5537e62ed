"""Scenario runner and CLI contract."""

import json
import os

import numpy as np
import pytest

from cmcnull.cli import main
from cmcnull.scenarios import ConfigError, RunConfig, emit_plots_data, run_scenario


def cfg_for(scenario, out, **kw):
    base = dict(scenario=scenario, out_dir=str(out))
    base.update(kw)
    c = RunConfig(**base)
    c.validate()
    return c


class TestConfig:
    def test_bad_scenario(self):
        with pytest.raises(ConfigError, match="unknown scenario"):
            RunConfig.from_dict({"scenario": "nope"})

    def test_time_ordering(self):
        with pytest.raises(ConfigError, match="t0 < t1 < 0"):
            cfg_for("kasner-evolve", "x", t0=-0.5, t1=-1.0)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            RunConfig.from_dict({"scenario": "minkowski-cone", "bogus": 1})

    def test_nested_sections(self):
        cfg = RunConfig.from_dict({
            "scenario": "kasner-evolve",
            "lattice": {"n_pts": 16, "box_len": 2.0},
            "time": {"t0": -1.0, "t1": -0.8, "n_steps": 32},
        })
        assert cfg.n_pts == 16
        assert cfg.box_len == 2.0
        assert cfg.n_steps == 32


class TestScenarios:
    def test_kasner_evolve(self, tmp_path):
        cfg = cfg_for("kasner-evolve", tmp_path, n_pts=8, t0=-1.0, t1=-0.9,
                      n_steps=40)
        assert run_scenario(cfg) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["assertions"]["breakdown_k0"]["passed"]
        assert manifest["assertions"]["gronwall"]["passed"]
        assert (tmp_path / "monitors.csv").exists()

    def test_kasner_evolve_k0_closed_form(self, tmp_path):
        # spec example: K0 over [-1, -1/2] equals 3/8 to 1e-6
        cfg = cfg_for("kasner-evolve", tmp_path, n_pts=8, t0=-1.0, t1=-0.5,
                      n_steps=170)
        assert run_scenario(cfg) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        k0 = manifest["assertions"]["breakdown_k0"]["value"]
        assert abs(k0 - 3.0 / 8.0) <= 1e-6

    def test_identity_boxk(self, tmp_path):
        cfg = cfg_for("identity-boxk", tmp_path, n_pts=8, stack_delta=0.02,
                      levels=3)
        assert run_scenario(cfg) == 0
        rows = (tmp_path / "boxk_convergence.csv").read_text().splitlines()
        assert len(rows) == 4

    def test_identity_d0k(self, tmp_path):
        cfg = cfg_for("identity-d0k", tmp_path, n_pts=8, stack_delta=0.02,
                      levels=3)
        assert run_scenario(cfg) == 0

    def test_minkowski_cone(self, tmp_path):
        cfg = cfg_for("minkowski-cone", tmp_path, n_theta=8, n_phi=16,
                      tau=0.3, cone_steps=20)
        assert run_scenario(cfg) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert all(c["passed"] for c in manifest["assertions"].values())

    def test_nullcone_trace(self, tmp_path):
        cfg = cfg_for("nullcone-trace", tmp_path, n_theta=8, n_phi=16,
                      tau=0.1, cone_steps=20)
        assert run_scenario(cfg) == 0
        assert (tmp_path / "flux_report.json").exists()

    def test_manifest_written_on_failure(self, tmp_path):
        # an unreachable CFL-sized step forces an artifact error
        cfg = cfg_for("kasner-evolve", tmp_path, n_pts=8, t0=-1.0, t1=-0.5,
                      n_steps=4)
        code = run_scenario(cfg)
        assert code == 3
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["error"] is not None


class TestPlots:
    def test_merge_and_idempotence(self, tmp_path):
        cfg = cfg_for("kasner-evolve", tmp_path, n_pts=8, t0=-1.0, t1=-0.9,
                      n_steps=20)
        run_scenario(cfg)
        assert emit_plots_data(str(tmp_path)) == 0
        first = (tmp_path / "plots.csv").read_bytes()
        assert emit_plots_data(str(tmp_path)) == 0
        assert (tmp_path / "plots.csv").read_bytes() == first
        header = first.decode().splitlines()[0]
        assert header == "t,quantity,value"

    def test_empty_dir_exit_3(self, tmp_path):
        assert emit_plots_data(str(tmp_path)) == 3


class TestCli:
    def test_malformed_json_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = main(["minkowski-cone", "--config", str(bad)])
        assert code == 2
        assert "parse error" in capsys.readouterr().err

    def test_missing_config_exit_2(self):
        assert main(["minkowski-cone", "--config", "/does/not/exist.json"]) == 2

    def test_cli_minkowski_run(self, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({
            "cone": {"tau": 0.2, "n_theta": 8, "n_phi": 16, "n_steps": 15},
        }))
        code = main(["minkowski-cone", "--config", str(cfgfile),
                     "--out", str(tmp_path / "run")])
        assert code == 0
        assert (tmp_path / "run" / "manifest.json").exists()

    def test_reproducible_outputs(self, tmp_path):
        args = lambda d: ["kasner-evolve", "--out", str(d)]
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({
            "lattice": {"n_pts": 8},
            "time": {"t0": -1.0, "t1": -0.95, "n_steps": 12},
        }))
        main(args(tmp_path / "a") + ["--config", str(cfgfile)])
        main(args(tmp_path / "b") + ["--config", str(cfgfile)])
        a = (tmp_path / "a" / "monitors.csv").read_bytes()
        b = (tmp_path / "b" / "monitors.csv").read_bytes()
        assert a == b

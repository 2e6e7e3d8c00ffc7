import json
import math

import numpy as np
import pytest

from kickedwell.basis import CosRatio, CosShifted, FourierSeries
from kickedwell.cli import main
from kickedwell.harness import (
    DephasingConfig,
    ExperimentConfig,
    Tolerances,
    emit_figure,
    run,
    sweep,
)


def small_config(**kw):
    defaults = dict(potential=CosShifted(1.0, 1.0), n_max=24, n_steps=12, label="t")
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            small_config(n_max=1)
        with pytest.raises(ValueError):
            small_config(n_steps=0)
        with pytest.raises(ValueError):
            small_config(initial_level=30)
        with pytest.raises(ValueError):
            small_config(method="fft")
        with pytest.raises(ValueError):
            small_config(hbar=float("inf"))

    def test_json_round_trip(self):
        cfg = small_config(
            potential=CosRatio(0.7, 1.2),
            dephasing=DephasingConfig(mode="kicked", strength=5.0, n_cycles=3),
            tolerances=Tolerances(leak_fail=1e-5),
            seed=42,
            n_build=300,
        )
        assert ExperimentConfig.from_json(cfg.to_json()) == cfg

    def test_defaults_round_trip(self):
        cfg = small_config()
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


class TestRun:
    def test_outputs_and_record(self, tmp_path):
        cfg = small_config()
        rec = run(cfg, tmp_path)
        assert (tmp_path / "t_trajectory.csv").exists()
        assert (tmp_path / "t_entanglement.csv").exists()
        assert (tmp_path / "t_record.json").exists()
        assert rec.tables["final_total_prob"] == pytest.approx(1.0, abs=1e-9)
        # the record echo re-parses to an equal config
        assert ExperimentConfig.from_dict(rec.config) == cfg

    def test_deterministic_bytes(self, tmp_path):
        cfg = small_config()
        run(cfg, tmp_path / "a")
        run(cfg, tmp_path / "b")
        for name in ("t_trajectory.csv", "t_entanglement.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_null_potential(self, tmp_path):
        cfg = small_config(potential=FourierSeries(c0=1.0), label="null")
        rec = run(cfg, tmp_path)
        assert rec.tables["energy_gain"] == pytest.approx(0.0, abs=1e-10)
        assert rec.tables["final_s_v"] == pytest.approx(0.0, abs=1e-10)
        assert rec.tables["closed_form_rate"] == pytest.approx(0.0, abs=1e-12)

    def test_initial_level(self, tmp_path):
        cfg = small_config(initial_level=3, n_steps=2, potential=CosShifted(0.0))
        rec = run(cfg, tmp_path)
        assert rec.tables["final_energy"] == pytest.approx(4.5)

    def test_dephasing_stage(self, tmp_path):
        cfg = small_config(
            n_max=16,
            dephasing=DephasingConfig(mode="kicked", strength=100.0, n_cycles=4, build_dim=96),
            label="dp",
        )
        rec = run(cfg, tmp_path)
        assert (tmp_path / "dp_dephasing.csv").exists()
        assert rec.tables["dephasing_final_trace"] == pytest.approx(1.0, abs=1e-8)


class TestSweep:
    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            sweep([], tmp_path)

    def test_isolation_and_summary(self, tmp_path):
        good = small_config(label="good")
        bad = small_config(label="bad", n_build=25)  # guard band of one level
        results = sweep([good, bad, good], tmp_path, max_workers=2)
        statuses = [r["status"] for r in results]
        assert statuses == ["ok", "error", "ok"]
        lines = (tmp_path / "summary.csv").read_text().splitlines()
        assert len(lines) == 4
        assert lines[2].startswith("001_bad,error")
        # sibling outputs unharmed
        assert (tmp_path / "000_good" / "good_trajectory.csv").exists()

    def test_ratio_grid_rates_increase(self, tmp_path):
        configs = [
            small_config(potential=CosRatio(1.0, r), n_max=16, n_steps=4, label=f"r{r:g}")
            for r in np.arange(0.3, 3.01, 0.3)
        ]
        results = sweep(configs, tmp_path)
        rates = [r["record"].tables["closed_form_rate"] for r in results]
        assert all(a < b for a, b in zip(rates, rates[1:]))

    def test_zero_potential_sweep(self, tmp_path):
        configs = [
            small_config(potential=CosShifted(0.0), label=f"z{i}", n_steps=3)
            for i in range(3)
        ]
        results = sweep(configs, tmp_path)
        assert all(r["status"] == "ok" for r in results)
        assert all(
            r["record"].tables["closed_form_rate"] == pytest.approx(0.0, abs=1e-14)
            for r in results
        )


class TestFigures:
    def test_unknown_id(self, tmp_path):
        with pytest.raises(ValueError):
            emit_figure(7, tmp_path)

    def test_fig1_zero_kick_override(self, tmp_path):
        paths = emit_figure(1, tmp_path, {"k_list": [0.0], "n_steps": 5, "n_max": 16})
        rows = [line.split(",") for line in open(paths[0]).read().splitlines()[1:]]
        pops = np.array([float(v) for _, v in rows])
        assert pops[0] == pytest.approx(1.0, abs=1e-10)
        assert np.abs(pops[1:]).max() < 1e-12

    def test_fig2_ordering(self, tmp_path):
        paths = emit_figure(2, tmp_path, {"n_steps": 20, "n_max": 40})
        data = np.genfromtxt(paths[0], delimiter=",", names=True)
        k05, k1, k2 = data["P1_k05"], data["P1_k1"], data["P1_k2"]
        assert np.all(k05[1:] > k1[1:])
        assert np.all(k1[1:] > k2[1:])

    def test_fig4_ordering(self, tmp_path):
        paths = emit_figure(4, tmp_path, {"n_steps": 15, "n_max": 48})
        data = np.genfromtxt(paths[0], delimiter=",", names=True)
        cols = [c for c in data.dtype.names if c != "N"]
        small, mid, large = (data[c] for c in cols)
        assert np.all(small[1:] < mid[1:])
        assert np.all(mid[1:] < large[1:])

    def test_fig5_peaks_then_decreases(self, tmp_path):
        paths = emit_figure(5, tmp_path, {"n_steps": 15, "n_max": 48})
        data = np.genfromtxt(paths[0], delimiter=",", names=True)
        assert data["N"][0] == 1
        for c in data.dtype.names:
            if c == "N":
                continue
            er = data[c]
            assert er[0] == er.max()
            assert np.all(np.diff(er) < 0)


class TestCli:
    def test_kick_matrix_and_evolve(self, tmp_path, capsys):
        cfg = small_config(n_max=12)
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(cfg.to_json())
        rc = main(["kick-matrix", "--config", str(cfg_path), "--out", str(tmp_path / "km")])
        assert rc == 0
        assert "unitarity_defect=" in capsys.readouterr().out
        rc = main(["evolve", "--config", str(cfg_path), "--out", str(tmp_path / "ev"),
                   "--steps", "5", "--seed", "1"])
        assert rc == 0
        assert (tmp_path / "ev" / "t_trajectory.csv").exists()

    def test_asymptote(self, tmp_path, capsys):
        cfg = small_config(potential=CosShifted(1.0, math.pi / 4), n_max=24)
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(cfg.to_json())
        rc = main(["asymptote", "--config", str(cfg_path), "--out", str(tmp_path),
                   "--steps", "200"])
        assert rc == 0
        payload = json.loads((tmp_path / "t_asymptotics.json").read_text())
        assert payload["converged"] is True
        assert payload["closed_form_rate"] == pytest.approx(0.25)

    def test_dephase_requires_section(self, tmp_path):
        cfg = small_config()
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(cfg.to_json())
        assert main(["dephase", "--config", str(cfg_path), "--out", str(tmp_path)]) == 2

    def test_dephase_runs(self, tmp_path):
        cfg = small_config(
            n_max=12,
            label="dp",
            dephasing=DephasingConfig(mode="continuous", strength=4.0, n_cycles=3, build_dim=64),
        )
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(cfg.to_json())
        assert main(["dephase", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "dp_dephasing.csv").exists()

    def test_figure(self, tmp_path):
        rc = main(["figure", "--id", "1", "--out", str(tmp_path), "--k", "0.0",
                   "--steps", "3", "--n-max", "12"])
        assert rc == 0
        assert (tmp_path / "fig1_k0.csv").exists()

    def test_sweep(self, tmp_path):
        configs = [small_config(label="a", n_max=12, n_steps=3).to_dict(),
                   small_config(label="b", n_max=12, n_steps=3, n_build=13).to_dict()]
        cfg_path = tmp_path / "sweep.json"
        cfg_path.write_text(json.dumps({"runs": configs}))
        rc = main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "sw"),
                   "--workers", "2"])
        assert rc == 1  # one config fails by design
        assert (tmp_path / "sw" / "summary.csv").exists()

import csv
import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from kdac.cli import CSV_COLUMNS, main
from kdac.phantom_io import KIND_IMAGE, KIND_MASK, read_grid


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def phantom64(tmp_path, runner):
    """A small phantom GridFile to keep reconstruction cells fast."""
    res = runner.invoke(main, ["phantom", "--n", "64", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    return str(tmp_path / "phantom_64.kdc")


class TestMask:
    def test_writes_grid_and_png(self, tmp_path, runner):
        res = runner.invoke(main, ["mask", "--kind", "random2d", "--ratio", "0.3",
                                   "--n", "64", "--seed", "5", "--out", str(tmp_path)])
        assert res.exit_code == 0, res.output
        base = str(tmp_path / "mask_random2d_0.3_64_5")
        bits, kind = read_grid(base + ".kdc")
        assert kind == KIND_MASK
        assert bits.shape == (64, 64)
        assert os.path.exists(base + ".png")
        assert "achieved_ratio=" in res.output

    def test_deterministic_rerun(self, tmp_path, runner):
        args = ["mask", "--kind", "cartesian", "--ratio", "0.4", "--n", "64",
                "--seed", "3", "--out", str(tmp_path)]
        assert runner.invoke(main, args).exit_code == 0
        first, _ = read_grid(tmp_path / "mask_cartesian_0.4_64_3.kdc")
        assert runner.invoke(main, args).exit_code == 0
        second, _ = read_grid(tmp_path / "mask_cartesian_0.4_64_3.kdc")
        assert np.array_equal(first, second)

    def test_invalid_ratio_exits_2(self, tmp_path, runner):
        res = runner.invoke(main, ["mask", "--kind", "random2d", "--ratio", "1.5",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 2

    def test_unknown_kind_rejected_by_choice(self, tmp_path, runner):
        res = runner.invoke(main, ["mask", "--kind", "spiral", "--ratio", "0.3",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 2


class TestPhantom:
    def test_writes_image_grid(self, tmp_path, runner):
        res = runner.invoke(main, ["phantom", "--n", "64", "--out", str(tmp_path)])
        assert res.exit_code == 0, res.output
        img, kind = read_grid(tmp_path / "phantom_64.kdc")
        assert kind == KIND_IMAGE
        assert img.shape == (64, 64)
        assert (tmp_path / "phantom_64.png").exists()

    def test_too_small_exits_2(self, tmp_path, runner):
        res = runner.invoke(main, ["phantom", "--n", "32", "--out", str(tmp_path)])
        assert res.exit_code == 2


class TestRecon:
    def test_zero_fill_direct(self, tmp_path, runner, phantom64):
        out = tmp_path / "run"
        res = runner.invoke(main, ["recon", "--input", phantom64,
                                   "--mask-kind", "random2d", "--ratio", "0.5",
                                   "--seed", "7", "--bank", "none",
                                   "--solver", "zero_fill", "--out", str(out)])
        assert res.exit_code == 0, res.output
        with open(out / "metrics.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == 2
        row = dict(zip(CSV_COLUMNS, rows[1]))
        assert row["mask_kind"] == "random2d"
        assert row["solver"] == "zero_fill"
        assert float(row["psnr_db"]) > 10.0
        assert 0.0 <= float(row["ssim"]) <= 1.0
        base = out / "recon_phantom_64.kdc_random2d_0.5_none_zero_fill"
        for suffix in (".kdc", ".png", "_residual.png", "_krre.png"):
            assert (base.parent / (base.name + suffix)).exists()

    def test_dac_recon_with_config_file(self, tmp_path, runner, phantom64):
        out = tmp_path / "run"
        cfg = {"version": 1, "input": phantom64, "mask_kind": "random2d",
               "ratio": 0.5, "seed": 7, "bank": "horivert", "solver": "fcsa",
               "outer_iters": 8, "max_outer": 3, "out": str(out)}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        res = runner.invoke(main, ["recon", "--config", str(cfg_path)])
        assert res.exit_code == 0, res.output
        with open(out / "metrics.csv") as fh:
            rows = list(csv.reader(fh))
        assert dict(zip(CSV_COLUMNS, rows[1]))["bank"] == "horivert"

    def test_flags_override_config(self, tmp_path, runner, phantom64):
        out = tmp_path / "run"
        cfg = {"version": 1, "input": phantom64, "mask_kind": "random2d",
               "ratio": 0.5, "seed": 7, "bank": "none", "solver": "fcsa",
               "outer_iters": 5, "out": str(out)}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        res = runner.invoke(main, ["recon", "--config", str(cfg_path),
                                   "--solver", "zero_fill"])
        assert res.exit_code == 0, res.output
        with open(out / "metrics.csv") as fh:
            rows = list(csv.reader(fh))
        assert dict(zip(CSV_COLUMNS, rows[1]))["solver"] == "zero_fill"

    def test_rerun_appends_identical_metrics(self, tmp_path, runner, phantom64):
        out = tmp_path / "run"
        args = ["recon", "--input", phantom64, "--mask-kind", "cartesian",
                "--ratio", "0.4", "--seed", "3", "--bank", "none",
                "--solver", "zero_fill", "--sigma", "0.01", "--out", str(out)]
        assert runner.invoke(main, args).exit_code == 0
        assert runner.invoke(main, args).exit_code == 0
        with open(out / "metrics.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 3
        # identical except the wall-clock column
        assert rows[1][:-1] == rows[2][:-1]

    def test_unknown_config_key_exits_2(self, tmp_path, runner):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"version": 1, "solvr": "fcsa"}))
        res = runner.invoke(main, ["recon", "--config", str(cfg_path)])
        assert res.exit_code == 2

    def test_bad_config_version_exits_2(self, tmp_path, runner):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"version": 99}))
        res = runner.invoke(main, ["recon", "--config", str(cfg_path)])
        assert res.exit_code == 2

    def test_malformed_json_exits_2(self, tmp_path, runner):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text("{not json")
        res = runner.invoke(main, ["recon", "--config", str(cfg_path)])
        assert res.exit_code == 2

    def test_missing_input_file_exits_4(self, tmp_path, runner):
        res = runner.invoke(main, ["recon", "--input", str(tmp_path / "nope.kdc"),
                                   "--bank", "none", "--solver", "zero_fill",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 4

    def test_corrupt_input_exits_2(self, tmp_path, runner):
        bad = tmp_path / "bad.kdc"
        bad.write_bytes(b"JUNKJUNKJUNKJUNK")
        res = runner.invoke(main, ["recon", "--input", str(bad), "--bank", "none",
                                   "--solver", "zero_fill", "--out", str(tmp_path)])
        assert res.exit_code == 2

    def test_invalid_ratio_exits_2(self, tmp_path, runner, phantom64):
        res = runner.invoke(main, ["recon", "--input", phantom64, "--ratio", "0.0",
                                   "--bank", "none", "--solver", "zero_fill",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 2

    def test_negative_sigma_exits_2(self, tmp_path, runner, phantom64):
        res = runner.invoke(main, ["recon", "--input", phantom64, "--sigma", "-0.1",
                                   "--bank", "none", "--solver", "zero_fill",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 2


class TestBench:
    def test_twelve_cell_sweep(self, tmp_path, runner, phantom64):
        out = tmp_path / "bench"
        res = runner.invoke(main, [
            "bench", "--input", phantom64,
            "--mask-kinds", "cartesian,random2d,radial",
            "--ratios", "0.3", "--banks", "none,horivert",
            "--sigmas", "0.0,0.01", "--solver", "zero_fill",
            "--seed", "7", "--out", str(out)])
        assert res.exit_code == 0, res.output
        with open(out / "bench.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == 1 + 12
        kinds = {r[1] for r in rows[1:]}
        banks = {r[4] for r in rows[1:]}
        sigmas = {r[6] for r in rows[1:]}
        assert kinds == {"cartesian", "random2d", "radial"}
        assert banks == {"none", "horivert"}
        assert sigmas == {"0", "0.01"}

    def test_no_pngs_by_default(self, tmp_path, runner, phantom64):
        out = tmp_path / "bench"
        res = runner.invoke(main, ["bench", "--input", phantom64,
                                   "--mask-kinds", "random2d", "--ratios", "0.5",
                                   "--banks", "none", "--sigmas", "0.0",
                                   "--solver", "zero_fill", "--out", str(out)])
        assert res.exit_code == 0, res.output
        names = sorted(p.name for p in out.iterdir())
        assert not any(name.endswith(".png") for name in names)
        assert any(name.endswith(".kdc") for name in names)

    def test_unknown_mask_kind_exits_2(self, tmp_path, runner, phantom64):
        res = runner.invoke(main, ["bench", "--input", phantom64,
                                   "--mask-kinds", "spiral", "--out", str(tmp_path)])
        assert res.exit_code == 2

    def test_bad_ratio_exits_2(self, tmp_path, runner, phantom64):
        res = runner.invoke(main, ["bench", "--input", phantom64,
                                   "--ratios", "2.0", "--banks", "none",
                                   "--solver", "zero_fill", "--out", str(tmp_path)])
        assert res.exit_code == 2


def test_kdac_threads_env_matches_serial(tmp_path, runner, phantom64, monkeypatch):
    out_a = tmp_path / "serial"
    out_b = tmp_path / "threaded"
    args = lambda out: ["recon", "--input", phantom64, "--mask-kind", "random2d",
                        "--ratio", "0.5", "--seed", "7", "--bank", "gaussian",
                        "--solver", "zero_fill", "--out", str(out)]
    monkeypatch.delenv("KDAC_THREADS", raising=False)
    assert runner.invoke(main, args(out_a)).exit_code == 0
    monkeypatch.setenv("KDAC_THREADS", "4")
    assert runner.invoke(main, args(out_b)).exit_code == 0
    a, _ = read_grid(out_a / "recon_phantom_64.kdc_random2d_0.5_gaussian_zero_fill.kdc")
    b, _ = read_grid(out_b / "recon_phantom_64.kdc_random2d_0.5_gaussian_zero_fill.kdc")
    assert np.array_equal(a, b)


def test_bad_kdac_threads_exits_2(tmp_path, runner, phantom64, monkeypatch):
    monkeypatch.setenv("KDAC_THREADS", "lots")
    res = runner.invoke(main, ["recon", "--input", phantom64, "--bank", "horivert",
                               "--solver", "zero_fill", "--mask-kind", "random2d",
                               "--ratio", "0.5", "--out", str(tmp_path)])
    assert res.exit_code == 2

"""Command-line behaviour: output files, manifests, errors, determinism."""

import hashlib
import json

import numpy as np
import pytest

from dbar.cli import main
from dbar.harness import read_csv_with_meta
from dbar.systems import LinearPlant


def nilpotent_gain_flat():
    plant = LinearPlant()
    target = np.array([[0.0, 1.0], [0.0, 0.0]])
    k = np.linalg.solve(plant.b_matrix, target - plant.a_matrix)
    return {
        "pool_k1": f"{k[0, 0]:.17g}",
        "pool_k2": f"{k[0, 1]:.17g}",
        "pool_k3": f"{k[1, 0]:.17g}",
        "pool_k4": f"{k[1, 1]:.17g}",
    }


@pytest.fixture
def tiny_config(tmp_path):
    lines = ["horizon = 60", "x0 = 10,-5", "preset = tiny"]
    lines += [f"{key} = {val}" for key, val in nilpotent_gain_flat().items()]
    path = tmp_path / "tiny.cfg"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def _sha_all(outdir):
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in outdir.iterdir()
        if p.suffix == ".csv"
    }


class TestRun:
    def test_smoke_emits_csvs_and_manifest(self, tiny_config, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", "--config", tiny_config, "--seeds", "1", "--outdir", str(out)]) == 0
        names = {p.name for p in out.iterdir()}
        assert "stability_dbar.csv" in names
        assert "regret_dbar.csv" in names
        assert "manifest.json" in names
        captured = capsys.readouterr().out
        assert "stability:" in captured  # precondition report printed

    def test_manifest_hashes_match_files(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", tiny_config, "--seeds", "1,2", "--outdir", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        hashes = _sha_all(out)
        for entry in manifest["files"]:
            assert hashes[entry["name"]] == entry["sha256"]

    def test_byte_identical_reruns(self, tiny_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", tiny_config, "--seeds", "1..3", "--outdir", str(out1)])
        main(["run", "--config", tiny_config, "--seeds", "1..3", "--outdir", str(out2)])
        assert _sha_all(out1) == _sha_all(out2)
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["files"] == m2["files"]

    def test_raw_per_seed_files(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", tiny_config, "--seeds", "1,2", "--outdir", str(out), "--raw"])
        names = {p.name for p in out.iterdir()}
        assert "raw_dbar_seed1.csv" in names
        assert "raw_dbar_seed2.csv" in names

    def test_env_var_outdir(self, tiny_config, tmp_path, monkeypatch):
        target = tmp_path / "from-env"
        monkeypatch.setenv("DBAR_OUTDIR", str(target))
        main(["run", "--config", tiny_config, "--seeds", "1"])
        assert (target / "manifest.json").exists()

    def test_arm_flags_change_slug(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        main(
            [
                "run", "--config", tiny_config, "--seeds", "1", "--outdir", str(out),
                "--batch", "fixed", "--rate", "fixed",
            ]
        )
        assert (out / "stability_fixed-tau-fixed-eta.csv").exists()

    def test_mode_alg3_in_metadata(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        main(
            [
                "run", "--config", tiny_config, "--seeds", "1", "--outdir", str(out),
                "--mode", "alg3", "--switch-cost", "2.0",
            ]
        )
        meta, _ = read_csv_with_meta(out / "stability_dbar-alg3.csv")
        assert meta["mode"] == "alg3"
        assert float(meta["switch_cost"]) == 2.0
        assert "single-controller baseline" in meta["notes"]

    def test_fidelity_notes_in_metadata(self, tmp_path):
        out = tmp_path / "out"
        main(
            [
                "run", "--preset", "example1-sinusoidal", "--seeds", "1",
                "--outdir", str(out), "--no-regret",
                "--set", "horizon=60",
            ]
        )
        meta, _ = read_csv_with_meta(out / "stability_dbar.csv")
        assert "sqrt(2)" in meta["notes"]


class TestAblation:
    def test_four_arms_emitted(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert main(
            ["ablation", "--config", tiny_config, "--seeds", "1,2", "--outdir", str(out)]
        ) == 0
        names = {p.name for p in out.iterdir()}
        for slug in (
            "dbar",
            "fixed-tau-adaptive-eta",
            "dynamic-tau-fixed-eta",
            "fixed-tau-fixed-eta",
        ):
            assert f"stability_{slug}.csv" in names
            assert f"regret_{slug}.csv" in names

    def test_sweep_alias(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert main(
            ["sweep", "--config", tiny_config, "--seeds", "1..4", "--outdir", str(out)]
        ) == 0
        meta, _ = read_csv_with_meta(out / "stability_dbar.csv")
        assert meta["included_seeds"] == "1,2,3,4"


class TestValidate:
    def test_prints_precondition_values(self, capsys):
        assert main(["validate", "--preset", "example1-sinusoidal"]) == 0
        out = capsys.readouterr().out
        assert "tau0=11" in out
        assert "[pass]" in out and "[FAIL]" in out  # regret condition fails

    def test_ballbeam_flat_envelope_reported(self, capsys):
        assert main(["validate", "--preset", "example2-beta1"]) == 0
        out = capsys.readouterr().out
        assert "first contracting time" in out


class TestErrors:
    def test_missing_preset_and_config(self, capsys):
        assert main(["run", "--seeds", "1"]) == 2
        assert "preset" in capsys.readouterr().err

    def test_bad_seed_spec(self, tiny_config, capsys):
        assert main(["run", "--config", tiny_config, "--seeds", "a..b"]) == 2
        assert "seeds" in capsys.readouterr().err

    def test_bad_override_names_field(self, tiny_config, capsys):
        assert main(["run", "--config", tiny_config, "--set", "eta0=-1"]) == 2
        assert "eta0" in capsys.readouterr().err

    def test_unknown_set_key(self, tiny_config, capsys):
        assert main(["run", "--config", tiny_config, "--set", "warp=9"]) == 2
        assert "warp" in capsys.readouterr().err

    def test_missing_config_file(self, capsys):
        assert main(["run", "--config", "/nonexistent.cfg"]) == 2
        assert "not found" in capsys.readouterr().err

    def test_unknown_preset_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            main(["run", "--preset", "example9"])

"""Tests for the command-line interface and the staged pipeline."""

import os

import numpy as np
import pytest

from shotfactor.cli import main
from shotfactor.court import read_count_csv
from shotfactor.lgcp import read_surface_csv
from shotfactor.nmf import read_factor_model
from shotfactor.pipeline import STAGE_CODES, PipelineConfig, parse_config_file

CONFIG_TEMPLATE = """\
tile_x = 2.5
tile_y = 2.0
n_players = 6
k_star = 2
budget_min = 80
budget_max = 120
seed = 3
k = 2
k_list = [1, 2]
restarts = 2
nmf_iters = 500
lgcp_burn_in = 100
lgcp_samples = 100
lgcp_thinning = 1
lvm_sweeps = 200
lvm_burn_in = 50
min_attempts = 20
shots = {shots}
out = {out}
"""


def _write_config(dir_path, **overrides):
    shots = overrides.pop("shots", os.path.join(dir_path, "data", "shots.csv"))
    out = overrides.pop("out", os.path.join(dir_path, "artifacts"))
    text = CONFIG_TEMPLATE.format(shots=shots, out=out)
    for key, value in overrides.items():
        text += f"{key} = {value}\n"
    path = os.path.join(dir_path, "config.txt")
    with open(path, "w") as f:
        f.write(text)
    return path


def _synth(config_path, out_dir, extra=()):
    return main(["synth", "--config", config_path, "--out", str(out_dir), *extra])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A generated dataset plus a config pointing at it."""
    root = tmp_path_factory.mktemp("cli")
    config_path = _write_config(str(root))
    assert _synth(config_path, root / "data") == 0
    return {"root": root, "config": config_path}


class TestConfigParsing:
    def test_key_value_lines_with_json_values(self, tmp_path):
        """Values parse as JSON fragments, bare words stay strings."""
        path = tmp_path / "c.txt"
        path.write_text(
            "# comment\nseed = 12\nk_list = [1, 2, 3]\nloss = kl\n\nout = somewhere\n"
        )
        mapping = parse_config_file(path)
        assert mapping == {
            "seed": 12,
            "k_list": [1, 2, 3],
            "loss": "kl",
            "out": "somewhere",
        }

    def test_malformed_line_rejected(self, tmp_path):
        """A line without '=' reports its location."""
        path = tmp_path / "c.txt"
        path.write_text("seed 12\n")
        with pytest.raises(ValueError, match=":1:"):
            parse_config_file(path)

    def test_unknown_keys_rejected(self):
        """Misspelled config keys fail fast."""
        with pytest.raises(ValueError, match="unknown config keys"):
            PipelineConfig.from_mapping({"sed": 1})

    def test_component_views_carry_shared_seed(self):
        """Every component config inherits the global seed."""
        config = PipelineConfig(seed=17)
        assert config.lgcp_config().seed == 17
        assert config.nmf_config().seed == 17
        assert config.efficiency_config().seed == 17
        assert config.synth_config().seed == 17


class TestSynthCommand:
    def test_same_seed_same_bytes(self, tmp_path):
        """Two synth runs with one seed write identical files."""
        config_path = _write_config(str(tmp_path))
        assert _synth(config_path, tmp_path / "one") == 0
        assert _synth(config_path, tmp_path / "two") == 0
        for name in ("shots.csv", "truth_B.csv", "truth_W.csv", "truth_beta.csv"):
            a = (tmp_path / "one" / name).read_bytes()
            b = (tmp_path / "two" / name).read_bytes()
            assert a == b, f"{name} differs"

    def test_seed_flag_beats_config(self, tmp_path):
        """--seed changes the dataset relative to the config seed."""
        config_path = _write_config(str(tmp_path))
        assert _synth(config_path, tmp_path / "base") == 0
        assert _synth(config_path, tmp_path / "reseeded", ("--seed", "4")) == 0
        a = (tmp_path / "base" / "shots.csv").read_bytes()
        b = (tmp_path / "reseeded" / "shots.csv").read_bytes()
        assert a != b

    def test_missing_out_dir_created(self, tmp_path):
        """Nested output directories are created on demand."""
        config_path = _write_config(str(tmp_path))
        nested = tmp_path / "deep" / "ly" / "nested"
        assert _synth(config_path, nested) == 0
        assert (nested / "shots.csv").exists()

    def test_invalid_k_star_fails_with_message(self, tmp_path, capsys):
        """An impossible planted K exits nonzero and explains itself."""
        config_path = _write_config(str(tmp_path), k_star=9)
        rc = _synth(config_path, tmp_path / "bad")
        assert rc != 0
        assert "k_star" in capsys.readouterr().err

    def test_out_env_variable_used_when_no_flag(self, tmp_path, monkeypatch):
        """SHOTFACTOR_OUT overrides the config's output directory."""
        config_path = _write_config(str(tmp_path))
        target = tmp_path / "env_out"
        monkeypatch.setenv("SHOTFACTOR_OUT", str(target))
        assert main(["synth", "--config", config_path]) == 0
        assert (target / "shots.csv").exists()


class TestStageCommands:
    def test_ingest_builds_count_matrix(self, workspace, tmp_path, capsys):
        """Ingest converts the shot CSV into a persisted count matrix."""
        rc = main(
            ["ingest", "--config", workspace["config"], "--out", str(tmp_path)]
        )
        assert rc == 0
        assert "6 players" in capsys.readouterr().out
        cm = read_count_csv(tmp_path / "counts.csv")
        assert len(cm.players) == 6
        assert cm.counts.sum() > 0

    def test_fit_lgcp_factorize_efficiency_render(self, workspace, tmp_path, capsys):
        """The standalone stage commands chain through shared artifacts."""
        out = str(tmp_path)
        config = workspace["config"]
        assert main(["ingest", "--config", config, "--out", out]) == 0
        assert main(["fit-lgcp", "--config", config, "--out", out]) == 0
        players, surfaces, grid = read_surface_csv(tmp_path / "surfaces.csv")
        assert len(players) == 6
        np.testing.assert_allclose(
            surfaces.sum(axis=1) * grid.tile_area, np.ones(6), rtol=1e-9
        )
        assert main(["factorize", "--config", config, "--out", out]) == 0
        model, names = read_factor_model(tmp_path / "factors_kl_k2")
        assert names == players and model.k == 2
        shots_path = str(workspace["root"] / "data" / "shots.csv")
        assert (
            main(
                [
                    "fit-efficiency",
                    "--config",
                    config,
                    "--out",
                    out,
                    "--shots",
                    shots_path,
                ]
            )
            == 0
        )
        assert (tmp_path / "efficiency_beta.csv").exists()
        assert (tmp_path / "efficiency_surfaces.csv").exists()
        img_dir = tmp_path / "img"
        assert (
            main(
                [
                    "render",
                    "--config",
                    config,
                    "--surfaces",
                    str(tmp_path / "surfaces.csv"),
                    "--out",
                    str(img_dir),
                ]
            )
            == 0
        )
        assert sorted(p.name for p in img_dir.iterdir()) == sorted(
            f"{p}.pgm" for p in players
        )

    def test_factorize_on_raw_counts(self, workspace, tmp_path):
        """Factorization accepts the raw count matrix as input."""
        out = str(tmp_path)
        config = workspace["config"]
        assert main(["ingest", "--config", config, "--out", out]) == 0
        rc = main(
            [
                "factorize",
                "--config",
                config,
                "--out",
                out,
                "--input",
                "counts",
                "--k",
                "1",
            ]
        )
        assert rc == 0
        model, _ = read_factor_model(tmp_path / "factors_kl_k1")
        assert model.k == 1
        assert np.all(model.weights >= 0) and np.all(model.bases >= 0)

    def test_evaluate_prints_table(self, workspace, tmp_path, capsys):
        """Evaluation writes the report and prints the text table."""
        rc = main(
            ["evaluate", "--config", workspace["config"], "--out", str(tmp_path)]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "held-out log-likelihood" in out
        assert "basis recovery" in out  # truth_B.csv sits next to shots.csv
        assert (tmp_path / "eval_report.csv").exists()


class TestPipelineCommand:
    def _run(self, workspace, out_dir):
        return main(
            [
                "pipeline",
                "--config",
                workspace["config"],
                "--out",
                str(out_dir),
            ]
        )

    def test_end_to_end_emits_all_artifacts(self, workspace, tmp_path):
        """A fresh pipeline run writes every stage's outputs."""
        assert self._run(workspace, tmp_path) == 0
        expected = [
            "pipeline_manifest.txt",
            "shots_train.csv",
            "shots_test.csv",
            "counts_train.csv",
            "counts_test.csv",
            "surfaces.csv",
            "surfaces_meta.txt",
            "factors_kl_k2_W.csv",
            "factors_kl_k2_B.csv",
            "factors_kl_k2_manifest.txt",
            "efficiency_beta.csv",
            "efficiency_global.csv",
            "efficiency_surfaces.csv",
            "eval_report.csv",
            "eval_per_player.csv",
            "eval_report.txt",
            "pipeline_state.txt",
        ]
        for name in expected:
            assert (tmp_path / name).exists(), f"missing {name}"

    def test_rerun_skips_completed_stages(self, workspace, tmp_path, capsys):
        """Intact artifacts short-circuit their stages on rerun."""
        assert self._run(workspace, tmp_path) == 0
        before = (tmp_path / "eval_report.csv").read_bytes()
        capsys.readouterr()
        assert self._run(workspace, tmp_path) == 0
        out = capsys.readouterr().out
        assert out.count("up to date, skipping") == 5
        assert (tmp_path / "eval_report.csv").read_bytes() == before

    def test_corrupted_intermediate_reruns_stage(self, workspace, tmp_path, capsys):
        """A checksum mismatch triggers regeneration of that stage."""
        assert self._run(workspace, tmp_path) == 0
        good = (tmp_path / "surfaces.csv").read_bytes()
        (tmp_path / "surfaces.csv").write_bytes(good[: len(good) // 2])
        capsys.readouterr()
        assert self._run(workspace, tmp_path) == 0
        out = capsys.readouterr().out
        assert "checksum mismatch" in out
        assert (tmp_path / "surfaces.csv").read_bytes() == good

    def test_stage_failure_maps_to_stage_exit_code(self, workspace, tmp_path, capsys):
        """A factorization that cannot run exits with its stage code."""
        os.makedirs(workspace["root"] / "badk", exist_ok=True)
        config_path = _write_config(
            str(workspace["root"] / "badk"),
            shots=str(workspace["root"] / "data" / "shots.csv"),
            k=40,
        )
        rc = main(["pipeline", "--config", config_path, "--out", str(tmp_path)])
        assert rc == STAGE_CODES["factorize"]
        assert "factorize" in capsys.readouterr().err

    def test_missing_shots_fails_cleanly(self, tmp_path, capsys):
        """A nonexistent input path exits 1 with the path in the message."""
        config_path = _write_config(
            str(tmp_path), shots=str(tmp_path / "nope.csv")
        )
        rc = main(["pipeline", "--config", config_path, "--out", str(tmp_path)])
        assert rc == 1
        assert "nope.csv" in capsys.readouterr().err

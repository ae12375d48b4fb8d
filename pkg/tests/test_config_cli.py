import shutil
import subprocess

import numpy as np
import pytest

from specjoint import (
    ConfigError,
    FeatureKind,
    HeadSpec,
    RunConfig,
    load_model,
    read_manifest,
    write_wav,
)
from specjoint.cli import main
from specjoint.synth import harmonic_voice, white_noise


class TestRunConfig:
    def test_defaults_roundtrip(self):
        assert RunConfig.from_text(RunConfig().dump()) == RunConfig()

    def test_modified_roundtrip(self):
        config = RunConfig(
            variant="mfcc+ibm",
            epochs=5,
            snr_grid=(10.0, 0.0),
            post_enabled=False,
            mel_f_high=7000.0,
        )
        assert RunConfig.from_text(config.dump()) == config

    def test_dump_format(self):
        text = RunConfig().dump()
        assert "train.variant = baseline\n" in text
        assert "snr.grid = 20,15,10,5,0,-5\n" in text
        assert "post.enabled = on\n" in text
        assert text.endswith("\n")

    def test_comments_and_blanks_ignored(self):
        text = "\n# full line comment\ntrain.epochs = 7  # trailing comment\n\n"
        assert RunConfig.from_text(text).epochs == 7

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match=r"<config>:2: unknown key 'train\.width'"):
            RunConfig.from_text("train.epochs = 5\ntrain.width = 3\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="<config>:2: duplicate key 'seed'"):
            RunConfig.from_text("seed = 1\nseed = 2\n")

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="<config>:1: bad value for train.epochs"):
            RunConfig.from_text("train.epochs = soon\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="expected key = value"):
            RunConfig.from_text("train.epochs\n")

    @pytest.mark.parametrize(
        "text, value",
        [("on", True), ("true", True), ("yes", True), ("1", True),
         ("off", False), ("false", False), ("no", False), ("0", False)],
    )
    def test_bool_spellings(self, text, value):
        assert RunConfig.from_text(f"post.enabled = {text}\n").post_enabled is value

    def test_bad_bool(self):
        with pytest.raises(ConfigError, match="expected on/off"):
            RunConfig.from_text("post.enabled = maybe\n")

    def test_grid_parsing(self):
        assert RunConfig.from_text("snr.grid = 15, 5, -5\n").snr_grid == (15.0, 5.0, -5.0)
        with pytest.raises(ConfigError, match="bad value for snr.grid"):
            RunConfig.from_text("snr.grid = \n")

    def test_from_file_names_source(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("nope = 1\n")
        with pytest.raises(ConfigError, match=r"run\.cfg:1"):
            RunConfig.from_file(path)

    def test_derived_builders(self):
        config = RunConfig()
        assert config.lps_dims == 257
        assert config.mfcc_dims == 41
        assert config.stft_config().n_bins == 257
        assert config.bank().filters.shape == (40, 257)
        assert config.train_config().epochs == 30
        assert config.post_config().gamma == 0.9
        assert config.parsed_variant().value == "baseline"

    def test_replace(self):
        assert RunConfig().replace(seed=9).seed == 9


BASE_CONFIG = """\
train.epochs = 3
train.batch_size = 64
train.learning_rate = 0.003
train.dropout = 0
train.hidden_units = 16
train.hidden_layers = 1
split.val_fraction = 0
split.test_fraction = 0.5
post.enabled = off
seed = 3
"""


@pytest.fixture(scope="module")
def env(tmp_path_factory):
    """Full prepare -> train -> enhance chain on a miniature corpus."""
    root = tmp_path_factory.mktemp("cli")
    clean_dir, noise_dir = root / "clean", root / "noise"
    clean_dir.mkdir()
    noise_dir.mkdir()
    for i in range(2):
        write_wav(clean_dir / f"v{i}.wav", harmonic_voice(0.6, 16000, f0=150.0 + 40 * i, seed=i))
    write_wav(noise_dir / "white.wav", white_noise(1.0, 16000, seed=42))
    config_path = root / "run.cfg"
    config_path.write_text(BASE_CONFIG)
    corpus_dir = root / "corpus"
    assert main(["prepare", "--config", str(config_path), str(clean_dir), str(noise_dir), str(corpus_dir)]) == 0
    ckpt = root / "models" / "baseline.sjnn"
    assert main(["train", "--config", str(config_path), str(corpus_dir), str(ckpt)]) == 0
    enhanced_dir = root / "enhanced"
    assert main([
        "enhance", "--config", str(config_path), str(ckpt), str(corpus_dir / "noisy"), str(enhanced_dir),
    ]) == 0
    return {
        "root": root,
        "clean_dir": clean_dir,
        "noise_dir": noise_dir,
        "config": config_path,
        "corpus": corpus_dir,
        "ckpt": ckpt,
        "enhanced": enhanced_dir,
    }


class TestPrepare:
    def test_manifest_covers_grid(self, env):
        entries = read_manifest(env["corpus"] / "manifest.tsv")
        assert len(entries) == 2 * 1 * 6  # clean x noise x snr grid
        assert (env["corpus"] / "effective-config.txt").exists()
        assert len(list((env["corpus"] / "noisy").glob("*.wav"))) == 12
        assert len(list((env["corpus"] / "features").glob("*.sjfm"))) == 12 * 5

    def test_rerun_is_byte_identical(self, env, tmp_path):
        again = tmp_path / "corpus2"
        code = main([
            "prepare", "--config", str(env["config"]),
            str(env["clean_dir"]), str(env["noise_dir"]), str(again),
        ])
        assert code == 0
        assert (again / "manifest.tsv").read_bytes() == (env["corpus"] / "manifest.tsv").read_bytes()

    def test_empty_noise_dir_fails(self, env, tmp_path):
        empty = tmp_path / "no_noise"
        empty.mkdir()
        code = main(["prepare", str(env["clean_dir"]), str(empty), str(tmp_path / "out")])
        assert code == 1

    def test_invalid_wav_fails(self, env, tmp_path):
        bad_dir = tmp_path / "bad_noise"
        bad_dir.mkdir()
        (bad_dir / "corrupt.wav").write_bytes(b"not really audio")
        code = main(["prepare", str(env["clean_dir"]), str(bad_dir), str(tmp_path / "out")])
        assert code == 1
        assert not (tmp_path / "out" / "manifest.tsv").exists()

    def test_seed_flag_overrides_config(self, env, tmp_path):
        out = tmp_path / "seeded"
        code = main([
            "prepare", "--config", str(env["config"]), "--seed", "11",
            str(env["clean_dir"]), str(env["noise_dir"]), str(out),
        ])
        assert code == 0
        assert "seed = 11\n" in (out / "effective-config.txt").read_text()


class TestTrain:
    def test_checkpoint_loads_with_expected_heads(self, env):
        model = load_model(env["ckpt"])
        assert model.heads == (HeadSpec(FeatureKind.LPS, 0, 257),)
        assert model.input_dim == 2056
        assert model.stats[FeatureKind.LPS].dims == 257

    def test_history_csv_written(self, env):
        lines = env["ckpt"].with_suffix(".history.csv").read_text().splitlines()
        assert lines[0].startswith("epoch,learning_rate,train_total")
        assert len(lines) == 1 + 3  # header + one row per epoch
        first = lines[1].split(",")
        assert first[0] == "1"
        assert float(first[2]) > 0.0  # train_total
        assert first[6] == ""  # no val split configured

    def test_retrain_is_byte_identical(self, env, tmp_path):
        again = tmp_path / "again.sjnn"
        code = main(["train", "--config", str(env["config"]), str(env["corpus"]), str(again)])
        assert code == 0
        assert again.read_bytes() == env["ckpt"].read_bytes()

    def test_zero_rate_freezes_history(self, env, tmp_path):
        config_path = tmp_path / "frozen.cfg"
        config_path.write_text(BASE_CONFIG.replace(
            "train.learning_rate = 0.003", "train.learning_rate = 0"
        ))
        ckpt = tmp_path / "frozen.sjnn"
        code = main(["train", "--config", str(config_path), str(env["corpus"]), str(ckpt)])
        assert code == 0
        rows = ckpt.with_suffix(".history.csv").read_text().splitlines()[1:]
        totals = [float(row.split(",")[2]) for row in rows]
        assert len(totals) == 3
        assert max(totals) - min(totals) <= 1e-12 * max(totals)

    def test_variant_flag_selects_heads(self, env, tmp_path):
        ckpt = tmp_path / "masked.sjnn"
        code = main([
            "train", "--config", str(env["config"]), "--variant", "ibm",
            str(env["corpus"]), str(ckpt),
        ])
        assert code == 0
        model = load_model(ckpt)
        assert [h.kind for h in model.heads] == [FeatureKind.LPS, FeatureKind.IBM]

    def test_unknown_variant_rejected_by_parser(self, env):
        with pytest.raises(SystemExit):
            main(["train", "--variant", "bogus", str(env["corpus"]), "x.sjnn"])


class TestEnhance:
    def test_outputs_match_inputs(self, env):
        noisy = sorted(p.name for p in (env["corpus"] / "noisy").glob("*.wav"))
        enhanced = sorted(p.name for p in env["enhanced"].glob("*.wav"))
        assert enhanced == noisy
        diags = list(env["enhanced"].glob("*.diag.txt"))
        assert len(diags) == len(noisy)
        assert (env["enhanced"] / "effective-config.txt").exists()

    def test_single_file_input(self, env, tmp_path):
        src = next(iter((env["corpus"] / "noisy").glob("*.wav")))
        out = tmp_path / "single"
        code = main([
            "enhance", "--config", str(env["config"]), str(env["ckpt"]), str(src), str(out),
        ])
        assert code == 0
        assert (out / src.name).read_bytes() == (env["enhanced"] / src.name).read_bytes()

    def test_parallel_jobs_match_serial(self, env, tmp_path):
        out = tmp_path / "parallel"
        code = main([
            "enhance", "--config", str(env["config"]), "--jobs", "3",
            str(env["ckpt"]), str(env["corpus"] / "noisy"), str(out),
        ])
        assert code == 0
        for path in env["enhanced"].glob("*.wav"):
            assert (out / path.name).read_bytes() == path.read_bytes()

    def test_gate_without_mask_head_fails_early(self, env, tmp_path):
        out = tmp_path / "gated"
        code = main([
            "enhance", "--config", str(env["config"]), "--post-process", "on",
            str(env["ckpt"]), str(env["corpus"] / "noisy"), str(out),
        ])
        assert code == 1
        assert not list(out.glob("*.wav")) if out.exists() else True

    def test_missing_input_fails(self, env, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = main([
            "enhance", "--config", str(env["config"]), str(env["ckpt"]), str(empty), str(tmp_path / "o"),
        ])
        assert code == 1


class TestEvaluate:
    def test_writes_report(self, env, tmp_path):
        out_csv = tmp_path / "report.csv"
        code = main(["evaluate", str(env["corpus"]), str(env["enhanced"]), str(out_csv)])
        assert code == 0
        lines = out_csv.read_text().splitlines()
        assert lines[0] == "noise,snr_db,metric,value"
        assert any(line.startswith("overall,,ssnr_db,") for line in lines)
        # Test split: 1 voice x 6 SNRs, two metric rows per condition.
        assert sum(line.startswith("white,") for line in lines) == 12

    def test_train_split_selectable(self, env, tmp_path):
        out_csv = tmp_path / "train-report.csv"
        code = main([
            "evaluate", "--split", "train", str(env["corpus"]), str(env["enhanced"]), str(out_csv),
        ])
        assert code == 0

    def test_missing_enhanced_file_fails(self, env, tmp_path):
        partial = tmp_path / "partial"
        shutil.copytree(env["enhanced"], partial)
        removed = sorted(partial.glob("*.wav"))[0]
        removed.unlink()
        out_csv = tmp_path / "partial.csv"
        code = main(["evaluate", "--split", "train", str(env["corpus"]), str(partial), str(out_csv)])
        # The train-split voice may or may not be the removed one; pick the
        # split that contains it to make the outcome deterministic.
        stem = removed.stem
        entries = read_manifest(env["corpus"] / "manifest.tsv")
        split = next(e.split for e in entries if e.utterance_id == stem)
        out_csv2 = tmp_path / "partial2.csv"
        code = main(["evaluate", "--split", split, str(env["corpus"]), str(partial), str(out_csv2)])
        assert code == 1
        assert f"missing,,utterance,{stem}" in out_csv2.read_text()

    def test_empty_split_errors(self, env, tmp_path):
        code = main([
            "evaluate", "--split", "val", str(env["corpus"]), str(env["enhanced"]),
            str(tmp_path / "x.csv"),
        ])
        assert code == 1


class TestDistortionProfile:
    def test_writes_per_bin_rows(self, env, tmp_path):
        out_csv = tmp_path / "profile.csv"
        code = main([
            "distortion-profile", "--config", str(env["config"]),
            str(env["corpus"]), str(env["enhanced"]), str(out_csv),
        ])
        assert code == 0
        lines = out_csv.read_text().splitlines()
        assert lines[0] == "bin_hz,mean_distortion"
        assert len(lines) == 1 + 257
        assert lines[1].startswith("0.00,")
        assert lines[-1].startswith("8000.00,")

    def test_missing_files_fail(self, env, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        code = main([
            "distortion-profile", str(env["corpus"]), str(empty), str(tmp_path / "p.csv"),
        ])
        assert code == 1


class TestMisc:
    def test_dump_defaults(self, capsys):
        assert main(["dump-defaults"]) == 0
        assert capsys.readouterr().out == RunConfig().dump()

    @pytest.mark.parametrize(
        "command",
        ["prepare", "train", "enhance", "evaluate", "distortion-profile", "dump-defaults"],
    )
    def test_help_available(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        assert command in capsys.readouterr().out

    def test_console_script(self):
        result = subprocess.run(
            ["specjoint", "dump-defaults"], capture_output=True, text=True, timeout=60
        )
        assert result.returncode == 0
        assert result.stdout == RunConfig().dump()

    def test_spec_error_becomes_exit_code(self, env, tmp_path):
        # A manifest-less corpus raises inside the command; main() maps it to 1.
        code = main(["train", str(tmp_path), str(tmp_path / "x.sjnn")])
        assert code == 1

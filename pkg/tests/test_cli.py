import json

import numpy as np
import pytest

import echoforge as ef
from echoforge.cli import main


@pytest.fixture(scope="module")
def scene_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scenes") / "one_reflector.json"
    scene = ef.Scene(
        (ef.Reflector.static(0.10),),
        duration=0.48,
        noise_rms=0.001,
        label=ef.GestureLabel("Cylindrical", "Hold"),
    )
    ef.save_scene(scene, path)
    return path


@pytest.fixture(scope="module")
def tiny_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    ef.write_synthetic_corpus(
        root, participants=("P1",), sessions=2, reps_per_session=1, seed=17
    )
    return root


class TestSimulate:
    def test_writes_wavs_and_labels(self, scene_file, tmp_path):
        out = tmp_path / "sim"
        code = main(["simulate", str(scene_file), "--out", str(out), "--seed", "42"])
        assert code == 0
        assert (out / "mic1.wav").exists() and (out / "mic2.wav").exists()
        labels = (out / "labels.csv").read_text().strip().splitlines()
        assert labels[0] == "instance_id,label,seed"
        assert labels[1].endswith("Cylindrical/Hold,42")
        assert (out / "config_snapshot.json").exists()

    def test_deterministic_given_seed(self, scene_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", str(scene_file), "--out", str(a), "--seed", "7"]) == 0
        assert main(["simulate", str(scene_file), "--out", str(b), "--seed", "7"]) == 0
        assert (a / "mic1.wav").read_bytes() == (b / "mic1.wav").read_bytes()
        assert (a / "mic2.wav").read_bytes() == (b / "mic2.wav").read_bytes()
        assert (a / "labels.csv").read_bytes() == (b / "labels.csv").read_bytes()

    def test_missing_scene_exits_3_naming_path(self, tmp_path, capsys):
        code = main(["simulate", str(tmp_path / "absent.json"), "--out", str(tmp_path)])
        assert code == 3
        assert "absent.json" in capsys.readouterr().err

    def test_bad_duration_exits_2(self, scene_file, tmp_path, capsys):
        code = main(
            ["simulate", str(scene_file), "--out", str(tmp_path), "--duration", "0.013"]
        )
        assert code == 2
        assert "whole number" in capsys.readouterr().err


@pytest.fixture(scope="module")
def sim_out(scene_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("simout")
    assert main(["simulate", str(scene_file), "--out", str(out), "--seed", "3"]) == 0
    return out


class TestProfile:
    def test_writes_eight_eprf(self, sim_out, tmp_path):
        out = tmp_path / "prof"
        code = main([
            "profile", str(sim_out / "mic1.wav"), str(sim_out / "mic2.wav"),
            "--out", str(out), "--png",
        ])
        assert code == 0
        names = {p.name for p in out.glob("*.eprf")}
        assert names == {
            "ss1.eprf", "ds1.eprf", "ds2.eprf", "ss2.eprf",
            "ss1_diff.eprf", "ds1_diff.eprf", "ds2_diff.eprf", "ss2_diff.eprf",
        }
        assert len(list(out.glob("*.png"))) == 8
        ep = ef.load_eprf(out / "ss1.eprf")
        assert np.all(np.abs(ep.values.argmax(axis=0) - 29) <= 1)

    def test_assert_row_passes_at_29(self, sim_out, tmp_path):
        code = main([
            "profile", str(sim_out / "mic1.wav"), str(sim_out / "mic2.wav"),
            "--out", str(tmp_path / "p1"), "--assert-row", "29",
        ])
        assert code == 0

    def test_assert_row_fails_with_exit_4(self, sim_out, tmp_path, capsys):
        code = main([
            "profile", str(sim_out / "mic1.wav"), str(sim_out / "mic2.wav"),
            "--out", str(tmp_path / "p2"), "--assert-row", "50",
        ])
        assert code == 4
        assert "peak off row 50" in capsys.readouterr().err

    def test_deterministic_eprf(self, sim_out, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main([
                "profile", str(sim_out / "mic1.wav"), str(sim_out / "mic2.wav"),
                "--out", str(out),
            ]) == 0
        assert (a / "ss1.eprf").read_bytes() == (b / "ss1.eprf").read_bytes()
        assert (a / "ds2_diff.eprf").read_bytes() == (b / "ds2_diff.eprf").read_bytes()

    def test_wrong_rate_exits_3(self, tmp_path, capsys):
        from echoforge import wav

        bad = tmp_path / "bad.wav"
        wav.write_wav(bad, np.zeros(44100), 44100)
        code = main(["profile", str(bad), str(bad), "--out", str(tmp_path / "o")])
        assert code == 3
        assert "44100" in capsys.readouterr().err

    def test_crop_flags(self, sim_out, tmp_path):
        out = tmp_path / "crop"
        code = main([
            "profile", str(sim_out / "mic1.wav"), str(sim_out / "mic2.wav"),
            "--out", str(out), "--start-bin", "0", "--n-bins", "70",
            "--start-frame", "0", "--n-frames", "20",
        ])
        assert code == 0
        ep = ef.load_eprf(out / "ss1.eprf")
        assert ep.values.shape == (70, 20)


class TestTrainEval:
    def test_train_loso_writes_artifacts_and_is_deterministic(self, tiny_corpus, tmp_path):
        args = [
            "train", str(tiny_corpus), "--split", "loso", "--participant", "P1",
            "--session", "2", "--epochs", "1", "--seed", "5",
        ]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        for name in ("checkpoint.ckpt", "metrics.csv", "report.json", "report.csv",
                     "per_class.csv", "confusion.png", "config_snapshot.json"):
            assert (a / name).exists(), name
        assert (a / "checkpoint.ckpt").read_bytes() == (b / "checkpoint.ckpt").read_bytes()
        assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()

    def test_eval_only_with_epochs_zero(self, tiny_corpus, tmp_path):
        train_out = tmp_path / "t"
        assert main([
            "train", str(tiny_corpus), "--split", "loso", "--participant", "P1",
            "--session", "2", "--epochs", "1", "--seed", "5", "--out", str(train_out),
        ]) == 0
        eval_out = tmp_path / "e"
        code = main([
            "train", str(tiny_corpus), "--split", "loso", "--participant", "P1",
            "--session", "2", "--epochs", "0", "--out", str(eval_out),
            "--base-checkpoint", str(train_out / "checkpoint.ckpt"),
        ])
        assert code == 0
        assert (eval_out / "report.json").exists()

    def test_epochs_zero_without_checkpoint_exits_2(self, tiny_corpus, tmp_path, capsys):
        code = main([
            "train", str(tiny_corpus), "--split", "loso", "--participant", "P1",
            "--session", "2", "--epochs", "0", "--out", str(tmp_path / "x"),
        ])
        assert code == 2
        assert "base-checkpoint" in capsys.readouterr().err

    def test_eval_subcommand(self, tiny_corpus, tmp_path):
        train_out = tmp_path / "t"
        assert main([
            "train", str(tiny_corpus), "--split", "loso", "--participant", "P1",
            "--session", "2", "--epochs", "1", "--seed", "5", "--out", str(train_out),
        ]) == 0
        code = main([
            "eval", str(tiny_corpus), "--split", "loso", "--participant", "P1",
            "--session", "2", "--checkpoint", str(train_out / "checkpoint.ckpt"),
            "--out", str(tmp_path / "ev"),
        ])
        assert code == 0

    def test_unknown_split_lists_valid_schemes(self, tiny_corpus, tmp_path, capsys):
        code = main([
            "train", str(tiny_corpus), "--split", "bogus", "--out", str(tmp_path / "x"),
        ])
        assert code == 2
        err = capsys.readouterr().err
        for name in ("loso", "lopo", "object-independent", "finetune-budget=N"):
            assert name in err

    def test_missing_dataset_exits_3(self, tmp_path, capsys):
        code = main([
            "train", str(tmp_path / "nothing"), "--split", "loso",
            "--participant", "P1", "--session", "1", "--out", str(tmp_path / "x"),
        ])
        assert code == 3

    def test_config_snapshot_round_trip(self, tiny_corpus, tmp_path):
        first = tmp_path / "first"
        args = [
            "train", str(tiny_corpus), "--split", "loso", "--participant", "P1",
            "--session", "2", "--epochs", "1", "--seed", "5", "--out", str(first),
        ]
        assert main(args) == 0
        replay = tmp_path / "replay"
        code = main([
            "train", "--config", str(first / "config_snapshot.json"),
            "--out", str(replay),
        ])
        assert code == 0
        assert (first / "checkpoint.ckpt").read_bytes() == (replay / "checkpoint.ckpt").read_bytes()


class TestUsage:
    def test_no_subcommand_exits_2(self):
        assert main([]) == 2

    def test_unknown_subcommand_exits_2(self):
        assert main(["frobnicate"]) == 2

    def test_simulate_without_scene_exits_2(self, tmp_path, capsys):
        code = main(["simulate", "--out", str(tmp_path)])
        assert code == 2

import csv
import subprocess
import sys

import pytest

from aiive import cli, data, sonify
from conftest import estimate_pitch


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def small_data(tmp_path_factory):
    prefix = str(tmp_path_factory.mktemp("ds") / "small")
    assert run_cli("gen-data", "--out", prefix, "--seed", "3", "--counts", "210,70,35") == 0
    return prefix


class TestGenData:
    def test_writes_loadable_pair(self, tmp_path):
        prefix = str(tmp_path / "d")
        assert run_cli("gen-data", "--out", prefix, "--seed", "1", "--counts", "70,28,14") == 0
        ds = data.load_dataset(prefix)
        assert ds.split_counts == (70, 28, 14)
        assert ds.input_dim == 2304

    def test_default_counts_are_paper_split(self):
        parser = cli.build_parser()
        args = parser.parse_args(["gen-data", "--out", "x"])
        assert args.counts == (3374, 419, 385)

    def test_bad_counts_usage_error(self, tmp_path):
        assert run_cli("gen-data", "--out", str(tmp_path / "d"), "--counts", "1,2") == 2


class TestTrain:
    def test_single_epoch_trace(self, small_data, tmp_path):
        trace = str(tmp_path / "t.csv")
        code = run_cli(
            "train", "--data", small_data, "--h1", "6", "--h2", "5",
            "--batch", "32", "--epochs", "1", "--seed", "4", "--trace", trace,
        )
        assert code == 0
        rows = list(csv.reader(open(trace)))
        assert rows[0] == ["epoch", "val_accuracy", "val_loss", "learning_rate", "momentum"]
        assert len(rows) == 2
        assert rows[1][0] == "0"

    def test_same_seed_byte_identical_traces(self, small_data, tmp_path):
        paths = [str(tmp_path / f"t{i}.csv") for i in range(2)]
        for p in paths:
            assert run_cli(
                "train", "--data", small_data, "--h1", "6", "--h2", "5",
                "--batch", "32", "--epochs", "3", "--seed", "7", "--trace", p,
            ) == 0
        a, b = (open(p, "rb").read() for p in paths)
        assert a == b

    def test_different_seeds_differ(self, small_data, tmp_path):
        out = []
        for seed in ("7", "8"):
            p = str(tmp_path / f"s{seed}.csv")
            run_cli("train", "--data", small_data, "--h1", "6", "--h2", "5",
                    "--batch", "32", "--epochs", "2", "--seed", seed, "--trace", p)
            out.append(open(p, "rb").read())
        assert out[0] != out[1]

    def test_missing_dataset_exit_1(self, tmp_path):
        assert run_cli("train", "--data", str(tmp_path / "absent"), "--epochs", "1") == 1

    def test_usage_error_exit_2(self):
        assert run_cli("train") == 2
        assert run_cli("bogus-command") == 2

    def test_wav_pitch_rises_on_improving_run(self, small_data, tmp_path):
        wav = str(tmp_path / "run.wav")
        code = run_cli(
            "train", "--data", small_data, "--h1", "12", "--h2", "8",
            "--lr", "0.08", "--momentum", "0.9", "--batch", "32",
            "--epochs", "8", "--seed", "1", "--wav", wav, "--sonify", "accuracy",
        )
        assert code == 0
        frame = sonify.read_wav(wav)
        assert frame.duration == pytest.approx(8 * cli.WAV_SECONDS_PER_EPOCH, abs=0.01)
        sr = frame.sample_rate
        first = estimate_pitch(frame.right[:sr], sr)
        last = estimate_pitch(frame.right[-sr:], sr)
        assert last > first

    def test_script_drives_session(self, small_data, tmp_path):
        script = tmp_path / "script.jsonl"
        script.write_text(
            '{"at_step": 2, "cmd": {"type": "set_hyperparams", "learning_rate": 0.5, "momentum": 0.1}}\n'
            '{"at_step": 4, "cmd": {"type": "resume"}}\n'
        )
        trace = str(tmp_path / "t.csv")
        code = run_cli(
            "train", "--data", small_data, "--h1", "4", "--h2", "4",
            "--batch", "32", "--epochs", "2", "--seed", "2",
            "--script", str(script), "--trace", trace,
        )
        assert code == 0
        rows = list(csv.reader(open(trace)))
        assert rows[-1][3] == repr(0.5)  # committed learning rate reported

    def test_weights_dump(self, small_data, tmp_path):
        import numpy as np

        out = str(tmp_path / "w.npz")
        run_cli("train", "--data", small_data, "--h1", "4", "--h2", "3",
                "--batch", "32", "--epochs", "1", "--weights-out", out)
        blob = np.load(out)
        assert blob["W1"].shape == (4, 2304)
        assert blob["W3"].shape == (7, 3)


class TestReplay:
    def _write_trace(self, path, rows):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cli.TRACE_HEADER)
            w.writerows(rows)

    def test_matching_traces_exit_0(self, tmp_path):
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        rows = [["0", "0.5", "1.25", "0.1", "0.9"], ["1", "0.75", "0.5", "0.1", "0.9"]]
        self._write_trace(a, rows)
        self._write_trace(b, rows)
        assert run_cli("replay", "--trace", a, "--trace", b) == 0

    def test_within_tolerance_matches(self, tmp_path):
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        self._write_trace(a, [["0", "0.5", "1.25", "0.1", "0.9"]])
        self._write_trace(b, [["0", "0.5000000000000004", "1.25", "0.1", "0.9"]])
        assert run_cli("replay", "--trace", a, "--trace", b) == 0

    def test_mismatch_exit_1(self, tmp_path):
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        self._write_trace(a, [["0", "0.5", "1.25", "0.1", "0.9"]])
        self._write_trace(b, [["0", "0.51", "1.25", "0.1", "0.9"]])
        assert run_cli("replay", "--trace", a, "--trace", b) == 1

    def test_row_count_mismatch(self, tmp_path):
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        self._write_trace(a, [["0", "0.5", "1.25", "0.1", "0.9"]])
        self._write_trace(b, [["0", "0.5", "1.25", "0.1", "0.9"], ["1", "0.6", "1.0", "0.1", "0.9"]])
        assert run_cli("replay", "--trace", a, "--trace", b) == 1

    def test_single_trace_usage_error(self, tmp_path):
        a = str(tmp_path / "a.csv")
        self._write_trace(a, [])
        assert run_cli("replay", "--trace", a) == 2

    def test_missing_file_exit_1(self, tmp_path):
        assert run_cli("replay", "--trace", str(tmp_path / "x"), "--trace", str(tmp_path / "y")) == 1


class TestEntryPoint:
    def test_module_invocation(self):
        out = subprocess.run(
            [sys.executable, "-m", "aiive.cli", "--help"], capture_output=True, text=True
        )
        assert out.returncode == 0
        assert "gen-data" in out.stdout
        assert "train" in out.stdout
        assert "replay" in out.stdout

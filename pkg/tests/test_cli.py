"""Tests for CLI functionality."""

import csv
import json
import sys
from unittest import mock

import pytest

from neste import __version__
from neste.cli import main
from neste.config import MANIFEST_NAME
from neste.patterns import read_heatmaps
from neste.scoring import load_checkpoint


def _run(*argv) -> int:
    with mock.patch.object(sys, "argv", ["neste", *argv]):
        with pytest.raises(SystemExit) as exc_info:
            main()
    return exc_info.value.code


def _data_args(paths) -> list[str]:
    args = []
    for key, path in paths.items():
        args += [f"--{key.replace('_', '-')}", str(path)]
    return args


@pytest.fixture
def trained(toy_paths, tmp_path):
    """A checkpoint trained for two epochs on the toy graph."""
    out = tmp_path / "run"
    code = _run(
        "train", *_data_args(toy_paths), "-o", str(out), "--dim", "4", "--epochs", "2",
        "--valid-every", "1", "--batch-size", "4", "--negatives", "2", "--seed", "3",
        "--threads", "1",
    )
    assert code == 0
    return out


def test_main_no_arguments(capsys):
    """Test CLI with no arguments shows usage."""
    assert _run() == 1
    captured = capsys.readouterr()
    assert "usage: neste" in captured.out
    assert "train" in captured.out


def test_main_version_option(capsys):
    """Test --version prints the package version and exits 0."""
    assert _run("--version") == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_option_is_usage_error(capsys):
    """Test an unknown flag exits 1 with usage on stderr."""
    assert _run("train", "--colour", "red") == 1
    assert "usage:" in capsys.readouterr().err


def test_bad_algebra_is_usage_error(toy_paths, tmp_path):
    """Test an unknown algebra letter is rejected."""
    assert _run("train", *_data_args(toy_paths), "-o", str(tmp_path), "--algebra", "X") == 1


def test_train_writes_outputs(trained):
    """Test train writes the checkpoint, the log and the manifest."""
    store = load_checkpoint(trained / "checkpoint.neste")
    assert store.dim == 4
    assert store.algebra.value == "Q"
    with open(trained / "training_log.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert [row["epoch"] for row in rows] == ["1", "2"]
    manifest = json.loads((trained / MANIFEST_NAME).read_text(encoding="utf-8"))
    assert manifest["subcommand"] == "train"
    assert manifest["config"]["train"]["seed"] == 3
    assert len(manifest["inputs"]) == 6


def test_train_is_reproducible(toy_paths, tmp_path):
    """Test two runs with the same seed write identical checkpoints."""
    checkpoints = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = _run(
            "train", *_data_args(toy_paths), "-o", str(out), "--dim", "2", "--epochs", "2",
            "--seed", "5", "--threads", "1",
        )
        assert code == 0
        checkpoints.append((out / "checkpoint.neste").read_bytes())
    assert checkpoints[0] == checkpoints[1]


def test_train_reads_config_file(toy_paths, tmp_path):
    """Test settings from -c are used and flags override them."""
    config = tmp_path / "run.conf"
    config.write_text("dim = 3\nepochs = 1\nalgebra = H\nseed = 8\n", encoding="utf-8")
    out = tmp_path / "run"
    code = _run(
        "train", *_data_args(toy_paths), "-c", str(config), "-o", str(out), "--seed", "9",
        "--threads", "1",
    )
    assert code == 0
    store = load_checkpoint(out / "checkpoint.neste")
    assert (store.dim, store.algebra.value) == (3, "H")
    manifest = json.loads((out / MANIFEST_NAME).read_text(encoding="utf-8"))
    assert manifest["config"]["train"]["seed"] == 9


def test_bad_config_file_exits_1(toy_paths, tmp_path, capsys):
    """Test a malformed config file is reported with its line number."""
    config = tmp_path / "run.conf"
    config.write_text("dim = 3\ndepth = 2\n", encoding="utf-8")
    assert _run("train", *_data_args(toy_paths), "-c", str(config)) == 1
    assert "line 2: unknown key 'depth'" in capsys.readouterr().err


def test_missing_data_file_exits_2(toy_paths, tmp_path, capsys):
    """Test a missing input file exits 2 and names the path."""
    paths = dict(toy_paths)
    paths["atomic_test"] = tmp_path / "nope.txt"
    assert _run("train", *_data_args(paths), "-o", str(tmp_path / "run")) == 2
    captured = capsys.readouterr()
    assert "Error reading file" in captured.err
    assert "nope.txt" in captured.err


def test_malformed_data_file_exits_2(toy_paths, capsys):
    """Test a line with the wrong field count exits 2."""
    toy_paths["atomic_valid"].write_text("bob\tknows\n", encoding="utf-8")
    assert _run("train", *_data_args(toy_paths)) == 2
    assert "atomic_valid.txt:1" in capsys.readouterr().err


def test_missing_data_flag_exits_1(tmp_path, capsys):
    """Test running without data files is a configuration error."""
    assert _run("train", "-o", str(tmp_path)) == 1
    assert "--atomic-train" in capsys.readouterr().err


def test_eval_text_output(trained, toy_paths, capsys):
    """Test eval prints a table and writes a CSV per task."""
    code = _run(
        "eval", *_data_args(toy_paths), "--checkpoint", str(trained / "checkpoint.neste"),
        "-o", str(trained), "--task", "all",
    )
    assert code == 0
    output = capsys.readouterr().out
    assert "MRR" in output
    assert "conditional" in output
    for task in ("triple", "conditional", "base"):
        assert (trained / f"eval_{task}_test.csv").exists()


def test_eval_json_output(trained, toy_paths, capsys):
    """Test eval -f json emits one report per task."""
    code = _run(
        "eval", *_data_args(toy_paths), "--checkpoint", str(trained / "checkpoint.neste"),
        "-o", str(trained), "--task", "base", "--split", "valid", "-f", "json", "--hits", "1,5",
    )
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert len(data) == 1
    assert data[0]["task"] == "base"
    assert data[0]["split"] == "valid"
    assert data[0]["query_count"] == 2
    assert set(data[0]["hits_at"]) == {"1", "5"}


def test_eval_csv_output(trained, toy_paths, capsys):
    """Test eval -f csv emits a header and an overall row."""
    code = _run(
        "eval", *_data_args(toy_paths), "--checkpoint", str(trained / "checkpoint.neste"),
        "-o", str(trained), "-f", "csv",
    )
    assert code == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert rows[0]["task"] == "triple"
    assert rows[0]["relation"] == "(all)"


def test_eval_dimension_mismatch_exits_1(trained, toy_paths, capsys):
    """Test eval refuses a checkpoint of another dimension."""
    code = _run(
        "eval", *_data_args(toy_paths), "--checkpoint", str(trained / "checkpoint.neste"),
        "-o", str(trained), "--dim", "8",
    )
    assert code == 1
    assert "dim 4" in capsys.readouterr().err


def test_eval_unknown_symbol_exits_1(trained, toy_paths, capsys):
    """Test eval refuses data naming an entity the checkpoint lacks."""
    toy_paths["atomic_test"].write_text("zed\tknows\talice\n", encoding="utf-8")
    code = _run(
        "eval", *_data_args(toy_paths), "--checkpoint", str(trained / "checkpoint.neste"),
        "-o", str(trained), "--task", "base",
    )
    assert code == 1
    assert "no embedding" in capsys.readouterr().err


def test_eval_without_checkpoint_exits_1(toy_paths, capsys):
    """Test eval needs --checkpoint."""
    assert _run("eval", *_data_args(toy_paths)) == 1
    assert "--checkpoint" in capsys.readouterr().err


def test_eval_unknown_task_in_config_exits_1(trained, toy_paths, tmp_path, capsys):
    """Test a task name from a config file is validated like the flag."""
    config = tmp_path / "eval.conf"
    config.write_text("task = entity\n", encoding="utf-8")
    code = _run(
        "eval", *_data_args(toy_paths), "-c", str(config),
        "--checkpoint", str(trained / "checkpoint.neste"), "-o", str(trained),
    )
    assert code == 1
    assert "task must be one of" in capsys.readouterr().err


def test_analyze_patterns(tmp_path, capsys):
    """Test the pattern suite runs clean and writes a manifest."""
    code = _run("analyze", "--patterns", "--trials", "10", "-o", str(tmp_path))
    assert code == 0
    output = capsys.readouterr().out
    assert "corrupted_cell" in output
    assert "0 unexpected" in output
    assert (tmp_path / MANIFEST_NAME).exists()


def test_analyze_patterns_json(tmp_path, capsys):
    """Test the pattern suite as JSON."""
    assert _run("analyze", "--patterns", "--trials", "5", "-f", "json", "-o", str(tmp_path)) == 0
    checks = json.loads(capsys.readouterr().out)
    assert {check["algebra"] for check in checks} == {"Q", "H", "S"}


def test_analyze_heatmaps(trained):
    """Test --heatmaps writes one row per nested relation."""
    code = _run(
        "analyze", "--heatmaps", "heatmaps.csv", "--checkpoint",
        str(trained / "checkpoint.neste"), "-o", str(trained),
    )
    assert code == 0
    heatmaps = read_heatmaps(trained / "heatmaps.csv")
    assert set(heatmaps) == {"implies", "before"}


def test_analyze_heatmaps_needs_checkpoint(tmp_path, capsys):
    """Test --heatmaps without --checkpoint exits 1."""
    assert _run("analyze", "--heatmaps", "h.csv", "-o", str(tmp_path)) == 1
    assert "--checkpoint" in capsys.readouterr().err


def test_analyze_needs_an_action(tmp_path):
    assert _run("analyze", "-o", str(tmp_path)) == 1


def test_augment(toy_paths, tmp_path, capsys):
    """Test augment writes composed triples."""
    out = tmp_path / "aug"
    code = _run("augment", *_data_args(toy_paths), "-o", str(out), "--samples-per-entity", "3")
    assert code == 0
    lines = (out / "augmented.txt").read_text(encoding="utf-8").splitlines()
    assert lines
    assert all(len(line.split("\t")) == 3 for line in lines)
    assert "augmented triple(s)" in capsys.readouterr().out


def test_split(tmp_path, capsys):
    """Test split cuts a file 8:1:1."""
    source = tmp_path / "all.txt"
    source.write_text("".join(f"e{i}\tr\te{i + 1}\n" for i in range(10)), encoding="utf-8")
    out = tmp_path / "parts"
    assert _run("split", str(source), "-o", str(out), "--seed", "1") == 0
    sizes = [
        len((out / f"atomic_{name}.txt").read_text(encoding="utf-8").splitlines())
        for name in ("train", "valid", "test")
    ]
    assert sizes == [8, 1, 1]
    assert "train: 8" in capsys.readouterr().out


def test_split_missing_input_exits_2(tmp_path):
    assert _run("split", str(tmp_path / "none.txt"), "-o", str(tmp_path)) == 2


@pytest.mark.slow
def test_synth(tmp_path, capsys):
    """Test synth writes every split file and prints the statistics."""
    assert _run("synth", "-o", str(tmp_path), "--seed", "2") == 0
    output = capsys.readouterr().out
    assert "entities: 200" in output
    for kind in ("atomic", "nested"):
        for split in ("train", "valid", "test"):
            assert (tmp_path / f"{kind}_{split}.txt").exists()

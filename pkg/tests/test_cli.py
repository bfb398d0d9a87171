import asyncio
import csv
import json

import pytest

from attacks import GlobalPerturbation, load_artifact
from database import repository
from main import EXIT_OK, EXIT_USAGE, main
from model import RunStatus

from conftest import RESOLUTION


@pytest.fixture
def workspace(tmp_path, tiny_config, tiny_dataset):
    config = {
        "env": {"resolution": RESOLUTION},
        "policy": tiny_config.model_dump(mode="json"),
        "attack": {"steps": 2, "alpha": 0.01, "scheduler": "ddim3", "patch_pixels": 5},
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    tiny_dataset.save(tmp_path / "demos.dpab")
    return tmp_path


def _cli(workspace, *argv):
    return main(["--config", str(workspace / "config.json"), "--ledger", str(workspace / "ledger.db"),
                 "--log-level", "WARNING", *argv])


def _runs(workspace):
    summaries, _ = asyncio.run(repository.list_runs(db_path=workspace / "ledger.db"))
    return summaries


def test_random_attack_writes_artifact(workspace):
    out = workspace / "random.dpab"
    assert _cli(workspace, "--seed", "3", "attack", "random", "--sigma", "0.02", "--out", str(out)) == EXIT_OK
    artifact = load_artifact(out)
    assert isinstance(artifact, GlobalPerturbation)
    assert artifact.delta.shape == (2, 3, RESOLUTION, RESOLUTION)
    assert artifact.sigma == 0.02
    assert artifact.metadata["seed"] == 3
    [run] = _runs(workspace)
    assert run.command == "attack" and run.status == RunStatus.COMPLETED


def test_contradictory_flags_exit_with_usage_error(workspace):
    assert _cli(workspace, "attack", "random", "--targeted", "--out", str(workspace / "r.dpab")) == EXIT_USAGE
    assert _cli(workspace, "bench", "--targeted", "--ckpt", str(workspace / "none.dpab")) == EXIT_USAGE
    assert _cli(workspace, "bench", "--sigma-values", "0.01", "--ckpt", str(workspace / "none.dpab")) == EXIT_USAGE
    assert {r.status for r in _runs(workspace)} == {RunStatus.FAILED}


def test_invalid_config_is_rejected_before_recording(tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"attack": {"sigma": -1}}))
    code = main(["--config", str(tmp_path / "bad.json"), "--ledger", str(tmp_path / "ledger.db"), "runs"])
    assert code == EXIT_USAGE
    assert not (tmp_path / "ledger.db").exists()


def test_missing_checkpoint_is_a_failure(workspace):
    assert _cli(workspace, "bench", "--ckpt", str(workspace / "none.dpab")) == 1
    [run] = _runs(workspace)
    assert run.status == RunStatus.FAILED


def test_train_then_bench(workspace):
    ckpt = workspace / "policy.dpab"
    reports = workspace / "reports"
    assert _cli(workspace, "train", "--data", str(workspace / "demos.dpab"), "--epochs", "1", "--batch", "4",
                "--out", str(ckpt)) == EXIT_OK
    assert ckpt.exists()
    assert _cli(workspace, "bench", "--ckpt", str(ckpt), "--conditions", "clean", "random-patch",
                "--episodes", "2", "--episode-len", "2", "--report-dir", str(reports), "--dump-frames") == EXIT_OK

    with (reports / "benchmark.csv").open(newline="") as f:
        rows = list(csv.DictReader(f))
    assert [r["condition"] for r in rows] == ["clean", "random-patch"]
    assert all(r["n"] == "2" for r in rows)
    assert (reports / "frames" / "random-patch_t0_attacked.ppm").exists()
    assert [r.command for r in _runs(workspace)] == ["bench", "train"]


def test_runs_lists_the_ledger(workspace, capsys):
    _cli(workspace, "attack", "random", "--out", str(workspace / "r.dpab"))
    capsys.readouterr()
    assert _cli(workspace, "runs") == EXIT_OK
    out = capsys.readouterr().out
    assert "attack" in out
    assert "1 of 1 runs" in out


def test_bench_rejects_resolution_other_than_checkpoint(workspace):
    ckpt = workspace / "policy.dpab"
    assert _cli(workspace, "train", "--data", str(workspace / "demos.dpab"), "--epochs", "1", "--batch", "4",
                "--out", str(ckpt)) == EXIT_OK
    config = json.loads((workspace / "config.json").read_text())
    config["env"]["resolution"] = RESOLUTION * 2
    (workspace / "config.json").write_text(json.dumps(config))

    assert _cli(workspace, "bench", "--ckpt", str(ckpt), "--episodes", "1") == EXIT_USAGE
    latest = _runs(workspace)[0]
    record = asyncio.run(repository.get_run(latest.id, db_path=workspace / "ledger.db"))
    assert record.status == RunStatus.FAILED
    assert "checkpoint expects" in record.error

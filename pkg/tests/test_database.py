# -*- coding: utf-8 -*-
import pytest

from database import ExperimentDatabase
from tensornet import TrainLogEntry

SUMMARY = {"accuracy": 0.9, "precision": 0.85, "sensitivity": 0.8, "f1": 0.82, "auc": None}


@pytest.fixture
def database(tmp_path):
    return ExperimentDatabase(str(tmp_path / "experiments.db"))


def _entry(step: int) -> TrainLogEntry:
    return TrainLogEntry(step=step, epoch=1, loss=0.1 * step, train_accuracy=0.5, eval_loss=0.2,
                         eval_accuracy=0.6, learning_rate=1e-4)


def test_run_lifecycle(database):
    run_id = database.start_run("MITBIH5_seed42", "MITBIH5", 0, 42)
    (run,) = database.get_runs("MITBIH5_seed42")
    assert run.id == run_id
    assert run.status == "running"
    assert run.created_at is not None

    database.finish_run(run_id, SUMMARY, best_step=12, checkpoint_path="runs/x/checkpoint.bin")
    (run,) = database.get_runs("MITBIH5_seed42", status="completed")
    assert run.accuracy == 0.9
    assert run.macro_f1 == 0.82
    assert run.macro_auc is None
    assert run.best_step == 12
    assert run.finished_at is not None


def test_failed_run(database):
    run_id = database.start_run("e", "AAMI5", 1, 43)
    database.fail_run(run_id, "потери не конечны")
    assert database.get_runs("e", status="completed") == []
    (run,) = database.get_runs("e", status="failed")
    assert run.error == "потери не конечны"


def test_log_entries_and_artifacts(database):
    run_id = database.start_run("e", "MITBIH6", 0, 1)
    database.add_log_entries(run_id, [_entry(2), _entry(1)])
    rows = database.get_log_entries(run_id)
    assert [row["step"] for row in rows] == [1, 2]

    database.add_artifact("e", run_id, "checkpoint", "runs/e/run_0/checkpoint.bin", "ab" * 32)
    database.add_artifact("e", None, "config", "runs/e/experiment.cfg", "cd" * 32)
    artifacts = database.get_artifacts("e")
    assert [a.kind for a in artifacts] == ["checkpoint", "config"]
    assert artifacts[1].run_id is None


def test_delete_experiment_keeps_others(database):
    for name in ("a", "b"):
        run_id = database.start_run(name, "MITBIH5", 0, 1)
        database.add_log_entries(run_id, [_entry(1)])
        database.add_artifact(name, run_id, "manifest", f"{name}/manifest.txt", "00")

    assert database.delete_experiment("a") == 1
    assert database.get_runs("a") == []
    assert database.get_artifacts("a") == []
    assert len(database.get_runs("b")) == 1
    assert database.get_experiments() == ["b"]
    assert database.delete_experiment("missing") == 0


def test_statistics(database):
    first = database.start_run("e", "MITBIH5", 0, 1)
    second = database.start_run("e", "MITBIH5", 1, 2)
    database.start_run("e", "MITBIH5", 2, 3)
    database.finish_run(first, SUMMARY, 1, "c.bin")
    database.fail_run(second, "ошибка")
    database.add_log_entries(first, [_entry(1), _entry(2)])

    stats = database.get_statistics()
    assert stats == {
        "runs_completed": 1,
        "runs_failed": 1,
        "runs_running": 1,
        "log_entries": 2,
        "artifacts": 0,
    }


def test_reopen_existing_database(tmp_path):
    path = str(tmp_path / "experiments.db")
    ExperimentDatabase(path).start_run("e", "MITBIH5", 0, 1)
    assert len(ExperimentDatabase(path).get_runs("e")) == 1

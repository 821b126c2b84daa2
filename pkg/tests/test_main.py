# -*- coding: utf-8 -*-
import os

import pytest

from main import build_parser, collect_overrides, main


def _base_args(small_config):
    return [
        "--data-dir", small_config.DATA_DIR,
        "--records", ",".join(small_config.RECORDS),
        "--output-dir", small_config.OUTPUT_DIR,
        "--log-to-file", "false",
        "--log-to-console", "false",
    ]


def test_flags_map_to_config_fields():
    args = build_parser().parse_args(["train", "--scheme", "AAMI5", "--n-runs", "3", "--learning-rate", "0.01"])
    assert args.command == "train"
    assert collect_overrides(args) == {"SCHEME": "AAMI5", "N_RUNS": "3", "LEARNING_RATE": "0.01"}


def test_census_command(small_config, capsys):
    assert main(["census"] + _base_args(small_config)) == 0
    assert os.path.exists(os.path.join(small_config.OUTPUT_DIR, "census", "census_codes.csv"))
    assert "MITBIH5" in capsys.readouterr().out


def test_train_evaluate_report_commands(small_config, capsys):
    args = _base_args(small_config) + [
        "--window-length", "300", "--max-per-class", "100", "--seed", "7", "--n-runs", "1",
        "--conv-kernels", "5,5,5", "--conv-channels", "4,4,4", "--epochs", "1", "--batch-size", "16",
    ]
    assert main(["train"] + args) == 0

    run_dir = os.path.join(small_config.OUTPUT_DIR, "MITBIH5_seed7", "run_0")
    assert main(["evaluate"] + args + [
        "--checkpoint", os.path.join(run_dir, "checkpoint.bin"),
        "--manifest", os.path.join(run_dir, "manifest.txt"),
    ]) == 0
    assert os.path.exists(os.path.join(run_dir, "evaluation", "confusion_counts.csv"))
    capsys.readouterr()
    assert main(["report"] + args) == 0

    out = capsys.readouterr().out
    assert "Эксперименты в базе: MITBIH5_seed7" in out
    assert "Запуск 0 (seed 7): completed, записей журнала: 1" in out
    assert "Завершено: 1, с ошибкой: 0" in out


def test_evaluate_requires_checkpoint(small_config):
    assert main(["evaluate"] + _base_args(small_config)) == 1


def test_invalid_config_value(small_config):
    assert main(["census", "--epochs", "many"] + _base_args(small_config)) == 1


def test_missing_command():
    assert main([]) == 1


def test_unknown_command():
    with pytest.raises(SystemExit):
        main(["fit"])


def test_create_config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["--create-config"]) == 0
    content = (tmp_path / "experiment.cfg.example").read_text(encoding="utf-8")
    assert "SCHEME = MITBIH5" in content
    assert main(["--create-config"]) == 0

# -*- coding: utf-8 -*-
"""Общие фикстуры тестов"""

import sys
from pathlib import Path

import pytest

# Корень репозитория в пути импорта, как в main.py
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.path.insert(0, str(Path(__file__).resolve().parent))

from config import ExperimentConfig  # noqa: E402
from wfdb_fixtures import write_synthetic_record  # noqa: E402

SYNTHETIC_RECORDS = ("900", "901", "902")


@pytest.fixture
def synthetic_dir(tmp_path):
    """Каталог с тремя синтетическими записями формата MIT-BIH"""
    data_dir = tmp_path / "mitdb"
    data_dir.mkdir()
    for offset, name in enumerate(SYNTHETIC_RECORDS):
        write_synthetic_record(data_dir, name, n_beats=60, seed=offset)
    return data_dir


@pytest.fixture
def small_config(tmp_path, synthetic_dir):
    """Конфигурация уменьшенного эксперимента на синтетических записях"""
    return ExperimentConfig(
        DATA_DIR=str(synthetic_dir),
        RECORDS=list(SYNTHETIC_RECORDS),
        SCHEME="MITBIH5",
        WINDOW_LENGTH=300,
        BALANCE_FRACTION=1.0,
        MAX_PER_CLASS=100,
        SEED=7,
        N_RUNS=2,
        CONV_KERNELS=[5, 5, 5],
        CONV_CHANNELS=[4, 4, 4],
        POOL_SIZE=5,
        EPOCHS=1,
        BATCH_SIZE=16,
        OUTPUT_DIR=str(tmp_path / "runs"),
        LOG_TO_FILE=False,
        LOG_TO_CONSOLE=False,
    )

# -*- coding: utf-8 -*-
"""
Конфигурационные настройки эксперимента классификации ЭКГ (R-R-R + 1D CNN)
"""

import os
import typing
from typing import Dict, List, Optional
from dataclasses import dataclass, field, fields


class ConfigError(Exception):
    """Ошибка конфигурации (неизвестный ключ, неверное значение)"""


@dataclass
class ExperimentConfig:
    """Конфигурация эксперимента"""
    # Данные
    DATA_DIR: str = "mitdb"
    RECORDS: List[str] = field(default_factory=list)  # пусто = все 48 записей
    SCHEME: str = "MITBIH5"  # MITBIH5, MITBIH6, AAMI5
    CHANNEL: int = 0  # модифицированное отведение II

    # Сегментация и балансировка
    WINDOW_LENGTH: int = 2700
    BALANCE_FRACTION: float = 0.10
    MAX_PER_CLASS: int = 0  # 0 = без ограничения (режим подмножества, если > 0)

    # Воспроизводимость
    SEED: int = 42
    N_RUNS: int = 7

    # Архитектура
    CONV_KERNELS: List[int] = field(default_factory=lambda: [5, 10, 15])
    CONV_CHANNELS: List[int] = field(default_factory=lambda: [32, 64, 128])
    POOL_SIZE: int = 5

    # Обучение
    EPOCHS: int = 83
    BATCH_SIZE: int = 64
    EVAL_INTERVAL: int = 0  # батчей между оценками, 0 = раз в эпоху
    LEARNING_RATE: float = 0.0001
    LR_DECAY_FACTOR: float = 0.5
    LR_PATIENCE: int = 5  # оценок без улучшения
    LR_FLOOR: float = 1e-6
    SELECT_ON_VALIDATION: bool = False  # False = лучший чекпоинт по тестовой выборке
    VALIDATION_FRACTION: float = 0.1

    # Результаты
    OUTPUT_DIR: str = "runs"
    DATABASE_FILE: str = "experiments.db"

    # Настройки логирования
    LOG_LEVEL: str = "INFO"
    LOG_FILE: str = "experiment.log"
    LOG_TO_FILE: bool = True
    LOG_TO_CONSOLE: bool = True

    @property
    def subset_mode(self) -> bool:
        """Режим подмножества: объявлен список записей или ограничено число сегментов"""
        return bool(self.RECORDS) or self.MAX_PER_CLASS > 0

    def validate(self, check_paths: bool = False) -> None:
        """Проверка согласованности настроек"""
        if self.WINDOW_LENGTH < 3:
            raise ConfigError(f"WINDOW_LENGTH должен быть >= 3, получено {self.WINDOW_LENGTH}")
        if self.SCHEME not in SCHEME_IDS:
            raise ConfigError(f"Неизвестная схема классов: {self.SCHEME}")
        if not 0 < self.BALANCE_FRACTION <= 1:
            raise ConfigError(f"BALANCE_FRACTION вне диапазона (0, 1]: {self.BALANCE_FRACTION}")
        if self.N_RUNS < 1:
            raise ConfigError("N_RUNS должен быть >= 1")
        if self.BATCH_SIZE < 1:
            raise ConfigError("BATCH_SIZE должен быть >= 1")
        if self.EPOCHS < 0:
            raise ConfigError("EPOCHS не может быть отрицательным")
        if len(self.CONV_KERNELS) != len(self.CONV_CHANNELS):
            raise ConfigError("CONV_KERNELS и CONV_CHANNELS должны иметь одинаковую длину")
        if self.CHANNEL < 0:
            raise ConfigError("CHANNEL не может быть отрицательным")
        if check_paths and not os.path.isdir(self.DATA_DIR):
            raise ConfigError(f"Каталог с данными не найден: {self.DATA_DIR}")


SCHEME_IDS = ("MITBIH5", "MITBIH6", "AAMI5")

# 48 записей MIT-BIH Arrhythmia Database
MITBIH_RECORDS = [
    "100", "101", "102", "103", "104", "105", "106", "107", "108", "109",
    "111", "112", "113", "114", "115", "116", "117", "118", "119",
    "121", "122", "123", "124",
    "200", "201", "202", "203", "205", "207", "208", "209", "210",
    "212", "213", "214", "215", "217", "219",
    "220", "221", "222", "223",
    "228", "230", "231", "232", "233", "234",
]

# Коды аннотаций MIT (код -> (символ, описание))
ANNOTATION_CODES = {
    0: ("", "Not-QRS"),
    1: ("N", "Normal beat"),
    2: ("L", "Left bundle branch block beat"),
    3: ("R", "Right bundle branch block beat"),
    4: ("a", "Aberrated atrial premature beat"),
    5: ("V", "Premature ventricular contraction"),
    6: ("F", "Fusion of ventricular and normal beat"),
    7: ("J", "Nodal (junctional) premature beat"),
    8: ("A", "Atrial premature contraction"),
    9: ("S", "Premature or ectopic supraventricular beat"),
    10: ("E", "Ventricular escape beat"),
    11: ("j", "Nodal (junctional) escape beat"),
    12: ("/", "Paced beat"),
    13: ("Q", "Unclassifiable beat"),
    14: ("~", "Signal quality change"),
    16: ("|", "Isolated QRS-like artifact"),
    18: ("s", "ST change"),
    19: ("T", "T-wave change"),
    20: ("*", "Systole"),
    21: ("D", "Diastole"),
    22: ('"', "Comment annotation"),
    23: ("=", "Measurement annotation"),
    24: ("p", "P-wave peak"),
    25: ("B", "Left or right bundle branch block"),
    26: ("^", "Non-conducted pacer spike"),
    27: ("t", "T-wave peak"),
    28: ("+", "Rhythm change"),
    29: ("u", "U-wave peak"),
    30: ("?", "Learning"),
    31: ("!", "Ventricular flutter wave"),
    32: ("[", "Start of ventricular flutter/fibrillation"),
    33: ("]", "End of ventricular flutter/fibrillation"),
    34: ("e", "Atrial escape beat"),
    35: ("n", "Supraventricular escape beat"),
    36: ("@", "Link to external data"),
    37: ("x", "Non-conducted P-wave"),
    38: ("f", "Fusion of paced and normal beat"),
    39: ("(", "Waveform onset"),
    40: (")", "Waveform end"),
    41: ("r", "R-on-T premature ventricular contraction"),
}

# Коды сердечных сокращений, используемые в экспериментах
BEAT_CODES = frozenset({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 34, 38})

# Опубликованное число сокращений по кодам
REFERENCE_BEAT_COUNTS = {
    1: 75016, 2: 8072, 3: 7256, 5: 7130, 12: 7024,
    4: 150, 6: 803, 7: 83, 8: 2544, 9: 2, 10: 106, 11: 229, 13: 33, 34: 16, 38: 982,
}

# Опубликованные разбиения train/test по классам
REFERENCE_PARTITIONS = {
    "MITBIH5": {
        "train": {"N": 5980, "L": 6456, "R": 5688, "V": 5748, "Paced": 5744},
        "test": {"N": 1495, "L": 1614, "R": 1422, "V": 1437, "Paced": 1436},
    },
    "MITBIH6": {
        "train": {"N": 6000, "L": 6360, "R": 5788, "V": 5720, "Paced": 5536, "Other": 6500},
        "test": {"N": 1500, "L": 1590, "R": 1447, "V": 1430, "Paced": 1384, "Other": 1625},
    },
    "AAMI5": {
        "train": {"N": 7192, "S": 2168, "V": 5948, "F": 556, "Q": 6500},
        "test": {"N": 1798, "S": 542, "V": 1487, "F": 139, "Q": 1625},
    },
}

# Опубликованные итоговые результаты по схемам
REFERENCE_RESULTS = {
    "MITBIH5": {"accuracy": 0.9924, "sensitivity": 0.99, "f1": 0.99, "auc": 0.9994},
    "MITBIH6": {"accuracy": 0.9702, "sensitivity": 0.97, "f1": 0.97, "auc": 0.9966},
    "AAMI5": {"accuracy": 0.9745, "sensitivity": 0.97, "f1": 0.97, "auc": None},
}


def _coerce(name: str, raw: str, field_type) -> object:
    """Приведение строкового значения к типу поля конфигурации"""
    raw = raw.strip()
    origin = typing.get_origin(field_type)
    try:
        if origin in (list, List):
            (item_type,) = typing.get_args(field_type)
            return [item_type(item.strip()) for item in raw.split(",") if item.strip()]
        if field_type is bool:
            lowered = raw.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if field_type is int:
            return int(raw)
        if field_type is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"Неверное значение для {name}: {raw!r}") from None


def _format(value) -> str:
    """Строковое представление значения для файла конфигурации"""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, list):
        return ",".join(str(item) for item in value)
    return str(value)


def apply_overrides(config: ExperimentConfig, values: Dict[str, str]) -> ExperimentConfig:
    """
    Применяет строковые значения к конфигурации

    Args:
        config: Изменяемая конфигурация
        values: Пары ключ -> значение (ключи без учета регистра)

    Returns:
        ExperimentConfig: та же конфигурация
    """
    known = {f.name: f for f in fields(config)}
    for key, raw in values.items():
        name = key.strip().upper().replace("-", "_")
        if name not in known:
            raise ConfigError(f"Неизвестный параметр конфигурации: {key}")
        setattr(config, name, _coerce(name, raw, known[name].type))
    return config


def read_config_file(path: str) -> Dict[str, str]:
    """Чтение файла конфигурации формата key = value"""
    values = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_number}: ожидается key = value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def load_config_from_env(config: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Загружает конфигурацию из переменных окружения с теми же именами"""
    config = config or ExperimentConfig()
    env_values = {f.name: os.environ[f.name] for f in fields(config) if f.name in os.environ}
    return apply_overrides(config, env_values)


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """
    Собирает конфигурацию: значения по умолчанию < окружение < файл < флаги

    Args:
        path: Путь к файлу key = value (необязательно)
        overrides: Значения из командной строки

    Returns:
        ExperimentConfig: итоговая конфигурация
    """
    config = load_config_from_env()
    if path:
        apply_overrides(config, read_config_file(path))
    if overrides:
        apply_overrides(config, overrides)
    return config


def save_config_file(config: ExperimentConfig, path: str) -> None:
    """Сохранение конфигурации в файл key = value"""
    lines = ["# Конфигурация эксперимента R-R-R / 1D CNN"]
    lines += [f"{f.name} = {_format(getattr(config, f.name))}" for f in fields(config)]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


CONFIG_TEMPLATE = """# Конфигурация эксперимента классификации ЭКГ
# Любой параметр можно переопределить флагом командной строки (--data-dir ...)

# Данные
DATA_DIR = mitdb
RECORDS =
SCHEME = MITBIH5
CHANNEL = 0

# Сегментация и балансировка
WINDOW_LENGTH = 2700
BALANCE_FRACTION = 0.10
MAX_PER_CLASS = 0

# Воспроизводимость
SEED = 42
N_RUNS = 7

# Обучение
EPOCHS = 83
BATCH_SIZE = 64
EVAL_INTERVAL = 0
LEARNING_RATE = 0.0001
SELECT_ON_VALIDATION = false

# Результаты и логирование
OUTPUT_DIR = runs
LOG_LEVEL = INFO
"""

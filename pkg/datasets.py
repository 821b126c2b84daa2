# -*- coding: utf-8 -*-
"""
Схемы классов, балансировка нормальных сокращений, стратифицированное разбиение
80/20 и повторные разбиения для кросс-валидации
"""

import math
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from beats import BeatSegment
from config import REFERENCE_PARTITIONS

logger = logging.getLogger(__name__)

EXCLUDED = None
TRAIN_FRACTION = 0.8


class DatasetError(Exception):
    """Ошибка построения набора данных"""


@dataclass(frozen=True)
class LabelScheme:
    """Отображение кодов аннотаций MIT-BIH в индексы классов"""
    scheme_id: str
    class_names: Tuple[str, ...]
    mapping: Dict[int, int]
    excluded_records: FrozenSet[str] = frozenset()

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def _invert(groups: Sequence[Sequence[int]]) -> Dict[int, int]:
    return {code: index for index, codes in enumerate(groups) for code in codes}


SCHEMES = {
    "MITBIH5": LabelScheme(
        scheme_id="MITBIH5",
        class_names=("N", "L", "R", "V", "Paced"),
        mapping=_invert([[1], [2], [3], [5], [12]]),
    ),
    "MITBIH6": LabelScheme(
        scheme_id="MITBIH6",
        class_names=("N", "L", "R", "V", "Paced", "Other"),
        mapping=_invert([[1], [2], [3], [5], [12], [4, 6, 7, 8, 9, 10, 11, 13, 34, 38]]),
    ),
    "AAMI5": LabelScheme(
        scheme_id="AAMI5",
        class_names=("N", "S", "V", "F", "Q"),
        mapping=_invert([[1, 2, 3, 34, 11], [8, 4, 7, 9], [5, 10], [6], [12, 38, 13]]),
        excluded_records=frozenset({"102", "104", "107", "217"}),
    ),
}


def get_scheme(scheme_id: str) -> LabelScheme:
    """Схема по идентификатору"""
    try:
        return SCHEMES[scheme_id]
    except KeyError:
        raise DatasetError(f"Неизвестная схема классов: {scheme_id}") from None


@dataclass
class LabeledSegment:
    """Сегмент с индексом класса"""
    segment: BeatSegment
    class_index: int


@dataclass
class DatasetSplit:
    """Разбиение на обучающую и тестовую выборки"""
    train: List[LabeledSegment]
    test: List[LabeledSegment]
    seed: int
    scheme_id: str
    validation: List[LabeledSegment] = field(default_factory=list)


def map_label(code: int, scheme: LabelScheme) -> Optional[int]:
    """Индекс класса для кода аннотации или EXCLUDED"""
    return scheme.mapping.get(code, EXCLUDED)


def label_segments(segments: Sequence[BeatSegment], scheme: LabelScheme) -> List[LabeledSegment]:
    """Размечает сегменты, отбрасывая исключенные коды и записи"""
    labeled = []
    for segment in segments:
        if segment.record_name in scheme.excluded_records:
            continue
        class_index = map_label(segment.code, scheme)
        if class_index is EXCLUDED:
            continue
        labeled.append(LabeledSegment(segment=segment, class_index=class_index))
    return labeled


def class_counts(labeled: Sequence[LabeledSegment]) -> Counter:
    """Число сегментов по индексам классов"""
    return Counter(item.class_index for item in labeled)


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def balance_normals(
    labeled: Sequence[LabeledSegment],
    fraction: float = 0.10,
    seed: int = 0,
    normal_class: int = 0,
) -> List[LabeledSegment]:
    """
    Случайно прореживает нормальный класс без возвращения

    Args:
        labeled: Размеченные сегменты
        fraction: Доля сохраняемых нормальных сегментов (0, 1]
        seed: Зерно генератора
        normal_class: Индекс нормального класса

    Returns:
        List[LabeledSegment]: сегменты в исходном порядке, нормальных round(fraction * n)
    """
    if not 0 < fraction <= 1:
        raise DatasetError(f"Доля нормальных сокращений вне диапазона (0, 1]: {fraction}")

    normal_positions = [i for i, item in enumerate(labeled) if item.class_index == normal_class]
    keep_count = _round_half_up(fraction * len(normal_positions))
    rng = np.random.default_rng(seed)
    kept = set(rng.choice(normal_positions, size=keep_count, replace=False).tolist()) if keep_count else set()

    balanced = [
        item for i, item in enumerate(labeled)
        if item.class_index != normal_class or i in kept
    ]
    logger.info(f"Балансировка: оставлено {keep_count} из {len(normal_positions)} нормальных сегментов")
    return balanced


def cap_per_class(labeled: Sequence[LabeledSegment], max_per_class: int, seed: int = 0) -> List[LabeledSegment]:
    """Ограничивает число сегментов каждого класса (режим подмножества)"""
    if max_per_class <= 0:
        return list(labeled)
    rng = np.random.default_rng(seed)
    kept = set()
    by_class: Dict[int, List[int]] = {}
    for i, item in enumerate(labeled):
        by_class.setdefault(item.class_index, []).append(i)
    for class_index in sorted(by_class):
        positions = by_class[class_index]
        if len(positions) > max_per_class:
            positions = rng.choice(positions, size=max_per_class, replace=False).tolist()
        kept.update(positions)
    return [item for i, item in enumerate(labeled) if i in kept]


def check_reference_availability(labeled: Sequence[LabeledSegment], scheme: LabelScheme) -> List[str]:
    """Сравнивает доступные сегменты с опубликованными размерами разбиений"""
    reference = REFERENCE_PARTITIONS.get(scheme.scheme_id)
    if not reference:
        return []
    counts = class_counts(labeled)
    warnings = []
    for class_index, name in enumerate(scheme.class_names):
        published = reference["train"].get(name, 0) + reference["test"].get(name, 0)
        if published > counts.get(class_index, 0):
            message = (
                f"Класс {name}: опубликовано {published} сегментов, доступно {counts.get(class_index, 0)}; "
                f"используются все доступные"
            )
            logger.warning(message)
            warnings.append(message)
    return warnings


def _class_label(class_index: int, scheme_id: str) -> str:
    """Имя класса по схеме, если она известна, иначе номер"""
    if scheme_id in SCHEMES and class_index < SCHEMES[scheme_id].n_classes:
        return SCHEMES[scheme_id].class_names[class_index]
    return str(class_index)


def _stratified_partition(
    labeled: Sequence[LabeledSegment],
    fraction: float,
    rng: np.random.Generator,
    scheme_id: str = "",
) -> Tuple[List[LabeledSegment], List[LabeledSegment]]:
    """Разбиение каждого класса: ceil(fraction * n) в первую часть, хотя бы один во вторую"""
    by_class: Dict[int, List[int]] = {}
    for i, item in enumerate(labeled):
        by_class.setdefault(item.class_index, []).append(i)

    first, second = [], []
    for class_index in sorted(by_class):
        positions = by_class[class_index]
        if len(positions) < 2:
            raise DatasetError(
                f"В классе {_class_label(class_index, scheme_id)} меньше двух сегментов, разбиение невозможно"
            )
        n_first = min(math.ceil(len(positions) * fraction - 1e-9), len(positions) - 1)
        order = rng.permutation(len(positions))
        first.extend(labeled[positions[j]] for j in order[:n_first])
        second.extend(labeled[positions[j]] for j in order[n_first:])
    return first, second


def split_80_20(labeled: Sequence[LabeledSegment], seed: int, scheme_id: str = "") -> DatasetSplit:
    """
    Стратифицированное разбиение 80/20 с округлением в пользу обучающей выборки

    Args:
        labeled: Размеченные сегменты
        seed: Зерно генератора
        scheme_id: Идентификатор схемы классов

    Returns:
        DatasetSplit: непересекающиеся train/test
    """
    if not labeled:
        raise DatasetError("Пустой набор сегментов")
    rng = np.random.default_rng(seed)
    train, test = _stratified_partition(labeled, TRAIN_FRACTION, rng, scheme_id)
    return DatasetSplit(train=train, test=test, seed=seed, scheme_id=scheme_id)


def make_cv_runs(
    labeled: Sequence[LabeledSegment],
    n_runs: int = 7,
    seed: int = 0,
    scheme_id: str = "",
) -> List[DatasetSplit]:
    """Повторные стратифицированные разбиения 80/20 с зернами seed + номер запуска"""
    if n_runs < 1:
        raise DatasetError("Число запусков должно быть >= 1")
    return [split_80_20(labeled, seed=seed + run, scheme_id=scheme_id) for run in range(n_runs)]


def carve_validation(split: DatasetSplit, fraction: float, seed: int) -> DatasetSplit:
    """Выделяет из обучающей выборки стратифицированную валидационную часть"""
    if not 0 < fraction < 1:
        raise DatasetError(f"Доля валидации вне диапазона (0, 1): {fraction}")
    rng = np.random.default_rng(seed)
    validation, train = _stratified_partition(split.train, fraction, rng, split.scheme_id)
    return DatasetSplit(
        train=train, test=split.test, seed=split.seed, scheme_id=split.scheme_id, validation=validation
    )


def write_manifest(split: DatasetSplit, path: str) -> None:
    """Манифест: record_name,r_index,code,class_index,partition"""
    with open(path, "w", encoding="utf-8") as f:
        for partition, items in (("train", split.train), ("validation", split.validation), ("test", split.test)):
            for item in items:
                segment = item.segment
                f.write(f"{segment.record_name},{segment.r_index},{segment.code},{item.class_index},{partition}\n")


@dataclass
class ManifestEntry:
    """Строка манифеста"""
    record_name: str
    r_index: int
    code: int
    class_index: int
    partition: str


def read_manifest(path: str) -> List[ManifestEntry]:
    """Чтение манифеста разбиения"""
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise DatasetError(f"{path}:{line_number}: ожидается 5 полей")
            entries.append(ManifestEntry(parts[0], int(parts[1]), int(parts[2]), int(parts[3]), parts[4]))
    return entries

# -*- coding: utf-8 -*-
"""
Метрики качества классификации: матрица ошибок, precision / sensitivity / F1,
ROC-кривые "один против всех", AUC и качественная оценка AUC
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"

# Нижние границы диапазонов AUC (нижняя граница включительно, 1.0 - отдельно)
AUC_GRADES = [
    (0.90, "Excellent"),
    (0.80, "Good"),
    (0.70, "Medium"),
    (0.60, "Poor"),
    (0.50, "Failure"),
]


class MetricsError(ValueError):
    """Некорректные входные данные для метрик"""


class UndefinedAucError(MetricsError):
    """Для класса нет положительных или отрицательных примеров"""


@dataclass
class ConfusionMatrix:
    """Строки - истинный класс, столбцы - предсказанный"""
    counts: np.ndarray
    class_names: Tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    @property
    def probabilities(self) -> np.ndarray:
        """Матрица, нормированная по строкам (пустые строки - нули)"""
        rows = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)


@dataclass
class ClassMetrics:
    """Метрики по классам и их макро-средние"""
    class_names: Tuple[str, ...]
    precision: np.ndarray
    sensitivity: np.ndarray
    f1: np.ndarray
    precision_undefined: np.ndarray
    sensitivity_undefined: np.ndarray
    f1_undefined: np.ndarray
    accuracy: float

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def macro_sensitivity(self) -> float:
        return float(self.sensitivity.mean())

    @property
    def macro_f1(self) -> float:
        return float(self.f1.mean())


@dataclass(frozen=True)
class AucGrade:
    label: str
    worse_than_chance: bool = False


@dataclass
class RocCurve:
    """ROC-кривая одного класса"""
    class_index: int
    class_name: str
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def grade(self) -> AucGrade:
        return auc_grade(self.auc)


def _default_names(n_classes: int) -> Tuple[str, ...]:
    return tuple(str(index) for index in range(n_classes))


def confusion(
    actual: Sequence[int],
    predicted: Sequence[int],
    n_classes: int,
    class_names: Optional[Sequence[str]] = None,
) -> ConfusionMatrix:
    """
    Строит матрицу ошибок

    Args:
        actual: Истинные индексы классов
        predicted: Предсказанные индексы классов
        n_classes: Число классов K
        class_names: Имена классов

    Returns:
        ConfusionMatrix: K x K счетчики
    """
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.shape != predicted.shape:
        raise MetricsError(f"Длины actual ({actual.size}) и predicted ({predicted.size}) не совпадают")
    for name, values in (("actual", actual), ("predicted", predicted)):
        if values.size and (values.min() < 0 or values.max() >= n_classes):
            raise MetricsError(f"{name}: индексы классов вне [0, {n_classes})")

    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (actual, predicted), 1)
    names = tuple(class_names) if class_names is not None else _default_names(n_classes)
    return ConfusionMatrix(counts=counts, class_names=names)


def _safe_ratio(numerator: np.ndarray, denominator: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    undefined = denominator == 0
    values = np.divide(numerator, denominator, out=np.zeros(numerator.shape), where=~undefined)
    return values, undefined


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    """
    Precision = TP/(TP+FP), Sensitivity = TP/(TP+FN), F1 = 2TP/(2TP+FP+FN).
    Нулевой знаменатель дает 0 и флаг неопределенности
    """
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp

    precision, precision_undefined = _safe_ratio(tp, tp + fp)
    sensitivity, sensitivity_undefined = _safe_ratio(tp, tp + fn)
    f1, f1_undefined = _safe_ratio(2 * tp, 2 * tp + fp + fn)
    return ClassMetrics(
        class_names=cm.class_names,
        precision=precision,
        sensitivity=sensitivity,
        f1=f1,
        precision_undefined=precision_undefined,
        sensitivity_undefined=sensitivity_undefined,
        f1_undefined=f1_undefined,
        accuracy=cm.accuracy,
    )


def roc_auc(
    scores: np.ndarray,
    actual: Sequence[int],
    class_index: int,
    class_name: Optional[str] = None,
) -> RocCurve:
    """
    ROC "один против всех" по вероятности класса; одинаковые оценки
    объединяются в один порог, AUC - методом трапеций

    Args:
        scores: Вероятности (N, K)
        actual: Истинные индексы классов
        class_index: Положительный класс
        class_name: Имя класса для отчета

    Returns:
        RocCurve: точки (fpr, tpr) от (0, 0) до (1, 1) и AUC
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(actual) == class_index
    n_positive = int(positives.sum())
    n_negative = int(positives.size - n_positive)
    if n_positive == 0 or n_negative == 0:
        raise UndefinedAucError(
            f"Класс {class_index}: нужен хотя бы один положительный и один отрицательный пример"
        )

    class_scores = scores[:, class_index]
    order = np.argsort(-class_scores, kind="mergesort")
    sorted_scores = class_scores[order]
    sorted_positives = positives[order]

    group_ends = np.r_[np.nonzero(np.diff(sorted_scores))[0], sorted_scores.size - 1]
    true_positives = np.cumsum(sorted_positives)[group_ends]
    false_positives = group_ends + 1 - true_positives

    tpr = np.r_[0.0, true_positives / n_positive]
    fpr = np.r_[0.0, false_positives / n_negative]
    thresholds = np.r_[np.inf, sorted_scores[group_ends]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(
        class_index=class_index,
        class_name=class_name if class_name is not None else str(class_index),
        thresholds=thresholds,
        fpr=fpr,
        tpr=tpr,
        auc=auc,
    )


def auc_grade(auc: float) -> AucGrade:
    """Качественная оценка AUC (1.0 - Perfect, ниже 0.5 - Failure хуже случайного)"""
    if not 0.0 <= auc <= 1.0:
        raise MetricsError(f"AUC вне [0, 1]: {auc}")
    if auc == 1.0:
        return AucGrade("Perfect")
    for lower, label in AUC_GRADES:
        if auc >= lower:
            return AucGrade(label)
    return AucGrade("Failure", worse_than_chance=True)


def roc_curves(scores: np.ndarray, actual: Sequence[int], class_names: Sequence[str]) -> List[RocCurve]:
    """ROC-кривые всех классов; классы без положительных примеров пропускаются с предупреждением"""
    curves = []
    for class_index, name in enumerate(class_names):
        try:
            curves.append(roc_auc(scores, actual, class_index, name))
        except UndefinedAucError as e:
            logger.warning(f"AUC не определен: {e}")
    return curves


def macro_auc(curves: Sequence[RocCurve]) -> Optional[float]:
    return float(np.mean([curve.auc for curve in curves])) if curves else None


def summary_row(metrics: ClassMetrics, curves: Sequence[RocCurve]) -> Dict[str, Optional[float]]:
    """Итоговая строка в разрезе, сопоставимом с опубликованными таблицами"""
    return {
        "accuracy": metrics.accuracy,
        "precision": metrics.macro_precision,
        "sensitivity": metrics.macro_sensitivity,
        "f1": metrics.macro_f1,
        "auc": macro_auc(curves),
    }


def write_confusion_csv(cm: ConfusionMatrix, path: str, normalized: bool = False) -> None:
    """Матрица ошибок (счетчики или вероятности по строкам)"""
    values = cm.probabilities if normalized else cm.counts
    frame = pd.DataFrame(values, index=list(cm.class_names), columns=list(cm.class_names))
    frame.index.name = "actual"
    frame.to_csv(path, float_format=FLOAT_FORMAT)


def write_class_metrics_csv(metrics: ClassMetrics, curves: Sequence[RocCurve], path: str) -> None:
    """Таблица по классам и строка Average (макро-средние)"""
    aucs = {curve.class_index: curve for curve in curves}
    rows = []
    for index, name in enumerate(metrics.class_names):
        curve = aucs.get(index)
        rows.append({
            "class": name,
            "precision": metrics.precision[index],
            "sensitivity": metrics.sensitivity[index],
            "f1": metrics.f1[index],
            "auc": curve.auc if curve else np.nan,
            "grade": curve.grade.label if curve else "",
            "undefined": bool(
                metrics.precision_undefined[index] or metrics.sensitivity_undefined[index]
                or metrics.f1_undefined[index]
            ),
        })
    mean_auc = macro_auc(curves)
    rows.append({
        "class": "Average",
        "precision": metrics.macro_precision,
        "sensitivity": metrics.macro_sensitivity,
        "f1": metrics.macro_f1,
        "auc": mean_auc if mean_auc is not None else np.nan,
        "grade": auc_grade(mean_auc).label if mean_auc is not None else "",
        "undefined": False,
    })
    pd.DataFrame(rows).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def write_roc_csv(curve: RocCurve, path: str) -> None:
    """Точки ROC-кривой: threshold, fpr, tpr"""
    frame = pd.DataFrame({"threshold": curve.thresholds, "fpr": curve.fpr, "tpr": curve.tpr})
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)

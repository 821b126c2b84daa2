# -*- coding: utf-8 -*-
"""
Основной модуль эксперимента: загрузка записей, перепись сокращений,
кросс-валидация 1D CNN и отчеты
"""

import os
import hashlib
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from beats import BeatSegment, SpanCensus, extract_rrr_segments, max_span_census
from config import (
    ANNOTATION_CODES,
    MITBIH_RECORDS,
    REFERENCE_BEAT_COUNTS,
    REFERENCE_RESULTS,
    ExperimentConfig,
    save_config_file,
)
from database import ExperimentDatabase, RunRecord
from datasets import (
    SCHEMES,
    DatasetError,
    DatasetSplit,
    LabeledSegment,
    LabelScheme,
    balance_normals,
    cap_per_class,
    carve_validation,
    check_reference_availability,
    get_scheme,
    label_segments,
    make_cv_runs,
    map_label,
    read_manifest,
    write_manifest,
)
from metrics import (
    FLOAT_FORMAT,
    class_metrics,
    confusion,
    roc_curves,
    summary_row,
    write_class_metrics_csv,
    write_confusion_csv,
    write_roc_csv,
)
from tensornet import (
    Evaluation,
    Model,
    TrainConfig,
    TrainingDivergedError,
    TrainLogEntry,
    build_model,
    evaluate,
    load_weights,
    save_weights,
    train,
)
from wfdb_reader import Record, beat_census, list_records, load_record

SUMMARY_METRICS = ("accuracy", "precision", "sensitivity", "f1", "auc")
RUN_INDEX_FILE = "run_index.txt"
CHECKPOINT_FILE = "checkpoint.bin"
MANIFEST_FILE = "manifest.txt"


class MissingRecordsError(Exception):
    """В каталоге данных нет записей, нужных для полного воспроизведения"""

    def __init__(self, missing: Sequence[str]):
        super().__init__(f"Отсутствуют записи: {', '.join(missing)}")
        self.missing = list(missing)


@dataclass
class CensusReport:
    """Перепись сокращений"""
    beat_counts: Counter
    scheme_counts: Dict[str, Dict[str, int]]
    span: SpanCensus
    n_records: int
    files: List[str] = field(default_factory=list)


@dataclass
class RunOutcome:
    """Итог одного запуска кросс-валидации"""
    run_index: int
    seed: int
    status: str
    run_dir: str
    summary: Dict[str, Optional[float]] = field(default_factory=dict)
    best_step: int = 0
    error: Optional[str] = None


@dataclass
class ExperimentReport:
    """Итог эксперимента"""
    experiment: str
    experiment_dir: str
    runs: List[RunOutcome]
    aggregate_path: str
    index_path: str

    @property
    def failed_runs(self) -> List[RunOutcome]:
        return [run for run in self.runs if run.status == "failed"]


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_training_log(log: Sequence[TrainLogEntry], path: str) -> None:
    """Журнал обучения: кривые потерь и точности"""
    columns = [f for f in TrainLogEntry.__dataclass_fields__]
    frame = pd.DataFrame([asdict(entry) for entry in log], columns=columns)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def write_evaluation_reports(
    actual: np.ndarray,
    evaluation: Evaluation,
    scheme: LabelScheme,
    output_dir: str,
) -> Tuple[Dict[str, Optional[float]], List[str]]:
    """
    Пишет матрицу ошибок, метрики по классам и ROC-кривые

    Args:
        actual: Истинные индексы классов
        evaluation: Предсказания модели
        scheme: Схема классов
        output_dir: Каталог для CSV

    Returns:
        Tuple: итоговая строка метрик и список записанных файлов
    """
    os.makedirs(output_dir, exist_ok=True)
    cm = confusion(actual, evaluation.predictions, scheme.n_classes, scheme.class_names)
    metrics = class_metrics(cm)
    curves = roc_curves(evaluation.probabilities, actual, scheme.class_names)

    files = []
    path = os.path.join(output_dir, "confusion_counts.csv")
    write_confusion_csv(cm, path)
    files.append(path)
    path = os.path.join(output_dir, "confusion_probabilities.csv")
    write_confusion_csv(cm, path, normalized=True)
    files.append(path)
    path = os.path.join(output_dir, "class_metrics.csv")
    write_class_metrics_csv(metrics, curves, path)
    files.append(path)
    for curve in curves:
        path = os.path.join(output_dir, f"roc_{curve.class_name}.csv")
        write_roc_csv(curve, path)
        files.append(path)
    return summary_row(metrics, curves), files


class ExperimentRunner:
    """Запуск эксперимента по конфигурации"""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.logger = logging.getLogger(__name__)
        self._database: Optional[ExperimentDatabase] = None

    @property
    def experiment_name(self) -> str:
        return f"{self.config.SCHEME}_seed{self.config.SEED}"

    @property
    def experiment_dir(self) -> str:
        return os.path.join(self.config.OUTPUT_DIR, self.experiment_name)

    @property
    def database(self) -> ExperimentDatabase:
        if self._database is None:
            os.makedirs(self.config.OUTPUT_DIR, exist_ok=True)
            self._database = ExperimentDatabase(os.path.join(self.config.OUTPUT_DIR, self.config.DATABASE_FILE))
        return self._database

    def setup_logging(self):
        """Настройка логирования"""
        log_format = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

        root_logger = logging.getLogger()
        root_logger.setLevel(getattr(logging, self.config.LOG_LEVEL.upper()))
        root_logger.handlers.clear()

        if self.config.LOG_TO_CONSOLE:
            console_handler = logging.StreamHandler()
            console_handler.setFormatter(logging.Formatter(log_format))
            root_logger.addHandler(console_handler)

        if self.config.LOG_TO_FILE:
            os.makedirs(self.config.OUTPUT_DIR, exist_ok=True)
            file_handler = logging.FileHandler(
                os.path.join(self.config.OUTPUT_DIR, self.config.LOG_FILE), encoding='utf-8'
            )
            file_handler.setFormatter(logging.Formatter(log_format))
            root_logger.addHandler(file_handler)

    # ------------------------------------------------------------------
    # Данные
    # ------------------------------------------------------------------

    def load_records(self, names: Optional[Sequence[str]] = None) -> List[Record]:
        """
        Загружает записи из DATA_DIR

        В режиме полного воспроизведения отсутствие любой из 48 записей - ошибка,
        в режиме подмножества отсутствующие записи пропускаются с предупреждением
        """
        self.config.validate(check_paths=True)
        wanted = list(names or self.config.RECORDS or MITBIH_RECORDS)
        available = set(list_records(self.config.DATA_DIR))
        missing = [name for name in wanted if name not in available]
        if missing:
            if not self.config.subset_mode and names is None:
                raise MissingRecordsError(missing)
            self.logger.warning(f"Пропущены отсутствующие записи: {', '.join(missing)}")

        records = [load_record(self.config.DATA_DIR, name) for name in wanted if name in available]
        if not records:
            raise MissingRecordsError(wanted)
        return records

    def segment_records(self, records: Sequence[Record]) -> List[BeatSegment]:
        """R-R-R сегменты всех записей по каналу CHANNEL"""
        segments = []
        for record in records:
            channel = record.physical_channel(self.config.CHANNEL)
            segments.extend(extract_rrr_segments(
                channel, record.beat_events(), self.config.WINDOW_LENGTH, record.name
            ))
        self.logger.info(f"Получено {len(segments)} сегментов из {len(records)} записей")
        return segments

    def build_labeled(self, records: Sequence[Record], scheme: LabelScheme) -> List[LabeledSegment]:
        """Разметка, балансировка нормального класса и ограничение классов"""
        labeled = label_segments(self.segment_records(records), scheme)
        if not self.config.subset_mode:
            check_reference_availability(labeled, scheme)
        labeled = balance_normals(labeled, self.config.BALANCE_FRACTION, seed=self.config.SEED)
        labeled = cap_per_class(labeled, self.config.MAX_PER_CLASS, seed=self.config.SEED)

        counts = Counter(item.class_index for item in labeled)
        summary = ", ".join(f"{name}={counts.get(i, 0)}" for i, name in enumerate(scheme.class_names))
        self.logger.info(f"Набор {scheme.scheme_id}: {summary}")
        return labeled

    def build_model(self, n_classes: int, seed: int) -> Model:
        return build_model(
            n_classes,
            input_length=self.config.WINDOW_LENGTH,
            kernel_sizes=self.config.CONV_KERNELS,
            channels=self.config.CONV_CHANNELS,
            pool_size=self.config.POOL_SIZE,
            seed=seed,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.config.EPOCHS,
            batch_size=self.config.BATCH_SIZE,
            eval_interval=self.config.EVAL_INTERVAL,
            learning_rate=self.config.LEARNING_RATE,
            lr_decay_factor=self.config.LR_DECAY_FACTOR,
            lr_patience=self.config.LR_PATIENCE,
            lr_floor=self.config.LR_FLOOR,
            seed=seed,
            select_on_validation=self.config.SELECT_ON_VALIDATION,
            validation_fraction=self.config.VALIDATION_FRACTION,
        )

    # ------------------------------------------------------------------
    # Перепись
    # ------------------------------------------------------------------

    def census(self, records: Optional[Sequence[Record]] = None, output_dir: Optional[str] = None) -> CensusReport:
        """
        Перепись сокращений: число по кодам, по классам каждой схемы,
        гистограмма длин R-R-R и максимум

        Args:
            records: Уже загруженные записи (по умолчанию - из DATA_DIR)
            output_dir: Каталог для CSV (по умолчанию OUTPUT_DIR/census)

        Returns:
            CensusReport: сводка и пути к файлам
        """
        records = list(records) if records is not None else self.load_records()
        output_dir = output_dir or os.path.join(self.config.OUTPUT_DIR, "census")
        os.makedirs(output_dir, exist_ok=True)

        counts = beat_census(records)
        total = sum(counts.values())
        code_rows = []
        for code in sorted(counts):
            symbol, description = ANNOTATION_CODES.get(code, ("?", ""))
            reference = REFERENCE_BEAT_COUNTS.get(code)
            code_rows.append({
                "code": code,
                "symbol": symbol,
                "description": description,
                "count": counts[code],
                "share": counts[code] / total if total else 0.0,
                "reference": reference,
                "deviation": (counts[code] - reference) / reference if reference else np.nan,
            })

        scheme_counts: Dict[str, Dict[str, int]] = {}
        class_rows = []
        for scheme_id, scheme in SCHEMES.items():
            per_class = Counter()
            for record in records:
                if record.name in scheme.excluded_records:
                    continue
                for _, code in record.beat_events():
                    class_index = map_label(code, scheme)
                    if class_index is not None:
                        per_class[scheme.class_names[class_index]] += 1
            scheme_counts[scheme_id] = {name: per_class.get(name, 0) for name in scheme.class_names}
            class_rows += [
                {"scheme": scheme_id, "class": name, "count": count}
                for name, count in scheme_counts[scheme_id].items()
            ]

        span = max_span_census(
            ([sample for sample, _ in record.beat_events()] for record in records),
            self.config.WINDOW_LENGTH,
        )

        files = [
            os.path.join(output_dir, "census_codes.csv"),
            os.path.join(output_dir, "census_classes.csv"),
            os.path.join(output_dir, "span_histogram.csv"),
            os.path.join(output_dir, "span_summary.csv"),
        ]
        code_columns = ["code", "symbol", "description", "count", "share", "reference", "deviation"]
        pd.DataFrame(code_rows, columns=code_columns).to_csv(files[0], index=False, float_format=FLOAT_FORMAT)
        pd.DataFrame(class_rows, columns=["scheme", "class", "count"]).to_csv(files[1], index=False)
        pd.DataFrame(span.histogram, columns=["bin_start", "count"]).to_csv(files[2], index=False)
        pd.DataFrame([{
            "max_span": span.max_span,
            "n_beats": span.n_beats,
            "window_length": self.config.WINDOW_LENGTH,
            "n_over_window": span.n_over_window,
            "fraction_over_window": span.fraction_over_window,
        }]).to_csv(files[3], index=False, float_format=FLOAT_FORMAT)

        self.logger.info(
            f"Перепись: {len(records)} записей, {total} сокращений, максимальный R-R-R {span.max_span}, "
            f"длиннее окна {span.n_over_window}"
        )
        return CensusReport(
            beat_counts=counts, scheme_counts=scheme_counts, span=span, n_records=len(records), files=files
        )

    # ------------------------------------------------------------------
    # Обучение
    # ------------------------------------------------------------------

    def run_experiment(self, records: Optional[Sequence[Record]] = None) -> ExperimentReport:
        """
        Полный эксперимент: N_RUNS стратифицированных разбиений 80/20, обучение,
        оценка, агрегированный отчет и индекс артефактов

        Returns:
            ExperimentReport: итоги запусков и пути к сводным файлам
        """
        scheme = get_scheme(self.config.SCHEME)
        records = list(records) if records is not None else self.load_records()
        labeled = self.build_labeled(records, scheme)
        splits = make_cv_runs(labeled, self.config.N_RUNS, self.config.SEED, scheme.scheme_id)

        os.makedirs(self.experiment_dir, exist_ok=True)
        config_path = os.path.join(self.experiment_dir, "experiment.cfg")
        save_config_file(self.config, config_path)
        self.database.delete_experiment(self.experiment_name)

        outcomes = []
        for run_index, split in enumerate(splits):
            self.logger.info(f"Запуск {run_index + 1}/{len(splits)} (seed={split.seed})")
            outcomes.append(self._run_single(run_index, split, scheme))

        aggregate_path = self.report()
        self.database.add_artifact(self.experiment_name, None, "config", config_path, file_sha256(config_path))
        self.database.add_artifact(self.experiment_name, None, "aggregate", aggregate_path, file_sha256(aggregate_path))
        index_path = self.write_run_index()

        failed = [run for run in outcomes if run.status == "failed"]
        if failed:
            self.logger.error(f"Неудачных запусков: {len(failed)} из {len(outcomes)}")
        return ExperimentReport(
            experiment=self.experiment_name,
            experiment_dir=self.experiment_dir,
            runs=outcomes,
            aggregate_path=aggregate_path,
            index_path=index_path,
        )

    def _run_single(self, run_index: int, split: DatasetSplit, scheme: LabelScheme) -> RunOutcome:
        """Один запуск: обучение, чекпоинт, отчеты"""
        seed = self.config.SEED + run_index
        run_dir = os.path.join(self.experiment_dir, f"run_{run_index}")
        os.makedirs(run_dir, exist_ok=True)
        run_id = self.database.start_run(self.experiment_name, scheme.scheme_id, run_index, seed)

        if self.config.SELECT_ON_VALIDATION:
            split = carve_validation(split, self.config.VALIDATION_FRACTION, seed)
        files = [os.path.join(run_dir, MANIFEST_FILE)]
        write_manifest(split, files[0])

        model = self.build_model(scheme.n_classes, seed)
        log_path = os.path.join(run_dir, "training_log.csv")
        try:
            result = train(model, split, self.train_config(seed))
        except TrainingDivergedError as e:
            write_training_log(e.log, log_path)
            self.database.add_log_entries(run_id, e.log)
            self.database.fail_run(run_id, str(e))
            self.logger.error(f"Запуск {run_index} прерван: {e}")
            return RunOutcome(run_index, seed, "failed", run_dir, error=str(e))

        write_training_log(result.log, log_path)
        files.append(log_path)
        checkpoint_path = os.path.join(run_dir, CHECKPOINT_FILE)
        save_weights(model, checkpoint_path, result.optimizer)
        files.append(checkpoint_path)

        actual = np.array([item.class_index for item in split.test], dtype=np.int64)
        summary, report_files = write_evaluation_reports(actual, evaluate(model, split.test), scheme, run_dir)
        files += report_files

        self.database.add_log_entries(run_id, result.log)
        self.database.finish_run(run_id, summary, result.best_step, checkpoint_path)
        for path in files:
            self.database.add_artifact(self.experiment_name, run_id, _artifact_kind(path), path, file_sha256(path))

        self.logger.info(
            f"Запуск {run_index}: accuracy={summary['accuracy']:.4f}, f1={summary['f1']:.4f}"
        )
        return RunOutcome(run_index, seed, "completed", run_dir, summary=summary, best_step=result.best_step)

    # ------------------------------------------------------------------
    # Оценка и отчеты
    # ------------------------------------------------------------------

    def evaluate_checkpoint(
        self,
        checkpoint_path: str,
        manifest_path: str,
        output_dir: Optional[str] = None,
        partition: str = "test",
    ) -> Dict[str, Optional[float]]:
        """
        Повторная оценка сохраненного чекпоинта на выборке из манифеста

        Args:
            checkpoint_path: Файл чекпоинта
            manifest_path: Манифест разбиения
            output_dir: Каталог для CSV (по умолчанию рядом с чекпоинтом, evaluation/)
            partition: Какая часть манифеста оценивается

        Returns:
            Dict: accuracy и макро-средние метрики
        """
        scheme = get_scheme(self.config.SCHEME)
        entries = [entry for entry in read_manifest(manifest_path) if entry.partition == partition]
        if not entries:
            raise DatasetError(f"В манифесте {manifest_path} нет сегментов части {partition}")

        records = self.load_records(sorted({entry.record_name for entry in entries}))
        by_key = {segment.key: segment for segment in self.segment_records(records)}
        missing = [entry for entry in entries if (entry.record_name, entry.r_index) not in by_key]
        if missing:
            raise DatasetError(
                f"{len(missing)} сегментов манифеста не найдены, например {missing[0].record_name}:{missing[0].r_index}"
            )

        segments = [by_key[(entry.record_name, entry.r_index)] for entry in entries]
        actual = np.array([entry.class_index for entry in entries], dtype=np.int64)

        model = self.build_model(scheme.n_classes, seed=0)
        load_weights(model, checkpoint_path)
        output_dir = output_dir or os.path.join(os.path.dirname(checkpoint_path), "evaluation")
        summary, _ = write_evaluation_reports(actual, evaluate(model, segments), scheme, output_dir)
        self.logger.info(f"Оценка {checkpoint_path}: accuracy={summary['accuracy']:.4f}")
        return summary

    def report(self, experiment: Optional[str] = None) -> str:
        """
        Агрегирует завершенные запуски эксперимента из базы: среднее и
        стандартное отклонение рядом с опубликованными значениями

        Returns:
            str: путь к aggregate.csv
        """
        experiment = experiment or self.experiment_name
        runs = self.database.get_runs(experiment, status="completed")
        experiment_dir = os.path.join(self.config.OUTPUT_DIR, experiment)
        os.makedirs(experiment_dir, exist_ok=True)
        path = os.path.join(experiment_dir, "aggregate.csv")
        aggregate_frame(runs).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        self.logger.info(f"Сводный отчет {experiment}: {len(runs)} завершенных запусков -> {path}")
        return path

    def write_run_index(self) -> str:
        """Текстовый индекс артефактов: sha256 и путь относительно каталога эксперимента"""
        artifacts = self.database.get_artifacts(self.experiment_name)
        path = os.path.join(self.experiment_dir, RUN_INDEX_FILE)
        lines = []
        for artifact in artifacts:
            relative = os.path.relpath(artifact.path, self.experiment_dir)
            if relative.startswith(".."):
                continue
            lines.append(f"{artifact.sha256}  {relative.replace(os.sep, '/')}")
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        return path


def _artifact_kind(path: str) -> str:
    name = os.path.basename(path)
    if name == CHECKPOINT_FILE:
        return "checkpoint"
    if name == MANIFEST_FILE:
        return "manifest"
    if name.startswith("roc_"):
        return "roc"
    return os.path.splitext(name)[0]


def aggregate_frame(runs: Sequence[RunRecord]) -> pd.DataFrame:
    """Среднее +- стандартное отклонение метрик по запускам и опубликованные значения"""
    scheme_id = runs[0].scheme if runs else None
    reference = REFERENCE_RESULTS.get(scheme_id, {})
    columns = {
        "accuracy": [run.accuracy for run in runs],
        "precision": [run.macro_precision for run in runs],
        "sensitivity": [run.macro_sensitivity for run in runs],
        "f1": [run.macro_f1 for run in runs],
        "auc": [run.macro_auc for run in runs],
    }
    rows = []
    for metric in SUMMARY_METRICS:
        values = np.array([v for v in columns[metric] if v is not None], dtype=np.float64)
        rows.append({
            "metric": metric,
            "mean": float(values.mean()) if values.size else np.nan,
            "std": float(values.std()) if values.size else np.nan,
            "n_runs": int(values.size),
            "reference": reference[metric] if reference.get(metric) is not None else np.nan,
        })
    return pd.DataFrame(rows, columns=["metric", "mean", "std", "n_runs", "reference"])


def read_run_index(path: str) -> List[Tuple[str, str]]:
    """Строки индекса артефактов: (sha256, относительный путь)"""
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                digest, relative = line.split("  ", 1)
                entries.append((digest, relative))
    return entries

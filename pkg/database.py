# -*- coding: utf-8 -*-
"""
База данных экспериментов: запуски, журналы обучения, артефакты
"""

import os
import sqlite3
import logging
from datetime import datetime
from typing import Dict, List, Optional
from dataclasses import dataclass


@dataclass
class RunRecord:
    """Модель запуска"""
    id: Optional[int] = None
    experiment: str = None
    scheme: str = None
    run_index: int = 0
    seed: int = 0
    status: str = "running"  # running, completed, failed
    accuracy: Optional[float] = None
    macro_precision: Optional[float] = None
    macro_sensitivity: Optional[float] = None
    macro_f1: Optional[float] = None
    macro_auc: Optional[float] = None
    best_step: Optional[int] = None
    checkpoint_path: Optional[str] = None
    error: Optional[str] = None
    created_at: datetime = None
    finished_at: datetime = None


@dataclass
class Artifact:
    """Модель артефакта запуска"""
    id: Optional[int] = None
    experiment: str = None
    run_id: Optional[int] = None
    kind: str = None
    path: str = None
    sha256: str = None


class ExperimentDatabase:
    """Класс для работы с базой данных экспериментов"""

    def __init__(self, db_path: str):
        self.db_path = db_path
        self.logger = logging.getLogger(__name__)
        self.init_database()

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        return conn

    def init_database(self):
        """Инициализация базы данных и создание таблиц"""
        db_existed_before = os.path.exists(self.db_path)
        try:
            with self._connect() as conn:
                cursor = conn.cursor()

                # Таблица запусков
                cursor.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    experiment TEXT NOT NULL,
                    scheme TEXT NOT NULL,
                    run_index INTEGER NOT NULL,
                    seed INTEGER NOT NULL,
                    status TEXT DEFAULT 'running',
                    accuracy REAL,
                    macro_precision REAL,
                    macro_sensitivity REAL,
                    macro_f1 REAL,
                    macro_auc REAL,
                    best_step INTEGER,
                    checkpoint_path TEXT,
                    error TEXT,
                    created_at DATETIME DEFAULT CURRENT_TIMESTAMP,
                    finished_at DATETIME
                )
                """)

                # Журнал обучения
                cursor.execute("""
                CREATE TABLE IF NOT EXISTS training_log (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER NOT NULL,
                    step INTEGER NOT NULL,
                    epoch INTEGER NOT NULL,
                    loss REAL,
                    train_accuracy REAL,
                    eval_loss REAL,
                    eval_accuracy REAL,
                    learning_rate REAL,
                    FOREIGN KEY (run_id) REFERENCES runs (id)
                )
                """)

                # Артефакты
                cursor.execute("""
                CREATE TABLE IF NOT EXISTS artifacts (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    experiment TEXT NOT NULL,
                    run_id INTEGER,
                    kind TEXT NOT NULL,
                    path TEXT NOT NULL,
                    sha256 TEXT NOT NULL,
                    FOREIGN KEY (run_id) REFERENCES runs (id)
                )
                """)

                cursor.execute("CREATE INDEX IF NOT EXISTS idx_runs_experiment ON runs(experiment)")
                cursor.execute("CREATE INDEX IF NOT EXISTS idx_training_log_run_id ON training_log(run_id)")
                cursor.execute("CREATE INDEX IF NOT EXISTS idx_artifacts_experiment ON artifacts(experiment)")
                conn.commit()

            if db_existed_before:
                self.logger.info(f"Открыта существующая база экспериментов: {self.db_path}")
            else:
                self.logger.info(f"Создана новая база экспериментов: {self.db_path}")

        except sqlite3.Error as e:
            self.logger.error(f"Ошибка инициализации базы данных: {e}")
            raise

    def start_run(self, experiment: str, scheme: str, run_index: int, seed: int) -> int:
        """Зарегистрировать запуск, возвращает его id"""
        try:
            with self._connect() as conn:
                cursor = conn.cursor()
                cursor.execute("""
                INSERT INTO runs (experiment, scheme, run_index, seed, created_at)
                VALUES (?, ?, ?, ?, ?)
                """, (experiment, scheme, run_index, seed, datetime.now().isoformat()))
                conn.commit()
                return cursor.lastrowid
        except sqlite3.Error as e:
            self.logger.error(f"Ошибка регистрации запуска {experiment}/{run_index}: {e}")
            raise

    def finish_run(self, run_id: int, summary: Dict[str, Optional[float]], best_step: int,
                   checkpoint_path: str) -> None:
        """Отметить запуск завершенным и сохранить итоговые метрики"""
        try:
            with self._connect() as conn:
                conn.execute("""
                UPDATE runs
                SET status = 'completed', accuracy = ?, macro_precision = ?, macro_sensitivity = ?,
                    macro_f1 = ?, macro_auc = ?, best_step = ?, checkpoint_path = ?, finished_at = ?
                WHERE id = ?
                """, (summary["accuracy"], summary["precision"], summary["sensitivity"], summary["f1"],
                      summary["auc"], best_step, checkpoint_path, datetime.now().isoformat(), run_id))
                conn.commit()
                self.logger.info(f"Запуск {run_id} завершен: accuracy={summary['accuracy']:.4f}")
        except sqlite3.Error as e:
            self.logger.error(f"Ошибка сохранения результатов запуска {run_id}: {e}")
            raise

    def fail_run(self, run_id: int, error: str) -> None:
        """Отметить запуск неудачным"""
        try:
            with self._connect() as conn:
                conn.execute("""
                UPDATE runs SET status = 'failed', error = ?, finished_at = ? WHERE id = ?
                """, (error, datetime.now().isoformat(), run_id))
                conn.commit()
                self.logger.warning(f"Запуск {run_id} завершился ошибкой: {error}")
        except sqlite3.Error as e:
            self.logger.error(f"Ошибка обновления статуса запуска {run_id}: {e}")
            raise

    def add_log_entries(self, run_id: int, entries: List) -> None:
        """Сохранить журнал обучения (TrainLogEntry)"""
        try:
            with self._connect() as conn:
                conn.executemany("""
                INSERT INTO training_log (run_id, step, epoch, loss, train_accuracy, eval_loss,
                                          eval_accuracy, learning_rate)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?)
                """, [(run_id, e.step, e.epoch, e.loss, e.train_accuracy, e.eval_loss,
                       e.eval_accuracy, e.learning_rate) for e in entries])
                conn.commit()
        except sqlite3.Error as e:
            self.logger.error(f"Ошибка сохранения журнала запуска {run_id}: {e}")
            raise

    def add_artifact(self, experiment: str, run_id: Optional[int], kind: str, path: str, sha256: str) -> None:
        """Добавить запись об артефакте (run_id = None для файлов эксперимента)"""
        try:
            with self._connect() as conn:
                conn.execute("""
                INSERT INTO artifacts (experiment, run_id, kind, path, sha256) VALUES (?, ?, ?, ?, ?)
                """, (experiment, run_id, kind, path, sha256))
                conn.commit()
        except sqlite3.Error as e:
            self.logger.error(f"Ошибка добавления артефакта {path}: {e}")
            raise

    def delete_experiment(self, experiment: str) -> int:
        """Удалить прежние запуски эксперимента перед повторным запуском"""
        try:
            with self._connect() as conn:
                run_ids = [row[0] for row in conn.execute("SELECT id FROM runs WHERE experiment = ?", (experiment,))]
                for run_id in run_ids:
                    conn.execute("DELETE FROM training_log WHERE run_id = ?", (run_id,))
                conn.execute("DELETE FROM artifacts WHERE experiment = ?", (experiment,))
                conn.execute("DELETE FROM runs WHERE experiment = ?", (experiment,))
                conn.commit()
            if run_ids:
                self.logger.info(f"Удалено {len(run_ids)} прежних запусков эксперимента {experiment}")
            return len(run_ids)
        except sqlite3.Error as e:
            self.logger.error(f"Ошибка удаления эксперимента {experiment}: {e}")
            raise

    def get_runs(self, experiment: str, status: Optional[str] = None) -> List[RunRecord]:
        """Запуски эксперимента в порядке номеров"""
        try:
            with self._connect() as conn:
                query = "SELECT * FROM runs WHERE experiment = ?"
                params = [experiment]
                if status:
                    query += " AND status = ?"
                    params.append(status)
                query += " ORDER BY run_index, id"
                rows = conn.execute(query, params).fetchall()
                return [
                    RunRecord(
                        id=row["id"],
                        experiment=row["experiment"],
                        scheme=row["scheme"],
                        run_index=row["run_index"],
                        seed=row["seed"],
                        status=row["status"],
                        accuracy=row["accuracy"],
                        macro_precision=row["macro_precision"],
                        macro_sensitivity=row["macro_sensitivity"],
                        macro_f1=row["macro_f1"],
                        macro_auc=row["macro_auc"],
                        best_step=row["best_step"],
                        checkpoint_path=row["checkpoint_path"],
                        error=row["error"],
                        created_at=datetime.fromisoformat(row["created_at"]) if row["created_at"] else None,
                        finished_at=datetime.fromisoformat(row["finished_at"]) if row["finished_at"] else None,
                    )
                    for row in rows
                ]
        except sqlite3.Error as e:
            self.logger.error(f"Ошибка получения запусков {experiment}: {e}")
            return []

    def get_experiments(self) -> List[str]:
        """Имена всех экспериментов"""
        try:
            with self._connect() as conn:
                return [row[0] for row in conn.execute("SELECT DISTINCT experiment FROM runs ORDER BY experiment")]
        except sqlite3.Error as e:
            self.logger.error(f"Ошибка получения списка экспериментов: {e}")
            return []

    def get_log_entries(self, run_id: int) -> List[sqlite3.Row]:
        """Журнал обучения запуска в порядке шагов"""
        try:
            with self._connect() as conn:
                return conn.execute(
                    "SELECT * FROM training_log WHERE run_id = ? ORDER BY step", (run_id,)
                ).fetchall()
        except sqlite3.Error as e:
            self.logger.error(f"Ошибка получения журнала запуска {run_id}: {e}")
            return []

    def get_artifacts(self, experiment: str) -> List[Artifact]:
        """Артефакты эксперимента в порядке добавления"""
        try:
            with self._connect() as conn:
                rows = conn.execute(
                    "SELECT * FROM artifacts WHERE experiment = ? ORDER BY id", (experiment,)
                ).fetchall()
            return [
                Artifact(row["id"], row["experiment"], row["run_id"], row["kind"], row["path"], row["sha256"])
                for row in rows
            ]
        except sqlite3.Error as e:
            self.logger.error(f"Ошибка получения артефактов {experiment}: {e}")
            return []

    def get_statistics(self) -> Dict:
        """Сводная статистика базы"""
        with self._connect() as conn:
            by_status = {row[0]: row[1] for row in conn.execute("SELECT status, COUNT(*) FROM runs GROUP BY status")}
            log_entries = conn.execute("SELECT COUNT(*) FROM training_log").fetchone()[0]
            artifacts = conn.execute("SELECT COUNT(*) FROM artifacts").fetchone()[0]
        return {
            "runs_completed": by_status.get("completed", 0),
            "runs_failed": by_status.get("failed", 0),
            "runs_running": by_status.get("running", 0),
            "log_entries": log_entries,
            "artifacts": artifacts,
        }

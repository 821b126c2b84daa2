#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Главный файл запуска эксперимента классификации ЭКГ (R-R-R + 1D CNN)

Использование:
    python main.py census --data-dir mitdb          - Перепись сокращений
    python main.py train --config experiment.cfg    - Кросс-валидация
    python main.py evaluate --checkpoint ... --manifest ...
    python main.py report                           - Сводный отчет по базе
"""

import sys
import argparse
import logging
from dataclasses import fields
from pathlib import Path
from typing import Dict, List, Optional

# Добавляем текущую директорию в путь для импорта модулей
sys.path.insert(0, str(Path(__file__).parent))

from config import CONFIG_TEMPLATE, ConfigError, ExperimentConfig, load_config
from experiment import ExperimentRunner

COMMANDS = ("census", "train", "evaluate", "report")


def print_logo():
    """Вывод логотипа приложения"""
    logo = """
╔══════════════════════════════════════════════════════════════╗
║           Классификация ЭКГ: R-R-R сегменты + 1D CNN         ║
║                                                              ║
║    🫀 MIT-BIH Arrhythmia Database (WFDB)                     ║
║    🧠 Сверточная сеть без фреймворков                        ║
║    📊 Перепись, кросс-валидация, ROC / AUC                   ║
║                                                              ║
║    Версия: 1.0                                               ║
╚══════════════════════════════════════════════════════════════╝
"""
    print(logo)


def create_config_template(path: str = "experiment.cfg.example") -> bool:
    """Создание шаблона файла конфигурации"""
    config_file = Path(path)
    if config_file.exists():
        print(f"⚠️ Файл уже существует: {config_file}")
        return False
    with open(config_file, 'w', encoding='utf-8') as f:
        f.write(CONFIG_TEMPLATE)
    print(f"✅ Создан шаблон конфигурации: {config_file}")
    return True


def _flag_name(field_name: str) -> str:
    return "--" + field_name.lower().replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    """Парсер: команда и флаги, совпадающие с полями ExperimentConfig"""
    parser = argparse.ArgumentParser(
        description="Классификация сердечных сокращений MIT-BIH сверточной сетью",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Примеры использования:
  python main.py census --data-dir mitdb
  python main.py train --scheme AAMI5 --n-runs 7
  python main.py train --records 100,101 --max-per-class 100 --epochs 1 --n-runs 1
  python main.py evaluate --checkpoint runs/MITBIH5_seed42/run_0/checkpoint.bin \\
                          --manifest runs/MITBIH5_seed42/run_0/manifest.txt
  python main.py report --scheme MITBIH6
  python main.py --create-config

Порядок приоритета настроек:
  значения по умолчанию < переменные окружения < --config файл < флаги
"""
    )
    parser.add_argument('command', nargs='?', choices=COMMANDS, help='Действие')
    parser.add_argument('--config', help='Файл конфигурации key = value')
    parser.add_argument('--create-config', action='store_true', help='Создать шаблон конфигурации')
    parser.add_argument('--checkpoint', help='Чекпоинт для evaluate')
    parser.add_argument('--manifest', help='Манифест разбиения для evaluate')
    parser.add_argument('--experiment', help='Имя эксперимента для report (по умолчанию СХЕМА_seedЗЕРНО)')
    parser.add_argument('--version', action='version', version='ECG R-R-R CNN v1.0')

    group = parser.add_argument_group('параметры эксперимента')
    for config_field in fields(ExperimentConfig):
        group.add_argument(
            _flag_name(config_field.name),
            dest=config_field.name,
            metavar=config_field.name,
            default=None,
            help=f"переопределяет {config_field.name}",
        )
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, str]:
    """Значения флагов, заданные в командной строке"""
    return {
        config_field.name: getattr(args, config_field.name)
        for config_field in fields(ExperimentConfig)
        if getattr(args, config_field.name) is not None
    }


def print_config(config: ExperimentConfig):
    print("📋 Загруженная конфигурация:")
    print(f"   • Данные: {config.DATA_DIR} ({', '.join(config.RECORDS) or 'все 48 записей'})")
    print(f"   • Схема классов: {config.SCHEME}, канал {config.CHANNEL}, окно {config.WINDOW_LENGTH}")
    print(f"   • Запусков: {config.N_RUNS}, эпох: {config.EPOCHS}, seed: {config.SEED}")
    print(f"   • Режим: {'подмножество' if config.subset_mode else 'полное воспроизведение'}")
    print()


def run_census(runner: ExperimentRunner) -> bool:
    report = runner.census()
    print(f"📊 Записей: {report.n_records}, сокращений: {sum(report.beat_counts.values())}")
    print(f"   • Максимальный R-R-R: {report.span.max_span} отсчетов, "
          f"длиннее окна: {report.span.n_over_window} ({report.span.fraction_over_window:.4%})")
    for scheme_id, counts in report.scheme_counts.items():
        print(f"   • {scheme_id}: " + ", ".join(f"{name}={count}" for name, count in counts.items()))
    for path in report.files:
        print(f"   📄 {path}")
    return True


def run_train(runner: ExperimentRunner) -> bool:
    report = runner.run_experiment()
    for run in report.runs:
        if run.status == "completed":
            print(f"   ✅ Запуск {run.run_index}: accuracy={run.summary['accuracy']:.4f}, "
                  f"f1={run.summary['f1']:.4f}")
        else:
            print(f"   ❌ Запуск {run.run_index}: {run.error}")
    print(f"📄 Сводный отчет: {report.aggregate_path}")
    print(f"📄 Индекс артефактов: {report.index_path}")
    return not report.failed_runs


def run_evaluate(runner: ExperimentRunner, checkpoint: Optional[str], manifest: Optional[str]) -> bool:
    if not checkpoint or not manifest:
        print("❌ Для evaluate нужны --checkpoint и --manifest")
        return False
    summary = runner.evaluate_checkpoint(checkpoint, manifest)
    print("📊 " + ", ".join(f"{key}={value:.4f}" for key, value in summary.items() if value is not None))
    return True


def run_report(runner: ExperimentRunner, experiment: Optional[str]) -> bool:
    path = runner.report(experiment)
    print(f"📄 Сводный отчет: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        print(f.read())

    database = runner.database
    for run in database.get_runs(experiment or runner.experiment_name):
        entries = database.get_log_entries(run.id)
        print(f"   🔹 Запуск {run.run_index} (seed {run.seed}): {run.status}, записей журнала: {len(entries)}")

    stats = database.get_statistics()
    print(f"📊 Эксперименты в базе: {', '.join(database.get_experiments()) or 'нет'}")
    print(f"   Завершено: {stats['runs_completed']}, с ошибкой: {stats['runs_failed']}, "
          f"артефактов: {stats['artifacts']}")
    return True


def main(argv: Optional[List[str]] = None) -> int:
    """Главная функция приложения"""
    parser = build_parser()
    args = parser.parse_args(argv)

    print_logo()

    if args.create_config:
        create_config_template()
        return 0
    if not args.command:
        parser.print_help()
        return 1

    try:
        config = load_config(args.config, collect_overrides(args))
        config.validate()
    except (ConfigError, OSError) as e:
        print(f"❌ Ошибка конфигурации: {e}")
        return 1

    runner = ExperimentRunner(config)
    runner.setup_logging()
    print_config(config)

    try:
        if args.command == "census":
            success = run_census(runner)
        elif args.command == "train":
            success = run_train(runner)
        elif args.command == "evaluate":
            success = run_evaluate(runner, args.checkpoint, args.manifest)
        else:
            success = run_report(runner, args.experiment)
    except KeyboardInterrupt:
        print("\n🛑 Прерывание пользователем")
        return 1
    except Exception as e:
        print(f"\n💥 Критическая ошибка: {e}")
        logging.error(f"Критическая ошибка в main: {e}")
        return 1

    if success:
        print("\n✅ Программа завершена успешно")
        return 0
    print("\n❌ Программа завершена с ошибками")
    return 1


if __name__ == "__main__":
    sys.exit(main())

# -*- coding: utf-8 -*-
"""
Сегментация сердечных сокращений по стратегии R-R-R: для каждого R-зубца берется
сигнал от предыдущего до следующего R-зубца и помещается в окно фиксированной
длины так, чтобы текущий R-зубец оказался в центре
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

WINDOW_LENGTH = 2700
HISTOGRAM_BIN = 100


@dataclass
class BeatSegment:
    """
    Один размеченный R-R-R сегмент.

    span хранит исходные отсчеты [r_index - left_extent, r_index + right_extent]
    (представление массива канала без копирования), окно строится по запросу.
    """
    record_name: str
    r_index: int
    code: int
    left_extent: int
    right_extent: int
    span: np.ndarray
    window_length: int = WINDOW_LENGTH

    @property
    def center(self) -> int:
        return self.window_length // 2

    @property
    def window(self) -> np.ndarray:
        """Окно длины window_length с нулевым дополнением с обеих сторон"""
        window = np.zeros(self.window_length, dtype=np.float32)
        start = self.center - self.left_extent
        window[start:start + self.span.size] = self.span
        return window

    @property
    def key(self) -> Tuple[str, int]:
        return self.record_name, self.r_index


def extract_rrr_segments(
    channel: np.ndarray,
    beat_events: Sequence[Tuple[int, int]],
    window_length: int = WINDOW_LENGTH,
    record_name: str = "",
) -> List[BeatSegment]:
    """
    Нарезает канал на R-R-R сегменты

    Args:
        channel: Канал в милливольтах
        beat_events: Пары (отсчет R-зубца, код), отсортированные по отсчету
        window_length: Длина окна (центр - window_length // 2)
        record_name: Имя записи для идентификации сегментов

    Returns:
        List[BeatSegment]: по одному сегменту на каждое сокращение,
        у которого есть и предыдущее, и следующее
    """
    if window_length < 3:
        raise ValueError(f"Длина окна должна быть >= 3, получено {window_length}")

    half_left = window_length // 2
    half_right = window_length - half_left - 1

    segments = []
    clipped = 0
    outside = 0
    for position in range(1, len(beat_events) - 1):
        previous_r = beat_events[position - 1][0]
        r_index, code = beat_events[position]
        next_r = beat_events[position + 1][0]
        if not 0 <= r_index < channel.size:
            outside += 1
            continue

        left = r_index - previous_r
        right = next_r - r_index
        if left > half_left or right > half_right:
            clipped += 1
        left = min(left, half_left, r_index)
        right = min(right, half_right, channel.size - 1 - r_index)

        segments.append(BeatSegment(
            record_name=record_name,
            r_index=r_index,
            code=code,
            left_extent=left,
            right_extent=right,
            span=channel[r_index - left:r_index + right + 1],
            window_length=window_length,
        ))

    if clipped:
        logger.info(f"Запись {record_name}: {clipped} сегментов обрезано до половины окна")
    if outside:
        logger.warning(f"Запись {record_name}: {outside} сокращений вне сигнала пропущено")
    return segments


@dataclass
class SpanCensus:
    """Статистика длин R-R-R интервалов"""
    max_span: int
    n_beats: int
    n_over_window: int
    histogram: List[Tuple[int, int]]  # (начало корзины, число сокращений)

    @property
    def fraction_over_window(self) -> float:
        return self.n_over_window / self.n_beats if self.n_beats else 0.0


def max_span_census(
    beat_positions: Iterable[Sequence[int]],
    window_length: int = WINDOW_LENGTH,
) -> SpanCensus:
    """
    Максимальная длина (следующий R - предыдущий R) по всем внутренним сокращениям

    Args:
        beat_positions: Для каждой записи - отсортированные отсчеты R-зубцов
        window_length: Длина окна для подсчета сегментов, которые в него не помещаются

    Returns:
        SpanCensus: максимум, число сокращений, число не помещающихся и гистограмма
    """
    spans = []
    for positions in beat_positions:
        positions = np.asarray(positions, dtype=np.int64)
        if positions.size >= 3:
            spans.append(positions[2:] - positions[:-2])

    if not spans:
        return SpanCensus(max_span=0, n_beats=0, n_over_window=0, histogram=[])

    spans = np.concatenate(spans)
    bins = spans // HISTOGRAM_BIN
    counts = np.bincount(bins)
    histogram = [(int(index) * HISTOGRAM_BIN, int(count)) for index, count in enumerate(counts) if count]
    return SpanCensus(
        max_span=int(spans.max()),
        n_beats=int(spans.size),
        n_over_window=int(np.count_nonzero(spans > window_length - 1)),
        histogram=histogram,
    )


def stack_windows(segments: Sequence[BeatSegment]) -> np.ndarray:
    """Окна сегментов в виде батча (N, 1, window_length)"""
    if not segments:
        return np.zeros((0, 1, WINDOW_LENGTH), dtype=np.float32)
    return np.stack([segment.window for segment in segments])[:, None, :]

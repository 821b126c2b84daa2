# -*- coding: utf-8 -*-
"""
Запись файлов WFDB для тестов: кодировщик формата 212, поток аннотаций MIT,
заголовок и синтетические записи
"""

import os
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

SKIP, NUM, SUB, CHN, AUX = 59, 60, 61, 62, 63

AnnotationSpec = Union[Tuple[int, int], Dict]


def encode_signal_212(frame: np.ndarray) -> bytes:
    """Кодирует отсчеты (n_samples, n_signals) в формат 212"""
    samples = np.asarray(frame, dtype=np.int64).reshape(-1) & 0xFFF
    total = samples.size
    if total % 2:
        samples = np.append(samples, 0)
    a, b = samples[0::2], samples[1::2]
    groups = np.empty((a.size, 3), dtype=np.uint8)
    groups[:, 0] = a & 0xFF
    groups[:, 1] = ((a >> 8) & 0x0F) | (((b >> 8) & 0x0F) << 4)
    groups[:, 2] = b & 0xFF
    return groups.tobytes()[:(total * 3 + 1) // 2]


def checksum16(values: Sequence[int]) -> int:
    total = int(np.sum(np.asarray(values, dtype=np.int64)))
    return (total + 32768) % 65536 - 32768


def _word(code: int, value: int) -> bytes:
    return ((code << 10) | (value & 0x3FF)).to_bytes(2, "little")


def encode_annotations(events: Sequence[AnnotationSpec]) -> bytes:
    """
    Поток аннотаций MIT. Событие - (sample, code) или словарь с ключами
    sample, code и необязательными num, sub, chn, aux
    """
    out = bytearray()
    previous = 0
    for event in events:
        if not isinstance(event, dict):
            event = {"sample": event[0], "code": event[1]}
        delta = event["sample"] - previous
        previous = event["sample"]
        if delta > 0x3FF or delta < 0:
            out += _word(SKIP, 0)
            interval = delta & 0xFFFFFFFF
            out += (interval >> 16).to_bytes(2, "little")
            out += (interval & 0xFFFF).to_bytes(2, "little")
            delta = 0
        out += _word(event["code"], delta)
        if "sub" in event:
            out += _word(SUB, event["sub"] & 0xFF)
        if "chn" in event:
            out += _word(CHN, event["chn"])
        if "num" in event:
            out += _word(NUM, event["num"] & 0xFF)
        if "aux" in event:
            text = event["aux"].encode("latin-1")
            out += _word(AUX, len(text))
            out += text + (b"\x00" if len(text) % 2 else b"")
    out += b"\x00\x00"
    return bytes(out)


def header_text(
    name: str,
    frame: np.ndarray,
    sampling_frequency: float = 360,
    gain: float = 200,
    adc_zero: int = 1024,
    format_code: int = 212,
    comments: Sequence[str] = (),
    checksums: Optional[Sequence[int]] = None,
) -> str:
    """Заголовок в стиле MIT-BIH"""
    n_samples, n_signals = frame.shape
    leads = ["MLII", "V1", "V5", "V2"]
    lines = [f"{name} {n_signals} {sampling_frequency:g} {n_samples}"]
    for channel in range(n_signals):
        checksum = checksums[channel] if checksums is not None else checksum16(frame[:, channel])
        lines.append(
            f"{name}.dat {format_code} {gain:g} 11 {adc_zero} {int(frame[0, channel])} {checksum} 0 "
            f"{leads[channel % len(leads)]}"
        )
    lines += [f"# {comment}" for comment in comments]
    return "\n".join(lines) + "\n"


def write_record(
    directory: Union[str, os.PathLike],
    name: str,
    frame: np.ndarray,
    events: Sequence[AnnotationSpec],
    comments: Sequence[str] = ("69 M 1085 1629 x1", "Aldomet, Inderal"),
    **header_options,
) -> None:
    """Пишет name.hea, name.dat и name.atr"""
    directory = str(directory)
    with open(os.path.join(directory, f"{name}.hea"), "w", encoding="ascii") as f:
        f.write(header_text(name, frame, comments=comments, **header_options))
    with open(os.path.join(directory, f"{name}.dat"), "wb") as f:
        f.write(encode_signal_212(frame))
    with open(os.path.join(directory, f"{name}.atr"), "wb") as f:
        f.write(encode_annotations(events))


def beat_shape(code: int) -> np.ndarray:
    """Форма комплекса в единицах АЦП, различная для основных классов"""
    t = np.arange(-20, 21)
    if code == 2:  # широкий положительный
        return 300 * np.exp(-(t / 8.0) ** 2)
    if code == 3:  # расщепленный
        return 250 * np.exp(-((t - 5) / 2.5) ** 2) + 200 * np.exp(-((t + 5) / 2.5) ** 2)
    if code == 5:  # широкий отрицательный
        return -350 * np.exp(-(t / 10.0) ** 2)
    if code == 12:  # стимулятор: острый спайк и волна
        return np.where(t == -12, 600, 0) + 200 * np.exp(-(t / 6.0) ** 2)
    return 400 * np.exp(-(t / 3.0) ** 2)


def write_synthetic_record(
    directory: Union[str, os.PathLike],
    name: str,
    n_beats: int = 60,
    seed: int = 0,
    codes: Sequence[int] = (1, 2, 3, 5, 12),
    n_signals: int = 2,
) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """
    Синтетическая запись: комплексы разных форм с интервалами 100-180 отсчетов,
    шум и аннотация ритма в начале

    Returns:
        Tuple: отсчеты (n_samples, n_signals) и пары (отсчет, код) сокращений
    """
    rng = np.random.default_rng(seed)
    positions = 60 + np.cumsum(rng.integers(100, 181, size=n_beats))
    beats = [(int(position), codes[i % len(codes)]) for i, position in enumerate(positions)]
    n_samples = int(positions[-1]) + 120

    frame = np.full((n_samples, n_signals), 1024.0)
    frame += rng.normal(0, 3, size=frame.shape)
    for position, code in beats:
        shape = beat_shape(code)
        half = shape.size // 2
        for channel in range(n_signals):
            frame[position - half:position + half + 1, channel] += shape / (channel + 1)
    frame = np.clip(np.rint(frame), -2048, 2047).astype(np.int64)

    events = [{"sample": 1, "code": 28, "aux": "(N"}] + [(position, code) for position, code in beats]
    write_record(directory, name, frame, events)
    return frame, beats

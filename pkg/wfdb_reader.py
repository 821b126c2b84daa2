# -*- coding: utf-8 -*-
"""
Чтение записей MIT-BIH в форматах WFDB: заголовок (.hea), сигнал формата 212 (.dat)
и аннотации MIT (.atr)
"""

import os
import re
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from config import ANNOTATION_CODES, BEAT_CODES

logger = logging.getLogger(__name__)

SUPPORTED_FORMAT = 212
EXPECTED_SIGNALS = 2
EXPECTED_FREQUENCY = 360.0
DEFAULT_GAIN = 200.0  # WFDB: нулевое или отсутствующее усиление
DEFAULT_FREQUENCY = 250.0  # WFDB: частота по умолчанию

# Псевдо-коды потока аннотаций
SKIP = 59
NUM = 60
SUB = 61
CHN = 62
AUX = 63


class WfdbError(Exception):
    """Базовая ошибка чтения файлов WFDB"""


class HeaderParseError(WfdbError):
    """Ошибка разбора заголовка с номером строки"""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"строка {line_number}: {message}")
        self.line_number = line_number


class UnsupportedFormatError(HeaderParseError):
    """Формат хранения сигнала отличается от 212"""


class SignalTruncatedError(WfdbError):
    """Файл сигнала короче, чем требует заголовок"""


class AnnotationParseError(WfdbError):
    """Ошибка разбора потока аннотаций со смещением в байтах"""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"смещение {byte_offset}: {message}")
        self.byte_offset = byte_offset


@dataclass
class SignalSpec:
    """Описание одного канала из заголовка"""
    file_name: str
    format_code: int
    gain: float
    adc_resolution: int
    adc_zero: int
    initial_value: int
    checksum: int
    block_size: int = 0
    byte_offset: int = 0
    units: str = "mV"
    baseline: Optional[int] = None
    lead_description: str = ""


@dataclass
class RecordHeader:
    """Метаданные записи"""
    record_name: str
    n_signals: int
    sampling_frequency: float
    n_samples: int
    signals: List[SignalSpec] = field(default_factory=list)
    comments: List[str] = field(default_factory=list)


@dataclass
class SignalData:
    """Отсчеты АЦП по каналам и результаты проверки целостности"""
    channels: List[np.ndarray]
    checksum_ok: List[bool] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)


@dataclass
class AnnotationEvent:
    """Одна аннотация потока MIT"""
    sample_index: int
    code: int
    subtype: int = 0
    channel: int = 0
    num_field: int = 0
    aux: Optional[str] = None

    @property
    def is_beat(self) -> bool:
        return self.code in BEAT_CODES

    @property
    def symbol(self) -> str:
        return ANNOTATION_CODES.get(self.code, ("?", ""))[0]


@dataclass
class Record:
    """Разобранная запись: заголовок, сигнал, аннотации"""
    header: RecordHeader
    signal: SignalData
    annotations: List[AnnotationEvent]

    @property
    def name(self) -> str:
        return self.header.record_name

    def beat_events(self) -> List[Tuple[int, int]]:
        """Пары (отсчет, код) только для аннотаций сердечных сокращений"""
        return [(event.sample_index, event.code) for event in self.annotations if event.is_beat]

    def physical_channel(self, channel: int) -> np.ndarray:
        """Канал в милливольтах"""
        if not 0 <= channel < self.header.n_signals:
            raise IndexError(f"Запись {self.name}: нет канала {channel}")
        return to_physical(self.signal, self.header)[channel]


# record[/segments] n_signals [fs[/counter][(base)] [n_samples ...]]
_RECORD_LINE = re.compile(r"^(?P<name>[^\s/]+)(?P<segments>/\d+)?$")
# gain[(baseline)][/units]
_GAIN_FIELD = re.compile(r"^(?P<gain>[-+]?[\d.eE+-]+)(\((?P<baseline>[-+]?\d+)\))?(/(?P<units>\S+))?$")
# format[xsamp][:skew][+offset]
_FORMAT_FIELD = re.compile(r"^(?P<format>\d+)(x\d+)?(:\d+)?(\+(?P<offset>\d+))?$")


def _parse_signal_line(tokens: List[str], line_number: int) -> SignalSpec:
    """Разбор строки описания канала"""
    if len(tokens) < 2:
        raise HeaderParseError("строка сигнала должна содержать имя файла и формат", line_number)

    format_match = _FORMAT_FIELD.match(tokens[1])
    if not format_match:
        raise HeaderParseError(f"неверное поле формата: {tokens[1]}", line_number)
    format_code = int(format_match.group("format"))
    if format_code != SUPPORTED_FORMAT:
        raise UnsupportedFormatError(f"неподдерживаемый формат {format_code}, ожидается 212", line_number)

    gain, baseline, units = DEFAULT_GAIN, None, "mV"
    if len(tokens) > 2:
        gain_match = _GAIN_FIELD.match(tokens[2])
        if not gain_match:
            raise HeaderParseError(f"неверное поле усиления: {tokens[2]}", line_number)
        gain = float(gain_match.group("gain"))
        if gain < 0:
            raise HeaderParseError(f"отрицательное усиление: {gain}", line_number)
        if gain == 0:
            gain = DEFAULT_GAIN
        if gain_match.group("baseline") is not None:
            baseline = int(gain_match.group("baseline"))
        units = gain_match.group("units") or units

    try:
        numeric = [int(token) for token in tokens[3:8]]
    except ValueError as e:
        raise HeaderParseError(f"неверное числовое поле: {e}", line_number) from None
    adc_resolution = numeric[0] if len(numeric) > 0 else 12
    adc_zero = numeric[1] if len(numeric) > 1 else 0
    initial_value = numeric[2] if len(numeric) > 2 else adc_zero
    checksum = numeric[3] if len(numeric) > 3 else 0
    block_size = numeric[4] if len(numeric) > 4 else 0

    return SignalSpec(
        file_name=tokens[0],
        format_code=format_code,
        gain=gain,
        adc_resolution=adc_resolution,
        adc_zero=adc_zero,
        initial_value=initial_value,
        checksum=checksum,
        block_size=block_size,
        byte_offset=int(format_match.group("offset") or 0),
        units=units,
        baseline=baseline if baseline is not None else adc_zero,
        lead_description=" ".join(tokens[8:]),
    )


def parse_header(data: Union[bytes, str]) -> RecordHeader:
    """
    Разбирает текстовый заголовок WFDB (.hea)

    Args:
        data: Содержимое файла заголовка

    Returns:
        RecordHeader: метаданные записи с описаниями каналов
    """
    text = data.decode("ascii", errors="replace") if isinstance(data, bytes) else data

    header: Optional[RecordHeader] = None
    comments: List[str] = []
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line.lstrip("#").strip())
            continue

        tokens = line.split()
        if header is None:
            header = _parse_record_line(tokens, line_number)
            continue
        if len(header.signals) >= header.n_signals:
            raise HeaderParseError(
                f"лишняя строка сигнала: заявлено {header.n_signals} каналов", line_number
            )
        header.signals.append(_parse_signal_line(tokens, line_number))

    if header is None:
        raise HeaderParseError("нет строки записи", 1)
    if len(header.signals) != header.n_signals:
        raise HeaderParseError(
            f"заявлено {header.n_signals} каналов, описано {len(header.signals)}",
            len(text.splitlines()),
        )
    file_names = {spec.file_name for spec in header.signals}
    if len(file_names) > 1:
        raise HeaderParseError(f"каналы в разных файлах не поддерживаются: {sorted(file_names)}", 2)

    header.comments = comments
    return header


def _parse_record_line(tokens: List[str], line_number: int) -> RecordHeader:
    """Разбор строки записи"""
    if len(tokens) < 2:
        raise HeaderParseError("строка записи должна содержать имя и число каналов", line_number)
    name_match = _RECORD_LINE.match(tokens[0])
    if not name_match:
        raise HeaderParseError(f"неверное имя записи: {tokens[0]}", line_number)
    if name_match.group("segments"):
        raise HeaderParseError("многосегментные записи не поддерживаются", line_number)

    try:
        n_signals = int(tokens[1])
        frequency = DEFAULT_FREQUENCY
        if len(tokens) > 2:
            frequency = float(re.split(r"[/(]", tokens[2])[0])
        n_samples = int(tokens[3]) if len(tokens) > 3 else 0
    except ValueError as e:
        raise HeaderParseError(f"неверное числовое поле: {e}", line_number) from None

    if n_signals < 1:
        raise HeaderParseError(f"неверное число каналов: {n_signals}", line_number)
    if frequency <= 0:
        raise HeaderParseError(f"неверная частота дискретизации: {frequency}", line_number)
    if n_samples <= 0:
        raise HeaderParseError("число отсчетов должно быть положительным", line_number)

    return RecordHeader(
        record_name=name_match.group("name"),
        n_signals=n_signals,
        sampling_frequency=frequency,
        n_samples=n_samples,
    )


def parse_signal_212(data: bytes, header: RecordHeader) -> SignalData:
    """
    Декодирует сигнал формата 212: каждые 3 байта хранят два 12-битных отсчета
    в дополнительном коде, отсчеты чередуются по каналам

    Args:
        data: Содержимое файла .dat
        header: Заголовок записи

    Returns:
        SignalData: каналы отсчетов АЦП и диагностика контрольных сумм
    """
    offset = header.signals[0].byte_offset if header.signals else 0
    total = header.n_samples * header.n_signals
    required = (total * 3 + 1) // 2
    if len(data) - offset < required:
        raise SignalTruncatedError(
            f"запись {header.record_name}: нужно {required} байт сигнала, доступно {len(data) - offset}"
        )

    raw = np.frombuffer(data, dtype=np.uint8, count=required, offset=offset)
    # Неполная последняя группа дополняется нулями
    padded = np.zeros(-(-required // 3) * 3, dtype=np.int32)
    padded[:required] = raw
    groups = padded.reshape(-1, 3)

    samples = np.empty(groups.shape[0] * 2, dtype=np.int32)
    samples[0::2] = groups[:, 0] | ((groups[:, 1] & 0x0F) << 8)
    samples[1::2] = groups[:, 2] | ((groups[:, 1] & 0xF0) << 4)
    samples = samples[:total]
    samples[samples > 2047] -= 4096

    frame = samples.reshape(header.n_samples, header.n_signals)
    channels = [frame[:, index].astype(np.int16) for index in range(header.n_signals)]

    signal = SignalData(channels=channels)
    signal.checksum_ok = verify_checksum(signal, header)
    for index, ok in enumerate(signal.checksum_ok):
        if not ok:
            signal.diagnostics.append(f"контрольная сумма канала {index} не совпадает")
    for index, spec in enumerate(header.signals):
        if channels[index].size and int(channels[index][0]) != spec.initial_value:
            signal.diagnostics.append(
                f"первый отсчет канала {index} ({int(channels[index][0])}) "
                f"не равен начальному значению {spec.initial_value}"
            )
    for message in signal.diagnostics:
        logger.warning(f"Запись {header.record_name}: {message}")
    return signal


def verify_checksum(signal: SignalData, header: RecordHeader) -> List[bool]:
    """Сравнение 16-битной знаковой суммы отсчетов каждого канала с заголовком"""
    results = []
    for channel, spec in zip(signal.channels, header.signals):
        total = int(np.sum(channel, dtype=np.int64))
        wrapped = (total + 32768) % 65536 - 32768
        results.append(wrapped == spec.checksum)
    return results


def to_physical(signal: SignalData, header: RecordHeader) -> List[np.ndarray]:
    """Перевод отсчетов АЦП в милливольты: (x - adc_zero) / gain"""
    physical = []
    for channel, spec in zip(signal.channels, header.signals):
        if spec.gain <= 0:
            raise ValueError(f"Запись {header.record_name}: усиление канала должно быть положительным")
        physical.append((channel.astype(np.float64) - spec.adc_zero) / spec.gain)
    return physical


def parse_annotations(data: bytes) -> List[AnnotationEvent]:
    """
    Разбирает поток аннотаций MIT: 16-битные слова little-endian,
    старшие 6 бит - код, младшие 10 бит - приращение времени

    Args:
        data: Содержимое файла .atr

    Returns:
        List[AnnotationEvent]: события в порядке возрастания отсчета
    """
    if len(data) % 2:
        raise AnnotationParseError("нечетная длина потока", len(data) - 1)

    events: List[AnnotationEvent] = []
    time = 0
    num = 0
    chan = 0
    position = 0
    size = len(data)

    while True:
        if position + 2 > size:
            raise AnnotationParseError("нет завершающего нулевого слова", position)
        word = data[position] | (data[position + 1] << 8)
        code = word >> 10
        increment = word & 0x3FF

        if word == 0:
            break

        if code == SKIP:
            if position + 6 > size:
                raise AnnotationParseError("обрезанный интервал SKIP", position)
            high = data[position + 2] | (data[position + 3] << 8)
            low = data[position + 4] | (data[position + 5] << 8)
            interval = (high << 16) | low
            if interval >= 1 << 31:
                interval -= 1 << 32
            time += interval
            if time < 0:
                raise AnnotationParseError("отрицательное накопленное время", position)
            position += 6
            continue

        if code in (NUM, SUB, CHN, AUX):
            if not events:
                raise AnnotationParseError(f"псевдо-аннотация {code} до первого события", position)
            event = events[-1]
            if code == NUM:
                num = _signed_byte(increment)
                event.num_field = num
            elif code == SUB:
                event.subtype = _signed_byte(increment)
            elif code == CHN:
                chan = increment & 0xFF
                event.channel = chan
            else:
                length = increment
                start = position + 2
                end = start + length
                if end > size:
                    raise AnnotationParseError(f"строка AUX длиной {length} выходит за конец", position)
                event.aux = data[start:end].decode("latin-1").rstrip("\x00")
                position = start + length + (length & 1)
                continue
            position += 2
            continue

        time += increment
        events.append(AnnotationEvent(sample_index=time, code=code, channel=chan, num_field=num))
        position += 2

    return events


def _signed_byte(value: int) -> int:
    value &= 0xFF
    return value - 256 if value > 127 else value


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def load_record(data_dir: str, record_name: str, annotator: str = "atr") -> Record:
    """
    Загружает запись из каталога: name.hea, файл сигнала из заголовка, name.atr

    Args:
        data_dir: Каталог с файлами записи
        record_name: Имя записи (например, "100")
        annotator: Расширение файла аннотаций

    Returns:
        Record: разобранная запись
    """
    header = parse_header(_read_bytes(os.path.join(data_dir, f"{record_name}.hea")))
    if header.n_signals != EXPECTED_SIGNALS:
        logger.warning(f"Запись {record_name}: {header.n_signals} каналов вместо {EXPECTED_SIGNALS}")
    if header.sampling_frequency != EXPECTED_FREQUENCY:
        logger.warning(f"Запись {record_name}: частота {header.sampling_frequency} Гц вместо {EXPECTED_FREQUENCY:g} Гц")
    signal = parse_signal_212(_read_bytes(os.path.join(data_dir, header.signals[0].file_name)), header)
    annotations = parse_annotations(_read_bytes(os.path.join(data_dir, f"{record_name}.{annotator}")))

    outside = sum(1 for event in annotations if not 0 <= event.sample_index < header.n_samples)
    if outside:
        logger.warning(f"Запись {record_name}: {outside} аннотаций вне диапазона сигнала")

    logger.info(
        f"Загружена запись {record_name}: {header.n_signals} канала, {header.n_samples} отсчетов, "
        f"{len(annotations)} аннотаций"
    )
    return Record(header=header, signal=signal, annotations=annotations)


def list_records(data_dir: str) -> List[str]:
    """Имена записей, для которых есть файл заголовка"""
    if not os.path.isdir(data_dir):
        return []
    return sorted(name[:-4] for name in os.listdir(data_dir) if name.endswith(".hea"))


def beat_census(records: Iterable[Record]) -> Counter:
    """Число аннотаций сердечных сокращений по кодам"""
    census: Counter = Counter()
    for record in records:
        census.update(event.code for event in record.annotations if event.is_beat)
    return census

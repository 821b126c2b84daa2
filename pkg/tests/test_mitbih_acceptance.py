# -*- coding: utf-8 -*-
"""
Проверки на настоящей MIT-BIH Arrhythmia Database.
Выполняются, только если MITBIH_DIR указывает на каталог с 48 записями
"""

import os
from collections import Counter

import numpy as np
import pytest

from beats import max_span_census
from config import MITBIH_RECORDS, REFERENCE_BEAT_COUNTS
from wfdb_reader import beat_census, load_record

MITBIH_DIR = os.environ.get("MITBIH_DIR")

pytestmark = pytest.mark.skipif(
    not MITBIH_DIR or not os.path.isdir(MITBIH_DIR),
    reason="MITBIH_DIR не задан",
)


@pytest.fixture(scope="module")
def records():
    return [load_record(MITBIH_DIR, name) for name in MITBIH_RECORDS]


def test_record_100_header(records):
    record = records[0]
    assert record.header.sampling_frequency == 360
    assert record.header.n_signals == 2
    assert record.header.n_samples == 650000


def test_all_checksums_pass(records):
    failed = [record.name for record in records if not all(record.signal.checksum_ok)]
    assert failed == []


@pytest.mark.parametrize("code", [1, 2, 3, 5, 12])
def test_census_matches_published_counts(records, code):
    counts = beat_census(records)
    reference = REFERENCE_BEAT_COUNTS[code]
    assert abs(counts[code] - reference) / reference <= 0.002


def test_span_census_reports_window_overflow(records):
    census = max_span_census([sample for sample, _ in record.beat_events()] for record in records)
    assert census.n_beats > 100000
    assert census.max_span > 0
    assert 0.0 <= census.fraction_over_window < 0.01


def test_record_100_first_physical_sample(records):
    record = records[0]
    assert record.signal.channels[0][0] == 995
    assert record.physical_channel(0)[0] == pytest.approx(-0.145)


def test_record_100_beat_tallies(records):
    tallies = Counter(event.symbol for event in records[0].annotations if event.is_beat)
    assert tallies == {"N": 2239, "A": 33, "V": 1}


def test_record_100_samples_match_wfdb(records):
    wfdb = pytest.importorskip("wfdb")
    reference = wfdb.rdrecord(os.path.join(MITBIH_DIR, "100"), physical=False)
    np.testing.assert_array_equal(records[0].signal.channels[0][:10], reference.d_signal[:10, 0])

    physical = wfdb.rdrecord(os.path.join(MITBIH_DIR, "100"))
    assert records[0].physical_channel(0)[0] == pytest.approx(physical.p_signal[0, 0])


def test_record_100_annotations_match_wfdb(records):
    wfdb = pytest.importorskip("wfdb")
    reference = wfdb.rdann(os.path.join(MITBIH_DIR, "100"), "atr")
    annotations = records[0].annotations
    assert Counter(event.symbol for event in annotations) == Counter(reference.symbol)
    assert [event.sample_index for event in annotations] == [int(sample) for sample in reference.sample]

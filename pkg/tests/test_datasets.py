# -*- coding: utf-8 -*-
from collections import Counter

import numpy as np
import pytest

from beats import BeatSegment
from datasets import (
    EXCLUDED,
    SCHEMES,
    DatasetError,
    LabeledSegment,
    balance_normals,
    cap_per_class,
    carve_validation,
    check_reference_availability,
    class_counts,
    get_scheme,
    label_segments,
    make_cv_runs,
    map_label,
    read_manifest,
    split_80_20,
    write_manifest,
)

_SPAN = np.zeros(3)


def _segment(record: str = "100", r_index: int = 0, code: int = 1) -> BeatSegment:
    return BeatSegment(record_name=record, r_index=r_index, code=code, left_extent=1, right_extent=1,
                       span=_SPAN, window_length=5)


def _labeled(sizes) -> list:
    items = []
    for class_index, size in enumerate(sizes):
        items += [LabeledSegment(_segment("100", len(items) + i), class_index) for i in range(size)]
    return items


def _keys(items):
    return [(item.segment.record_name, item.segment.r_index) for item in items]


def test_map_label_examples():
    mitbih5, mitbih6, aami5 = SCHEMES["MITBIH5"], SCHEMES["MITBIH6"], SCHEMES["AAMI5"]
    assert map_label(1, mitbih5) == 0
    assert map_label(8, mitbih5) is EXCLUDED
    assert mitbih6.class_names[map_label(8, mitbih6)] == "Other"
    assert aami5.class_names[map_label(8, aami5)] == "S"
    assert aami5.class_names[map_label(38, aami5)] == "Q"
    assert map_label(28, mitbih6) is EXCLUDED


def test_scheme_definitions():
    assert get_scheme("MITBIH5").class_names == ("N", "L", "R", "V", "Paced")
    assert get_scheme("MITBIH6").n_classes == 6
    assert get_scheme("AAMI5").excluded_records == frozenset({"102", "104", "107", "217"})
    assert not get_scheme("MITBIH5").excluded_records
    with pytest.raises(DatasetError):
        get_scheme("MITBIH7")


def test_label_segments_drops_excluded_codes_and_records():
    segments = [_segment("100", 1, 1), _segment("100", 2, 8), _segment("102", 3, 12), _segment("101", 4, 38)]
    aami = label_segments(segments, SCHEMES["AAMI5"])
    assert [(s.segment.r_index, s.class_index) for s in aami] == [(1, 0), (2, 1), (4, 4)]
    mitbih5 = label_segments(segments, SCHEMES["MITBIH5"])
    assert [(s.segment.r_index, s.class_index) for s in mitbih5] == [(1, 0), (3, 4)]


def test_balance_normals_counts():
    labeled = _labeled([10, 3])
    for seed in (0, 1):
        balanced = balance_normals(labeled, 0.10, seed=seed)
        assert class_counts(balanced) == Counter({0: 1, 1: 3})
    assert _keys(balance_normals(labeled, 1.0, seed=0)) == _keys(labeled)


def test_balance_normals_full_scale_count():
    labeled = _labeled([75016])
    assert len(balance_normals(labeled, 0.10, seed=42)) == 7502


def test_balance_normals_is_seeded():
    labeled = _labeled([50, 2])
    assert _keys(balance_normals(labeled, 0.2, seed=3)) == _keys(balance_normals(labeled, 0.2, seed=3))


def test_balance_normals_rejects_bad_fraction():
    with pytest.raises(DatasetError):
        balance_normals(_labeled([5]), 0.0)
    with pytest.raises(DatasetError):
        balance_normals(_labeled([5]), 1.5)


def test_split_single_class_80_20():
    split = split_80_20(_labeled([100]), seed=0)
    assert len(split.train) == 80
    assert len(split.test) == 20


def test_split_rounds_in_favour_of_train():
    split = split_80_20(_labeled([5, 7]), seed=0)
    assert class_counts(split.train) == Counter({0: 4, 1: 6})
    assert class_counts(split.test) == Counter({0: 1, 1: 1})


def test_split_is_disjoint_and_complete():
    labeled = _labeled([30, 17, 9])
    split = split_80_20(labeled, seed=5)
    train_keys, test_keys = set(_keys(split.train)), set(_keys(split.test))
    assert not train_keys & test_keys
    assert train_keys | test_keys == set(_keys(labeled))


def test_split_rejects_tiny_class():
    with pytest.raises(DatasetError) as excinfo:
        split_80_20(_labeled([10, 1]), seed=0)
    assert "1" in str(excinfo.value)


def test_split_error_names_class_of_scheme():
    with pytest.raises(DatasetError) as excinfo:
        split_80_20(_labeled([10, 10, 10, 1]), seed=0, scheme_id="MITBIH5")
    assert "В классе V " in str(excinfo.value)


def test_split_totals_close_to_published_partition():
    # N после балансировки 7502, остальные классы MITBIH5 целиком
    split = split_80_20(_labeled([7502, 8072, 7256, 7130, 7024]), seed=1)
    assert abs(len(split.train) - 29616) / 29616 < 0.02
    assert abs(len(split.test) - 7404) / 7404 < 0.02


def test_cv_runs_derive_seeds():
    labeled = _labeled([20, 20])
    (single,) = make_cv_runs(labeled, n_runs=1, seed=11)
    reference = split_80_20(labeled, seed=11)
    assert _keys(single.train) == _keys(reference.train)
    assert _keys(single.test) == _keys(reference.test)


def test_cv_runs_are_deterministic_and_overlap():
    labeled = _labeled([100])
    first = make_cv_runs(labeled, n_runs=7, seed=3)
    second = make_cv_runs(labeled, n_runs=7, seed=3)
    assert [_keys(s.test) for s in first] == [_keys(s.test) for s in second]
    assert [s.seed for s in first] == list(range(3, 10))
    test_sets = [set(_keys(s.test)) for s in first]
    assert any(a & b for i, a in enumerate(test_sets) for b in test_sets[i + 1:])


def test_cv_runs_rejects_zero_runs():
    with pytest.raises(DatasetError):
        make_cv_runs(_labeled([10]), n_runs=0)


def test_cap_per_class():
    capped = cap_per_class(_labeled([50, 5]), 10, seed=0)
    assert class_counts(capped) == Counter({0: 10, 1: 5})
    assert len(cap_per_class(_labeled([50]), 0)) == 50


def test_carve_validation_keeps_test_and_stratifies():
    split = split_80_20(_labeled([50, 50]), seed=0)
    carved = carve_validation(split, 0.1, seed=0)
    assert _keys(carved.test) == _keys(split.test)
    assert class_counts(carved.validation) == Counter({0: 4, 1: 4})
    assert len(carved.train) + len(carved.validation) == len(split.train)


def test_reference_availability_warns_for_short_class():
    labeled = _labeled([10, 10, 10, 10, 10, 10])
    warnings = check_reference_availability(labeled, SCHEMES["MITBIH6"])
    assert len(warnings) == 6
    assert any("Other" in message for message in warnings)


def test_manifest_lists_every_partition(tmp_path):
    split = carve_validation(split_80_20(_labeled([20, 10]), seed=2), 0.2, seed=2)
    path = tmp_path / "manifest.txt"
    write_manifest(split, str(path))
    entries = read_manifest(str(path))
    assert Counter(e.partition for e in entries) == Counter(
        {"train": len(split.train), "validation": len(split.validation), "test": len(split.test)}
    )
    first = split.train[0]
    assert (entries[0].record_name, entries[0].r_index, entries[0].class_index) == (
        "100", first.segment.r_index, first.class_index
    )

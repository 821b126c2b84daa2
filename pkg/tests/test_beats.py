# -*- coding: utf-8 -*-
import numpy as np
import pytest

from beats import WINDOW_LENGTH, extract_rrr_segments, max_span_census, stack_windows


def _ramp(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=np.float64)


def test_segment_centered_between_neighbours():
    channel = _ramp(2000)
    segments = extract_rrr_segments(channel, [(100, 1), (500, 5), (900, 1)], record_name="100")

    assert len(segments) == 1
    segment = segments[0]
    assert segment.r_index == 500
    assert segment.code == 5
    assert segment.left_extent == 400
    assert segment.right_extent == 400

    window = segment.window
    assert window.shape == (WINDOW_LENGTH,)
    assert window[1350] == channel[500]
    assert np.all(window[950:1751] != 0)
    assert np.all(window[:950] == 0)
    assert np.all(window[1751:] == 0)
    np.testing.assert_array_equal(window[950:1751], channel[100:901].astype(np.float32))


def test_long_spans_are_clipped_to_half_window():
    channel = _ramp(5000)
    (segment,) = extract_rrr_segments(channel, [(0, 1), (2000, 1), (4000, 1)])
    assert segment.left_extent == 1350
    assert segment.right_extent == 1349
    window = segment.window
    assert window[0] == channel[2000 - 1350]
    assert window[-1] == channel[2000 + 1349]
    assert window[1350] == channel[2000]


def test_first_and_last_beats_have_no_segment():
    channel = _ramp(1000)
    assert extract_rrr_segments(channel, [(100, 1), (200, 1)]) == []
    assert extract_rrr_segments(channel, [(100, 1)]) == []
    assert extract_rrr_segments(channel, []) == []
    segments = extract_rrr_segments(channel, [(100, 1), (200, 2), (300, 3), (400, 1)])
    assert [s.r_index for s in segments] == [200, 300]


def test_short_window_rejected():
    with pytest.raises(ValueError):
        extract_rrr_segments(_ramp(10), [(1, 1), (2, 1), (3, 1)], window_length=2)


def test_small_window_layout():
    channel = _ramp(100)
    (segment,) = extract_rrr_segments(channel, [(40, 1), (50, 1), (53, 1)], window_length=11)
    # центр 5, половины 5 и 5
    assert segment.center == 5
    assert segment.left_extent == 5
    assert segment.right_extent == 3
    np.testing.assert_array_equal(segment.window, [46, 47, 48, 49, 50, 51, 52, 53, 54, 0, 0])


def test_span_census_uniform_spacing():
    census = max_span_census([list(range(0, 3000, 300))])
    assert census.max_span == 600
    assert census.n_over_window == 0
    assert census.n_beats == 8
    assert census.histogram == [(600, 8)]


def test_span_census_single_interior_beat():
    census = max_span_census([[1000 - 400, 1000, 1000 + 500]])
    assert census.max_span == 900
    assert census.n_beats == 1


def test_span_census_counts_spans_over_window():
    census = max_span_census([[0, 1000, 2800], [0, 100, 200]], window_length=2700)
    assert census.max_span == 2800
    assert census.n_beats == 2
    assert census.n_over_window == 1
    assert census.fraction_over_window == 0.5


def test_span_census_empty():
    census = max_span_census([[1, 2]])
    assert census.max_span == 0
    assert census.fraction_over_window == 0.0


def test_stack_windows_shape():
    channel = _ramp(1000)
    segments = extract_rrr_segments(channel, [(100, 1), (200, 1), (300, 1), (400, 1)], window_length=301)
    batch = stack_windows(segments)
    assert batch.shape == (2, 1, 301)
    assert batch.dtype == np.float32


def test_beat_outside_signal_is_skipped(caplog):
    channel = _ramp(1000)
    with caplog.at_level("WARNING"):
        segments = extract_rrr_segments(channel, [(600, 1), (1000, 1), (1100, 1)], 2701, record_name="100")
    assert segments == []
    assert "вне сигнала" in caplog.text

    segments = extract_rrr_segments(channel, [(200, 1), (600, 1), (999, 1), (1000, 1), (1100, 1)], 2701)
    assert [segment.r_index for segment in segments] == [600, 999]
    assert all(segment.right_extent >= 0 for segment in segments)
    assert segments[1].window[segments[1].center] == channel[999]


def test_windows_preserve_source_samples_on_random_signals():
    rng = np.random.default_rng(31)
    for _ in range(50):
        length = int(rng.integers(500, 5000))
        channel = rng.integers(1, 100, size=length).astype(np.float64)
        n_beats = int(rng.integers(3, 20))
        positions = np.sort(rng.choice(length, size=n_beats, replace=False))
        window_length = int(rng.integers(101, 1500))
        events = [(int(p), 1) for p in positions]

        segments = extract_rrr_segments(channel, events, window_length)
        assert len(segments) == n_beats - 2
        for segment in segments:
            window = segment.window
            source = channel[segment.r_index - segment.left_extent:segment.r_index + segment.right_extent + 1]
            assert window[window != 0].sum() == source.sum()
            assert window[segment.center] == channel[segment.r_index]

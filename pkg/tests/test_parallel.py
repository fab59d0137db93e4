import numpy as np

from netreserve.parallel import default_workers, run_spans, span_boundaries


def test_spans_cover_range_without_overlap():
    for n in (1, 5, 16, 17, 100):
        for w in (1, 2, 3, 8):
            spans = span_boundaries(n, w)
            flat = [i for lo, hi in spans for i in range(lo, hi)]
            assert flat == list(range(n))


def test_more_workers_than_items():
    spans = span_boundaries(3, 16)
    assert len(spans) <= 3
    assert all(hi > lo for lo, hi in spans)


def test_run_spans_matches_serial():
    def work(lo, hi):
        return np.arange(lo, hi) ** 2

    serial = np.concatenate(run_spans(10, 1, work))
    threaded = np.concatenate(run_spans(10, 4, work))
    assert np.array_equal(serial, threaded)


def test_run_spans_preserves_order():
    out = run_spans(12, 3, lambda lo, hi: list(range(lo, hi)))
    assert [i for chunk in out for i in chunk] == list(range(12))


def test_default_workers_positive():
    assert default_workers() >= 1

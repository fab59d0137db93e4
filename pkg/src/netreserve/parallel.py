"""Deterministic fan-out over worker threads.

Work is expressed as a function of an index span; spans partition the item
range in order and results are concatenated in span order, so the output is
identical for any worker count.  numpy releases the GIL inside its kernels,
which is where the solver spends its time.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def default_workers():
    return max(1, os.cpu_count() or 1)


def span_boundaries(n_items, workers):
    """Split range(n_items) into contiguous spans, one per worker at most."""
    parts = max(1, min(int(workers), n_items)) if n_items else 1
    bounds = [n_items * i // parts for i in range(parts + 1)]
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_spans(n_items, workers, fn):
    """Run fn(start, stop) over contiguous spans; results in span order."""
    spans = span_boundaries(n_items, workers)
    if len(spans) <= 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        futures = [pool.submit(fn, a, b) for a, b in spans]
        return [f.result() for f in futures]

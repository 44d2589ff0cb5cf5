"""Plumbing shared by the library and the command line: chunked parallel
trial execution and JSON-friendly conversion of report values."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Below this many trials per chunk, thread overhead beats the win from
# overlapping numpy work, so small jobs stay single-threaded.
_MIN_CHUNK = 128


def default_jobs():
    return os.cpu_count() or 1


def run_trial_chunks(fn, trials, jobs):
    """Evaluate fn(i0, i1) over a partition of range(trials), maybe threaded.

    fn must be pure; results are concatenated along axis 0 in chunk order,
    so the output never depends on scheduling.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    jobs = max(1, int(jobs))
    n_chunks = min(jobs, max(1, trials // _MIN_CHUNK))
    if n_chunks == 1:
        return fn(0, trials)
    edges = np.linspace(0, trials, n_chunks + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(edges, edges[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        parts = list(pool.map(lambda ab: fn(*ab), spans))
    return np.concatenate(parts, axis=0)


def jsonable(value):
    """Recursively convert report values to plain JSON-serializable types."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value

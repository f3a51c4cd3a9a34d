"""Small shared helpers."""

from __future__ import annotations

import os
import tempfile

import numpy as np

_MAX_SEED = 2**64 - 1


def check_seed(seed) -> int:
    """Validate a user-supplied seed as an unsigned 64-bit integer."""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    if not 0 <= seed <= _MAX_SEED:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return int(seed)


def atomic_write_text(path, text: str) -> None:
    """Write text to ``path`` via a temp file and rename; no partial files."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def resolve_workers(workers) -> int:
    """Normalize a worker-count option: None means all cores, minimum 1."""
    if workers is None:
        return os.cpu_count() or 1
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers

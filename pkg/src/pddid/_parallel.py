"""Worker-count resolution shared by the permutation engine and the experiment runner."""

from __future__ import annotations

import os
from typing import Optional

ENV_THREADS = "PDDID_THREADS"


def resolve_workers(requested: Optional[int] = None) -> int:
    """Number of workers to use, capped by ``PDDID_THREADS`` when set."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(ENV_THREADS, "").strip()
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {cap!r}") from None
    return max(1, int(n))

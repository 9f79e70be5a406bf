"""Shared setup for the demo scripts: an output folder and a synthetic corpus."""

from __future__ import annotations

import sys
from pathlib import Path

from fakeprobe.synthetic import make_corpus


def out_dir(name: str) -> Path:
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-out")
    path = root / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def corpus(root: Path, counts: dict[str, int], seed: int = 0, **kw) -> Path:
    return make_corpus(root / "corpus", counts, seed, **kw)

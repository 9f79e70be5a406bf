"""Seeded synthetic prompt-image corpora for desk-scale runs.

Each origin gets a base colour plus per-pixel noise, and every fake origin
can inject a marker token into its prompts. With distinct markers the
corpus is linearly separable under the toy text embedding, which is what
the end-to-end checks rely on.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import REAL
from .encoders import stable_hash64

VOCAB = (
    "dog cat bus street table man woman child kitchen pizza horse beach "
    "tree sky snow field train clock bench kite surfboard plate cake boat "
    "red green small large old wooden bright sitting standing near under "
    "with on in next to a the"
).split()

TOPICS = ("person", "animal", "vehicle", "food", "sports", "furniture")

DEFAULT_COLOURS = {
    REAL: (128, 128, 128),
    "SD": (200, 60, 60),
    "LD": (60, 200, 60),
    "GLIDE": (60, 60, 200),
    "DALLE2": (200, 200, 60),
}

DEFAULT_MARKERS = {"SD": "zqsd", "LD": "zqld", "GLIDE": "zqglide", "DALLE2": "zqdalle"}


def marker_safe_vocab(markers, dim: int = 16, vocab=VOCAB) -> tuple[str, ...]:
    """Drop vocabulary words that share a hashed-BoW slot with any marker.

    Without this a marker's slot also lights up for ordinary words and the
    toy text features stop being linearly separable by origin.
    """
    taken = {stable_hash64(m.lower()) % dim for m in markers}
    return tuple(w for w in vocab if stable_hash64(w) % dim not in taken)


def random_prompt(rng: np.random.Generator, n_words: int | None = None, vocab=VOCAB) -> str:
    n = n_words or int(rng.integers(4, 9))
    return " ".join(vocab[i] for i in rng.integers(0, len(vocab), n))


def make_image(rng, colour, size: int, noise: float = 40.0) -> np.ndarray:
    base = np.array(colour, dtype=np.float64)[None, None, :]
    img = base + noise * rng.standard_normal((size, size, 3))
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def make_corpus(
    root,
    counts: dict[str, int],
    seed: int = 0,
    *,
    size: int = 16,
    markers: dict[str, str] | None = None,
    colours: dict[str, tuple[int, int, int]] | None = None,
    noise: float = 40.0,
    dataset_tag: str = "toy",
    manifest_name: str = "manifest.jsonl",
    paired: bool = False,
) -> Path:
    """Write PNG images and a manifest under ``root``; return the manifest path.

    ``markers`` maps a fake origin to the token prepended to its prompts
    (default :data:`DEFAULT_MARKERS`; pass ``{}`` for none). Real prompts
    never carry a marker. With ``paired=True`` the i-th record of every
    origin shares one marker-free prompt, the layout prompt connection
    analysis pairs on. Prompts draw only from words whose hashed slot is
    free of every marker (see :func:`marker_safe_vocab`).
    """
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    markers = DEFAULT_MARKERS if markers is None else markers
    colours = {**DEFAULT_COLOURS, **(colours or {})}
    vocab = marker_safe_vocab([m for m in markers.values() if m])
    rng = np.random.default_rng(seed)
    lines = []
    shared = [random_prompt(rng, vocab=vocab) for _ in range(max(counts.values(), default=0))] if paired else []
    for origin in sorted(counts):
        colour = colours.get(origin, (100, 100, 160))
        for i in range(counts[origin]):
            rid = f"{dataset_tag}-{origin}-{i:05d}"
            rel = Path("images") / f"{rid}.png"
            Image.fromarray(make_image(rng, colour, size, noise)).save(root / rel, format="PNG")
            prompt = shared[i] if paired else random_prompt(rng, vocab=vocab)
            if not paired and origin != REAL and markers.get(origin):
                prompt = f"{markers[origin]} {prompt}"
            topics = [TOPICS[j] for j in sorted(set(rng.integers(0, len(TOPICS), 2).tolist()))]
            lines.append(
                {
                    "id": rid,
                    "image_path": str(rel),
                    "prompt": prompt,
                    "origin": origin,
                    "dataset_tag": dataset_tag,
                    "topics": topics,
                }
            )
    path = root / manifest_name
    with path.open("w", encoding="utf-8") as fh:
        for obj in lines:
            fh.write(json.dumps(obj) + "\n")
    return path

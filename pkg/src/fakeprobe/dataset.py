"""Prompt-image manifests, label schemes and balanced seeded splits."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DuplicateId,
    InsufficientRecords,
    MalformedRecord,
    MissingFile,
    SchemeMismatch,
    UndecodableImage,
)

REAL = "real"
SD = "SD"
LD = "LD"
GLIDE = "GLIDE"
DALLE2 = "DALLE2"
UNSEEN = "unseen"

KNOWN_ORIGINS = (REAL, SD, LD, GLIDE, DALLE2)

_ORIGIN_ALIASES = {
    "real": REAL,
    "sd": SD,
    "stable-diffusion": SD,
    "stable_diffusion": SD,
    "ld": LD,
    "latent-diffusion": LD,
    "latent_diffusion": LD,
    "glide": GLIDE,
    "dalle2": DALLE2,
    "dalle-2": DALLE2,
    "dall-e-2": DALLE2,
    "dall-e 2": DALLE2,
    "dall·e 2": DALLE2,
}


def normalize_origin(origin: str) -> str:
    """Map known generator names to their canonical spelling.

    Unknown names are kept verbatim and act as ``other(name)`` origins.
    """
    if not isinstance(origin, str) or not origin.strip():
        raise ValueError("origin must be a non-empty string")
    key = origin.strip()
    return _ORIGIN_ALIASES.get(key.lower(), key)


class LabelScheme(str, Enum):
    DETECTION = "detection"
    ATTRIBUTION = "attribution"
    OPEN_SET = "open_set"

    @property
    def class_names(self) -> tuple[str, ...]:
        return _CLASS_NAMES[self]

    @property
    def n_classes(self) -> int:
        return len(_CLASS_NAMES[self])


_CLASS_NAMES = {
    LabelScheme.DETECTION: ("fake", "real"),
    LabelScheme.ATTRIBUTION: (REAL, SD, LD, GLIDE),
    LabelScheme.OPEN_SET: (REAL, SD, LD, GLIDE, UNSEEN),
}

ATTRIBUTION_ORIGINS = (REAL, SD, LD, GLIDE)


@dataclass(frozen=True)
class PromptImagePair:
    id: str
    image_path: Path
    prompt: str
    origin: str
    dataset_tag: str
    topics: tuple[str, ...] = ()
    # number of prompts the source line carried; only the first is kept
    n_prompts: int = 1


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[PromptImagePair, ...]
    source_uri: str = ""
    errors: tuple[tuple[int, str], ...] = ()
    counts_by_origin: dict[str, int] = field(init=False)

    def __post_init__(self):
        seen: set[str] = set()
        for r in self.records:
            if r.id in seen:
                raise DuplicateId(r.id)
            seen.add(r.id)
        object.__setattr__(self, "counts_by_origin", dict(Counter(r.origin for r in self.records)))
        object.__setattr__(self, "_by_id", {r.id: r for r in self.records})

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, record_id: str) -> PromptImagePair:
        return self._by_id[record_id]

    def by_origin(self, origin: str) -> list[PromptImagePair]:
        """Records of one origin in canonical (id-sorted) order."""
        return sorted((r for r in self.records if r.origin == origin), key=lambda r: r.id)

    def filter(self, predicate) -> "DatasetManifest":
        return DatasetManifest(tuple(r for r in self.records if predicate(r)), self.source_uri)

    @property
    def multi_prompt(self) -> bool:
        return any(r.n_prompts > 1 for r in self.records)


def _parse_record(obj, base_dir: Path, check_images: bool) -> PromptImagePair:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    for key in ("id", "image_path", "prompt", "origin"):
        if key not in obj:
            raise ValueError(f"missing key {key!r}")
    rid = obj["id"]
    if not isinstance(rid, str) or not rid:
        raise ValueError("id must be a non-empty string")
    prompt = obj["prompt"]
    n_prompts = 1
    if isinstance(prompt, list):
        n_prompts = len(prompt)
        prompt = prompt[0] if prompt else ""
    if prompt is None:
        prompt = ""
    if not isinstance(prompt, str):
        raise ValueError("prompt must be a string or list of strings")
    try:
        origin = normalize_origin(obj["origin"])
    except ValueError as exc:
        raise ValueError(str(exc)) from None
    path = Path(obj["image_path"])
    if not path.is_absolute():
        path = base_dir / path
    if check_images and not path.is_file():
        raise ValueError(f"image_path not resolvable: {path}")
    topics = obj.get("topics") or ()
    if isinstance(topics, str):
        topics = (topics,)
    return PromptImagePair(
        id=rid,
        image_path=path,
        prompt=prompt,
        origin=origin,
        dataset_tag=str(obj.get("dataset_tag", "")),
        topics=tuple(str(t) for t in topics),
        n_prompts=n_prompts,
    )


def load_manifest(path, *, strict: bool = True, check_images: bool = True) -> DatasetManifest:
    """Read a line-delimited JSON manifest.

    Relative image paths resolve against the manifest's directory. Every bad
    line is collected; with ``strict`` the first one is raised as
    :class:`MalformedRecord` carrying the full report, otherwise the bad lines
    are returned in ``manifest.errors``. Duplicate ids always raise.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    base_dir = path.parent
    records: list[PromptImagePair] = []
    errors: list[tuple[int, str]] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = _parse_record(json.loads(line), base_dir, check_images)
            except (json.JSONDecodeError, ValueError) as exc:
                errors.append((line_no, str(exc)))
                continue
            if rec.id in seen:
                raise DuplicateId(rec.id)
            seen.add(rec.id)
            records.append(rec)
    if errors and strict:
        line_no, reason = errors[0]
        raise MalformedRecord(line_no, reason, errors)
    return DatasetManifest(tuple(records), str(path), tuple(errors))


def write_manifest(records: Iterable[PromptImagePair], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            obj = {
                "id": r.id,
                "image_path": str(r.image_path),
                "prompt": r.prompt,
                "origin": r.origin,
                "dataset_tag": r.dataset_tag,
            }
            if r.topics:
                obj["topics"] = list(r.topics)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_image(path) -> np.ndarray:
    """Decode an image file to an ``H x W x 3`` uint8 array."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except (UnidentifiedImageError, OSError) as exc:
        raise UndecodableImage(f"{path}: {exc}") from None


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[tuple[str, int], ...]
    test: tuple[tuple[str, int], ...]
    label_scheme: LabelScheme
    seed: int
    balanced: bool = True

    def __post_init__(self):
        train_ids = {rid for rid, _ in self.train}
        if train_ids & {rid for rid, _ in self.test}:
            raise ValueError("train and test partitions overlap")
        n = self.label_scheme.n_classes
        for _, label in self.train + self.test:
            if not 0 <= label < n:
                raise ValueError(f"label {label} outside scheme {self.label_scheme.value}")

    @property
    def ids(self) -> set[str]:
        return {rid for rid, _ in self.train + self.test}

    def class_counts(self, part: str = "train") -> dict[int, int]:
        rows = self.train if part == "train" else self.test
        counts = Counter(label for _, label in rows)
        return {c: counts.get(c, 0) for c in range(self.label_scheme.n_classes)}


def _sample(pool: Sequence[PromptImagePair], n: int, rng: np.random.Generator) -> list[PromptImagePair]:
    order = rng.permutation(len(pool))[:n]
    return [pool[i] for i in order]


def _build_split(
    manifest: DatasetManifest,
    groups: list[tuple[int, list[str]]],
    scheme: LabelScheme,
    n_per_class: int,
    seed: int,
    test_fraction: float,
    exclude_ids: Iterable[str],
) -> DatasetSplit:
    if n_per_class < 0:
        raise ValueError("n_per_class must be non-negative")
    if not 0.0 <= test_fraction <= 1.0:
        raise ValueError("test_fraction must lie in [0, 1]")
    excluded = set(exclude_ids)
    pools = []
    for label, origins in groups:
        pool = sorted(
            (r for r in manifest.records if r.origin in origins and r.id not in excluded),
            key=lambda r: r.id,
        )
        if len(pool) < n_per_class:
            raise InsufficientRecords("+".join(origins), len(pool), n_per_class)
        pools.append((label, pool))
    rng = np.random.default_rng(seed)
    n_test = int(round(n_per_class * test_fraction))
    train: list[tuple[str, int]] = []
    test: list[tuple[str, int]] = []
    for label, pool in pools:
        chosen = _sample(pool, n_per_class, rng)
        test.extend((r.id, label) for r in chosen[:n_test])
        train.extend((r.id, label) for r in chosen[n_test:])
    return DatasetSplit(tuple(train), tuple(test), scheme, seed)


def build_detection_split(
    manifest: DatasetManifest,
    fake_origin: str | Sequence[str],
    n_per_class: int,
    seed: int,
    *,
    test_fraction: float = 0.2,
    exclude_ids: Iterable[str] = (),
) -> DatasetSplit:
    """Balanced fake (label 0) vs real (label 1) split.

    ``fake_origin`` may name several origins, which are pooled into the fake
    class. ``test_fraction`` of each class goes to the holdout; records in
    ``exclude_ids`` are never drawn, which keeps evaluation sets disjoint from
    a training set.
    """
    fakes = [fake_origin] if isinstance(fake_origin, str) else list(fake_origin)
    fakes = [normalize_origin(o) for o in fakes]
    if REAL in fakes:
        raise SchemeMismatch("real cannot be a fake origin")
    groups = [(0, fakes), (1, [REAL])]
    return _build_split(manifest, groups, LabelScheme.DETECTION, n_per_class, seed, test_fraction, exclude_ids)


def build_attribution_split(
    manifest: DatasetManifest,
    n_per_class: int,
    seed: int,
    *,
    test_fraction: float = 0.2,
    exclude_ids: Iterable[str] = (),
) -> DatasetSplit:
    """Four balanced classes: 0 real, 1 SD, 2 LD, 3 GLIDE."""
    groups = [(i, [o]) for i, o in enumerate(ATTRIBUTION_ORIGINS)]
    return _build_split(manifest, groups, LabelScheme.ATTRIBUTION, n_per_class, seed, test_fraction, exclude_ids)


def build_open_set_split(
    manifest: DatasetManifest,
    unseen_origins: Sequence[str],
    n_per_class: int,
    seed: int,
    *,
    test_fraction: float = 1.0,
    exclude_ids: Iterable[str] = (),
) -> DatasetSplit:
    """Five balanced classes for unseen-model routing; unseen origins pool into label 4."""
    unseen = [normalize_origin(o) for o in unseen_origins]
    if not unseen or set(unseen) & set(ATTRIBUTION_ORIGINS):
        raise SchemeMismatch("unseen origins must be non-empty and outside real/SD/LD/GLIDE")
    groups = [(i, [o]) for i, o in enumerate(ATTRIBUTION_ORIGINS)] + [(4, unseen)]
    return _build_split(manifest, groups, LabelScheme.OPEN_SET, n_per_class, seed, test_fraction, exclude_ids)

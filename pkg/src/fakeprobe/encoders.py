"""Pluggable image/text encoders and captioners.

Every pipeline talks to an :class:`EncoderBackend`. Two deterministic toy
backends ship with the package so the whole toolkit runs without pretrained
weights:

``toy``
    10-d image features (channel means, channel standard deviations, signed
    and absolute mean row/column gradients of the luminance) and a 16-d hashed
    bag of words for text. Image and text live in different spaces.

``toy-joint``
    Image and text share one 16-d space: an image is embedded as the hashed
    bag of words of its own toy caption. Used where image and prompt
    embeddings are compared directly.

Pretrained adapters register themselves through :func:`register_backend` and
must pass :func:`check_conformance`.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import (
    BackendFailure,
    BackendMismatch,
    CaptionUnsupported,
    DimMismatch,
    EmptyPrompt,
    KindMismatch,
    UndecodableImage,
    UnknownBackend,
    ZeroVector,
)

KINDS = ("image", "text", "concat")
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    kind: str
    backend_id: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.kind not in KINDS:
            raise KindMismatch(f"unknown embedding kind {self.kind!r}")
        if values.size == 0:
            raise DimMismatch("embedding has zero dimensions")
        if not np.all(np.isfinite(values)):
            raise BackendFailure("embedding contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.backend_id == other.backend_id
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.kind, self.backend_id, self.values.tobytes()))


def as_rgb(image) -> np.ndarray:
    """Coerce an RGB raster (uint8 or float in [0, 255]) to float64 ``H x W x 3``."""
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] not in (3, 4) or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise UndecodableImage(f"expected an H x W x 3 raster, got shape {arr.shape}")
    arr = arr[:, :, :3].astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise UndecodableImage("raster contains non-finite values")
    return arr


class EncoderBackend:
    """Interface every backend implements.

    Subclasses set ``backend_id``, ``image_dim``, ``text_dim`` and
    ``can_caption`` and override the three ``_``-prefixed hooks. The public
    methods validate inputs and wrap outputs.
    """

    backend_id: str = "abstract"
    image_dim: int = 0
    text_dim: int = 0
    can_caption: bool = False

    def encode_image(self, image) -> EmbeddingVector:
        rgb = as_rgb(image)
        try:
            values = self._encode_image(rgb)
        except (UndecodableImage, BackendFailure):
            raise
        except Exception as exc:  # adapter errors surface as backend failures
            raise BackendFailure(f"{self.backend_id}: {exc}") from exc
        vec = EmbeddingVector(values, "image", self.backend_id)
        if vec.dim != self.image_dim:
            raise BackendFailure(f"{self.backend_id}: image embedding has dim {vec.dim}, expected {self.image_dim}")
        return vec

    def encode_text(self, prompt: str) -> EmbeddingVector:
        if not isinstance(prompt, str) or not prompt.strip():
            raise EmptyPrompt()
        try:
            values = self._encode_text(prompt)
        except Exception as exc:
            raise BackendFailure(f"{self.backend_id}: {exc}") from exc
        vec = EmbeddingVector(values, "text", self.backend_id)
        if vec.dim != self.text_dim:
            raise BackendFailure(f"{self.backend_id}: text embedding has dim {vec.dim}, expected {self.text_dim}")
        return vec

    def generate_caption(self, image) -> str:
        if not self.can_caption:
            raise CaptionUnsupported(f"backend {self.backend_id!r} cannot caption")
        caption = self._caption(as_rgb(image))
        if not caption or not caption.strip():
            raise BackendFailure(f"{self.backend_id}: empty caption")
        return caption

    def _encode_image(self, rgb: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _encode_text(self, prompt: str) -> np.ndarray:
        raise NotImplementedError

    def _caption(self, rgb: np.ndarray) -> str:
        raise CaptionUnsupported(f"backend {self.backend_id!r} cannot caption")

    def describe(self) -> dict:
        return {"backend_id": self.backend_id, "image_dim": self.image_dim, "text_dim": self.text_dim}


# -- toy backends ------------------------------------------------------------


def luminance(rgb: np.ndarray) -> np.ndarray:
    return rgb @ LUMA


def toy_image_features(rgb: np.ndarray) -> np.ndarray:
    """The 10 toy image features, each scaled into [0, 1].

    ``[mean_r, mean_g, mean_b, std_r, std_g, std_b,
    row_grad, col_grad, |row_grad|, |col_grad|]``. Means divide by 255 and
    standard deviations by 127.5 (the largest possible std of 8-bit data).
    Gradients are first differences of luminance down the rows and across
    the columns; the signed means map ``[-255, 255]`` onto ``[0, 1]``. A
    single-row or single-column image has zero gradient along that axis.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    means = rgb.mean(axis=(0, 1)) / 255.0
    stds = rgb.std(axis=(0, 1)) / 127.5
    y = luminance(rgb)
    drow = np.diff(y, axis=0)
    dcol = np.diff(y, axis=1)
    row = drow.mean() if drow.size else 0.0
    col = dcol.mean() if dcol.size else 0.0
    arow = np.abs(drow).mean() if drow.size else 0.0
    acol = np.abs(dcol).mean() if dcol.size else 0.0
    grads = np.array([(row / 255.0 + 1.0) / 2.0, (col / 255.0 + 1.0) / 2.0, arow / 255.0, acol / 255.0])
    return np.clip(np.concatenate([means, stds, grads]), 0.0, 1.0)


FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


def stable_hash64(token: str) -> int:
    """64-bit FNV-1a of the token's UTF-8 bytes."""
    h = FNV64_OFFSET
    for byte in token.encode("utf-8"):
        h = ((h ^ byte) * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def hashed_bag_of_words(text: str, dim: int = 16) -> np.ndarray:
    counts = np.zeros(dim)
    for tok in text.lower().split():
        counts[stable_hash64(tok) % dim] += 1.0
    norm = np.linalg.norm(counts)
    return counts / norm if norm > 0 else counts


def toy_caption(rgb: np.ndarray) -> str:
    r, g, b = (int(v) for v in np.floor(np.asarray(rgb, dtype=np.float64).mean(axis=(0, 1)) + 0.5))
    return f"image with mean rgb ({r},{g},{b})"


class ToyBackend(EncoderBackend):
    backend_id = "toy"
    image_dim = 10
    text_dim = 16

    def __init__(self, can_caption: bool = True):
        self.can_caption = can_caption

    def _encode_image(self, rgb):
        return toy_image_features(rgb)

    def _encode_text(self, prompt):
        return hashed_bag_of_words(prompt, self.text_dim)

    def _caption(self, rgb):
        return toy_caption(rgb)


class ToyJointBackend(ToyBackend):
    backend_id = "toy-joint"
    image_dim = 16
    text_dim = 16

    def _encode_image(self, rgb):
        return hashed_bag_of_words(toy_caption(rgb), self.image_dim)


class FixedCaptioner(EncoderBackend):
    """Wraps another backend but always captions with a fixed string."""

    can_caption = True

    def __init__(self, inner: EncoderBackend, caption: str):
        self.inner = inner
        self.caption = caption
        self.backend_id = inner.backend_id
        self.image_dim = inner.image_dim
        self.text_dim = inner.text_dim

    def _encode_image(self, rgb):
        return self.inner.encode_image(rgb).values

    def _encode_text(self, prompt):
        return self.inner.encode_text(prompt).values

    def _caption(self, rgb):
        return self.caption


_REGISTRY: dict[str, Callable[[], EncoderBackend]] = {
    "toy": ToyBackend,
    "toy-joint": ToyJointBackend,
}


def register_backend(name: str, factory: Callable[[], EncoderBackend]) -> None:
    _REGISTRY[name] = factory


def get_backend(name: str) -> EncoderBackend:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise UnknownBackend(f"unknown backend {name!r}; known: {sorted(_REGISTRY)}") from None


def available_backends() -> list[str]:
    return sorted(_REGISTRY)


# -- module-level operations --------------------------------------------------


def encode_image(backend: EncoderBackend, image) -> EmbeddingVector:
    return backend.encode_image(image)


def encode_text(backend: EncoderBackend, prompt: str) -> EmbeddingVector:
    return backend.encode_text(prompt)


def generate_caption(backend: EncoderBackend, image) -> str:
    return backend.generate_caption(image)


def concat_embeddings(img: EmbeddingVector, txt: EmbeddingVector) -> EmbeddingVector:
    if img.kind != "image" or txt.kind != "text":
        raise KindMismatch(f"expected (image, text), got ({img.kind}, {txt.kind})")
    if img.backend_id != txt.backend_id:
        raise BackendMismatch(f"{img.backend_id!r} vs {txt.backend_id!r}")
    return EmbeddingVector(np.concatenate([img.values, txt.values]), "concat", img.backend_id)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two embeddings (or plain vectors)."""
    u = a.values if isinstance(a, EmbeddingVector) else np.asarray(a, dtype=np.float64).reshape(-1)
    v = b.values if isinstance(b, EmbeddingVector) else np.asarray(b, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise DimMismatch(f"dims {u.size} and {v.size} differ")
    su, sv = float(np.max(np.abs(u), initial=0.0)), float(np.max(np.abs(v), initial=0.0))
    if su == 0.0 or sv == 0.0:
        raise ZeroVector("cosine similarity of an all-zero vector")
    # rescale first so tiny or huge entries neither underflow nor overflow
    u, v = u / su, v / sv
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    return max(-1.0, min(1.0, float(u @ v) / (nu * nv)))


# -- embedding cache ---------------------------------------------------------


def write_embedding_cache(entries: Iterable[tuple[str, EmbeddingVector]], path) -> None:
    """One JSON object per line; values keep 9 significant digits."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for rid, vec in entries:
            obj = {
                "id": rid,
                "kind": vec.kind,
                "backend_id": vec.backend_id,
                "dim": vec.dim,
                "values": [float(f"{x:.9g}") for x in vec.values],
            }
            fh.write(json.dumps(obj) + "\n")


def read_embedding_cache(path) -> dict[tuple[str, str], EmbeddingVector]:
    """Load a cache file keyed by ``(id, kind)``."""
    out: dict[tuple[str, str], EmbeddingVector] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            vec = EmbeddingVector(np.array(obj["values"], dtype=np.float64), obj["kind"], obj["backend_id"])
            if vec.dim != obj["dim"]:
                raise DimMismatch(f"cache entry {obj['id']!r} declares dim {obj['dim']}, holds {vec.dim}")
            out[(obj["id"], obj["kind"])] = vec
    return out


# -- conformance -------------------------------------------------------------


def check_conformance(backend: EncoderBackend, image=None, prompt: str = "a photo of a dog") -> None:
    """Assert the contract any backend adapter must honour.

    Raises ``AssertionError`` on the first violation.
    """
    if image is None:
        rng = np.random.default_rng(0)
        image = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
    assert isinstance(backend.backend_id, str) and backend.backend_id
    assert backend.image_dim > 0 and backend.text_dim > 0
    a, b = backend.encode_image(image), backend.encode_image(np.array(image))
    assert a.kind == "image" and a.dim == backend.image_dim and a.backend_id == backend.backend_id
    assert np.array_equal(a.values, b.values), "image encoding is not deterministic"
    t1, t2 = backend.encode_text(prompt), backend.encode_text(prompt)
    assert t1.kind == "text" and t1.dim == backend.text_dim
    assert np.array_equal(t1.values, t2.values), "text encoding is not deterministic"
    try:
        backend.encode_text("")
    except EmptyPrompt:
        pass
    else:
        raise AssertionError("empty prompt accepted")
    if backend.can_caption:
        cap = backend.generate_caption(image)
        assert isinstance(cap, str) and cap.strip()
    else:
        try:
            backend.generate_caption(image)
        except CaptionUnsupported:
            pass
        else:
            raise AssertionError("caption produced despite can_caption=False")


def _round9(values: np.ndarray) -> np.ndarray:
    return np.array([float(f"{x:.9g}") for x in values])


class CachingBackend(EncoderBackend):
    """Persists another backend's embeddings in a line-delimited cache file.

    Entries are keyed by a SHA-256 of the raster (or prompt). Every vector
    passes through the cache's 9-significant-digit rounding, including the
    ones computed fresh, so a run gives the same numbers whether or not the
    cache was warm.
    """

    def __init__(self, inner: EncoderBackend, cache_dir):
        self.inner = inner
        self.backend_id = inner.backend_id
        self.image_dim = inner.image_dim
        self.text_dim = inner.text_dim
        self.can_caption = inner.can_caption
        self.path = Path(cache_dir) / f"{inner.backend_id}.emb.jsonl"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._entries = read_embedding_cache(self.path) if self.path.is_file() else {}
        self._dirty: list[tuple[str, EmbeddingVector]] = []

    @staticmethod
    def _key(data: bytes) -> str:
        return hashlib.sha256(data).hexdigest()

    def _lookup(self, key: str, kind: str, compute) -> np.ndarray:
        hit = self._entries.get((key, kind))
        if hit is None:
            hit = EmbeddingVector(_round9(compute()), kind, self.backend_id)
            self._entries[(key, kind)] = hit
            self._dirty.append((key, hit))
        return hit.values

    def _encode_image(self, rgb):
        key = self._key(repr(rgb.shape).encode() + np.ascontiguousarray(rgb).tobytes())
        return self._lookup(key, "image", lambda: self.inner.encode_image(rgb).values)

    def _encode_text(self, prompt):
        return self._lookup(self._key(prompt.encode("utf-8")), "text", lambda: self.inner.encode_text(prompt).values)

    def _caption(self, rgb):
        return self.inner.generate_caption(rgb)

    def flush(self) -> None:
        if not self._dirty:
            return
        with self.path.open("a", encoding="utf-8") as fh:
            for rid, vec in self._dirty:
                obj = {"id": rid, "kind": vec.kind, "backend_id": vec.backend_id, "dim": vec.dim,
                       "values": [float(f"{x:.9g}") for x in vec.values]}
                fh.write(json.dumps(obj) + "\n")
        self._dirty.clear()

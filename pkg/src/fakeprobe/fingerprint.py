"""Frequency-domain fingerprints of image sources.

A fingerprint is the average 2-D Fourier magnitude of a set of grayscale
images, passed through ``log1p`` and shifted so the zero frequency sits at
the centre. Magnitudes (not complex values) are averaged, since phases
differ from image to image and would cancel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .dataset import load_image
from .errors import EmptyImage, EmptySequence, MixedResolutions, ResolutionMismatch, UnwritablePath

LUMA = np.array([0.299, 0.587, 0.114])


# -- transforms --------------------------------------------------------------


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_rows(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 transform along axis 0 (length a power of two)."""
    n = x.shape[0]
    a = x[_bit_reverse(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)[None, :, None]
        blocks = a.reshape(n // size, size, -1)
        even = blocks[:, :half]
        odd = blocks[:, half:] * tw
        a = np.concatenate([even + odd, even - odd], axis=1).reshape(n, -1)
        size *= 2
    return a


def _dft_rows(x: np.ndarray) -> np.ndarray:
    """Direct-sum transform along axis 0, any length."""
    n = x.shape[0]
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return w @ x.astype(np.complex128)


def _transform_rows(x: np.ndarray) -> np.ndarray:
    return _fft_rows(x) if _is_pow2(x.shape[0]) else _dft_rows(x)


def dft2(image) -> np.ndarray:
    """Unnormalised 2-D DFT, ``X[u, v] = sum x[m, n] exp(-2 pi i (um/H + vn/W))``.

    Power-of-two axes use the radix-2 path; any other length falls back to
    the direct sum.
    """
    x = np.asarray(image)
    if x.ndim != 2 or x.size == 0:
        raise EmptyImage(f"dft2 needs a non-empty 2-D array, got shape {x.shape}")
    out = _transform_rows(x)
    return _transform_rows(out.T).T


def center_shift(a: np.ndarray) -> np.ndarray:
    """Move the zero frequency to the centre (index ``H // 2, W // 2``)."""
    return np.fft.fftshift(a)


def uncenter_shift(a: np.ndarray) -> np.ndarray:
    return np.fft.ifftshift(a)


# -- preprocessing -----------------------------------------------------------


def to_gray(image, size: int | tuple[int, int] | None = None) -> np.ndarray:
    """Luminance in [0, 255]; optional bilinear resize to ``size``.

    Accepts a path, an ``H x W x 3`` raster or an already grayscale matrix.
    """
    if isinstance(image, (str, Path)):
        image = load_image(image)
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[:, :, :3] @ LUMA
    if arr.ndim != 2 or arr.size == 0:
        raise EmptyImage(f"cannot interpret array of shape {arr.shape} as an image")
    if size is not None:
        h, w = (size, size) if isinstance(size, int) else size
        if arr.shape != (h, w):
            im = Image.fromarray(arr.astype(np.float32))
            arr = np.asarray(im.resize((w, h), Image.BILINEAR), dtype=np.float64)
    return arr


# -- averaging ---------------------------------------------------------------


class SpectrumAccumulator:
    """Running sum of ``|DFT|`` magnitudes; merging is associative."""

    def __init__(self, shape: tuple[int, int] | None = None):
        self.shape = shape
        self.total = None if shape is None else np.zeros(shape)
        self.count = 0

    def add(self, gray: np.ndarray) -> "SpectrumAccumulator":
        gray = np.asarray(gray, dtype=np.float64)
        if self.shape is None:
            self.shape = gray.shape
            self.total = np.zeros(gray.shape)
        elif gray.shape != self.shape:
            raise MixedResolutions(f"image of shape {gray.shape} in a set of {self.shape}")
        self.total += np.abs(dft2(gray))
        self.count += 1
        return self

    def merge(self, other: "SpectrumAccumulator") -> "SpectrumAccumulator":
        out = SpectrumAccumulator(self.shape or other.shape)
        if other.shape is not None and out.shape != other.shape:
            raise MixedResolutions("cannot merge accumulators of different shapes")
        for acc in (self, other):
            if acc.count:
                out.total = out.total + acc.total
                out.count += acc.count
        return out

    def mean(self) -> np.ndarray:
        if not self.count:
            raise EmptySequence("no images accumulated")
        return self.total / self.count


@dataclass(eq=False)
class SpectralFingerprint:
    magnitude: np.ndarray  # centred, log1p-scaled
    n_images: int
    source: str

    @property
    def resolution(self) -> tuple[int, int]:
        return tuple(self.magnitude.shape)

    def to_dict(self) -> dict:
        h, w = self.resolution
        return {
            "source": self.source,
            "n_images": self.n_images,
            "H": h,
            "W": w,
            "magnitudes": [float(v) for v in self.magnitude.reshape(-1)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralFingerprint":
        mag = np.array(d["magnitudes"], dtype=np.float64).reshape(d["H"], d["W"])
        return cls(mag, int(d["n_images"]), d["source"])


def fingerprint_from_accumulator(acc: SpectrumAccumulator, source: str) -> SpectralFingerprint:
    return SpectralFingerprint(center_shift(np.log1p(acc.mean())), acc.count, source)


def average_spectrum(images: Iterable, source: str, size=None) -> SpectralFingerprint:
    """Fingerprint of a non-empty image set.

    Every image is converted to luminance (and resized when ``size`` is
    given); all must then share one resolution.
    """
    acc = SpectrumAccumulator()
    for img in images:
        acc.add(to_gray(img, size))
    if acc.count == 0:
        raise EmptySequence("average_spectrum needs at least one image")
    return fingerprint_from_accumulator(acc, source)


def fingerprint_distance(a: SpectralFingerprint, b: SpectralFingerprint) -> float:
    """Root-mean-square difference of the two log-magnitude maps."""
    if a.resolution != b.resolution:
        raise ResolutionMismatch(f"{a.resolution} vs {b.resolution}")
    return float(np.sqrt(np.mean((a.magnitude - b.magnitude) ** 2)))


# -- output ------------------------------------------------------------------


def spectrum_to_uint8(magnitude: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 255]. A constant map renders uniform mid-gray (128)."""
    m = np.asarray(magnitude, dtype=np.float64)
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.full(m.shape, 128, dtype=np.uint8)
    return np.rint((m - lo) / (hi - lo) * 255.0).astype(np.uint8)


def render_spectrum(fp: SpectralFingerprint, path) -> Path:
    path = Path(path)
    try:
        Image.fromarray(spectrum_to_uint8(fp.magnitude)).save(path, format="PNG")
    except (OSError, ValueError) as exc:
        raise UnwritablePath(f"{path}: {exc}") from None
    return path


def save_fingerprint(fp: SpectralFingerprint, path) -> None:
    try:
        Path(path).write_text(json.dumps(fp.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise UnwritablePath(f"{path}: {exc}") from None


def load_fingerprint(path) -> SpectralFingerprint:
    return SpectralFingerprint.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

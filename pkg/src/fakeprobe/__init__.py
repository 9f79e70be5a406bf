"""Detection, attribution, spectral fingerprints and prompt analysis for text-to-image fakes."""

from __future__ import annotations

__version__ = "0.1.0"

from .attribution import AttributionResult, AttributorModel, attribute, sweep_thresholds, train_attributor
from .classifier import ConvNetConfig, TrainConfig
from .dataset import (
    DatasetManifest,
    DatasetSplit,
    LabelScheme,
    PromptImagePair,
    build_attribution_split,
    build_detection_split,
    build_open_set_split,
    load_manifest,
)
from .detection import DetectorModel, Verdict, detect, evaluate_detector, train_detector
from .encoders import EmbeddingVector, EncoderBackend, get_backend, register_backend
from .errors import FakeProbeError
from .fingerprint import SpectralFingerprint, average_spectrum, dft2
from .pipeline import Mode, Provenance

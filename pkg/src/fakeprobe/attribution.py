"""Source attribution (0 real, 1 SD, 2 LD, 3 GLIDE) with unseen-model routing.

Routing turns the 4-class attributor into a 5-class decision without
retraining: a sample whose top probability is strictly below the threshold
is assigned to ``unseen``. Every unseen generator shares that one class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classifier import ConvNetConfig, TrainConfig
from .dataset import UNSEEN, DatasetManifest, DatasetSplit, LabelScheme
from .encoders import EncoderBackend
from .errors import BadThreshold, ModelFormatError, SchemeMismatch
from .pipeline import ForensicModel, Mode, Provenance, load_model_dict, model_from_dict, report_notes, split_records, train_model
from .reports import EvaluationReport, build_report

DEFAULT_GRID = tuple(round(0.1 * i, 1) for i in range(11))
UNSEEN_LABEL = 4


class AttributorModel(ForensicModel):
    def __post_init__(self):
        super().__post_init__()
        if self.label_scheme is not LabelScheme.ATTRIBUTION:
            raise ModelFormatError("an attributor uses the attribution label scheme")

    @property
    def class_map(self) -> dict[int, str]:
        return dict(enumerate(self.class_names))


@dataclass(frozen=True)
class AttributionResult:
    source: str
    confidence: float
    threshold_used: float | None
    prompt_provenance: Provenance = Provenance.NONE

    def to_row(self, record_id: str) -> dict:
        return {
            "id": record_id,
            "source": self.source,
            "confidence": self.confidence,
            "threshold_used": self.threshold_used,
        }


def _check_threshold(t):
    if t is not None and not (0.0 <= t <= 1.0):
        raise BadThreshold(f"threshold {t} outside [0, 1]")


def route(probs, threshold: float | None = None) -> tuple[int, float]:
    """Return ``(class index, confidence)``; index 4 means unseen."""
    _check_threshold(threshold)
    probs = np.asarray(probs, dtype=np.float64)
    k = int(np.argmax(probs))
    conf = float(probs[k])
    if threshold is not None and conf < threshold:
        return UNSEEN_LABEL, conf
    return k, conf


def route_batch(probs: np.ndarray, threshold: float | None) -> np.ndarray:
    _check_threshold(threshold)
    probs = np.asarray(probs, dtype=np.float64)
    pred = probs.argmax(axis=1)
    if threshold is not None:
        pred = np.where(probs.max(axis=1) < threshold, UNSEEN_LABEL, pred)
    return pred


def train_attributor(
    manifest: DatasetManifest,
    split: DatasetSplit,
    mode,
    config: TrainConfig,
    backend: EncoderBackend | None = None,
    *,
    hidden_dim: int = 256,
    conv: ConvNetConfig | None = None,
    normalize_embeddings: bool = False,
    jobs: int = 1,
) -> AttributorModel:
    if split.label_scheme is not LabelScheme.ATTRIBUTION:
        raise SchemeMismatch(f"attributor needs an attribution split, got {split.label_scheme.value}")
    present = {label for _, label in split.train}
    if present != set(range(4)):
        raise SchemeMismatch(f"attribution split must cover classes 0-3, found {sorted(present)}")
    return train_model(
        manifest, split, mode, config, backend=backend, hidden_dim=hidden_dim, conv=conv,
        normalize_embeddings=normalize_embeddings, jobs=jobs, cls=AttributorModel,
    )


def attribute(
    model: AttributorModel,
    image,
    prompt: str | None = None,
    threshold: float | None = None,
    *,
    backend=None,
    caption_backend=None,
) -> AttributionResult:
    _check_threshold(threshold)
    if model.mode is Mode.IMAGE_ONLY:
        prompt = None
    probs, prov = model.probabilities(image, prompt, backend, caption_backend)
    k, conf = route(probs, threshold)
    source = UNSEEN if k == UNSEEN_LABEL else model.class_names[k]
    return AttributionResult(source, conf, threshold, prov)


def attribute_records(model, records, threshold=None, *, backend=None, caption_backend=None, use_natural_prompts=True, jobs=1):
    _check_threshold(threshold)
    probs, prov = model.record_probabilities(records, backend, caption_backend, use_natural_prompts, jobs)
    out = []
    for p, v in zip(probs, prov):
        k, conf = route(p, threshold)
        out.append(AttributionResult(UNSEEN if k == UNSEEN_LABEL else model.class_names[k], conf, threshold, v))
    return out


def evaluate_attributor(model, manifest, split, backend=None, *, caption_backend=None, use_natural_prompts=True, jobs=1) -> EvaluationReport:
    if split.label_scheme is not LabelScheme.ATTRIBUTION:
        raise SchemeMismatch(f"expected an attribution split, got {split.label_scheme.value}")
    records, y = split_records(manifest, split.test)
    probs, _ = model.record_probabilities(records, backend, caption_backend, use_natural_prompts, jobs)
    pred = probs.argmax(axis=1) if len(probs) else np.zeros(0, dtype=np.int64)
    tag = "+".join(sorted({r.dataset_tag for r in records}))
    notes = report_notes(model, records, use_natural_prompts)
    return build_report(y, pred, LabelScheme.ATTRIBUTION, dataset_tag=tag, model_digest=model.digest, notes=notes)


def sweep_from_probabilities(probs, labels, thresholds: Sequence[float] = DEFAULT_GRID) -> list[tuple[float, float]]:
    """Open-set accuracy of threshold routing for each threshold.

    ``probs`` are 4-class attributor outputs, ``labels`` use the 5-class
    open-set scheme (4 = unseen).
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    rows = []
    for t in thresholds:
        pred = route_batch(probs, t)
        acc = float((pred == labels).mean()) if len(labels) else 0.0
        rows.append((float(t), acc))
    return rows


def sweep_thresholds(
    model: AttributorModel,
    manifest: DatasetManifest,
    split5: DatasetSplit,
    thresholds: Sequence[float] = DEFAULT_GRID,
    backend=None,
    *,
    caption_backend=None,
    use_natural_prompts: bool = True,
    jobs: int = 1,
) -> list[tuple[float, float]]:
    """Evaluate routing on the holdout of a 5-class open-set split."""
    if split5.label_scheme is not LabelScheme.OPEN_SET:
        raise SchemeMismatch(f"threshold sweep needs an open-set split, got {split5.label_scheme.value}")
    for t in thresholds:
        _check_threshold(t)
    records, y = split_records(manifest, split5.test)
    probs, _ = model.record_probabilities(records, backend, caption_backend, use_natural_prompts, jobs)
    return sweep_from_probabilities(probs, y, thresholds)


def load_attributor(path) -> AttributorModel:
    return model_from_dict(load_model_dict(path), AttributorModel)

"""Binary fake/real detectors (label 0 = fake, 1 = real)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import ConvNetConfig, MlpParams, TrainConfig, init_convnet
from .dataset import DatasetManifest, DatasetSplit, LabelScheme
from .encoders import EncoderBackend
from .errors import ModelFormatError, SchemeMismatch
from .pipeline import ForensicModel, Mode, Provenance, load_model_dict, model_from_dict, report_notes, split_records, train_model
from .reports import EvaluationReport, build_report

FAKE, REAL_LABEL = 0, 1


class DetectorModel(ForensicModel):
    def __post_init__(self):
        super().__post_init__()
        if self.label_scheme is not LabelScheme.DETECTION:
            raise ModelFormatError("a detector uses the detection label scheme")


@dataclass(frozen=True)
class Verdict:
    label: str  # "fake" or "real"
    confidence: float
    prompt_provenance: Provenance
    p_real: float

    def to_row(self, record_id: str) -> dict:
        return {
            "id": record_id,
            "label": self.label,
            "confidence": self.confidence,
            "prompt_provenance": self.prompt_provenance.value,
        }


def verdict_from_probs(probs: np.ndarray, provenance: Provenance) -> Verdict:
    k = int(np.argmax(probs))
    return Verdict(("fake", "real")[k], float(probs[k]), Provenance(provenance), float(probs[REAL_LABEL]))


def train_detector(
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
) -> DetectorModel:
    """Train on ``split.train``; ``split.test`` is tracked as holdout in ``model.history``.

    Hybrid mode needs ``backend`` and a non-empty prompt on every record.
    The trained core must pass a gradient check before it is returned.
    """
    if split.label_scheme is not LabelScheme.DETECTION:
        raise SchemeMismatch(f"detector needs a detection split, got {split.label_scheme.value}")
    return train_model(
        manifest, split, mode, config, backend=backend, hidden_dim=hidden_dim, conv=conv,
        normalize_embeddings=normalize_embeddings, jobs=jobs, cls=DetectorModel,
    )


def detect(model: DetectorModel, image, prompt: str | None = None, *, backend=None, caption_backend=None) -> Verdict:
    """Classify one image.

    Image-only models ignore ``prompt``. Hybrid models use ``prompt`` when
    given and otherwise caption the image with ``caption_backend``.
    """
    if model.mode is Mode.IMAGE_ONLY:
        prompt = None
    probs, prov = model.probabilities(image, prompt, backend, caption_backend)
    return verdict_from_probs(probs, prov)


def detect_records(model, records, *, backend=None, caption_backend=None, use_natural_prompts=True, jobs=1):
    probs, prov = model.record_probabilities(records, backend, caption_backend, use_natural_prompts, jobs)
    return [verdict_from_probs(p, v) for p, v in zip(probs, prov)]


def evaluate_detector(
    model: DetectorModel,
    manifest: DatasetManifest,
    split: DatasetSplit,
    backend=None,
    *,
    caption_backend=None,
    use_natural_prompts: bool = True,
    part: str = "test",
    jobs: int = 1,
) -> EvaluationReport:
    if split.label_scheme is not LabelScheme.DETECTION:
        raise SchemeMismatch(f"expected a detection split, got {split.label_scheme.value}")
    rows = split.test if part == "test" else split.train
    records, y = split_records(manifest, rows)
    probs, prov = model.record_probabilities(records, backend, caption_backend, use_natural_prompts, jobs)
    pred = probs.argmax(axis=1) if len(probs) else np.zeros(0, dtype=np.int64)
    tags = sorted({r.dataset_tag for r in records})
    notes = report_notes(model, records, use_natural_prompts)
    return build_report(y, pred, LabelScheme.DETECTION, dataset_tag="+".join(tags), model_digest=model.digest, notes=notes)


def load_detector(path) -> DetectorModel:
    return model_from_dict(load_model_dict(path), DetectorModel)


def constant_detector(label: int, backend: EncoderBackend | None = None, resolution: int = 8) -> DetectorModel:
    """A detector that answers ``label`` for every input, whatever the image.

    All weights are zero and the output bias favours ``label``. Hybrid when a
    backend is given, image-only otherwise.
    """
    bias = np.zeros(2)
    bias[label] = 1.0
    if backend is not None:
        d = backend.image_dim + backend.text_dim
        core = MlpParams(np.zeros((1, d)), np.zeros(1), np.zeros((2, 1)), bias, "relu")
        return DetectorModel(Mode.HYBRID, core, LabelScheme.DETECTION, backend.backend_id, backend.image_dim, backend.text_dim)
    net = init_convnet(ConvNetConfig(1, (1,), resolution, 3, 2), 0)
    arrays = {k: np.zeros_like(v) for k, v in net.arrays().items()}
    arrays["head.b"] = bias
    return DetectorModel(Mode.IMAGE_ONLY, net.with_arrays(arrays), LabelScheme.DETECTION)

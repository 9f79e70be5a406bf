"""Cross-model / cross-dataset evaluation and training-size ablation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .attribution import AttributorModel, evaluate_attributor, train_attributor
from .classifier import ConvNetConfig, TrainConfig
from .dataset import (
    ATTRIBUTION_ORIGINS,
    REAL,
    DatasetManifest,
    LabelScheme,
    build_attribution_split,
    build_detection_split,
)
from .detection import evaluate_detector, train_detector
from .errors import EmptyDataset, InsufficientRecords
from .reports import EvaluationReport, build_report  # noqa: F401  re-exported

# Accuracies reported for full-scale runs (real generators, pretrained
# encoders). Attached to reports as context only; never asserted.
REFERENCE_ACCURACY = {
    ("detection", "image_only", "SD", "LD", "MSCOCO"): 0.834,
    ("detection", "image_only", "SD", "GLIDE", "MSCOCO"): 0.613,
    ("detection", "image_only", "SD", "DALLE2", "MSCOCO"): 0.554,
    ("detection", "hybrid-natural", "SD", "LD", "MSCOCO"): 0.932,
    ("detection", "hybrid-natural", "SD", "GLIDE", "MSCOCO"): 0.899,
    ("detection", "hybrid-natural", "SD", "DALLE2", "MSCOCO"): 0.885,
    ("detection", "hybrid-generated", "SD", "LD", "MSCOCO"): 0.945,
    ("detection", "hybrid-generated", "SD", "GLIDE", "MSCOCO"): 0.909,
    ("detection", "hybrid-generated", "SD", "DALLE2", "MSCOCO"): 0.891,
    ("attribution", "image_only", "MSCOCO", "all", "MSCOCO"): 0.864,
    ("attribution", "image_only", "MSCOCO", "all", "Flickr30k"): 0.863,
    ("attribution", "hybrid-natural", "MSCOCO", "all", "MSCOCO"): 0.936,
    ("attribution", "hybrid-natural", "MSCOCO", "all", "Flickr30k"): 0.933,
    ("attribution", "hybrid-generated", "MSCOCO", "all", "MSCOCO"): 0.903,
    ("attribution", "hybrid-generated", "MSCOCO", "all", "Flickr30k"): 0.892,
}


@dataclass(frozen=True)
class CrossRow:
    train_source: str
    eval_origin: str
    dataset_tag: str
    accuracy: float
    n_total: int

    def to_dict(self) -> dict:
        return {
            "train_source": self.train_source,
            "eval_origin": self.eval_origin,
            "dataset_tag": self.dataset_tag,
            "accuracy": self.accuracy,
            "n_total": self.n_total,
        }


def _manifest_tag(manifest: DatasetManifest) -> str:
    tags = sorted({r.dataset_tag for r in manifest.records if r.dataset_tag})
    return "+".join(tags) or manifest.source_uri


def _available(manifest, origin, excluded) -> int:
    return sum(1 for r in manifest.records if r.origin == origin and r.id not in excluded)


def cross_matrix(
    model,
    manifests: Sequence[DatasetManifest],
    eval_origins: Sequence[str] | None = None,
    backend=None,
    *,
    caption_backend=None,
    use_natural_prompts: bool = True,
    n_per_class: int | None = None,
    seed: int = 0,
    exclude_ids=(),
    train_source: str = "",
    jobs: int = 1,
) -> list[CrossRow]:
    """Evaluate a trained model on every (eval origin x manifest) pair.

    Detectors get one balanced fake-vs-real set per generator origin;
    attributors get one balanced 4-class set per manifest (``eval_origin`` =
    ``all``). ``n_per_class=None`` uses as many records as the scarcer class
    allows. Ids in ``exclude_ids`` (typically the training set) are never
    evaluated.
    """
    excluded = set(exclude_ids)
    rows: list[CrossRow] = []
    if isinstance(model, AttributorModel):
        for m in manifests:
            n = n_per_class
            if n is None:
                n = min(_available(m, o, excluded) for o in ATTRIBUTION_ORIGINS)
            split = build_attribution_split(m, n, seed, test_fraction=1.0, exclude_ids=excluded)
            rep = evaluate_attributor(model, m, split, backend, caption_backend=caption_backend,
                                      use_natural_prompts=use_natural_prompts, jobs=jobs)
            rows.append(CrossRow(train_source, "all", _manifest_tag(m), rep.accuracy, rep.n_total))
        return rows

    if eval_origins is None:
        eval_origins = sorted({r.origin for m in manifests for r in m.records if r.origin != REAL})
    for origin in eval_origins:
        for m in manifests:
            n = n_per_class
            if n is None:
                n = min(_available(m, origin, excluded), _available(m, REAL, excluded))
                if n == 0:
                    short = origin if _available(m, origin, excluded) == 0 else REAL
                    raise InsufficientRecords(short, 0, 1)
            split = build_detection_split(m, origin, n, seed, test_fraction=1.0, exclude_ids=excluded)
            rep = evaluate_detector(model, m, split, backend, caption_backend=caption_backend,
                                    use_natural_prompts=use_natural_prompts, jobs=jobs)
            rows.append(CrossRow(train_source, origin, _manifest_tag(m), rep.accuracy, rep.n_total))
    return rows


@dataclass(frozen=True)
class SizeRow:
    size: int
    accuracy: float
    n_eval: int

    def to_dict(self) -> dict:
        return {"size": self.size, "accuracy": self.accuracy, "n_eval": self.n_eval}


def size_ablation(
    manifest: DatasetManifest,
    sizes: Sequence[int],
    mode,
    config: TrainConfig,
    backend=None,
    *,
    task: str = "detection",
    fake_origin: str = "SD",
    eval_n_per_class: int | None = None,
    hidden_dim: int = 256,
    conv: ConvNetConfig | None = None,
    jobs: int = 1,
) -> list[SizeRow]:
    """Train one model per total training size and score each on one shared holdout.

    ``size`` counts records over all classes (half real, half fake for
    detection; a quarter per class for attribution). All runs share
    ``config.seed``. The holdout is drawn first and excluded from every
    training draw.
    """
    scheme = LabelScheme.DETECTION if task == "detection" else LabelScheme.ATTRIBUTION
    c = scheme.n_classes
    per_class = []
    for s in sizes:
        if s // c < 1:
            raise EmptyDataset(f"training size {s} leaves no records per class")
        per_class.append(s // c)
    origins = [fake_origin, REAL] if task == "detection" else list(ATTRIBUTION_ORIGINS)
    if eval_n_per_class is None:
        eval_n_per_class = min(_available(manifest, o, set()) for o in origins) - max(per_class)
        if eval_n_per_class < 1:
            raise InsufficientRecords("+".join(origins), eval_n_per_class + max(per_class), max(per_class) + 1)

    def split_for(n, test_fraction, exclude):
        if task == "detection":
            return build_detection_split(manifest, fake_origin, n, config.seed, test_fraction=test_fraction, exclude_ids=exclude)
        return build_attribution_split(manifest, n, config.seed, test_fraction=test_fraction, exclude_ids=exclude)

    eval_split = split_for(eval_n_per_class, 1.0, ())
    held = eval_split.ids
    rows = []
    for s, n in zip(sizes, per_class):
        train_split = split_for(n, 0.0, held)
        if task == "detection":
            model = train_detector(manifest, train_split, mode, config, backend, hidden_dim=hidden_dim, conv=conv, jobs=jobs)
            rep = evaluate_detector(model, manifest, eval_split, backend, jobs=jobs)
        else:
            model = train_attributor(manifest, train_split, mode, config, backend, hidden_dim=hidden_dim, conv=conv, jobs=jobs)
            rep = evaluate_attributor(model, manifest, eval_split, backend, jobs=jobs)
        rows.append(SizeRow(int(s), rep.accuracy, rep.n_total))
    return rows


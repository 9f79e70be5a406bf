"""Shared machinery behind detectors and attributors.

A :class:`ForensicModel` couples a classifier core with the way its inputs
are built: rasters resized for the conv net (``image_only``) or the
concatenated image+prompt embedding for the MLP (``hybrid``).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from . import classifier as core
from .dataset import DatasetManifest, DatasetSplit, LabelScheme, PromptImagePair, load_image
from .encoders import EncoderBackend, as_rgb, concat_embeddings, get_backend
from .errors import (
    BackendMismatch,
    CaptionUnsupported,
    EmptyDataset,
    GradientCheckFailed,
    ModelFormatError,
    PromptMissing,
)

FORMAT_VERSION = 1
MLP_GRAD_TOL = 1e-4
CONV_GRAD_TOL = 1e-3


class Mode(str, Enum):
    IMAGE_ONLY = "image_only"
    HYBRID = "hybrid"


class Provenance(str, Enum):
    NATURAL = "natural"
    GENERATED = "generated"
    NONE = "none"


# -- input construction ------------------------------------------------------


def read_raster(image) -> np.ndarray:
    """Accept a path or an in-memory raster; return float ``H x W x 3``."""
    if isinstance(image, (str, Path)):
        image = load_image(image)
    return as_rgb(image)


def image_tensor(image, resolution: int) -> np.ndarray:
    """Bilinear resize to ``resolution`` square, scale to [0, 1], channels first."""
    rgb = read_raster(image)
    if rgb.shape[:2] != (resolution, resolution):
        im = Image.fromarray(np.clip(np.rint(rgb), 0, 255).astype(np.uint8))
        rgb = np.asarray(im.resize((resolution, resolution), Image.BILINEAR), dtype=np.float64)
    return (rgb / 255.0).transpose(2, 0, 1)


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def hybrid_vector(backend: EncoderBackend, image, prompt: str, normalize: bool = False) -> np.ndarray:
    """Image embedding followed by prompt embedding, optionally L2-normalised per block."""
    img = backend.encode_image(read_raster(image))
    txt = backend.encode_text(prompt)
    vec = concat_embeddings(img, txt).values
    if normalize:
        vec = np.concatenate([_unit(img.values), _unit(txt.values)])
    return vec


def resolve_prompt(prompt, image, caption_backend) -> tuple[str, Provenance]:
    """Natural prompt if present, otherwise a generated caption."""
    if prompt is not None and str(prompt).strip():
        return str(prompt), Provenance.NATURAL
    if caption_backend is None or not caption_backend.can_caption:
        raise CaptionUnsupported("no prompt supplied and no captioning backend available")
    return caption_backend.generate_caption(read_raster(image)), Provenance.GENERATED


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- model -------------------------------------------------------------------


@dataclass(eq=False)
class ForensicModel:
    mode: Mode
    core: object  # MlpParams or ConvNetParams
    label_scheme: LabelScheme
    backend_id: str | None = None
    image_dim: int | None = None
    text_dim: int | None = None
    normalize_embeddings: bool = False
    train_config_digest: str = ""
    history: core.TrainHistory | None = field(default=None, repr=False)

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.label_scheme = LabelScheme(self.label_scheme)
        if self.mode is Mode.HYBRID:
            if self.core.kind != "mlp":
                raise ModelFormatError("hybrid models use the MLP core")
            if self.backend_id is None or self.image_dim is None or self.text_dim is None:
                raise ModelFormatError("hybrid models must record backend id and dims")
            if self.core.input_shape != (self.image_dim + self.text_dim,):
                raise ModelFormatError("hybrid input dim must equal image_dim + text_dim")
        elif self.core.kind != "conv":
            raise ModelFormatError("image-only models use the conv core")
        if self.core.n_classes != self.label_scheme.n_classes:
            raise ModelFormatError("core output size does not match the label scheme")

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.label_scheme.class_names

    @property
    def digest(self) -> str:
        return core.params_digest(self.core)

    def check_backend(self, backend: EncoderBackend | None) -> EncoderBackend:
        if backend is None:
            backend = get_backend(self.backend_id)
        if backend.backend_id != self.backend_id:
            raise BackendMismatch(f"model was trained with {self.backend_id!r}, got {backend.backend_id!r}")
        if (backend.image_dim, backend.text_dim) != (self.image_dim, self.text_dim):
            raise BackendMismatch("backend dims differ from the ones recorded in the model")
        return backend

    def input_for(self, image, prompt=None, backend=None, caption_backend=None) -> tuple[np.ndarray, Provenance]:
        if self.mode is Mode.IMAGE_ONLY:
            return image_tensor(image, self.core.config.resolution), Provenance.NONE
        backend = self.check_backend(backend)
        # a caption from any backend is re-encoded by the model's own backend
        raster = read_raster(image)
        text, prov = resolve_prompt(prompt, raster, caption_backend)
        return hybrid_vector(backend, raster, text, self.normalize_embeddings), prov

    def probabilities(self, image, prompt=None, backend=None, caption_backend=None) -> tuple[np.ndarray, Provenance]:
        x, prov = self.input_for(image, prompt, backend, caption_backend)
        return core.softmax(core.forward(self.core, x)), prov

    def record_inputs(
        self,
        records: Sequence[PromptImagePair],
        backend=None,
        caption_backend=None,
        use_natural_prompts: bool = True,
        jobs: int = 1,
    ) -> tuple[np.ndarray, list[Provenance]]:
        if self.mode is Mode.HYBRID:
            backend = self.check_backend(backend)

        def one(r):
            prompt = r.prompt if use_natural_prompts else None
            return self.input_for(r.image_path, prompt, backend, caption_backend)

        out = _map(one, list(records), jobs)
        if not out:
            return np.zeros((0, *self.core.input_shape)), []
        return np.stack([x for x, _ in out]), [p for _, p in out]

    def record_probabilities(self, records, backend=None, caption_backend=None, use_natural_prompts=True, jobs=1):
        X, prov = self.record_inputs(records, backend, caption_backend, use_natural_prompts, jobs)
        return core.predict_proba(self.core, X), prov

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        backend = None
        if self.mode is Mode.HYBRID:
            backend = {"backend_id": self.backend_id, "image_dim": self.image_dim, "text_dim": self.text_dim}
        return {
            "format_version": FORMAT_VERSION,
            "mode": self.mode.value,
            "label_scheme": self.label_scheme.value,
            "class_names": list(self.class_names),
            "backend": backend,
            "normalize_embeddings": self.normalize_embeddings,
            "train_config_digest": self.train_config_digest,
            "core": core.params_to_dict(self.core),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def model_from_dict(d: dict, cls=ForensicModel) -> ForensicModel:
    if d.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {d.get('format_version')!r}")
    backend = d.get("backend") or {}
    return cls(
        mode=d["mode"],
        core=core.params_from_dict(d["core"]),
        label_scheme=d["label_scheme"],
        backend_id=backend.get("backend_id"),
        image_dim=backend.get("image_dim"),
        text_dim=backend.get("text_dim"),
        normalize_embeddings=d.get("normalize_embeddings", False),
        train_config_digest=d.get("train_config_digest", ""),
    )


def load_model_dict(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        from .errors import MissingFile

        raise MissingFile(path) from None
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None


# -- training ----------------------------------------------------------------


def verify_gradients(params, X, y, seed: int, epsilon: float = 1e-5) -> float:
    """Gradient check on a jittered copy of ``X``; raises if above tolerance.

    The jitter seed advances until no ReLU pre-activation sits within
    ``10 * epsilon`` of its kink. Inputs that keep units pinned near zero
    (an all-black raster, say) can defeat that, so coordinates whose
    perturbation still flips a ReLU are skipped; at least half must remain.
    The relative-error floor sits at the finite-difference roundoff level
    divided by the tolerance, so gradients too small to resolve are compared
    absolutely.
    """
    jittered = core.jitter_batch(X, seed)
    for k in range(1, 20):
        if np.abs(core.preactivations(params, jittered)).min(initial=np.inf) > 10 * epsilon:
            break
        jittered = core.jitter_batch(X, seed + k)
    if params.kind == "mlp":
        n_params = sum(a.size for a in params.arrays().values())
        per_array = None if n_params <= 20000 else 256
        tol = MLP_GRAD_TOL
    else:
        per_array = 12
        tol = CONV_GRAD_TOL
    loss, _ = core.loss_and_grad(params, jittered, y)
    roundoff = 8 * np.finfo(np.float64).eps * max(1.0, abs(loss)) / epsilon
    result = core.gradient_check_detail(
        params, jittered, y, epsilon, max_per_array=per_array, seed=seed,
        floor=max(1e-7, roundoff / tol), skip_kinks=True,
    )
    if result.n_checked == 0 or result.n_skipped > result.n_checked:
        raise GradientCheckFailed(
            float("nan"), tol,
            f"gradient check inconclusive: {result.n_skipped} of {result.n_checked + result.n_skipped} "
            "coordinates straddle a ReLU kink",
        )
    if not result.max_rel_error < tol:
        raise GradientCheckFailed(result.max_rel_error, tol)
    return result.max_rel_error


def split_records(manifest: DatasetManifest, rows) -> tuple[list[PromptImagePair], np.ndarray]:
    return [manifest[rid] for rid, _ in rows], np.array([label for _, label in rows], dtype=np.int64)


def report_notes(model: ForensicModel, records, use_natural_prompts: bool) -> dict:
    """Prompt-source notes attached to evaluation reports of hybrid models."""
    notes: dict = {}
    if model.mode is Mode.HYBRID:
        notes["prompts"] = "natural" if use_natural_prompts else "generated"
        if any(r.n_prompts > 1 for r in records):
            notes["first_prompt_only"] = True
    return notes


def train_model(
    manifest: DatasetManifest,
    split: DatasetSplit,
    mode,
    config: core.TrainConfig,
    *,
    backend: EncoderBackend | None = None,
    hidden_dim: int = 256,
    conv: core.ConvNetConfig | None = None,
    normalize_embeddings: bool = False,
    check_gradients: bool = True,
    jobs: int = 1,
    cls=ForensicModel,
) -> ForensicModel:
    mode = Mode(mode)
    scheme = split.label_scheme
    if not split.train:
        raise EmptyDataset("split has no training records")
    train_recs, y_train = split_records(manifest, split.train)
    test_recs, y_test = split_records(manifest, split.test)
    if mode is Mode.HYBRID:
        if backend is None:
            raise ValueError("hybrid mode requires an encoder backend")
        for r in train_recs + test_recs:
            if not r.prompt.strip():
                raise PromptMissing(r.id)
        params = core.init_mlp(backend.image_dim + backend.text_dim, hidden_dim, scheme.n_classes, config.seed)
        model = cls(
            mode, params, scheme, backend.backend_id, backend.image_dim, backend.text_dim,
            normalize_embeddings, config.digest(),
        )
    else:
        conv = conv or core.CONV_PRESETS["desk"]
        if conv.n_classes != scheme.n_classes:
            conv = core.ConvNetConfig(conv.stem_channels, conv.block_channels, conv.resolution, conv.in_channels, scheme.n_classes)
        params = core.init_convnet(conv, config.seed)
        model = cls(mode, params, scheme, train_config_digest=config.digest())
    X_train, _ = model.record_inputs(train_recs, backend, jobs=jobs)
    holdout = None
    if test_recs:
        X_test, _ = model.record_inputs(test_recs, backend, jobs=jobs)
        holdout = (X_test, y_test)
    trained, history = core.train(model.core, X_train, y_train, config, holdout)
    if check_gradients:
        k = min(4 if mode is Mode.HYBRID else 2, len(y_train))
        verify_gradients(trained, X_train[:k], y_train[:k], config.seed)
    model.core = trained
    model.history = history
    return model

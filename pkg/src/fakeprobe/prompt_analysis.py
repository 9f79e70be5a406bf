"""Which prompts bind to their images, and which yield convincing fakes.

Covers four analyses:

* connection distribution -- softmax over the prompt's similarity to a real
  and to a fake image;
* descriptiveness -- prompt/image cosine similarity, binned into
  equal-count groups with per-bin detector accuracy;
* semantics -- authenticity per ground-truth topic, and density clustering
  of prompt embeddings;
* structure -- authenticity against prompt length (characters) and noun
  ratio.

"Authenticity" of a fake is the image-only detector's real-class
probability; a fake counts as *classified real* when that probability
exceeds 0.5 (ties resolve to fake, matching the detector's tie-break).
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from sklearn.cluster import DBSCAN

from .classifier import softmax
from .dataset import REAL, PromptImagePair
from .encoders import EmbeddingVector, EncoderBackend, cosine_similarity
from .errors import DimMismatch, EmptyPrompt, ModelFormatError, NoTopics, TooFewSamples
from .pipeline import Mode, read_raster
from .tagger import NOUN, LexiconTagger, tokenize

DEFAULT_TEMPERATURE = 100.0
DEFAULT_LENGTH_EDGES = (0, 25, 50, 75, 100, 150, math.inf)
DEFAULT_NOUN_EDGES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


# -- connection distribution -------------------------------------------------


@dataclass(frozen=True)
class ConnectionDistribution:
    p_real: float
    p_fake: float
    prompt_id: str = ""
    sim_real: float = float("nan")
    sim_fake: float = float("nan")


def connection_from_similarities(sim_real: float, sim_fake: float, temperature: float = DEFAULT_TEMPERATURE, prompt_id: str = ""):
    p = softmax(np.array([sim_real, sim_fake]) * temperature)
    return ConnectionDistribution(float(p[0]), float(p[1]), prompt_id, float(sim_real), float(sim_fake))


def _require_joint(backend: EncoderBackend):
    if backend.image_dim != backend.text_dim:
        raise DimMismatch(
            f"backend {backend.backend_id!r} embeds images ({backend.image_dim}) and text "
            f"({backend.text_dim}) in different spaces"
        )


def connection_distribution(
    backend: EncoderBackend,
    prompt: str,
    real_image,
    fake_image,
    temperature: float = DEFAULT_TEMPERATURE,
    prompt_id: str = "",
) -> ConnectionDistribution:
    """Softmax of the temperature-scaled prompt/real and prompt/fake similarities."""
    if not prompt or not prompt.strip():
        raise EmptyPrompt()
    _require_joint(backend)
    t = backend.encode_text(prompt)
    s_real = cosine_similarity(t, backend.encode_image(read_raster(real_image)))
    s_fake = cosine_similarity(t, backend.encode_image(read_raster(fake_image)))
    return connection_from_similarities(s_real, s_fake, temperature, prompt_id)


# -- descriptiveness ---------------------------------------------------------


def descriptiveness(backend: EncoderBackend, prompt: str, image) -> float:
    _require_joint(backend)
    return cosine_similarity(backend.encode_text(prompt), backend.encode_image(read_raster(image)))


def descriptiveness_batch(backend: EncoderBackend, pairs: Sequence[tuple[str, object]]) -> list[float]:
    return [descriptiveness(backend, prompt, image) for prompt, image in pairs]


@dataclass(frozen=True)
class ScoredSample:
    id: str
    score: float
    correct: bool | None = None


@dataclass(frozen=True)
class ScoreBin:
    index: int
    lo: float
    hi: float
    ids: tuple[str, ...]
    scores: tuple[float, ...]
    accuracy: float | None

    @property
    def size(self) -> int:
        return len(self.ids)


def _make_bin(i, members: Sequence[ScoredSample], lo=None, hi=None) -> ScoreBin:
    scores = tuple(m.score for m in members)
    flags = [m.correct for m in members if m.correct is not None]
    acc = float(np.mean(flags)) if flags else None
    if lo is None:
        lo = min(scores) if scores else float("nan")
        hi = max(scores) if scores else float("nan")
    return ScoreBin(i, float(lo), float(hi), tuple(m.id for m in members), scores, acc)


def bin_by_descriptiveness(samples: Sequence[ScoredSample], n_bins: int = 5, equal_width: bool = False) -> list[ScoreBin]:
    """Split samples into ``n_bins`` score-ordered bins.

    The default equal-count bins differ in size by at most one, larger bins
    first. ``equal_width`` instead cuts the score range into equal intervals
    (bins may then be empty). Ties in score keep input order.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    samples = list(samples)
    if len(samples) < n_bins:
        raise TooFewSamples(f"{len(samples)} samples cannot fill {n_bins} bins")
    ordered = sorted(samples, key=lambda s: s.score)
    if not equal_width:
        base, extra = divmod(len(ordered), n_bins)
        bins, start = [], 0
        for i in range(n_bins):
            size = base + (1 if i < extra else 0)
            bins.append(_make_bin(i, ordered[start : start + size]))
            start += size
        return bins
    lo, hi = ordered[0].score, ordered[-1].score
    edges = np.linspace(lo, hi, n_bins + 1)
    groups = [[] for _ in range(n_bins)]
    for s in ordered:
        k = n_bins - 1 if hi == lo else min(int(np.searchsorted(edges, s.score, side="right")) - 1, n_bins - 1)
        groups[k].append(s)
    return [_make_bin(i, g, edges[i], edges[i + 1]) for i, g in enumerate(groups)]


# -- authenticity scorers ----------------------------------------------------

Scorer = Callable[[PromptImagePair], float]


def detector_scorer(detector) -> Scorer:
    """Real-class probability of an image-only detector, per record."""
    from .detection import detect

    if detector.mode is not Mode.IMAGE_ONLY:
        raise ModelFormatError("authenticity scoring needs an image-only detector")

    def score(record: PromptImagePair) -> float:
        return detect(detector, record.image_path).p_real

    return score


def classified_real(p_real: float) -> bool:
    return p_real > 0.5


# -- semantics ---------------------------------------------------------------


@dataclass(frozen=True)
class TopicAuthenticity:
    topic: str
    n_prompts: int
    real_proportion: float


def topic_authenticity(records: Sequence[PromptImagePair], scorer: Scorer, top_k: int | None = None) -> list[TopicAuthenticity]:
    """Share of each topic's fakes that the detector calls real, highest first.

    Only fake records count. A record with several topics counts toward each
    of them. Ties in proportion order by topic name.
    """
    totals: dict[str, int] = defaultdict(int)
    reals: dict[str, int] = defaultdict(int)
    for r in records:
        if r.origin == REAL:
            continue
        if not r.topics:
            raise NoTopics(r.id)
        is_real = classified_real(scorer(r))
        for t in dict.fromkeys(r.topics):
            totals[t] += 1
            reals[t] += int(is_real)
    ranked = sorted(
        (TopicAuthenticity(t, n, reals[t] / n) for t, n in totals.items()),
        key=lambda x: (-x.real_proportion, x.topic),
    )
    return ranked[:top_k] if top_k is not None else ranked


@dataclass(frozen=True)
class ClusterReport:
    cluster_id: int  # -1 collects noise
    member_ids: tuple[str, ...]
    representatives: tuple[str, ...]
    real_proportion: float | None

    @property
    def size(self) -> int:
        return len(self.member_ids)


def _as_matrix(embeddings) -> np.ndarray:
    if len(embeddings) and isinstance(embeddings[0], EmbeddingVector):
        dims = {e.dim for e in embeddings}
        if len(dims) > 1:
            raise DimMismatch(f"embeddings of differing dims {sorted(dims)}")
        return np.stack([e.values for e in embeddings])
    try:
        X = np.asarray(embeddings, dtype=np.float64)
    except ValueError:
        raise DimMismatch("embeddings of differing dims") from None
    if X.ndim != 2:
        raise DimMismatch("embeddings must form an n x d matrix")
    return X


def dbscan_labels(X: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density clustering labels (noise = -1); a point counts toward its own neighbourhood."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    return DBSCAN(eps=eps, min_samples=min_pts, metric="euclidean", algorithm="brute").fit(X).labels_


def cluster_prompts(
    embeddings,
    eps: float,
    min_pts: int,
    ids: Sequence[str] | None = None,
    real_flags: Sequence[bool] | None = None,
    n_representatives: int = 3,
) -> list[ClusterReport]:
    """Cluster prompt embeddings and annotate each cluster.

    Representatives are the members closest to the cluster mean (ties by
    input order). ``real_flags`` marks which prompts' fakes were classified
    real. Noise, if any, is reported last with id -1.
    """
    X = _as_matrix(embeddings)
    n = len(X)
    ids = [str(i) for i in range(n)] if ids is None else list(ids)
    if len(ids) != n or (real_flags is not None and len(real_flags) != n):
        raise ValueError("ids / real_flags must align with embeddings")
    if n == 0:
        return []
    labels = dbscan_labels(X, eps, min_pts)
    reports = []
    for c in sorted(set(labels.tolist()), key=lambda v: (v < 0, v)):
        idx = np.flatnonzero(labels == c)
        reps: tuple[str, ...] = ()
        if c >= 0:
            d = np.linalg.norm(X[idx] - X[idx].mean(axis=0), axis=1)
            order = np.argsort(d, kind="stable")[:n_representatives]
            reps = tuple(ids[idx[k]] for k in order)
        prop = None
        if real_flags is not None:
            prop = float(np.mean([bool(real_flags[i]) for i in idx]))
        reports.append(ClusterReport(int(c), tuple(ids[i] for i in idx), reps, prop))
    return reports


# -- structure ---------------------------------------------------------------


def noun_ratio(prompt: str, tagger=None) -> float:
    tagger = tagger or LexiconTagger()
    tokens = tokenize(prompt or "")
    if not tokens:
        raise EmptyPrompt()
    tags = tagger.tag(tokens)
    return sum(t == NOUN for t in tags) / len(tokens)


def prompt_length(prompt: str) -> int:
    """Length in characters, spaces included."""
    return len(prompt)


@dataclass(frozen=True)
class StructureRow:
    id: str
    length: int
    noun_ratio: float
    authenticity: float


@dataclass(frozen=True)
class BinSummary:
    lo: float
    hi: float
    count: int
    mean_authenticity: float | None
    real_fraction: float | None


@dataclass(frozen=True)
class StructureReport:
    rows: tuple[StructureRow, ...]
    by_length: tuple[BinSummary, ...]
    by_noun_ratio: tuple[BinSummary, ...]


def summarize_bins(values: Sequence[float], scores: Sequence[float], edges: Sequence[float]) -> tuple[BinSummary, ...]:
    """Bins are ``[lo, hi)`` except the last, which is closed."""
    values = np.asarray(values, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    out = []
    for i in range(len(edges) - 1):
        lo, hi = edges[i], edges[i + 1]
        last = i == len(edges) - 2
        mask = (values >= lo) & ((values <= hi) if last else (values < hi))
        s = scores[mask]
        out.append(
            BinSummary(
                float(lo), float(hi), int(mask.sum()),
                float(s.mean()) if s.size else None,
                float((s > 0.5).mean()) if s.size else None,
            )
        )
    return tuple(out)


def structure_report(
    records: Sequence[PromptImagePair],
    scorer: Scorer,
    tagger=None,
    length_edges: Sequence[float] = DEFAULT_LENGTH_EDGES,
    noun_edges: Sequence[float] = DEFAULT_NOUN_EDGES,
) -> StructureReport:
    tagger = tagger or LexiconTagger()
    rows = []
    for r in records:
        if not r.prompt.strip():
            raise EmptyPrompt()
        rows.append(StructureRow(r.id, prompt_length(r.prompt), noun_ratio(r.prompt, tagger), float(scorer(r))))
    auth = [row.authenticity for row in rows]
    return StructureReport(
        tuple(rows),
        summarize_bins([row.length for row in rows], auth, length_edges),
        summarize_bins([row.noun_ratio for row in rows], auth, noun_edges),
    )

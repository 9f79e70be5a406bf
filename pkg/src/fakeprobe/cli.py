"""Command-line entry point: ``fakeprobe <subcommand> ...``.

Every run writes a ``<out stem>.config.json`` echo next to its outputs.
Failures print one JSON object on stderr::

    {"error": "CaptionUnsupported", "exit_code": 4, "message": "..."}

Exit codes: 0 success, 2 usage, 3 data error, 4 backend error, 5 internal.
Set ``FAKEPROBE_CACHE_DIR`` to persist embeddings between runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import (
    DEFAULT_GRID,
    attribute,
    attribute_records,
    load_attributor,
    sweep_thresholds,
    train_attributor,
)
from .classifier import CONV_PRESETS, ConvNetConfig, TrainConfig
from .dataset import (
    REAL,
    LabelScheme,
    build_attribution_split,
    build_detection_split,
    build_open_set_split,
    load_image,
    load_manifest,
    normalize_origin,
)
from .detection import detect, detect_records, load_detector, train_detector
from .encoders import CachingBackend, get_backend
from .errors import FakeProbeError, InsufficientRecords, ModelFormatError, UnwritablePath
from .evaluation import cross_matrix, size_ablation
from .fingerprint import SpectrumAccumulator, fingerprint_from_accumulator, render_spectrum, save_fingerprint, to_gray
from .pipeline import Mode, load_model_dict
from .prompt_analysis import (
    ScoredSample,
    bin_by_descriptiveness,
    classified_real,
    cluster_prompts,
    connection_distribution,
    descriptiveness,
    detector_scorer,
    structure_report,
    topic_authenticity,
)
from .reports import write_json, write_jsonl, write_table

CACHE_ENV = "FAKEPROBE_CACHE_DIR"
USAGE_EXIT = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit_error(name: str, code: int, message: str) -> int:
    line = json.dumps({"error": name, "exit_code": code, "message": " ".join(str(message).split())}, sort_keys=True)
    print(line, file=sys.stderr)
    return code


# -- shared helpers ----------------------------------------------------------


class Run:
    """Tracks the backends opened during a run so caches can be flushed."""

    def __init__(self, args):
        self.args = args
        self.backends = []
        self.outputs: list[str] = []

    def backend(self, name: str | None):
        if name is None:
            return None
        b = get_backend(name)
        cache = os.environ.get(CACHE_ENV)
        if cache:
            b = CachingBackend(b, cache)
            self.backends.append(b)
        return b

    def wrote(self, path) -> Path:
        self.outputs.append(str(path))
        return Path(path)

    def close(self) -> None:
        for b in self.backends:
            b.flush()


def _out_path(path) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        try:
            p.parent.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UnwritablePath(f"{p.parent}: {exc}") from None
    return p


def _sibling(path, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix) if p.suffix else p.with_name(p.name + suffix)


def _config_echo(run: Run, out) -> None:
    flags = {k: v for k, v in sorted(vars(run.args).items()) if k not in ("func",)}
    echo = {
        "subcommand": run.args.command,
        "flags": flags,
        "seed": getattr(run.args, "seed", None),
        "paths": {"outputs": sorted(run.outputs)},
        "version": __version__,
        "cache_dir": os.environ.get(CACHE_ENV),
    }
    write_json(echo, _sibling(out, ".config.json"))


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        momentum=args.momentum,
        seed=args.seed,
    )


def _conv_config(args) -> ConvNetConfig:
    base = CONV_PRESETS[args.conv_preset]
    return ConvNetConfig(
        args.stem_channels or base.stem_channels,
        tuple(args.block_channels) if args.block_channels else base.block_channels,
        args.resolution or base.resolution,
    )


def _require_backend_for_hybrid(args) -> None:
    if args.mode == Mode.HYBRID.value and not args.backend:
        raise UsageError("--backend is required with --mode hybrid")


def _load_any_model(path):
    d = load_model_dict(path)
    scheme = d.get("label_scheme")
    if scheme == LabelScheme.DETECTION.value:
        return load_detector(path)
    if scheme == LabelScheme.ATTRIBUTION.value:
        return load_attributor(path)
    raise ModelFormatError(f"{path}: unsupported label scheme {scheme!r}")


def _model_backend(run: Run, model, name):
    if model.mode is Mode.IMAGE_ONLY:
        return None
    return run.backend(name or model.backend_id)


def _split_to_dict(split) -> dict:
    return {
        "label_scheme": split.label_scheme.value,
        "seed": split.seed,
        "train": [[rid, label] for rid, label in split.train],
        "test": [[rid, label] for rid, label in split.test],
    }


def _excluded_ids(paths) -> set[str]:
    ids: set[str] = set()
    for p in paths or ():
        d = json.loads(Path(p).read_text(encoding="utf-8"))
        ids.update(rid for rid, _ in d["train"])
    return ids


# -- training ----------------------------------------------------------------


def _train(run: Run, task: str) -> None:
    args = run.args
    _require_backend_for_hybrid(args)
    manifest = load_manifest(args.manifest)
    if task == "detection":
        split = build_detection_split(manifest, args.fake_origin, args.n_per_class, args.seed, test_fraction=args.test_fraction)
        trainer = train_detector
    else:
        split = build_attribution_split(manifest, args.n_per_class, args.seed, test_fraction=args.test_fraction)
        trainer = train_attributor
    backend = run.backend(args.backend) if args.mode == Mode.HYBRID.value else None
    model = trainer(
        manifest, split, args.mode, _train_config(args), backend,
        hidden_dim=args.hidden_dim, conv=_conv_config(args),
        normalize_embeddings=args.normalize_embeddings, jobs=args.jobs,
    )
    out = _out_path(args.out)
    model.save(run.wrote(out))
    history = model.history.to_dict() if model.history else {}
    write_json(history, run.wrote(_sibling(out, ".history")))
    write_json(_split_to_dict(split), run.wrote(_sibling(out, ".split.json")))
    _config_echo(run, out)


def cmd_train_detector(run: Run) -> None:
    _train(run, "detection")


def cmd_train_attributor(run: Run) -> None:
    _train(run, "attribution")


# -- inference ---------------------------------------------------------------


def _emit_rows(run: Run, rows: list[dict], out) -> None:
    if out:
        out = _out_path(out)
        write_jsonl(rows, run.wrote(out))
        _config_echo(run, out)
    else:
        for row in rows:
            print(json.dumps(row, sort_keys=True))


def _single_or_batch(run: Run, one, many) -> None:
    args = run.args
    if bool(args.image) == bool(args.manifest):
        raise UsageError("give exactly one of --image or --manifest")
    if args.image:
        _emit_rows(run, [one(args.image, args.prompt).to_row(Path(args.image).stem)], args.out)
        return
    manifest = load_manifest(args.manifest)
    records = manifest.records
    results = many(records)
    _emit_rows(run, [res.to_row(r.id) for r, res in zip(records, results)], args.out)


def cmd_detect(run: Run) -> None:
    args = run.args
    model = load_detector(args.model)
    backend = _model_backend(run, model, args.backend)
    captioner = run.backend(args.captioner)
    _single_or_batch(
        run,
        lambda img, prompt: detect(model, img, prompt, backend=backend, caption_backend=captioner),
        lambda recs: detect_records(model, recs, backend=backend, caption_backend=captioner,
                                    use_natural_prompts=not args.use_captions, jobs=args.jobs),
    )


def cmd_attribute(run: Run) -> None:
    args = run.args
    model = load_attributor(args.model)
    backend = _model_backend(run, model, args.backend)
    captioner = run.backend(args.captioner)
    if args.sweep:
        if not args.manifest or not args.out:
            raise UsageError("--sweep needs --manifest and --out")
        manifest = load_manifest(args.manifest)
        split5 = build_open_set_split(manifest, args.unseen_origin, args.n_per_class, args.seed,
                                      exclude_ids=_excluded_ids(args.exclude_split))
        rows = sweep_thresholds(model, manifest, split5, DEFAULT_GRID, backend, caption_backend=captioner,
                                use_natural_prompts=not args.use_captions, jobs=args.jobs)
        out = _out_path(args.out)
        table = [{"threshold": t, "accuracy": a} for t, a in rows]
        write_table(table, run.wrote(out), ["threshold", "accuracy"])
        best = max(rows, key=lambda r: (r[1], -r[0]))
        summary = {"n_eval": len(split5.test), "unseen_origins": [normalize_origin(o) for o in args.unseen_origin],
                   "best_threshold": best[0], "best_accuracy": best[1], "model_digest": model.digest}
        write_json(summary, run.wrote(_sibling(out, ".json")))
        if args.plot:
            from .plots import line_chart

            line_chart([t for t, _ in rows], [a for _, a in rows], run.wrote(args.plot),
                       xlabel="threshold", ylabel="open-set accuracy")
        _config_echo(run, out)
        return
    _single_or_batch(
        run,
        lambda img, prompt: attribute(model, img, prompt, args.threshold, backend=backend, caption_backend=captioner),
        lambda recs: attribute_records(model, recs, args.threshold, backend=backend, caption_backend=captioner,
                                       use_natural_prompts=not args.use_captions, jobs=args.jobs),
    )


# -- evaluation --------------------------------------------------------------


def cmd_eval(run: Run) -> None:
    args = run.args
    model = _load_any_model(args.model)
    backend = _model_backend(run, model, args.backend)
    captioner = run.backend(args.captioner)
    manifests = [load_manifest(p) for p in args.manifest]
    rows = cross_matrix(
        model, manifests, args.eval_origin, backend, caption_backend=captioner,
        use_natural_prompts=not args.use_captions, n_per_class=args.n_per_class, seed=args.seed,
        exclude_ids=_excluded_ids(args.exclude_split), train_source=args.train_source, jobs=args.jobs,
    )
    out = _out_path(args.out)
    write_table([r.to_dict() for r in rows], run.wrote(out),
                ["train_source", "eval_origin", "dataset_tag", "accuracy", "n_total"])
    summary = {"model_digest": model.digest, "mode": model.mode.value, "label_scheme": model.label_scheme.value,
               "prompts": "generated" if args.use_captions else "natural", "rows": [r.to_dict() for r in rows]}
    write_json(summary, run.wrote(_sibling(out, ".json")))
    _config_echo(run, out)


def cmd_ablate(run: Run) -> None:
    args = run.args
    _require_backend_for_hybrid(args)
    manifest = load_manifest(args.manifest)
    backend = run.backend(args.backend) if args.mode == Mode.HYBRID.value else None
    rows = size_ablation(
        manifest, args.sizes, args.mode, _train_config(args), backend, task=args.task,
        fake_origin=args.fake_origin, eval_n_per_class=args.eval_n_per_class,
        hidden_dim=args.hidden_dim, conv=_conv_config(args), jobs=args.jobs,
    )
    out = _out_path(args.out)
    write_table([r.to_dict() for r in rows], run.wrote(out), ["size", "accuracy", "n_eval"])
    write_json({"task": args.task, "mode": args.mode, "rows": [r.to_dict() for r in rows]}, run.wrote(_sibling(out, ".json")))
    if args.plot:
        from .plots import line_chart

        line_chart([r.size for r in rows], [r.accuracy for r in rows], run.wrote(args.plot),
                   xlabel="training size", ylabel="accuracy")
    _config_echo(run, out)


# -- fingerprint -------------------------------------------------------------


def cmd_fingerprint(run: Run) -> None:
    args = run.args
    manifest = load_manifest(args.manifest)
    source = normalize_origin(args.source)
    pool = sorted(manifest.by_origin(source), key=lambda r: r.id)
    if len(pool) < args.n:
        raise InsufficientRecords(source, len(pool), args.n)
    rng = np.random.default_rng(args.seed)
    chosen = [pool[i] for i in sorted(rng.permutation(len(pool))[: args.n])]
    acc = SpectrumAccumulator()
    for r in chosen:
        acc.add(to_gray(load_image(r.image_path), args.size))
    fp = fingerprint_from_accumulator(acc, source)
    out = _out_path(args.out or f"fingerprint-{source}.json")
    save_fingerprint(fp, run.wrote(out))
    render_spectrum(fp, run.wrote(args.render or _sibling(out, ".png")))
    _config_echo(run, out)


# -- prompt analysis ---------------------------------------------------------


def _scored_records(records, only_fakes: bool):
    return [r for r in records if not (only_fakes and r.origin == REAL)]


def cmd_prompt_analyze(run: Run) -> None:
    args = run.args
    manifest = load_manifest(args.manifest)
    out = _out_path(args.out)
    handler = {
        "connection": _pa_connection,
        "descriptiveness": _pa_descriptiveness,
        "topics": _pa_topics,
        "cluster": _pa_cluster,
        "structure": _pa_structure,
    }[args.analysis]
    handler(run, manifest, out)
    _config_echo(run, out)


def _need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise UsageError(f"prompt-analyze {args.analysis} requires --{n.replace('_', '-')}")


def _pa_connection(run, manifest, out):
    args = run.args
    backend = run.backend(args.backend or "toy-joint")
    fake_origin = normalize_origin(args.fake_origin)
    reals: dict[str, str] = {}
    for r in sorted(manifest.by_origin(REAL), key=lambda r: r.id):
        reals.setdefault(r.prompt, r.id)
    rows = []
    for f in sorted(manifest.by_origin(fake_origin), key=lambda r: r.id):
        if f.prompt not in reals:
            continue
        real = manifest[reals[f.prompt]]
        c = connection_distribution(backend, f.prompt, real.image_path, f.image_path, args.temperature, f.id)
        rows.append({"id": f.id, "real_id": real.id, "p_real": c.p_real, "p_fake": c.p_fake,
                     "sim_real": c.sim_real, "sim_fake": c.sim_fake})
    if not rows:
        raise InsufficientRecords(f"{REAL}/{fake_origin} prompt pairs", 0, 1)
    write_table(rows, run.wrote(out), ["id", "real_id", "p_real", "p_fake", "sim_real", "sim_fake"])
    p_real = np.array([r["p_real"] for r in rows])
    summary = {"n_pairs": len(rows), "mean_p_real": float(p_real.mean()),
               "fraction_closer_to_real": float((p_real > 0.5).mean()), "temperature": args.temperature}
    write_json(summary, run.wrote(_sibling(out, ".json")))


def _pa_descriptiveness(run, manifest, out):
    args = run.args
    backend = run.backend(args.backend or "toy-joint")
    captioner = run.backend(args.captioner)
    detector = load_detector(args.model) if args.model else None
    det_backend = _model_backend(run, detector, None) if detector else None
    samples = []
    for r in sorted(manifest.records, key=lambda r: r.id):
        raster = load_image(r.image_path)
        if args.use_captions:
            if captioner is None:
                raise UsageError("--use-captions requires --captioner")
            prompt = captioner.generate_caption(raster)
        else:
            prompt = r.prompt
        correct = None
        if detector is not None:
            verdict = detect(detector, raster, prompt, backend=det_backend)
            correct = (verdict.label == "real") == (r.origin == REAL)
        samples.append(ScoredSample(r.id, descriptiveness(backend, prompt, raster), correct))
    bins = bin_by_descriptiveness(samples, args.bins, args.equal_width)
    rows = [{"bin": b.index, "lo": b.lo, "hi": b.hi, "size": b.size, "accuracy": b.accuracy} for b in bins]
    write_table(rows, run.wrote(out), ["bin", "lo", "hi", "size", "accuracy"])
    scores = np.array([s.score for s in samples])
    summary = {"n": len(samples), "mean_descriptiveness": float(scores.mean()),
               "prompts": "generated" if args.use_captions else "natural", "bins": rows}
    write_json(summary, run.wrote(_sibling(out, ".json")))
    if args.plot:
        from .plots import bar_chart

        bar_chart([f"{b.lo:.3f}-{b.hi:.3f}" for b in bins], [b.accuracy for b in bins], run.wrote(args.plot),
                  ylabel="detection accuracy")


def _pa_topics(run, manifest, out):
    args = run.args
    _need(args, "model")
    scorer = detector_scorer(load_detector(args.model))
    ranked = topic_authenticity(manifest.records, scorer, args.top_k)
    rows = [{"topic": t.topic, "n_prompts": t.n_prompts, "real_proportion": t.real_proportion} for t in ranked]
    write_table(rows, run.wrote(out), ["topic", "n_prompts", "real_proportion"])
    write_json({"topics": rows}, run.wrote(_sibling(out, ".json")))
    if args.plot:
        from .plots import bar_chart

        bar_chart([r["topic"] for r in rows], [r["real_proportion"] for r in rows], run.wrote(args.plot),
                  ylabel="fakes classified real")


def _pa_cluster(run, manifest, out):
    args = run.args
    _need(args, "eps", "min_pts")
    if not args.eps > 0 or args.min_pts < 1:
        raise UsageError("--eps must be > 0 and --min-pts >= 1")
    backend = run.backend(args.backend or "toy")
    records = sorted(_scored_records(manifest.records, True), key=lambda r: r.id)
    embeddings = [backend.encode_text(r.prompt) for r in records]
    flags = None
    if args.model:
        scorer = detector_scorer(load_detector(args.model))
        flags = [classified_real(scorer(r)) for r in records]
    clusters = cluster_prompts(embeddings, args.eps, args.min_pts, [r.id for r in records], flags)
    rows = []
    for c in clusters:
        reps = [manifest[i].prompt for i in c.representatives]
        rows.append({"cluster": c.cluster_id, "size": c.size, "real_proportion": c.real_proportion,
                     "representatives": reps, "members": list(c.member_ids)})
    write_table(rows, run.wrote(out), ["cluster", "size", "real_proportion", "representatives"])
    n_clusters = sum(1 for c in clusters if c.cluster_id >= 0)
    n_noise = sum(c.size for c in clusters if c.cluster_id < 0)
    write_json({"n_clusters": n_clusters, "n_noise": n_noise, "eps": args.eps, "min_pts": args.min_pts,
                "clusters": rows}, run.wrote(_sibling(out, ".json")))


def _pa_structure(run, manifest, out):
    args = run.args
    _need(args, "model")
    scorer = detector_scorer(load_detector(args.model))
    records = sorted(_scored_records(manifest.records, True), key=lambda r: r.id)
    rep = structure_report(records, scorer)
    rows = [{"id": r.id, "length": r.length, "noun_ratio": r.noun_ratio, "authenticity": r.authenticity}
            for r in rep.rows]
    write_table(rows, run.wrote(out), ["id", "length", "noun_ratio", "authenticity"])

    def bins(seq):
        return [{"lo": b.lo, "hi": b.hi, "count": b.count, "mean_authenticity": b.mean_authenticity,
                 "real_fraction": b.real_fraction} for b in seq]

    write_json({"by_length": bins(rep.by_length), "by_noun_ratio": bins(rep.by_noun_ratio)},
               run.wrote(_sibling(out, ".json")))
    if args.plot:
        from .plots import bar_chart

        bar_chart([f"{b.lo:g}-{b.hi:g}" for b in rep.by_length], [b.mean_authenticity for b in rep.by_length],
                  run.wrote(args.plot), ylabel="mean authenticity")


# -- parser ------------------------------------------------------------------


def _add_training_flags(p) -> None:
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", required=True, choices=[m.value for m in Mode])
    p.add_argument("--backend", help="encoder backend id (required for hybrid)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--hidden-dim", type=int, default=256)
    p.add_argument("--normalize-embeddings", action="store_true")
    p.add_argument("--conv-preset", choices=sorted(CONV_PRESETS), default="desk")
    p.add_argument("--resolution", type=int)
    p.add_argument("--stem-channels", type=int)
    p.add_argument("--block-channels", type=int, nargs="+")
    p.add_argument("--jobs", type=int, default=1)


def _add_inference_flags(p) -> None:
    p.add_argument("--model", required=True)
    p.add_argument("--image")
    p.add_argument("--prompt")
    p.add_argument("--manifest")
    p.add_argument("--backend", help="override the model's encoder backend")
    p.add_argument("--captioner", help="backend used to caption images lacking a prompt")
    p.add_argument("--use-captions", action="store_true", help="ignore manifest prompts, caption instead")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fakeprobe", description="Detect and attribute text-to-image generations.")
    parser.add_argument("--version", action="version", version=f"fakeprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train-detector", help="train a fake/real detector")
    _add_training_flags(p)
    p.add_argument("--fake-origin", nargs="+", default=["SD"])
    p.add_argument("--n-per-class", type=int, required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_detector)

    p = sub.add_parser("train-attributor", help="train a real/SD/LD/GLIDE attributor")
    _add_training_flags(p)
    p.add_argument("--n-per-class", type=int, required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_attributor)

    p = sub.add_parser("detect", help="classify images as fake or real")
    _add_inference_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("attribute", help="attribute images to a source model")
    _add_inference_flags(p)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--sweep", action="store_true", help="open-set accuracy over the 11-point threshold grid")
    p.add_argument("--unseen-origin", nargs="+", default=["DALLE2"])
    p.add_argument("--n-per-class", type=int, default=50)
    p.add_argument("--exclude-split", nargs="*", default=[])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("eval", help="cross-model / cross-dataset evaluation")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", nargs="+", required=True)
    p.add_argument("--eval-origin", nargs="+")
    p.add_argument("--n-per-class", type=int)
    p.add_argument("--exclude-split", nargs="*", default=[], help="split files whose training ids are skipped")
    p.add_argument("--train-source", default="")
    p.add_argument("--backend")
    p.add_argument("--captioner")
    p.add_argument("--use-captions", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="training-size ablation")
    _add_training_flags(p)
    p.add_argument("--task", choices=["detection", "attribution"], default="detection")
    p.add_argument("--fake-origin", default="SD")
    p.add_argument("--sizes", type=int, nargs="+", required=True)
    p.add_argument("--eval-n-per-class", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--plot")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("fingerprint", help="average Fourier spectrum of one source")
    p.add_argument("--manifest", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--size", type=int, help="resize images to size x size first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="fingerprint JSON path (default: fingerprint-<source>.json)")
    p.add_argument("--render", help="PNG path (default: <out stem>.png)")
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("prompt-analyze", help="prompt/image relationship analyses")
    p.add_argument("analysis", choices=["connection", "descriptiveness", "topics", "cluster", "structure"])
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend")
    p.add_argument("--captioner")
    p.add_argument("--use-captions", action="store_true")
    p.add_argument("--model", help="detector used to score records")
    p.add_argument("--fake-origin", default="SD")
    p.add_argument("--temperature", type=float, default=100.0)
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--equal-width", action="store_true")
    p.add_argument("--top-k", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--min-pts", type=int)
    p.add_argument("--plot")
    p.set_defaults(func=cmd_prompt_analyze)
    return parser


def main(argv=None) -> int:
    run = None
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        run = Run(args)
        args.func(run)
        return 0
    except UsageError as exc:
        return _emit_error("UsageError", USAGE_EXIT, exc)
    except FakeProbeError as exc:
        return _emit_error(type(exc).__name__, exc.exit_code, exc)
    except OSError as exc:
        return _emit_error(type(exc).__name__, 3, exc)
    except Exception as exc:  # anything else is a bug
        return _emit_error(type(exc).__name__, 5, exc)
    finally:
        if run is not None:
            run.close()


if __name__ == "__main__":
    sys.exit(main())

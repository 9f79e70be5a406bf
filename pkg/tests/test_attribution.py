from __future__ import annotations

import numpy as np
import pytest

from fakeprobe.attribution import (
    DEFAULT_GRID,
    UNSEEN_LABEL,
    attribute,
    evaluate_attributor,
    load_attributor,
    route,
    route_batch,
    sweep_from_probabilities,
    sweep_thresholds,
    train_attributor,
)
from fakeprobe.classifier import ConvNetConfig, MlpParams, TrainConfig
from fakeprobe.dataset import (
    DatasetSplit,
    LabelScheme,
    build_attribution_split,
    build_detection_split,
    build_open_set_split,
    load_manifest,
)
from fakeprobe.encoders import ToyBackend
from fakeprobe.errors import BadThreshold, SchemeMismatch
from fakeprobe.attribution import AttributorModel
from fakeprobe.pipeline import Mode
from fakeprobe.synthetic import make_corpus

TOY = ToyBackend()


def test_route_rules():
    assert route([0.95, 0.02, 0.02, 0.01], 0.9) == (0, 0.95)
    assert route([0.85, 0.05, 0.05, 0.05], 0.9)[0] == UNSEEN_LABEL
    assert route([0.9, 0.05, 0.03, 0.02], 0.9)[0] == 0  # strict inequality
    assert route([0.25, 0.25, 0.25, 0.25], 0.0)[0] == 0
    assert route([0.1, 0.6, 0.2, 0.1], None) == (1, 0.6)
    with pytest.raises(BadThreshold):
        route([1, 0, 0, 0], 1.5)


def test_grid():
    assert DEFAULT_GRID == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def test_sweep_hand_table():
    # 10 samples, labels in the 5-class scheme (4 = unseen); top probabilities noted
    probs = np.array([
        [0.95, 0.03, 0.01, 0.01],  # y0, top 0.95
        [0.55, 0.25, 0.10, 0.10],  # y0, top 0.55
        [0.10, 0.80, 0.05, 0.05],  # y1, top 0.80
        [0.05, 0.35, 0.30, 0.30],  # y1, top 0.35
        [0.10, 0.10, 0.70, 0.10],  # y2, top 0.70
        [0.05, 0.05, 0.05, 0.85],  # y3, top 0.85
        [0.40, 0.20, 0.20, 0.20],  # y4, top 0.40 (an unseen fake)
        [0.10, 0.65, 0.15, 0.10],  # y4, top 0.65
        [0.30, 0.30, 0.20, 0.20],  # y4, top 0.30 (tie -> class 0)
        [0.60, 0.30, 0.05, 0.05],  # y2, top 0.60, wrong argmax
    ])
    labels = np.array([0, 0, 1, 1, 2, 3, 4, 4, 4, 2])
    # correct count per threshold, enumerated by hand:
    # t=0.0: argmax right on samples 0,1,2,3,4,5 -> 6 (no unseen)
    # t=0.1..0.3: same 6 (no top below 0.3; t=0.3 keeps 0.30 since 0.30 < 0.3 is false)
    # t=0.4: sample 3 (0.35) and sample 8 (0.30) go unseen: lose 3, gain 8 -> 6
    # t=0.5: also sample 6 (0.40) -> unseen, gain -> 7
    # t=0.6: also sample 1 (0.55) -> lose -> 6
    # t=0.7: also 9 (0.60, was wrong anyway), 7 (0.65, gain) -> 7
    # t=0.8: also 4 (0.70, lose) -> 6
    # t=0.9: also 2 (0.80, lose), 5 (0.85, lose) -> 4
    # t=1.0: everything unseen -> only the three y4 -> 3
    expect = [6, 6, 6, 6, 6, 7, 6, 7, 6, 4, 3]
    rows = sweep_from_probabilities(probs, labels)
    assert [t for t, _ in rows] == list(DEFAULT_GRID)
    np.testing.assert_allclose([a for _, a in rows], [e / 10 for e in expect], atol=1e-15)


def test_monotone_in_threshold():
    rng = np.random.default_rng(0)
    probs = rng.dirichlet(np.ones(4), 200)
    prev = None
    for t in np.linspace(0, 1, 21):
        routed = route_batch(probs, float(t)) == UNSEEN_LABEL
        if prev is not None:
            assert np.all(routed >= prev)
        prev = routed


@pytest.fixture(scope="module")
def attr_setup(attribution_manifest):
    m = load_manifest(attribution_manifest)
    split = build_attribution_split(m, 60, seed=0)
    model = train_attributor(m, split, "hybrid", TrainConfig(epochs=50, seed=0), TOY)
    return m, split, model


def test_attribution_fixture_is_separable(attr_setup):
    from oracles import one_vs_rest_separable
    from fakeprobe.pipeline import split_records

    m, split, _ = attr_setup
    recs, y = split_records(m, split.train + split.test)
    X = np.array([TOY.encode_text(r.prompt).values for r in recs])
    assert one_vs_rest_separable(X, np.asarray(y))


def test_hybrid_attributor_accuracy(attr_setup):
    m, split, model = attr_setup
    assert evaluate_attributor(model, m, split).accuracy >= 0.95


def test_attribute_result_fields(attr_setup):
    m, _, model = attr_setup
    r = m.by_origin("LD")[0]
    res = attribute(model, r.image_path, r.prompt)
    assert res.source == "LD" and res.threshold_used is None
    assert attribute(model, r.image_path, r.prompt, threshold=1.0).source == "unseen"
    assert model.class_map == {0: "real", 1: "SD", 2: "LD", 3: "GLIDE"}


def test_sweep_on_model(attr_setup):
    m, split, model = attr_setup
    split5 = build_open_set_split(m, ["DALLE2"], 20, seed=1, exclude_ids=split.ids)
    rows = sweep_thresholds(model, m, split5)
    assert len(rows) == 11
    assert rows[-1][1] == pytest.approx(1 / 5)  # t=1: only the true-unseen fifth is right
    with pytest.raises(SchemeMismatch):
        sweep_thresholds(model, m, split)


def test_three_class_split_rejected(attr_setup):
    m, _, _ = attr_setup
    split = build_attribution_split(m, 5, seed=0)
    three = DatasetSplit(tuple(x for x in split.train if x[1] < 3), (), LabelScheme.ATTRIBUTION, 0)
    with pytest.raises(SchemeMismatch):
        train_attributor(m, three, "hybrid", TrainConfig(epochs=1), TOY)
    with pytest.raises(SchemeMismatch):
        train_attributor(m, build_detection_split(m, "SD", 4, seed=0), "hybrid", TrainConfig(epochs=1), TOY)


def test_image_only_constant_colours(tmp_path):
    colours = {"real": (0, 0, 0), "SD": (255, 0, 0), "LD": (0, 255, 0), "GLIDE": (0, 0, 255)}
    path = make_corpus(tmp_path, {o: 20 for o in colours}, seed=0, size=8, noise=0.0, colours=colours)
    m = load_manifest(path)
    split = build_attribution_split(m, 20, seed=0)
    model = train_attributor(m, split, "image_only", TrainConfig(epochs=30, seed=0), conv=ConvNetConfig(4, (4,), 8))
    assert model.mode is Mode.IMAGE_ONLY
    assert evaluate_attributor(model, m, split).accuracy == 1.0


def test_hardcoded_model_sweep(attribution_manifest):
    # a hybrid model whose output ignores the input: zero weights, fixed bias
    m = load_manifest(attribution_manifest)
    bias = np.log(np.array([0.7, 0.1, 0.1, 0.1]))
    core = MlpParams(np.zeros((1, 26)), np.zeros(1), np.zeros((4, 1)), bias)
    model = AttributorModel(Mode.HYBRID, core, LabelScheme.ATTRIBUTION, "toy", 10, 16)
    split5 = build_open_set_split(m, ["DALLE2"], 5, seed=0)
    rows = dict(sweep_thresholds(model, m, split5))
    # always "real" with confidence 0.7: right on the real fifth until t > 0.7,
    # then right on the unseen fifth only
    assert rows[0.7] == pytest.approx(0.2) and rows[0.8] == pytest.approx(0.2)
    assert rows[0.0] == pytest.approx(0.2)


def test_save_load(attr_setup, tmp_path):
    _, _, model = attr_setup
    model.save(tmp_path / "a.model")
    assert load_attributor(tmp_path / "a.model").digest == model.digest


def test_reports_flag_first_prompt_policy(attr_setup):
    import dataclasses

    from fakeprobe.dataset import DatasetManifest

    m, split, model = attr_setup
    assert evaluate_attributor(model, m, split, TOY).notes == {"prompts": "natural"}
    first = split.test[0][0]
    multi = DatasetManifest(tuple(dataclasses.replace(r, n_prompts=5) if r.id == first else r for r in m.records))
    notes = evaluate_attributor(model, multi, split, TOY).notes
    assert notes == {"prompts": "natural", "first_prompt_only": True}

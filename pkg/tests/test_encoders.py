from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fakeprobe.encoders import (
    CachingBackend,
    EmbeddingVector,
    FixedCaptioner,
    ToyBackend,
    ToyJointBackend,
    available_backends,
    check_conformance,
    concat_embeddings,
    cosine_similarity,
    encode_image,
    encode_text,
    generate_caption,
    get_backend,
    read_embedding_cache,
    stable_hash64,
    write_embedding_cache,
)
from fakeprobe.errors import (
    BackendMismatch,
    CaptionUnsupported,
    DimMismatch,
    EmptyPrompt,
    KindMismatch,
    UndecodableImage,
    UnknownBackend,
    ZeroVector,
)

TOY = ToyBackend()


def gray2x2(top, bottom_left, bottom_right, top_right=None):
    top_right = top if top_right is None else top_right
    vals = np.array([[top, top_right], [bottom_left, bottom_right]], dtype=np.uint8)
    return np.repeat(vals[:, :, None], 3, axis=2)


def test_black_image_channel_means_zero():
    v = encode_image(TOY, np.zeros((4, 4, 3), dtype=np.uint8))
    assert v.kind == "image" and v.dim == 10
    assert np.all(v.values[:3] == 0.0)


def test_same_file_encoded_twice(small_manifest):
    from fakeprobe.dataset import load_image

    path = next(iter(small_manifest.parent.glob("images/*.png")))
    a = encode_image(TOY, load_image(path))
    b = encode_image(TOY, load_image(path))
    assert np.array_equal(a.values, b.values)


def test_rotation_hand_evaluated():
    # rows [0 0; 255 255] and its 90 degree rotation [0 255; 0 255]
    img = gray2x2(0, 255, 255)
    rot = np.rot90(img)
    assert np.array_equal(rot[:, :, 0], np.array([[0, 255], [0, 255]]))
    # means 0.5, stds 1.0; signed gradients map [-255, 255] to [0, 1]
    expect_img = [0.5] * 3 + [1.0] * 3 + [1.0, 0.5, 1.0, 0.0]
    expect_rot = [0.5] * 3 + [1.0] * 3 + [0.5, 1.0, 0.0, 1.0]
    v_img = encode_image(TOY, img).values
    v_rot = encode_image(TOY, rot).values
    np.testing.assert_allclose(v_img, expect_img, atol=1e-12)
    np.testing.assert_allclose(v_rot, expect_rot, atol=1e-12)
    assert not np.array_equal(v_img, v_rot)


def test_features_in_unit_interval():
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = encode_image(TOY, rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)).values
        assert np.all((v >= 0) & (v <= 1))


def test_single_pixel_image():
    v = encode_image(TOY, np.full((1, 1, 3), 200, dtype=np.uint8)).values
    np.testing.assert_allclose(v[6:], [0.5, 0.5, 0.0, 0.0])


def test_undecodable():
    with pytest.raises(UndecodableImage):
        encode_image(TOY, np.zeros((4, 4)).reshape(2, 2, 4)[:, :, :2])


def test_empty_prompt():
    with pytest.raises(EmptyPrompt):
        encode_text(TOY, "")
    with pytest.raises(EmptyPrompt):
        encode_text(TOY, "   ")


def test_text_deterministic():
    assert encode_text(TOY, "a dog") == encode_text(TOY, "a dog")


def test_hashed_bag_of_words_hand_evaluated():
    # FNV-1a 64 mod 16, worked by hand: a -> 12, dog -> 9, cat -> 7
    assert stable_hash64("a") % 16 == 12
    assert stable_hash64("dog") % 16 == 9
    assert stable_hash64("cat") % 16 == 7
    r = 1 / math.sqrt(2)
    dog = np.zeros(16)
    dog[[12, 9]] = r
    cat = np.zeros(16)
    cat[[12, 7]] = r
    v_dog = encode_text(TOY, "a dog").values
    v_cat = encode_text(TOY, "a cat").values
    np.testing.assert_allclose(v_dog, dog, atol=1e-15)
    np.testing.assert_allclose(v_cat, cat, atol=1e-15)
    assert np.any(v_dog != v_cat)


def test_fnv_reference_vector():
    # published FNV-1a 64 test vectors
    assert stable_hash64("") == 0xCBF29CE484222325
    assert stable_hash64("a") == 0xAF63DC4C8601EC8C
    assert stable_hash64("foobar") == 0x85944171F73967E8


def test_text_case_and_repeat():
    np.testing.assert_array_equal(encode_text(TOY, "Dog DOG").values, encode_text(TOY, "dog").values)


def test_caption_template():
    rng = np.random.default_rng(1)
    cap = generate_caption(TOY, rng.integers(0, 256, (6, 6, 3), dtype=np.uint8))
    assert re.fullmatch(r"image with mean rgb \(\d+,\d+,\d+\)", cap)
    assert generate_caption(TOY, np.full((3, 3, 3), 255, dtype=np.uint8)) == "image with mean rgb (255,255,255)"


def test_caption_unsupported():
    with pytest.raises(CaptionUnsupported):
        generate_caption(ToyBackend(can_caption=False), np.zeros((2, 2, 3)))


def test_fixed_captioner():
    cap = FixedCaptioner(TOY, "a dog on a mat")
    assert cap.generate_caption(np.zeros((2, 2, 3))) == "a dog on a mat"


def test_concat():
    img = EmbeddingVector(np.array([1.0, 0.0]), "image", "toy")
    txt = EmbeddingVector(np.array([0.0, 2.0]), "text", "toy")
    out = concat_embeddings(img, txt)
    assert out.kind == "concat" and out.dim == 4
    np.testing.assert_array_equal(out.values, [1, 0, 0, 2])
    a = EmbeddingVector(np.arange(4.0) + 1, "image", "toy")
    b = EmbeddingVector(np.arange(3.0) + 9, "text", "toy")
    c = concat_embeddings(a, b)
    assert c.dim == 7 and np.array_equal(c.values[:4], a.values)


def test_concat_errors():
    img = EmbeddingVector(np.ones(2), "image", "toy")
    with pytest.raises(BackendMismatch):
        concat_embeddings(img, EmbeddingVector(np.ones(2), "text", "other"))
    with pytest.raises(KindMismatch):
        concat_embeddings(img, img)


def test_cosine_examples():
    assert cosine_similarity([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0, abs=1e-15)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 1], [1, -1]) == 0.0
    with pytest.raises(ZeroVector):
        cosine_similarity([0, 0], [1, 0])
    with pytest.raises(DimMismatch):
        cosine_similarity([1, 0], [1, 0, 0])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
    st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
)
def test_cosine_symmetric_and_bounded(a, b):
    if not np.any(a) or not np.any(b):
        return
    s = cosine_similarity(a, b)
    assert s == cosine_similarity(b, a)
    assert abs(s) <= 1 + 1e-12


def test_embedding_invariants():
    with pytest.raises(Exception):
        EmbeddingVector(np.array([1.0, np.nan]), "image", "toy")
    with pytest.raises(KindMismatch):
        EmbeddingVector(np.ones(2), "audio", "toy")


def test_cache_roundtrip(tmp_path):
    # nine significant digits bound the relative error by half a unit in the
    # ninth digit, 5e-9; values already holding nine digits come back exactly
    rng = np.random.default_rng(2)
    entries = [(f"r{i}", EmbeddingVector(rng.standard_normal(7) * 10.0 ** rng.integers(-5, 5), "image", "toy")) for i in range(20)]
    exact = EmbeddingVector(np.array([0.123456789, -4.5, 1e-7, 987654321.0]), "text", "toy")
    path = tmp_path / "cache.jsonl"
    write_embedding_cache(entries + [("e", exact)], path)
    back = read_embedding_cache(path)
    for rid, vec in entries:
        got = back[(rid, "image")]
        np.testing.assert_allclose(got.values, vec.values, rtol=5e-9, atol=0)
    assert back[("e", "text")] == exact


def test_caching_backend_is_stable_warm_or_cold(tmp_path):
    img = np.random.default_rng(3).integers(0, 256, (4, 4, 3), dtype=np.uint8)
    cold = CachingBackend(ToyBackend(), tmp_path)
    a = cold.encode_image(img).values
    t = cold.encode_text("a dog").values
    cold.flush()
    warm = CachingBackend(ToyBackend(), tmp_path)
    assert np.array_equal(warm.encode_image(img).values, a)
    assert np.array_equal(warm.encode_text("a dog").values, t)
    np.testing.assert_allclose(a, TOY.encode_image(img).values, rtol=5e-9)


def test_registry():
    assert {"toy", "toy-joint"} <= set(available_backends())
    with pytest.raises(UnknownBackend):
        get_backend("nope")


@pytest.mark.parametrize("backend", [ToyBackend(), ToyBackend(can_caption=False), ToyJointBackend()])
def test_conformance(backend):
    check_conformance(backend)


def test_concurrent_read_only_use():
    rng = np.random.default_rng(4)
    imgs = [rng.integers(0, 256, (8, 8, 3), dtype=np.uint8) for _ in range(16)]
    serial = [TOY.encode_image(i).values for i in imgs]
    with ThreadPoolExecutor(4) as ex:
        parallel = list(ex.map(lambda i: TOY.encode_image(i).values, imgs))
    assert all(np.array_equal(a, b) for a, b in zip(serial, parallel))


def test_joint_backend_shares_space():
    img = np.full((2, 2, 3), 10, dtype=np.uint8)
    j = ToyJointBackend()
    cap = j.generate_caption(img)
    assert cosine_similarity(j.encode_image(img), j.encode_text(cap)) == pytest.approx(1.0)

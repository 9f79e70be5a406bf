from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from fakeprobe.errors import EmptyImage, EmptySequence, MixedResolutions, ResolutionMismatch
from fakeprobe.fingerprint import (
    SpectralFingerprint,
    SpectrumAccumulator,
    average_spectrum,
    center_shift,
    dft2,
    fingerprint_distance,
    load_fingerprint,
    render_spectrum,
    save_fingerprint,
    spectrum_to_uint8,
    to_gray,
    uncenter_shift,
)
from oracles import naive_dft2


def test_constant_image_dc_only():
    c, n = 3.5, 8
    X = dft2(np.full((n, n), c))
    assert abs(abs(X[0, 0]) - n * n * c) < 1e-9
    mag = np.abs(X)
    mag[0, 0] = 0
    assert mag.max() < 1e-9


def test_delta_flat_spectrum():
    x = np.zeros((8, 8))
    x[0, 0] = 1
    np.testing.assert_allclose(np.abs(dft2(x)), 1.0, atol=1e-12)


@pytest.mark.parametrize("shape", [(8, 8), (4, 16), (6, 5), (1, 8), (3, 1)])
def test_matches_naive_dft(shape):
    x = np.random.default_rng(sum(shape)).random(shape)
    assert np.abs(dft2(x) - naive_dft2(x)).max() < 1e-8


def test_dft2_rejects_empty():
    with pytest.raises(EmptyImage):
        dft2(np.zeros((0, 4)))
    with pytest.raises(EmptyImage):
        dft2(np.zeros(4))


def test_conjugate_symmetry_of_real_input():
    x = np.random.default_rng(0).random((8, 8))
    X = dft2(x)
    flipped = np.roll(np.flip(X, (0, 1)), 1, axis=(0, 1))
    np.testing.assert_allclose(X, np.conj(flipped), atol=1e-10)


def test_shift_roundtrip_and_centre():
    a = np.zeros((8, 8))
    a[0, 0] = 1
    assert center_shift(a)[4, 4] == 1
    np.testing.assert_array_equal(uncenter_shift(center_shift(a)), a)
    b = np.arange(15.0).reshape(3, 5)
    np.testing.assert_array_equal(uncenter_shift(center_shift(b)), b)


def test_single_image_fingerprint():
    x = np.random.default_rng(1).random((8, 8)) * 255
    fp = average_spectrum([x], "SD")
    np.testing.assert_allclose(fp.magnitude, center_shift(np.log1p(np.abs(naive_dft2(x)))), atol=1e-9)
    assert fp.n_images == 1 and fp.source == "SD"


def test_duplicate_images_idempotent():
    x = np.random.default_rng(2).random((8, 8))
    np.testing.assert_allclose(average_spectrum([x, x], "a").magnitude, average_spectrum([x], "a").magnitude, atol=1e-12)


def test_rgb_converted_to_luminance():
    rgb = np.random.default_rng(3).integers(0, 256, (8, 8, 3)).astype(np.float64)
    gray = rgb @ np.array([0.299, 0.587, 0.114])
    np.testing.assert_allclose(average_spectrum([rgb], "a").magnitude, average_spectrum([gray], "a").magnitude)


def test_mixed_resolution_and_empty():
    with pytest.raises(MixedResolutions):
        average_spectrum([np.zeros((8, 8)), np.zeros((4, 4))], "a")
    with pytest.raises(EmptySequence):
        average_spectrum([], "a")
    fp = average_spectrum([np.zeros((8, 8)), np.zeros((4, 4))], "a", size=4)
    assert fp.resolution == (4, 4)


def test_accumulator_merge_matches_single_pass():
    rng = np.random.default_rng(4)
    imgs = [rng.random((8, 8)) for _ in range(6)]
    whole = SpectrumAccumulator()
    for x in imgs:
        whole.add(x)
    a, b = SpectrumAccumulator(), SpectrumAccumulator()
    for x in imgs[:2]:
        a.add(x)
    for x in imgs[2:]:
        b.add(x)
    np.testing.assert_allclose(a.merge(b).mean(), whole.mean(), atol=1e-12)
    assert a.merge(b).count == 6


def test_distance_properties():
    rng = np.random.default_rng(5)
    a = SpectralFingerprint(rng.random((8, 8)), 1, "a")
    b = SpectralFingerprint(rng.random((8, 8)), 1, "b")
    assert fingerprint_distance(a, a) == 0.0
    assert fingerprint_distance(a, b) == fingerprint_distance(b, a)
    shifted = SpectralFingerprint(a.magnitude + 0.25, 1, "c")
    assert fingerprint_distance(a, shifted) == pytest.approx(0.25, abs=1e-12)
    with pytest.raises(ResolutionMismatch):
        fingerprint_distance(a, SpectralFingerprint(np.zeros((4, 4)), 1, "d"))


def test_constant_fingerprint_renders_mid_gray(tmp_path):
    fp = SpectralFingerprint(np.full((6, 6), 2.0), 1, "a")
    path = render_spectrum(fp, tmp_path / "c.png")
    px = np.asarray(Image.open(path))
    assert px.shape == (6, 6) and np.all(px == 128)


def test_dc_only_single_bright_centre(tmp_path):
    fp = average_spectrum([np.full((8, 8), 100.0)], "a")
    px = np.array(Image.open(render_spectrum(fp, tmp_path / "dc.png")))
    assert px[4, 4] == 255
    px[4, 4] = 0
    assert px.max() == 0


def test_render_byte_identical(tmp_path):
    fp = average_spectrum([np.random.default_rng(6).random((8, 8))], "a")
    a = render_spectrum(fp, tmp_path / "a.png").read_bytes()
    b = render_spectrum(fp, tmp_path / "b.png").read_bytes()
    assert a == b


def test_uint8_scaling_extremes():
    m = np.array([[0.0, 1.0], [2.0, 4.0]])
    np.testing.assert_array_equal(spectrum_to_uint8(m), [[0, 64], [128, 255]])


def test_save_load_roundtrip(tmp_path):
    fp = average_spectrum([np.random.default_rng(7).random((4, 6))], "LD")
    save_fingerprint(fp, tmp_path / "fp.json")
    back = load_fingerprint(tmp_path / "fp.json")
    assert back.source == "LD" and back.resolution == (4, 6)
    np.testing.assert_array_equal(back.magnitude, fp.magnitude)


def test_to_gray_resize():
    g = to_gray(np.zeros((10, 12, 3)), 8)
    assert g.shape == (8, 8)

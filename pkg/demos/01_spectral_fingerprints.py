"""
Spectral fingerprints
=====================

Average the centred log-magnitude Fourier spectrum of each image source and
compare the results. The synthetic sources differ only in base colour, so
their fingerprints differ mostly at the DC term.

Run:  python demos/01_spectral_fingerprints.py [output-root]
"""

import numpy as np

from _common import corpus, out_dir
from fakeprobe.dataset import load_image, load_manifest
from fakeprobe.fingerprint import average_spectrum, dft2, fingerprint_distance, render_spectrum

out = out_dir("fingerprints")
manifest = load_manifest(corpus(out, {"real": 40, "SD": 40, "GLIDE": 40}, size=16))

# the transform itself: an 8x8 random image, checked against numpy
x = np.random.default_rng(0).random((8, 8))
print("max |dft2 - np.fft.fft2| =", np.abs(dft2(x) - np.fft.fft2(x)).max())

# one fingerprint per source
fps = {}
for source in ("real", "SD", "GLIDE"):
    images = [load_image(r.image_path) for r in manifest.by_origin(source)]
    fps[source] = average_spectrum(images, source)
    render_spectrum(fps[source], out / f"fingerprint-{source}.png")
    print(f"{source:6s} n={fps[source].n_images}  DC={fps[source].magnitude[8, 8]:.3f}")

# pairwise RMS distance between log-magnitude maps
for a in fps:
    for b in fps:
        if a < b:
            print(f"distance {a} vs {b}: {fingerprint_distance(fps[a], fps[b]):.4f}")

print("PNGs written to", out)

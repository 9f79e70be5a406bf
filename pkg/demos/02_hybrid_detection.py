"""
Image-only vs hybrid detection
==============================

Fakes in this corpus look exactly like the reals (same grey base colour and
noise); only their prompts carry a marker token. An image-only detector has
nothing to learn from, while a hybrid detector that also sees the prompt
embedding separates the classes.

Run:  python demos/02_hybrid_detection.py [output-root]
"""

from _common import corpus, out_dir
from fakeprobe.classifier import ConvNetConfig, TrainConfig
from fakeprobe.dataset import build_detection_split, load_manifest
from fakeprobe.detection import constant_detector, detect, evaluate_detector, train_detector
from fakeprobe.encoders import FixedCaptioner, ToyBackend

out = out_dir("detection")
grey = (128, 128, 128)
manifest = load_manifest(corpus(out, {"real": 150, "SD": 150}, seed=1, markers={"SD": "FAKEWORD"},
                                colours={"SD": grey}))
split = build_detection_split(manifest, "SD", 150, seed=0)
toy = ToyBackend()

image_only = train_detector(manifest, split, "image_only", TrainConfig(epochs=5, seed=0),
                            conv=ConvNetConfig(8, (8, 16), 16))
hybrid = train_detector(manifest, split, "hybrid", TrainConfig(epochs=30, seed=0), toy)
floor = constant_detector(0, toy)

for name, model in [("constant", floor), ("image-only", image_only), ("hybrid", hybrid)]:
    report = evaluate_detector(model, manifest, split, toy)
    print(f"{name:10s} holdout accuracy {report.accuracy:.3f}  confusion {report.confusion.tolist()}")

# a prompt can come from the manifest or from a caption backend
rec = manifest.by_origin("SD")[0]
print(detect(hybrid, rec.image_path, rec.prompt))
print(detect(hybrid, rec.image_path, backend=toy, caption_backend=FixedCaptioner(toy, rec.prompt)))

hybrid.save(out / "hybrid-detector.json")

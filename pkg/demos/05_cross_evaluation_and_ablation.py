"""
Cross-model evaluation and training-size ablation
=================================================

A detector trained on one generator is scored on fakes from others. Here SD
and LD share the prompt marker while GLIDE has its own, so the SD-trained
detector transfers to LD but not to GLIDE. The second half retrains the
detector at growing training sizes on one shared holdout.

Run:  python demos/05_cross_evaluation_and_ablation.py [output-root]
"""

from _common import corpus, out_dir
from fakeprobe.classifier import TrainConfig
from fakeprobe.dataset import build_detection_split, load_manifest
from fakeprobe.detection import train_detector
from fakeprobe.encoders import ToyBackend
from fakeprobe.evaluation import REFERENCE_ACCURACY, cross_matrix, size_ablation
from fakeprobe.plots import line_chart

out = out_dir("evaluation")
grey = (128, 128, 128)
manifest = load_manifest(corpus(
    out, {"real": 200, "SD": 120, "LD": 60, "GLIDE": 60}, seed=4,
    markers={"SD": "FAKEWORD", "LD": "FAKEWORD", "GLIDE": "zqglide"},
    colours={"SD": grey, "LD": grey, "GLIDE": grey},
))
toy = ToyBackend()

split = build_detection_split(manifest, "SD", 100, seed=0)
model = train_detector(manifest, split, "hybrid", TrainConfig(epochs=30, seed=0), toy)
rows = cross_matrix(model, [manifest], ["SD", "LD", "GLIDE"], toy,
                    exclude_ids={rid for rid, _ in split.train}, train_source="SD")
for r in rows:
    print(f"train {r.train_source} -> eval {r.eval_origin:5s}  accuracy {r.accuracy:.3f}  (n={r.n_total})")

# full-scale reference numbers travel with reports as context only
print("reference (full scale, image-only SD->LD):", REFERENCE_ACCURACY[("detection", "image_only", "SD", "LD", "MSCOCO")])

sizes = [8, 16, 32, 64, 128]
ablation = size_ablation(manifest, sizes, "hybrid", TrainConfig(epochs=30, seed=0), toy)
for r in ablation:
    print(f"train size {r.size:4d}  accuracy {r.accuracy:.3f}")
line_chart(sizes, [r.accuracy for r in ablation], out / "ablation.png", xlabel="training size", ylabel="accuracy")

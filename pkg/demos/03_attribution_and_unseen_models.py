"""
Attribution and unseen models
=============================

Train a four-way attributor (real, SD, LD, GLIDE), then add DALLE2 fakes it
never saw. Predictions whose top probability falls below a threshold are
routed to "unseen"; sweeping the threshold trades seen-class accuracy for
catching the new source.

Run:  python demos/03_attribution_and_unseen_models.py [output-root]
"""

from _common import corpus, out_dir
from fakeprobe.attribution import attribute, evaluate_attributor, sweep_thresholds, train_attributor
from fakeprobe.classifier import TrainConfig
from fakeprobe.dataset import build_attribution_split, build_open_set_split, load_manifest
from fakeprobe.encoders import ToyBackend
from fakeprobe.plots import line_chart

out = out_dir("attribution")
manifest = load_manifest(corpus(out, {"real": 100, "SD": 100, "LD": 100, "GLIDE": 100, "DALLE2": 40}, seed=2))
toy = ToyBackend()

split = build_attribution_split(manifest, 60, seed=0)
model = train_attributor(manifest, split, "hybrid", TrainConfig(epochs=50, seed=0), toy)
print("closed-set accuracy:", evaluate_attributor(model, manifest, split, toy).accuracy)

rec = manifest.by_origin("LD")[0]
print(attribute(model, rec.image_path, rec.prompt))

# five-class evaluation set, disjoint from the training draw
held_out = {rid for rid, _ in split.train}
open_set = build_open_set_split(manifest, ["DALLE2"], 30, seed=1, exclude_ids=held_out)
# the toy attributor is confident even on DALLE2, so here routing mostly costs accuracy
rows = sweep_thresholds(model, manifest, open_set, backend=toy)
for t, acc in rows:
    print(f"threshold {t:.1f}  open-set accuracy {acc:.3f}")
line_chart([t for t, _ in rows], [a for _, a in rows], out / "sweep.png",
           xlabel="threshold", ylabel="open-set accuracy")

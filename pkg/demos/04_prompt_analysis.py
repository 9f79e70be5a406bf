"""
Prompt analysis
===============

Relate prompts to images: which image a prompt binds to more strongly, how
descriptive a prompt is of its image, which topics and prompt clusters
produce fakes a detector accepts as real, and how prompt length and noun
ratio relate to that.

Run:  python demos/04_prompt_analysis.py [output-root]
"""

from _common import corpus, out_dir
from fakeprobe.classifier import ConvNetConfig, TrainConfig
from fakeprobe.dataset import build_detection_split, load_image, load_manifest
from fakeprobe.detection import train_detector
from fakeprobe.encoders import ToyBackend, ToyJointBackend
from fakeprobe.prompt_analysis import (
    ScoredSample,
    bin_by_descriptiveness,
    cluster_prompts,
    connection_distribution,
    descriptiveness,
    detector_scorer,
    structure_report,
    topic_authenticity,
)

out = out_dir("prompts")
manifest = load_manifest(corpus(out, {"real": 40, "SD": 40}, seed=3, paired=True))
joint = ToyJointBackend()
reals = {r.prompt: r for r in manifest.by_origin("real")}
fakes = manifest.by_origin("SD")

# connection: softmax over (prompt vs real image, prompt vs fake image) similarities
conn = [connection_distribution(joint, f.prompt, reals[f.prompt].image_path, f.image_path, prompt_id=f.id)
        for f in fakes if f.prompt in reals]
print("mean p_real over", len(conn), "pairs:", sum(c.p_real for c in conn) / len(conn))

# descriptiveness, split into five equal-count bins
samples = [ScoredSample(r.id, descriptiveness(joint, r.prompt, load_image(r.image_path))) for r in manifest.records]
for b in bin_by_descriptiveness(samples, 5):
    print(f"bin {b.index}: {b.size} prompts, scores {b.lo:.3f}..{b.hi:.3f}")

# authenticity needs an image-only detector
split = build_detection_split(manifest, "SD", 40, seed=0)
detector = train_detector(manifest, split, "image_only", TrainConfig(epochs=3, seed=0), conv=ConvNetConfig(4, (4,), 16))
scorer = detector_scorer(detector)

for t in topic_authenticity(fakes, scorer):
    print(f"topic {t.topic:9s} n={t.n_prompts:2d} classified real {t.real_proportion:.2f}")

toy = ToyBackend()
clusters = cluster_prompts([toy.encode_text(f.prompt) for f in fakes], eps=0.6, min_pts=3, ids=[f.id for f in fakes])
for c in clusters:
    print(f"cluster {c.cluster_id}: {c.size} prompts, e.g. {manifest[c.representatives[0]].prompt!r}"
          if c.representatives else f"noise: {c.size} prompts")

rep = structure_report(fakes, scorer)
for b in rep.by_length:
    print(f"length {b.lo:g}-{b.hi:g}: {b.count} prompts, mean authenticity {b.mean_authenticity}")

#!/usr/bin/env python3
"""Train a vocabulary tree and quantize descriptors into visual words.

The tree is hierarchical k-means: each level clusters into K groups, giving
up to K^L leaves (visual words) while quantization costs only K*L distance
evaluations per descriptor instead of K^L.
"""

import time

import numpy as np

from framebow import (
    RoiSpec,
    VocabTrainConfig,
    build_histogram,
    decode_yuv422_to_rgb,
    extract_dsift,
    quantize_batch,
    synth_texture_frame,
    to_gray,
    train_tree,
)

def descriptors_for(label, index):
    frame = decode_yuv422_to_rgb(synth_texture_frame(3, label, index, 200, 200))
    return extract_dsift(to_gray(frame, RoiSpec(0, 0, 200, 200))).descriptors

corpus = np.vstack([descriptors_for(label, i) for label in ("A", "B", "C3") for i in range(4)])
print(f"corpus: {corpus.shape[0]} descriptors x {corpus.shape[1]} dims")

config = VocabTrainConfig(branching=8, depth=2, seed=1)
t0 = time.perf_counter()
tree = train_tree(corpus, config)
print(f"trained K={config.branching}, L={config.depth} tree "
      f"in {time.perf_counter()-t0:.1f}s: {tree.word_count} words, {tree.node_count} nodes")

# quantize one patch per class and compare their word histograms
hists = {}
for label in ("A", "B", "C3"):
    desc = descriptors_for(label, 100)
    t0 = time.perf_counter()
    words = quantize_batch(tree, desc)
    ms = (time.perf_counter() - t0) * 1e3
    hists[label] = build_histogram(words, tree.word_count)
    top = np.argsort(hists[label].counts)[::-1][:5]
    print(f"class {label}: quantized {len(desc)} descriptors in {ms:.1f} ms; "
          f"top words {top.tolist()}")

# histogram overlap shows why the classes separate
def cosine(a, b):
    a, b = a.counts.astype(float), b.counts.astype(float)
    return a @ b / (np.linalg.norm(a) * np.linalg.norm(b))

print("\nhistogram cosine similarity between classes:")
for a in ("A", "B", "C3"):
    row = "  ".join(f"{cosine(hists[a], hists[b]):.3f}" for b in ("A", "B", "C3"))
    print(f"  {a:>2}: {row}")

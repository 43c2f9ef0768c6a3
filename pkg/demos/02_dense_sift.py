#!/usr/bin/env python3
"""Dense SIFT extraction on the three synthetic texture classes.

Descriptors are computed on a regular 5-pixel grid at two patch scales
(bin sizes 5 and 7, patch extents 20 and 28 pixels). A 200x200 region yields
exactly 37^2 + 35^2 = 2594 descriptors.
"""

import time

import numpy as np

from framebow import (
    DsiftParams,
    RoiSpec,
    decode_yuv422_to_rgb,
    extract_dsift,
    grid_count,
    synth_texture_frame,
    to_gray,
)

params = DsiftParams()
print(f"grid step {params.grid_step}, bin sizes {params.bin_sizes}, "
      f"descriptor dimension {params.dimension}")
for s in params.bin_sizes:
    n = grid_count(200, 200, params.grid_step, s)
    print(f"  bin size {s}: patch extent {4*s:2d}px -> {n} patches on 200x200")

for label in ("A", "B", "C3"):
    frame = decode_yuv422_to_rgb(synth_texture_frame(7, label, 0, 200, 200))
    gray = to_gray(frame, RoiSpec(0, 0, 200, 200))
    t0 = time.perf_counter()
    ds = extract_dsift(gray, params)
    ms = (time.perf_counter() - t0) * 1e3
    norms = np.linalg.norm(ds.descriptors, axis=1)
    # orientation energy: sum descriptor mass per orientation bin
    energy = ds.descriptors.reshape(len(ds), 16, 8).sum(axis=(0, 1))
    energy /= energy.sum()
    spread = " ".join(f"{v:.2f}" for v in energy)
    print(f"\nclass {label}: {len(ds)} descriptors in {ms:.1f} ms")
    print(f"  nonzero descriptors : {(norms > 0).mean() * 100:.1f}%")
    print(f"  orientation profile : [{spread}]")

print("\nClass B concentrates energy in few orientations (the oriented mesh);")
print("A and C3 spread it isotropically at different spatial frequencies.")

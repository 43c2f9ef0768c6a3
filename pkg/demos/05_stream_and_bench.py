#!/usr/bin/env python3
"""Streaming behavior: drop policies, smoothing, and the stage-cost report.

Uses the artifacts from a quick training run, then (a) replays a short clip
offline, (b) replays it paced against the wall clock with an artificially
slow per-frame cost to show skip-to-latest dropping, and (c) benches the
stage chain the way the `framebow bench` subcommand does.
"""

import tempfile
from pathlib import Path

from framebow import (
    ArtifactBundle,
    Pipeline,
    PipelineConfig,
    RawStreamFileSource,
    SyntheticSource,
    TrainConfig,
    VocabTrainConfig,
    run_bench,
    synth_dataset,
    synth_texture_frame,
    train_from_directory,
    write_raw_stream,
)

root = Path(tempfile.mkdtemp(prefix="framebow-demo-"))
synth_dataset(root / "ds", per_class=8, seed=1, size=(128, 128))
art = train_from_directory(root / "ds", root / "art",
                           TrainConfig(mode="three", seed=1,
                                       vocab=VocabTrainConfig(branching=6, depth=2, seed=1)))
bundle = ArtifactBundle.load(art.vocab_path, art.scaler_path, art.model_path)

clip = root / "clip.yuv2"
write_raw_stream(clip, (synth_texture_frame(9, "B", i, 256, 192) for i in range(30)), fps=30)

# (a) offline replay processes every frame
pipeline = Pipeline({"three": bundle}, PipelineConfig(mode="three", drop_policy="process-all"))
results = list(pipeline.run_stream(RawStreamFileSource(clip), annotate=False))
print(f"process-all: {len(results)} results for 30 frames, "
      f"dropped {sum(r.dropped_frames for r in results)}")

# (b) live pacing with a 60 ms debug sleep forces drops at 30 fps
slow = Pipeline({"three": bundle}, PipelineConfig(
    mode="three", drop_policy="skip-to-latest", debug_sleep_us=60_000, smoothing_alpha=0.8,
))
results = list(slow.run_stream(RawStreamFileSource(clip), annotate=False))
dropped = sum(r.dropped_frames for r in results)
print(f"skip-to-latest at 30 fps with a 60 ms stall: {len(results)} emitted + "
      f"{dropped} dropped = {len(results) + dropped}")
print("  per-result drops:", [r.dropped_frames for r in results])
print("  smoothed B-probability trace:",
      " ".join(f"{r.smoothed[1]:.2f}" for r in results if r.smoothed))

# (c) the stage-cost report
report = run_bench(
    Pipeline({"three": bundle}, PipelineConfig(mode="three")),
    SyntheticSource("C3", seed=4, width=640, height=480),
    n_frames=40,
)
print()
print(report.render())

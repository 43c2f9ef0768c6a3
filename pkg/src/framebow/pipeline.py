"""The per-frame classification loop.

Stage chain per frame: YUV conversion, ROI gray crop, dense SIFT,
vocabulary-tree quantization, histogram + scaling, SVM probabilities,
annotation.  Each stage is wall-clock timed; a stream run paces frames by
their source timestamps and either drops stale frames (skip-to-latest, the
live default) or processes every frame (offline replay).
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .dsift import DsiftParams, extract_dsift, to_gray
from .errors import ConfigError
from .features import apply_scaler, build_histogram, load_scaler
from .ingest import FrameSource, RawFrame, RgbFrame, decode_yuv422_to_rgb
from .roi import RoiSpec
from .svm import load_model, predict_proba
from .util import file_fingerprint
from .vocab import load_tree, quantize_batch

log = logging.getLogger("framebow")

STAGES = ("convert", "gray", "dsift", "quantize", "histogram_scale", "svm", "annotate")

BANNER_HEIGHT = 22
BORDER_PX = 3


@dataclass(frozen=True)
class FrameResult:
    frame_index: int
    roi: RoiSpec
    mode: str
    label: str
    classes: tuple[str, ...]
    probabilities: tuple[float, ...]
    timings_us: dict[str, int]
    total_us: int
    dropped_frames: int = 0
    smoothed: Optional[tuple[float, ...]] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        d = {
            "frame_index": self.frame_index,
            "roi": {"x": self.roi.x, "y": self.roi.y, "w": self.roi.width, "h": self.roi.height},
            "mode": self.mode,
            "label": self.label,
            "classes": list(self.classes),
            "probabilities": list(self.probabilities),
            "timings_us": dict(self.timings_us),
            "total_us": self.total_us,
            "dropped_frames": self.dropped_frames,
        }
        if self.smoothed is not None:
            d["smoothed"] = list(self.smoothed)
        if self.error is not None:
            d["error"] = self.error
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "three"
    roi: Optional[RoiSpec] = None  # None -> centered 200x200 per frame size
    latency_budget_us: int = 50_000
    drop_policy: str = "skip-to-latest"  # or "process-all"
    smoothing_alpha: float = 0.0
    dsift: DsiftParams = field(default_factory=DsiftParams)
    debug_sleep_us: int = 0  # test hook: inflate per-frame cost

    def __post_init__(self):
        if self.mode not in ("two", "three"):
            raise ValueError(f"mode must be 'two' or 'three', got {self.mode!r}")
        if self.drop_policy not in ("skip-to-latest", "process-all"):
            raise ValueError(f"unknown drop policy {self.drop_policy!r}")
        if not (0.0 <= self.smoothing_alpha < 1.0):
            raise ValueError("smoothing alpha must lie in [0, 1)")


@dataclass(frozen=True)
class ArtifactBundle:
    """A matched (vocabulary, scaler, SVM model) triple."""

    mode: str
    tree: object
    scaler: object
    model: object
    vocab_path: str
    scaler_path: str
    model_path: str

    @staticmethod
    def load(vocab_path, scaler_path, model_path, expected_mode: Optional[str] = None) -> "ArtifactBundle":
        tree = load_tree(vocab_path)
        scaler = load_scaler(scaler_path)
        model = load_model(model_path)
        vocab_fp = file_fingerprint(vocab_path)
        scaler_fp = file_fingerprint(scaler_path)
        if model.vocab_fingerprint != vocab_fp:
            raise ConfigError(
                f"model {model_path} was trained against a different vocabulary "
                f"than {vocab_path} (fingerprint mismatch)"
            )
        if model.scaler_fingerprint != scaler_fp:
            raise ConfigError(
                f"model {model_path} was trained against a different scaler "
                f"than {scaler_path} (fingerprint mismatch)"
            )
        if tree.word_count != scaler.word_count or tree.word_count != model.feature_length:
            raise ConfigError(
                f"artifact sizes disagree: vocabulary {tree.word_count} words, "
                f"scaler {scaler.word_count}, model {model.feature_length}"
            )
        if expected_mode is not None and model.mode != expected_mode:
            raise ConfigError(
                f"model {model_path} is a {model.mode}-category model, run requested {expected_mode}"
            )
        return ArtifactBundle(
            mode=model.mode, tree=tree, scaler=scaler, model=model,
            vocab_path=str(vocab_path), scaler_path=str(scaler_path), model_path=str(model_path),
        )


def smooth_probabilities(previous: np.ndarray, current: np.ndarray, alpha: float) -> np.ndarray:
    """Exponential moving average, renormalized to sum 1."""
    if not (0.0 <= alpha < 1.0):
        raise ValueError("alpha must lie in [0, 1)")
    previous = np.asarray(previous, dtype=np.float64)
    current = np.asarray(current, dtype=np.float64)
    if previous.shape != current.shape:
        raise ValueError(f"length mismatch: {previous.shape} vs {current.shape}")
    s = alpha * previous + (1.0 - alpha) * current
    total = s.sum()
    return s / total if total > 0 else s


def format_percent(p: float) -> str:
    return f"{p * 100:.1f}%"


def display_class(name: str) -> str:
    return "not A" if name == "notA" else name


def format_probabilities(classes, probabilities) -> str:
    """One-decimal per-class percentages, e.g. 'A 1.1% B 98.9%'."""
    return " ".join(
        f"{display_class(c)} {format_percent(p)}" for c, p in zip(classes, probabilities)
    )


def banner_text(result: FrameResult) -> str:
    if result.error:
        return f"frame {result.frame_index}: {result.error}"
    probs = dict(zip(result.classes, result.probabilities))
    if result.mode == "two":
        winner = "type A" if result.label == "A" else "not type A"
        return f"{winner}, {format_percent(probs[result.label])}"
    return f"Type {result.label}  " + format_probabilities(result.classes, result.probabilities)


_font = ImageFont.load_default()


def annotate_frame(frame: RgbFrame, result: FrameResult) -> RgbFrame:
    """White 3-px ROI border plus a text banner strip along the top edge.

    Pixels outside the border ring and the banner are left untouched.
    """
    out = frame.data.copy()
    r = result.roi
    x0, y0, x1, y1 = r.x, r.y, r.x + r.width, r.y + r.height
    out[y0:y0 + BORDER_PX, x0:x1] = 255
    out[y1 - BORDER_PX:y1, x0:x1] = 255
    out[y0:y1, x0:x0 + BORDER_PX] = 255
    out[y0:y1, x1 - BORDER_PX:x1] = 255

    strip = Image.new("RGB", (frame.width, BANNER_HEIGHT), (0, 0, 0))
    ImageDraw.Draw(strip).text((6, 4), banner_text(result), fill=(255, 255, 255), font=_font)
    out[:BANNER_HEIGHT, :, :] = np.asarray(strip, dtype=np.uint8)
    return RgbFrame(frame.frame_index, frame.timestamp_us, frame.width, frame.height, out)


class Pipeline:
    """Holds loaded artifacts and mutable run state (ROI, mode, smoothing).

    State changes are applied between frames via `apply_pending`; a frame is
    always processed under one consistent configuration snapshot.
    """

    def __init__(self, bundles: dict[str, ArtifactBundle], config: PipelineConfig):
        if config.mode not in bundles:
            raise ConfigError(f"no artifact bundle loaded for mode {config.mode!r}")
        self.bundles = bundles
        self.config = config
        self.mode = config.mode
        self.roi_override: Optional[RoiSpec] = config.roi
        self.alpha = config.smoothing_alpha
        self.paused = False
        self._smoothed: Optional[np.ndarray] = None
        self._pending: list[tuple[str, object]] = []

    @property
    def bundle(self) -> ArtifactBundle:
        return self.bundles[self.mode]

    # -- control plane -----------------------------------------------------
    def queue_command(self, kind: str, payload: object = None) -> None:
        self._pending.append((kind, payload))

    def has_mode(self, mode: str) -> bool:
        return mode in self.bundles

    def apply_pending(self, frame_width: int, frame_height: int) -> None:
        """Drain queued control commands; called between frames."""
        pending, self._pending = self._pending, []
        for kind, payload in pending:
            if kind == "set_roi":
                self.roi_override = payload.clamped(frame_width, frame_height)
            elif kind == "set_mode":
                if payload not in self.bundles:
                    log.warning("ignoring mode switch to %r: no model loaded", payload)
                    continue
                if payload != self.mode:
                    self.mode = payload
                    self._smoothed = None
            elif kind == "set_smoothing":
                self.alpha = float(payload)
                if self.alpha == 0.0:
                    self._smoothed = None
            elif kind == "pause":
                self.paused = True
            elif kind == "resume":
                self.paused = False
            else:
                log.warning("unknown control command %r", kind)

    def current_roi(self, frame_width: int, frame_height: int) -> RoiSpec:
        if self.roi_override is not None:
            return self.roi_override.clamped(frame_width, frame_height)
        return RoiSpec.centered(frame_width, frame_height).clamped(frame_width, frame_height)

    # -- data plane ----------------------------------------------------------
    def process_frame(self, frame: RawFrame, dropped_frames: int = 0,
                      annotate: bool = True) -> tuple[FrameResult, Optional[RgbFrame]]:
        """Run the full stage chain on one frame.

        Returns the result and the annotated RGB frame (None for error
        results).  Undersized frames produce an error result; the caller's
        stream continues.
        """
        bundle = self.bundle
        mode = self.mode
        timings: dict[str, int] = {}
        clock = time.perf_counter_ns

        t = clock()
        rgb = decode_yuv422_to_rgb(frame)
        timings["convert"] = (clock() - t) // 1000

        roi = self.current_roi(frame.width, frame.height)
        min_side = 4 * max(self.config.dsift.bin_sizes)
        if roi.width < min_side or roi.height < min_side:
            msg = (
                f"frame {frame.width}x{frame.height} leaves ROI {roi.width}x{roi.height}, "
                f"smaller than one {min_side}px patch"
            )
            result = FrameResult(
                frame_index=frame.frame_index, roi=roi, mode=mode, label="",
                classes=tuple(bundle.model.classes), probabilities=(),
                timings_us=timings, total_us=sum(timings.values()),
                dropped_frames=dropped_frames, error=msg,
            )
            return result, None

        t = clock()
        gray = to_gray(rgb, roi)
        timings["gray"] = (clock() - t) // 1000

        t = clock()
        descriptors = extract_dsift(gray, self.config.dsift)
        timings["dsift"] = (clock() - t) // 1000

        t = clock()
        words = quantize_batch(bundle.tree, descriptors.descriptors)
        timings["quantize"] = (clock() - t) // 1000

        t = clock()
        histogram = build_histogram(words, bundle.tree.word_count)
        scaled = apply_scaler(histogram, bundle.scaler)
        timings["histogram_scale"] = (clock() - t) // 1000
        if histogram.total and np.count_nonzero(histogram.counts) == 1:
            log.debug("frame %d: degenerate content, every descriptor hit one word",
                      frame.frame_index)

        t = clock()
        probs = predict_proba(bundle.model, scaled)
        timings["svm"] = (clock() - t) // 1000

        smoothed = None
        if self.alpha > 0.0:
            if self._smoothed is None or len(self._smoothed) != len(probs.probabilities):
                self._smoothed = probs.probabilities.copy()
            else:
                self._smoothed = smooth_probabilities(self._smoothed, probs.probabilities, self.alpha)
            smoothed = tuple(float(v) for v in self._smoothed)

        result = FrameResult(
            frame_index=frame.frame_index,
            roi=roi,
            mode=mode,
            label=probs.label,
            classes=tuple(bundle.model.classes),
            probabilities=tuple(float(p) for p in probs.probabilities),
            timings_us=timings,
            total_us=0,
            dropped_frames=dropped_frames,
            smoothed=smoothed,
        )

        annotated = None
        t = clock()
        if annotate:
            annotated = annotate_frame(rgb, result)
        timings["annotate"] = (clock() - t) // 1000
        result = replace(result, timings_us=timings, total_us=sum(timings.values()))
        return result, annotated

    def run_stream(self, source: FrameSource, max_frames: Optional[int] = None,
                   annotate: bool = True, on_result=None, stop=None) -> Iterator[FrameResult]:
        """Process a source to exhaustion (or max_frames), yielding results.

        skip-to-latest paces frames by their timestamps against the wall
        clock and skips frames that became stale while processing; process-all
        replays every frame as fast as possible.  `stop` is an optional
        callable polled between frames to end the run early.
        """
        live = self.config.drop_policy == "skip-to-latest"
        interval_us = 1_000_000 // source.nominal_fps
        emitted = 0
        last_index = -1
        start_ns: Optional[int] = None

        while max_frames is None or emitted < max_frames:
            if stop is not None and stop():
                return
            while self.paused:
                time.sleep(0.005)
                if stop is not None and stop():
                    return
                if self._pending:
                    self.apply_pending(source.width, source.height)
            try:
                frame = source.next_frame()
            except OSError as exc:
                yield FrameResult(
                    frame_index=last_index + 1, roi=RoiSpec(0, 0, 1, 1), mode=self.mode,
                    label="", classes=(), probabilities=(), timings_us={}, total_us=0,
                    dropped_frames=0, error=f"source failed: {exc}",
                )
                return
            if frame is None:
                return
            if start_ns is None:
                start_ns = time.perf_counter_ns()

            if live:
                # wait for the frame's nominal arrival time
                due_ns = start_ns + frame.timestamp_us * 1000
                now = time.perf_counter_ns()
                if now < due_ns:
                    time.sleep((due_ns - now) / 1e9)

            self.apply_pending(frame.width, frame.height)
            dropped = frame.frame_index - last_index - 1
            last_index = frame.frame_index
            result, annotated = self.process_frame(frame, dropped_frames=dropped, annotate=annotate)
            if self.config.debug_sleep_us:
                time.sleep(self.config.debug_sleep_us / 1e6)
            emitted += 1
            if on_result is not None:
                on_result(result, annotated)
            yield result

            if live:
                elapsed_us = (time.perf_counter_ns() - start_ns) // 1000
                latest = int(elapsed_us // interval_us)
                count = source.frame_count()
                if count is not None and not source.loop:
                    latest = min(latest, count - 1)
                source.skip_to(latest)


# ---------------------------------------------------------------------------
# Benchmarking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchReport:
    n_frames: int
    stage_stats: dict[str, dict[str, float]]  # stage -> mean/p50/p95 (us) + fraction
    mean_total_us: float
    fps: float

    def fractions(self) -> dict[str, float]:
        return {stage: s["fraction"] for stage, s in self.stage_stats.items()}

    def render(self) -> str:
        lines = [
            f"frames measured : {self.n_frames}",
            f"mean frame time : {self.mean_total_us / 1000:.2f} ms  ({self.fps:.1f} fps)",
            "  (stage chain only; source frame production is not counted)",
            "",
            f"{'stage':<16}{'mean ms':>9}{'p50 ms':>9}{'p95 ms':>9}{'share':>8}",
        ]
        for stage in STAGES:
            s = self.stage_stats[stage]
            lines.append(
                f"{stage:<16}{s['mean'] / 1000:>9.2f}{s['p50'] / 1000:>9.2f}"
                f"{s['p95'] / 1000:>9.2f}{s['fraction'] * 100:>7.1f}%"
            )
        ranked = sorted(self.stage_stats, key=lambda st: -self.stage_stats[st]["mean"])
        lines.append("")
        lines.append(f"heaviest stages : {ranked[0]}, {ranked[1]}")
        return "\n".join(lines)


def run_bench(pipeline: Pipeline, source: FrameSource, n_frames: int = 300) -> BenchReport:
    """Offline process-all run collecting per-stage timing statistics."""
    per_stage = {stage: [] for stage in STAGES}
    totals = []
    live_policy = pipeline.config.drop_policy
    pipeline.config = replace(pipeline.config, drop_policy="process-all")
    try:
        for result in pipeline.run_stream(source, max_frames=n_frames):
            if result.error:
                continue
            for stage in STAGES:
                per_stage[stage].append(result.timings_us[stage])
            totals.append(result.total_us)
    finally:
        pipeline.config = replace(pipeline.config, drop_policy=live_policy)
    if not totals:
        raise ValueError("bench processed no frames")

    means = {stage: float(np.mean(v)) for stage, v in per_stage.items()}
    mean_sum = sum(means.values())
    stats = {
        stage: {
            "mean": means[stage],
            "p50": float(np.percentile(per_stage[stage], 50)),
            "p95": float(np.percentile(per_stage[stage], 95)),
            "fraction": means[stage] / mean_sum if mean_sum else 0.0,
        }
        for stage in STAGES
    }
    mean_total = float(np.mean(totals))
    return BenchReport(
        n_frames=len(totals), stage_stats=stats,
        mean_total_us=mean_total, fps=1e6 / mean_total if mean_total else 0.0,
    )

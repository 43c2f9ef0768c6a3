"""Bag-of-visual-words histograms and the trained per-bin linear scaling.

Each histogram bin is mapped to [-1, 1] by the min/max observed over the
training histograms; the fitted ranges are stored and reused at test time
without clipping, so out-of-range test counts extrapolate linearly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

SCALER_FORMAT_LINE = "framebow-scale 1"


@dataclass(frozen=True)
class BowHistogram:
    counts: np.ndarray  # (word_count,) int64
    total: int

    def __post_init__(self):
        if int(self.counts.sum()) != self.total:
            raise ValueError("histogram counts do not sum to total")


@dataclass(frozen=True)
class ScalerParams:
    mins: np.ndarray  # (word_count,) float64
    maxs: np.ndarray
    # fitted on L1-normalized frequencies instead of raw counts; whether the
    # original system normalized first is unknowable, so both are supported
    normalized: bool = False

    def __post_init__(self):
        if self.mins.shape != self.maxs.shape:
            raise ValueError("min/max length mismatch")
        if np.any(self.mins > self.maxs):
            raise ValueError("scaler has min > max")

    @property
    def word_count(self) -> int:
        return self.mins.shape[0]

    def degenerate_bins(self) -> np.ndarray:
        """Bins whose training range collapsed to a single value."""
        return self.mins == self.maxs


def build_histogram(word_ids, word_count: int) -> BowHistogram:
    """Count word multiplicities into a fixed-length histogram."""
    ids = np.asarray(word_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= word_count):
        bad = ids[(ids < 0) | (ids >= word_count)][0]
        raise ValueError(f"word id {bad} outside [0, {word_count})")
    counts = np.bincount(ids, minlength=word_count)
    return BowHistogram(counts=counts, total=int(ids.size))


def _bin_values(histogram: BowHistogram, normalized: bool) -> np.ndarray:
    counts = histogram.counts.astype(np.float64)
    if not normalized:
        return counts
    return counts / histogram.total if histogram.total else counts


def fit_scaler(histograms, normalized: bool = False) -> ScalerParams:
    """Per-bin min and max over a set of training histograms.

    With `normalized` the ranges are fitted on L1-normalized frequencies.
    """
    hists = list(histograms)
    if not hists:
        raise ValueError("cannot fit a scaler on zero histograms")
    stacked = np.vstack([_bin_values(h, normalized) for h in hists])
    return ScalerParams(mins=stacked.min(axis=0), maxs=stacked.max(axis=0),
                        normalized=normalized)


def apply_scaler(histogram: BowHistogram, scaler: ScalerParams) -> np.ndarray:
    """Map counts to the trained [-1, 1] ranges; degenerate bins yield 0.

    Test-time counts outside the training range extrapolate past +/-1.
    """
    if histogram.counts.shape[0] != scaler.word_count:
        raise ValueError(
            f"histogram has {histogram.counts.shape[0]} bins, scaler expects {scaler.word_count}"
        )
    span = scaler.maxs - scaler.mins
    degenerate = span == 0
    safe = np.where(degenerate, 1.0, span)
    values = 2.0 * (_bin_values(histogram, scaler.normalized) - scaler.mins) / safe - 1.0
    values[degenerate] = 0.0
    return values


def save_scaler(path: str | Path, scaler: ScalerParams) -> None:
    """Plain-text range file: a header, then one `index min max` line per bin."""
    lines = [SCALER_FORMAT_LINE, f"{scaler.word_count} {int(scaler.normalized)}"]
    lines += [
        f"{i} {float(scaler.mins[i])!r} {float(scaler.maxs[i])!r}"
        for i in range(scaler.word_count)
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_scaler(path: str | Path) -> ScalerParams:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != SCALER_FORMAT_LINE:
        raise FormatError(f"{path}: not a scaler range file")
    try:
        fields = text[1].split()
        count = int(fields[0])
        normalized = bool(int(fields[1])) if len(fields) > 1 else False
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed bin count line") from exc
    body = text[2:]
    if len(body) != count:
        raise FormatError(f"{path}: expected {count} bin lines, found {len(body)}")
    mins = np.empty(count)
    maxs = np.empty(count)
    for expected_index, line in enumerate(body):
        parts = line.split()
        if len(parts) != 3 or int(parts[0]) != expected_index:
            raise FormatError(f"{path}: malformed bin line {line!r}")
        mins[expected_index] = float(parts[1])
        maxs[expected_index] = float(parts[2])
    return ScalerParams(mins=mins, maxs=maxs, normalized=normalized)

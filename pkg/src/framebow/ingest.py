"""Frame sources and packed YUV 4:2:2 pixel format handling.

Frames enter the system as packed YUYV byte buffers (the common SDI capture
layout: Y0 Cb Y1 Cr per two-pixel group) and are converted to 8-bit RGB with
the BT.601 studio-range matrix.  Three source kinds are supported: raw stream
files, directories of numbered PNG images, and a deterministic synthetic
texture generator used for training corpora and benchmarks.
"""

from __future__ import annotations

import math
import os
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from PIL import Image

from .errors import FormatError

RAW_STREAM_MAGIC = b"YUV2"
RAW_STREAM_HEADER = struct.Struct("<4sIII")  # magic, width, height, fps

SYNTH_CLASSES = ("A", "B", "C3")

# BT.601 studio-range decode matrix, applied to (Y-16, Cb-128, Cr-128).
_DECODE_MATRIX = np.array(
    [
        [1.164, 0.0, 1.596],
        [1.164, -0.392, -0.813],
        [1.164, 2.017, 0.0],
    ]
)
_ENCODE_MATRIX = np.linalg.inv(_DECODE_MATRIX)


@dataclass(frozen=True)
class RawFrame:
    """One packed YUYV 4:2:2 frame as delivered by a source."""

    frame_index: int
    timestamp_us: int
    width: int
    height: int
    data: np.ndarray  # uint8, length width*height*2

    def __post_init__(self):
        if self.width % 2 != 0:
            raise ValueError(f"width must be even, got {self.width}")
        expected = self.width * self.height * 2
        if self.data.size != expected:
            raise ValueError(
                f"YUYV buffer holds {self.data.size} bytes, "
                f"expected {expected} for {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class RgbFrame:
    """8-bit RGB frame, row-major (height, width, 3)."""

    frame_index: int
    timestamp_us: int
    width: int
    height: int
    data: np.ndarray  # uint8, shape (height, width, 3)

    def __post_init__(self):
        if self.data.shape != (self.height, self.width, 3):
            raise ValueError(
                f"RGB buffer shape {self.data.shape} does not match "
                f"{self.height}x{self.width}x3"
            )


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def decode_yuv422_to_rgb(frame: RawFrame) -> RgbFrame:
    """Convert packed YUYV to RGB (BT.601 studio range, round half up).

    Both pixels of a YUYV group share that group's (Cb, Cr).  The result is
    bit-exact across platforms: all arithmetic is float64 with an explicit
    half-up rounding step before the [0, 255] clamp.
    """
    groups = frame.data.reshape(frame.height, frame.width // 2, 4)
    yy0 = 1.164 * (groups[:, :, 0] - 16.0)
    yy1 = 1.164 * (groups[:, :, 2] - 16.0)
    cb = groups[:, :, 1] - 128.0
    cr = groups[:, :, 3] - 128.0
    r_term = 1.596 * cr
    g_term1 = 0.392 * cb
    g_term2 = 0.813 * cr
    b_term = 2.017 * cb

    # term grouping matters: the formula is evaluated left to right, and a
    # different association can round a half-way case the other way
    rgb = np.empty((frame.height, frame.width, 3), dtype=np.float64)
    rgb[:, 0::2, 0] = yy0 + r_term
    rgb[:, 1::2, 0] = yy1 + r_term
    rgb[:, 0::2, 1] = (yy0 - g_term1) - g_term2
    rgb[:, 1::2, 1] = (yy1 - g_term1) - g_term2
    rgb[:, 0::2, 2] = yy0 + b_term
    rgb[:, 1::2, 2] = yy1 + b_term
    out = np.clip(_round_half_up(rgb), 0.0, 255.0).astype(np.uint8)
    return RgbFrame(frame.frame_index, frame.timestamp_us, frame.width, frame.height, out)


def encode_rgb_to_yuv422(rgb: np.ndarray, frame_index: int = 0, timestamp_us: int = 0) -> RawFrame:
    """Pack an (H, W, 3) uint8 RGB image into a YUYV frame.

    Uses the exact inverse of the decode matrix; the chroma of each
    two-pixel group is the average of both pixels' chroma (lossy).
    """
    h, w, _ = rgb.shape
    if w % 2 != 0:
        raise ValueError(f"width must be even, got {w}")
    ycc = rgb.astype(np.float64) @ _ENCODE_MATRIX.T
    yp = ycc[:, :, 0] + 16.0
    cb = ycc[:, :, 1] + 128.0
    cr = ycc[:, :, 2] + 128.0
    cb2 = (cb[:, 0::2] + cb[:, 1::2]) / 2.0
    cr2 = (cr[:, 0::2] + cr[:, 1::2]) / 2.0

    packed = np.empty((h, w // 2, 4), dtype=np.float64)
    packed[:, :, 0] = yp[:, 0::2]
    packed[:, :, 1] = cb2
    packed[:, :, 2] = yp[:, 1::2]
    packed[:, :, 3] = cr2
    data = np.clip(_round_half_up(packed), 0.0, 255.0).astype(np.uint8).reshape(-1)
    return RawFrame(frame_index, timestamp_us, w, h, data)


def _luma_to_yuyv(luma: np.ndarray, frame_index: int, timestamp_us: int) -> RawFrame:
    """Pack a [0, 1] luma image as YUYV with neutral chroma."""
    h, w = luma.shape
    y = np.clip(_round_half_up(16.0 + luma * 219.0), 16.0, 235.0).astype(np.uint8)
    packed = np.empty((h, w // 2, 4), dtype=np.uint8)
    packed[:, :, 0] = y[:, 0::2]
    packed[:, :, 2] = y[:, 1::2]
    packed[:, :, 1] = 128
    packed[:, :, 3] = 128
    return RawFrame(frame_index, timestamp_us, w, h, packed.reshape(-1))


# ---------------------------------------------------------------------------
# Synthetic textures
# ---------------------------------------------------------------------------

def _class_rng(seed: int, class_label: str, frame_index: int) -> np.random.Generator:
    class_id = SYNTH_CLASSES.index(class_label)
    ss = np.random.SeedSequence([int(seed), class_id, int(frame_index)])
    return np.random.Generator(np.random.PCG64(ss))


def _texture_dots(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    """Class A: a regular lattice of soft dark dots on a bright field."""
    spacing = 14.0 + rng.uniform(-0.5, 0.5)
    radius = 3.2 + rng.uniform(-0.2, 0.2)
    phase_x = rng.uniform(0.0, spacing)
    phase_y = rng.uniform(0.0, spacing)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    dx = np.mod(xx + phase_x, spacing) - spacing / 2.0
    dy = np.mod(yy + phase_y, spacing) - spacing / 2.0
    d2 = dx * dx + dy * dy
    dots = np.exp(-d2 / (2.0 * radius * radius))
    img = 0.78 - 0.52 * dots
    img += rng.normal(0.0, 0.012, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def _texture_mesh(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    """Class B: a mesh of wavy curves with a dominant orientation."""
    theta = 0.6 + rng.uniform(-0.12, 0.12)
    wavelength = 11.0 + rng.uniform(-0.8, 0.8)
    wiggle = 2.2 + rng.uniform(-0.3, 0.3)
    phase1 = rng.uniform(0.0, 2.0 * math.pi)
    phase2 = rng.uniform(0.0, 2.0 * math.pi)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    u = xx * math.cos(theta) + yy * math.sin(theta)
    v = -xx * math.sin(theta) + yy * math.cos(theta)
    stripes = np.sin(2.0 * math.pi * u / wavelength + wiggle * np.sin(2.0 * math.pi * v / 37.0 + phase2) + phase1)
    cross = np.sin(2.0 * math.pi * v / (2.3 * wavelength) + 0.7 * np.sin(2.0 * math.pi * u / 41.0) + phase2)
    img = 0.5 + 0.30 * stripes + 0.10 * cross
    img += rng.normal(0.0, 0.012, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def _texture_blobs(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    """Class C3: irregular high-frequency blobs from band-passed noise."""
    noise = rng.standard_normal((height, width))
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.rfftfreq(width)[None, :]
    f = np.hypot(fy, fx)
    # Band-pass around a fairly high spatial frequency -> small busy blobs.
    f0, bw = 0.14, 0.05
    transfer = np.exp(-((f - f0) ** 2) / (2.0 * bw * bw))
    shaped = np.fft.irfft2(np.fft.rfft2(noise) * transfer, s=(height, width))
    shaped /= max(np.abs(shaped).max(), 1e-12)
    img = 0.5 + 0.42 * np.tanh(3.0 * shaped)
    img += rng.normal(0.0, 0.012, size=img.shape)
    return np.clip(img, 0.0, 1.0)


_TEXTURES = {"A": _texture_dots, "B": _texture_mesh, "C3": _texture_blobs}


def synth_texture_frame(
    seed: int,
    class_label: str,
    frame_index: int,
    width: int = 640,
    height: int = 480,
    timestamp_us: int = 0,
) -> RawFrame:
    """Generate one deterministic textured YUYV frame for a synthetic class.

    Identical (seed, class_label, frame_index) always produce identical
    bytes; consecutive frame indices jitter the texture parameters slightly.
    """
    if class_label not in SYNTH_CLASSES:
        raise ValueError(f"unknown class {class_label!r}, expected one of {SYNTH_CLASSES}")
    if width % 2 != 0:
        raise ValueError(f"width must be even, got {width}")
    if width < 64 or height < 64:
        raise ValueError(f"frame must be at least 64x64, got {width}x{height}")
    rng = _class_rng(seed, class_label, frame_index)
    luma = _TEXTURES[class_label](rng, width, height)
    return _luma_to_yuyv(luma, frame_index, timestamp_us)


# ---------------------------------------------------------------------------
# Frame sources
# ---------------------------------------------------------------------------

def _timestamp(frame_index: int, fps: int) -> int:
    return frame_index * (1_000_000 // fps)


class FrameSource:
    """Single-consumer sequence of RawFrames.

    Subclasses implement `_frame_at(position)` returning a frame or None at
    end of data; the base class handles indexing, timestamps and looping.
    """

    kind: str

    def __init__(self, nominal_fps: int = 30, loop: bool = False):
        if nominal_fps <= 0:
            raise ValueError("nominal_fps must be positive")
        self.nominal_fps = nominal_fps
        self.loop = loop
        self._next_index = 0

    # number of frames one pass provides, or None when unbounded
    def frame_count(self) -> Optional[int]:
        return None

    @property
    def width(self) -> int:
        raise NotImplementedError

    @property
    def height(self) -> int:
        raise NotImplementedError

    def _frame_at(self, position: int) -> Optional[RawFrame]:
        raise NotImplementedError

    def next_frame(self) -> Optional[RawFrame]:
        """Return the next frame in index order, or None at end of stream."""
        position = self._next_index
        count = self.frame_count()
        if count is not None and self.loop and count > 0:
            position %= count
        frame = self._frame_at(position)
        if frame is None:
            return None
        frame = RawFrame(
            frame_index=self._next_index,
            timestamp_us=_timestamp(self._next_index, self.nominal_fps),
            width=frame.width,
            height=frame.height,
            data=frame.data,
        )
        self._next_index += 1
        return frame

    def skip_to(self, frame_index: int) -> None:
        """Advance so the next delivered frame has at least this index."""
        if frame_index > self._next_index:
            self._next_index = frame_index

    def __iter__(self) -> Iterator[RawFrame]:
        while True:
            frame = self.next_frame()
            if frame is None:
                return
            yield frame


class SyntheticSource(FrameSource):
    """Endless deterministic texture stream for one synthetic class."""

    kind = "synthetic"

    def __init__(
        self,
        class_label: str,
        seed: int = 0,
        width: int = 640,
        height: int = 480,
        nominal_fps: int = 30,
        loop: bool = False,
    ):
        super().__init__(nominal_fps, loop)
        if class_label not in SYNTH_CLASSES:
            raise ValueError(f"unknown class {class_label!r}")
        self.class_label = class_label
        self.seed = seed
        self._width = width
        self._height = height

    @property
    def width(self) -> int:
        return self._width

    @property
    def height(self) -> int:
        return self._height

    def _frame_at(self, position: int) -> Optional[RawFrame]:
        return synth_texture_frame(self.seed, self.class_label, position, self._width, self._height)


class RawStreamFileSource(FrameSource):
    """Reads the 16-byte-header raw YUYV stream file format."""

    kind = "raw-stream-file"

    def __init__(self, path: str | os.PathLike, loop: bool = False):
        self.path = Path(path)
        try:
            raw = self.path.read_bytes()
        except OSError as exc:
            raise OSError(f"cannot read raw stream {self.path}: {exc}") from exc
        if len(raw) < RAW_STREAM_HEADER.size:
            raise FormatError(f"{self.path}: truncated header ({len(raw)} bytes)")
        magic, width, height, fps = RAW_STREAM_HEADER.unpack_from(raw)
        if magic != RAW_STREAM_MAGIC:
            raise FormatError(f"{self.path}: bad magic {magic!r}, expected {RAW_STREAM_MAGIC!r}")
        if width % 2 != 0 or width == 0 or height == 0 or fps == 0:
            raise FormatError(f"{self.path}: invalid header {width}x{height}@{fps}")
        body = raw[RAW_STREAM_HEADER.size:]
        self._frame_bytes = width * height * 2
        if len(body) % self._frame_bytes != 0:
            raise FormatError(
                f"{self.path}: body of {len(body)} bytes is not a multiple "
                f"of the {self._frame_bytes}-byte frame size"
            )
        super().__init__(fps, loop)
        self._width = width
        self._height = height
        self._body = np.frombuffer(body, dtype=np.uint8)
        self._count = len(body) // self._frame_bytes

    def frame_count(self) -> Optional[int]:
        return self._count

    @property
    def width(self) -> int:
        return self._width

    @property
    def height(self) -> int:
        return self._height

    def _frame_at(self, position: int) -> Optional[RawFrame]:
        if position >= self._count:
            return None
        start = position * self._frame_bytes
        data = self._body[start:start + self._frame_bytes]
        return RawFrame(position, 0, self._width, self._height, data)


class ImageDirectorySource(FrameSource):
    """Reads zero-padded numeric PNG files from a directory in lexical order."""

    kind = "image-directory"

    def __init__(self, path: str | os.PathLike, nominal_fps: int = 30, loop: bool = False):
        super().__init__(nominal_fps, loop)
        self.path = Path(path)
        if not self.path.is_dir():
            raise OSError(f"not a directory: {self.path}")
        self._files = sorted(
            p for p in self.path.iterdir()
            if p.suffix.lower() == ".png" and re.fullmatch(r"\d+", p.stem)
        )
        self._dims: Optional[tuple[int, int]] = None
        if self._files:
            with Image.open(self._files[0]) as im:
                self._dims = im.size  # (width, height)

    def frame_count(self) -> Optional[int]:
        return len(self._files)

    @property
    def width(self) -> int:
        if self._dims is None:
            raise ValueError(f"{self.path} holds no frames")
        return self._dims[0]

    @property
    def height(self) -> int:
        if self._dims is None:
            raise ValueError(f"{self.path} holds no frames")
        return self._dims[1]

    def _frame_at(self, position: int) -> Optional[RawFrame]:
        if position >= len(self._files):
            return None
        file = self._files[position]
        try:
            with Image.open(file) as im:
                rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except OSError as exc:
            raise OSError(f"cannot read image {file}: {exc}") from exc
        return encode_rgb_to_yuv422(rgb, position)


def write_raw_stream(path: str | os.PathLike, frames, fps: int) -> int:
    """Write RawFrames to the raw stream file format; returns frame count."""
    path = Path(path)
    n = 0
    with open(path, "wb") as fh:
        header_written = False
        for frame in frames:
            if not header_written:
                fh.write(RAW_STREAM_HEADER.pack(RAW_STREAM_MAGIC, frame.width, frame.height, fps))
                header_written = True
            fh.write(frame.data.tobytes())
            n += 1
    if n == 0:
        raise ValueError("refusing to write a raw stream with zero frames")
    return n


def open_source(descriptor: str, fps: int = 30, loop: bool = False, seed: int = 0) -> FrameSource:
    """Open a source from a descriptor string.

    `synthetic:CLASS` or `synthetic:CLASS:WxH` selects a synthetic stream; a
    directory path selects PNG ingestion; any other path is a raw stream file.
    """
    if descriptor.startswith("synthetic:"):
        parts = descriptor.split(":")
        class_label = parts[1]
        width, height = 640, 480
        if len(parts) > 2:
            m = re.fullmatch(r"(\d+)x(\d+)", parts[2])
            if not m:
                raise ValueError(f"bad synthetic size {parts[2]!r}, expected WxH")
            width, height = int(m.group(1)), int(m.group(2))
        return SyntheticSource(class_label, seed=seed, width=width, height=height,
                               nominal_fps=fps, loop=loop)
    p = Path(descriptor)
    if p.is_dir():
        return ImageDirectorySource(p, nominal_fps=fps, loop=loop)
    return RawStreamFileSource(p, loop=loop)

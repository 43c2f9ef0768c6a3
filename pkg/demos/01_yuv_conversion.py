#!/usr/bin/env python3
"""Walk through the packed YUYV 4:2:2 -> RGB conversion.

The conversion is BT.601 studio range with round-half-up quantization and is
bit-exact: the same bytes always decode to the same pixels, on any machine.
"""

import numpy as np

from framebow import RawFrame, decode_yuv422_to_rgb, encode_rgb_to_yuv422

# A frame is packed as Y0 Cb Y1 Cr per two-pixel group. Build one group at
# the studio black point, one at white, one at the red primary.
pixels = [
    ("studio black", 16, 128, 128),
    ("studio white", 235, 128, 128),
    ("red primary ", 81, 90, 240),
]
for name, y, cb, cr in pixels:
    data = np.array([y, cb, y, cr], dtype=np.uint8)
    rgb = decode_yuv422_to_rgb(RawFrame(0, 0, 2, 1, data))
    print(f"{name}  Y={y:3d} Cb={cb:3d} Cr={cr:3d}  ->  RGB {tuple(int(v) for v in rgb.data[0, 0])}")

# Both pixels of a group share the group's chroma; luma stays per-pixel.
data = np.array([50, 100, 200, 180], dtype=np.uint8)
rgb = decode_yuv422_to_rgb(RawFrame(0, 0, 2, 1, data))
print("\nshared chroma group: Y0=50, Y1=200, Cb=100, Cr=180")
print("  pixel 0:", tuple(int(v) for v in rgb.data[0, 0]))
print("  pixel 1:", tuple(int(v) for v in rgb.data[0, 1]))

# Round trip through the encoder: chroma subsampling is lossy, luma is not.
yy, xx = np.mgrid[0:32, 0:64]
smooth = np.stack(
    [120 + 40 * np.sin(xx * 0.2), 110 + 50 * np.cos(yy * 0.3), 90 + 20 * np.sin((xx + yy) * 0.1)],
    axis=-1,
).astype(np.uint8)
back = decode_yuv422_to_rgb(encode_rgb_to_yuv422(smooth))
luma = lambda a: a.astype(float) @ np.array([0.299, 0.587, 0.114])
print(f"\nencode/decode round trip on a smooth gradient:")
print(f"  max luma error     : {np.abs(luma(smooth) - luma(back.data)).max():.2f} / 255")
print(f"  max channel error  : {np.abs(smooth.astype(int) - back.data.astype(int)).max()} / 255")

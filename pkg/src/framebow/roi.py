"""Region-of-interest rectangle shared by the extraction and serving layers."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RoiSpec:
    """Axis-aligned rectangle in frame pixel coordinates."""

    x: int
    y: int
    width: int = 200
    height: int = 200

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"ROI must have positive size, got {self.width}x{self.height}")

    @staticmethod
    def centered(frame_width: int, frame_height: int, width: int = 200, height: int = 200) -> "RoiSpec":
        return RoiSpec((frame_width - width) // 2, (frame_height - height) // 2, width, height)

    def fits(self, frame_width: int, frame_height: int) -> bool:
        return (
            self.x >= 0 and self.y >= 0
            and self.x + self.width <= frame_width
            and self.y + self.height <= frame_height
        )

    def clamped(self, frame_width: int, frame_height: int) -> "RoiSpec":
        """Shift and shrink so the rectangle lies inside the frame."""
        w = min(self.width, frame_width)
        h = min(self.height, frame_height)
        x = min(max(self.x, 0), frame_width - w)
        y = min(max(self.y, 0), frame_height - h)
        return RoiSpec(x, y, w, h)

"""Constant-bitrate stand-in for a hardware video encoder.

Blobs carry sizes and keyframe flags only. Depth frames are refused because
lossy video coding corrupts depth values.
"""
from __future__ import annotations

from dataclasses import dataclass

from .blob import Codec, CompressedBlob


@dataclass(frozen=True)
class MockVideoConfig:
    width: int = 640
    height: int = 360
    framerate: float = 30.0
    bitrate_bps: float = 4_000_000.0
    gop: int = 30

    def __post_init__(self) -> None:
        for name in ("width", "height", "framerate", "bitrate_bps", "gop"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def frame_interval_ms(self) -> float:
        return 1000.0 / self.framerate


def mock_video_frame_size(config: MockVideoConfig) -> int:
    # Explicit half-up rounding; round() would go to even on .5
    return int(config.bitrate_bps / 8.0 / config.framerate + 0.5)


class MockVideoEncoder:
    def __init__(self, config: MockVideoConfig = MockVideoConfig()):
        self.config = config
        self.frame_size = mock_video_frame_size(config)
        self._index = 0

    def encode(self, frame=None) -> CompressedBlob:
        from .rvl import DepthFrame

        if isinstance(frame, DepthFrame):
            raise TypeError("lossy video coding is not allowed for depth frames; use the RVL codec")
        idx = self._index
        self._index += 1
        return CompressedBlob(
            Codec.MOCK_H264, b"", idx, idx % self.config.gop == 0,
            self.config.width, self.config.height, nbytes=self.frame_size,
        )

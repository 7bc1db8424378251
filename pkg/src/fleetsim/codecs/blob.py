from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


class Codec(enum.Enum):
    RVL = "rvl"
    MOCK_H264 = "h264"


@dataclass(frozen=True)
class CompressedBlob:
    """Wire payload for one compressed frame.

    Mock video blobs carry no pixel data, only their declared ``nbytes``.
    """

    codec: Codec
    data: bytes
    frame_index: int
    keyframe: bool
    width: int
    height: int
    nbytes: Optional[int] = None

    def __post_init__(self) -> None:
        if self.nbytes is None:
            object.__setattr__(self, "nbytes", len(self.data))
        if self.width * self.height > 0 and self.nbytes == 0:
            raise ValueError("non-empty frame encoded to an empty blob")

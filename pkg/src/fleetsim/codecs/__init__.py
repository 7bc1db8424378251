from .blob import Codec, CompressedBlob
from .cost import CostModel, CpuMeter, cost_base, cost_proposed
from .errors import CodecError, CorruptStream
from .rvl import BACKEND, DepthFrame, rvl_compress, rvl_decompress
from .video import MockVideoConfig, MockVideoEncoder, mock_video_frame_size

__all__ = [
    "BACKEND",
    "Codec",
    "CodecError",
    "CompressedBlob",
    "CorruptStream",
    "CostModel",
    "CpuMeter",
    "DepthFrame",
    "MockVideoConfig",
    "MockVideoEncoder",
    "cost_base",
    "cost_proposed",
    "mock_video_frame_size",
    "rvl_compress",
    "rvl_decompress",
]

"""Lossless depth-frame codec with a compiled kernel and a Python fallback.

The compiled kernel is used when importable; set ``FLEETSIM_PURE_PYTHON=1``
to force the fallback.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import _rvl_py
from .blob import Codec, CompressedBlob
from .errors import CorruptStream

_kernel = _rvl_py
BACKEND = "python"
if os.environ.get("FLEETSIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _rvl_ext as _kernel  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _kernel = _rvl_py


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """Row-major 16-bit depth samples in millimetres; zero marks an invalid pixel."""

    width: int
    height: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.width < 0 or self.height < 0:
            raise ValueError("frame dimensions must be non-negative")
        values = np.ascontiguousarray(self.values, dtype=np.uint16).reshape(-1)
        if values.size != self.width * self.height:
            raise ValueError(f"expected {self.width * self.height} samples, got {values.size}")
        object.__setattr__(self, "values", values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DepthFrame):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(self.values, other.values)

    @property
    def raw_size(self) -> int:
        return 2 * self.values.size


def _encode(values: np.ndarray, kernel) -> bytes:
    if kernel is _rvl_py:
        return kernel.encode(values.tolist())
    return kernel.encode(values)


def _decode(data: bytes, n: int, kernel) -> np.ndarray:
    if kernel is _rvl_py:
        return np.asarray(kernel.decode(data, n), dtype=np.uint16)
    return kernel.decode(data, n)


def rvl_compress(frame: DepthFrame, frame_index: int = 0, *, kernel=None) -> CompressedBlob:
    data = _encode(frame.values, kernel or _kernel)
    return CompressedBlob(Codec.RVL, data, frame_index, True, frame.width, frame.height)


def rvl_decompress(blob: CompressedBlob, *, kernel=None) -> DepthFrame:
    if blob.codec is not Codec.RVL:
        raise CorruptStream(f"not an RVL blob: {blob.codec}")
    n = blob.width * blob.height
    return DepthFrame(blob.width, blob.height, _decode(bytes(blob.data), n, kernel or _kernel))


def worst_case_size(width: int, height: int) -> int:
    return 2 + 4 * width * height


# -- frame dump files ------------------------------------------------------------

_HEADER = struct.Struct("<II")


def frame_to_bytes(frame: DepthFrame) -> bytes:
    return _HEADER.pack(frame.width, frame.height) + frame.values.astype("<u2").tobytes()


def frame_from_bytes(data: bytes) -> DepthFrame:
    if len(data) < _HEADER.size:
        raise CorruptStream("frame file shorter than its header")
    width, height = _HEADER.unpack_from(data)
    body = data[_HEADER.size:]
    if len(body) != 2 * width * height:
        raise CorruptStream(f"frame file body has {len(body)} bytes, expected {2 * width * height}")
    return DepthFrame(width, height, np.frombuffer(body, dtype="<u2").astype(np.uint16))


def read_frame(path: "str | Path") -> DepthFrame:
    return frame_from_bytes(Path(path).read_bytes())


def write_frame(path: "str | Path", frame: DepthFrame) -> None:
    Path(path).write_bytes(frame_to_bytes(frame))


@lru_cache(maxsize=8)
def _ramp(width: int, height: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    ramp = (800 + 3 * xx + 2 * yy).astype(np.uint16)
    ramp.setflags(write=False)
    return ramp


def synthetic_depth(width: int, height: int, rng: np.random.Generator, zero_fraction: float = 0.1,
                    noise_bits: int = 4) -> DepthFrame:
    """Smooth ramp plus noise with invalid-pixel dropouts, roughly like a stereo depth camera.

    One 16-bit draw per pixel: the low ``noise_bits`` give noise centred on the
    ramp, the high byte decides the dropout, so ``zero_fraction`` is quantised
    to 1/256.
    """
    if not 0 <= noise_bits <= 8:
        raise ValueError("noise_bits must be in 0..8")
    bits = rng.integers(0, 1 << 16, size=(height, width), dtype=np.uint16)
    # the ramp starts at 800, so removing the noise offset cannot wrap
    values = _ramp(width, height) + np.uint16(rng.integers(0, 2000))
    if noise_bits:
        values += bits & np.uint16((1 << noise_bits) - 1)
        values -= np.uint16(1 << (noise_bits - 1))
    values *= (bits >> np.uint16(8)) >= np.uint16(round(zero_fraction * 256))
    return DepthFrame(width, height, values.reshape(-1))

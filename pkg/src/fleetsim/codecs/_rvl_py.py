"""Reference RVL kernel in plain Python.

Bitstream: alternating (zero-run, nonzero-run) counts, each nonzero run
followed by its values as zigzag deltas from the previous nonzero value.
Every integer is a varint of 3-bit groups, least significant first, with
bit 3 of each nibble flagging continuation. Nibbles are packed two per
byte, high half first; an odd final nibble is padded with zero.
"""
from __future__ import annotations

from .errors import CorruptStream

MAX_VARINT_SHIFT = 30


def encode(values) -> bytes:
    nibbles: list[int] = []
    push = nibbles.append

    def put(v: int) -> None:
        while True:
            nib = v & 7
            v >>= 3
            if v:
                push(nib | 8)
            else:
                push(nib)
                return

    n = len(values)
    i = 0
    prev = 0
    while i < n:
        start = i
        while i < n and values[i] == 0:
            i += 1
        put(i - start)
        start = i
        while i < n and values[i] != 0:
            i += 1
        put(i - start)
        for k in range(start, i):
            v = values[k]
            d = v - prev
            put((d << 1) if d >= 0 else ((-d) << 1) - 1)
            prev = v
    if len(nibbles) & 1:
        push(0)
    it = iter(nibbles)
    return bytes((hi << 4) | lo for hi, lo in zip(it, it))


def decode(data: bytes, n: int) -> list[int]:
    total = 2 * len(data)
    pos = 0

    def get() -> int:
        nonlocal pos
        v = 0
        shift = 0
        while True:
            if pos >= total:
                raise CorruptStream("truncated varint")
            byte = data[pos >> 1]
            nib = (byte >> 4) if not (pos & 1) else (byte & 15)
            pos += 1
            v |= (nib & 7) << shift
            if not nib & 8:
                return v
            shift += 3
            if shift > MAX_VARINT_SHIFT:
                raise CorruptStream("varint overflow")

    out = [0] * n
    i = 0
    prev = 0
    while i < n:
        zeros = get()
        if zeros > n - i:
            raise CorruptStream("zero run overflows frame")
        i += zeros
        count = get()
        if count > n - i:
            raise CorruptStream("nonzero run overflows frame")
        if zeros == 0 and count == 0:
            raise CorruptStream("empty run pair")
        for _ in range(count):
            z = get()
            prev += (z >> 1) if not (z & 1) else -((z + 1) >> 1)
            if not 0 < prev <= 0xFFFF:
                raise CorruptStream(f"decoded sample {prev} outside 1..65535")
            out[i] = prev
            i += 1
    if pos < total - 1 or (pos == total - 1 and data[-1] & 15):
        raise CorruptStream("trailing data after frame")
    return out

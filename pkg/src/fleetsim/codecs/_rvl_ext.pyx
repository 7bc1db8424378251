# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RVL kernel; produces the same bitstream as ``_rvl_py``.

Nibbles are staged in a 64-bit accumulator and flushed as big-endian 32-bit
words. Decoding reads a 64-bit window at the nibble position of a zero-padded
copy and resolves any varint shorter than 10 bits through one table lookup.
"""
from libc.stdint cimport uint8_t, uint16_t, uint32_t, uint64_t, int64_t
from libc.stdlib cimport calloc, free, malloc
from libc.string cimport memcpy

import sys

import numpy as np

from fleetsim.codecs.errors import CorruptStream

if sys.byteorder != "little":
    raise ImportError("compiled RVL kernel assumes a little-endian host")

cdef extern from *:
    uint32_t __builtin_bswap32(uint32_t) nogil

cdef enum:
    MAX_VARINT_SHIFT = 30

# encoder: varint nibble sequence (MSB-first) and length for values < 512
cdef uint16_t ENC_SEQ[512]
cdef uint8_t ENC_LEN[512]
# decoder: value and nibble count for every 3-nibble window, 0 length = longer varint
cdef uint16_t DEC_VAL[4096]
cdef uint8_t DEC_LEN[4096]


cdef void _init_tables():
    cdef uint32_t v, x, s
    cdef int k, a, b, c
    for v in range(512):
        x = v
        s = 0
        k = 0
        while x >= 8:
            s = (s << 4) | ((x & 7) | 8)
            x >>= 3
            k += 1
        ENC_SEQ[v] = (s << 4) | x
        ENC_LEN[v] = k + 1
    for v in range(4096):
        a = (v >> 8) & 15
        b = (v >> 4) & 15
        c = v & 15
        if a < 8:
            DEC_VAL[v] = a
            DEC_LEN[v] = 1
        elif b < 8:
            DEC_VAL[v] = (a & 7) | (b << 3)
            DEC_LEN[v] = 2
        elif c < 8:
            DEC_VAL[v] = (a & 7) | ((b & 7) << 3) | (c << 6)
            DEC_LEN[v] = 3
        else:
            DEC_VAL[v] = 0
            DEC_LEN[v] = 0


_init_tables()


cdef struct Writer:
    uint32_t* words
    Py_ssize_t nwords
    uint64_t acc
    int nacc


cdef inline void _emit(Writer* w, uint64_t seq, int k) noexcept nogil:
    # k <= 8 and nacc <= 7 keeps the accumulator within 60 bits.
    # The word slot is written unconditionally and only committed once full.
    cdef int full
    w.acc = (w.acc << (4 * k)) | seq
    w.nacc += k
    full = w.nacc >= 8
    w.nacc -= 8 * full
    w.words[w.nwords] = __builtin_bswap32(<uint32_t>(w.acc >> (4 * w.nacc)))
    w.nwords += full


cdef inline void _put(Writer* w, uint32_t v) noexcept nogil:
    cdef uint64_t seq = 0
    cdef int k = 0
    if v < 512:
        _emit(w, ENC_SEQ[v], ENC_LEN[v])
        return
    while v >= 8:
        seq = (seq << 4) | ((v & 7) | 8)
        v >>= 3
        k += 1
        if k == 8:
            _emit(w, seq, 8)
            seq = 0
            k = 0
    _emit(w, (seq << 4) | v, k + 1)


def encode(const uint16_t[::1] values):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t i = 0, start, k, nbytes
    cdef int64_t prev = 0, d
    cdef Writer w
    cdef uint8_t tail[8]
    cdef int t
    # worst case is 8 nibbles per sample plus one run pair
    w.words = <uint32_t*> malloc((n + 4) * sizeof(uint32_t))
    if w.words == NULL:
        raise MemoryError()
    w.nwords = 0
    w.acc = 0
    w.nacc = 0
    try:
        with nogil:
            while i < n:
                start = i
                while i < n and values[i] == 0:
                    i += 1
                _put(&w, <uint32_t>(i - start))
                start = i
                while i < n and values[i] != 0:
                    i += 1
                _put(&w, <uint32_t>(i - start))
                for k in range(start, i):
                    d = <int64_t>values[k] - prev
                    _put(&w, <uint32_t>((d << 1) if d >= 0 else ((-d) << 1) - 1))
                    prev = values[k]
            # left-align the remaining nibbles and pad to a whole byte
            for t in range(8):
                tail[t] = 0
            for t in range(w.nacc):
                if t & 1:
                    tail[t >> 1] |= (w.acc >> (4 * (w.nacc - 1 - t))) & 15
                else:
                    tail[t >> 1] = ((w.acc >> (4 * (w.nacc - 1 - t))) & 15) << 4
        nbytes = 4 * w.nwords
        out = bytearray(nbytes + ((w.nacc + 1) >> 1))
        if nbytes:
            memcpy(<char*>out, <char*>w.words, nbytes)
        for t in range((w.nacc + 1) >> 1):
            out[nbytes + t] = tail[t]
        return bytes(out)
    finally:
        free(w.words)


cdef extern from *:
    uint64_t __builtin_bswap64(uint64_t) nogil


cdef inline uint64_t _window(const uint8_t* buf, Py_ssize_t pos) noexcept nogil:
    """16 nibbles starting at nibble ``pos``, left-aligned; buf is zero-padded by 8 bytes."""
    cdef uint64_t word
    memcpy(&word, buf + (pos >> 1), 8)
    return __builtin_bswap64(word) << (4 * (pos & 1))


cdef inline int _get(const uint8_t* buf, Py_ssize_t total, Py_ssize_t* pos, uint32_t* out) noexcept nogil:
    cdef uint64_t win = _window(buf, pos[0])
    cdef unsigned int peek = <unsigned int>(win >> 52)
    cdef int k = DEC_LEN[peek], shift = 0
    cdef uint32_t v = 0, nib
    if k != 0:
        out[0] = DEC_VAL[peek]
        pos[0] += k
        return 1 if pos[0] > total else 0
    while True:
        if pos[0] >= total:
            return 1
        nib = <uint32_t>(_window(buf, pos[0]) >> 60)
        pos[0] += 1
        v |= (nib & 7) << shift
        if not (nib & 8):
            out[0] = v
            return 0
        shift += 3
        if shift > MAX_VARINT_SHIFT:
            return 2


def decode(const uint8_t[::1] data, Py_ssize_t n):
    result = np.zeros(n, dtype=np.uint16)
    cdef uint16_t[::1] out = result
    cdef Py_ssize_t nbytes = data.shape[0]
    cdef Py_ssize_t total = 2 * nbytes
    cdef Py_ssize_t i = 0, k, pos = 0
    cdef uint32_t zeros, count, z
    cdef int64_t prev = 0
    cdef int err = 0
    cdef uint8_t* buf = <uint8_t*> calloc(nbytes + 16, 1)
    if buf == NULL:
        raise MemoryError()
    if nbytes:
        memcpy(buf, &data[0], nbytes)
    with nogil:
        while i < n:
            err = _get(buf, total, &pos, &zeros)
            if err:
                break
            if zeros > n - i:
                err = 3
                break
            i += zeros
            err = _get(buf, total, &pos, &count)
            if err:
                break
            if count > n - i:
                err = 4
                break
            if zeros == 0 and count == 0:
                err = 5
                break
            for k in range(count):
                err = _get(buf, total, &pos, &z)
                if err:
                    break
                if z & 1:
                    prev -= (<int64_t>z + 1) >> 1
                else:
                    prev += z >> 1
                if prev <= 0 or prev > 0xFFFF:
                    err = 6
                    break
                out[i] = <uint16_t>prev
                i += 1
            if err:
                break
        if not err and (pos < total - 1 or (pos == total - 1 and (buf[nbytes - 1] & 15))):
            err = 7
    free(buf)
    if err:
        raise CorruptStream(_MESSAGES[err])
    return result


_MESSAGES = {
    1: "truncated varint",
    2: "varint overflow",
    3: "zero run overflows frame",
    4: "nonzero run overflows frame",
    5: "empty run pair",
    6: "decoded sample outside 1..65535",
    7: "trailing data after frame",
}

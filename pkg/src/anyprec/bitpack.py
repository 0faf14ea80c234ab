"""Packing and unpacking between container-padded host layouts and the
accelerator's back-to-back packed layout.

A padded stream stores one element per container, element bits first
(MSB leading) with zeros in the low (container - P) bits. Packing drops the
padding: useful input bit i (i mod container < P) lands at output bit
j = start_idx + i - floor(i/container) * (container - P).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .bits import BitVector
from .codec import FormatSpec, Kind, decode
from .errors import FormatError

_HEADER = struct.Struct("<4sBBBBQH")
_MAGIC = b"FXBP"
_VERSION = 1


@dataclass
class PackedBuffer:
    """Back-to-back encoded scalars: element k occupies bits
    [start_bit + k*P, start_bit + (k+1)*P)."""

    bits: BitVector
    elem_count: int
    fmt: FormatSpec
    start_bit: int = 0

    def __post_init__(self):
        need = self.start_bit + self.elem_count * self.fmt.total_bits
        if len(self.bits) < need:
            raise FormatError(f"buffer holds {len(self.bits)} bits, needs {need}")

    def word(self, k: int) -> int:
        if not 0 <= k < self.elem_count:
            raise IndexError(k)
        p = self.fmt.total_bits
        return self.bits.read_word(self.start_bit + k * p, p)

    def words(self) -> list[int]:
        return [self.word(k) for k in range(self.elem_count)]

    def decode_all(self):
        return [decode(w, self.fmt) for w in self.words()]

    @classmethod
    def from_words(cls, words, fmt: FormatSpec, start_bit: int = 0) -> "PackedBuffer":
        words = [int(w) for w in words]
        bv = BitVector(start_bit)
        for w in words:
            bv.append_word(w, fmt.total_bits)
        return cls(bv, len(words), fmt, start_bit)


@dataclass
class PaddedStream:
    """Container-padded host layout: one element per container word."""

    words: list[int]
    container_bits: int
    fmt: FormatSpec

    def __post_init__(self):
        if self.container_bits < self.fmt.total_bits:
            raise FormatError(
                f"container {self.container_bits} < element width {self.fmt.total_bits}"
            )
        pad = self.container_bits - self.fmt.total_bits
        for w in self.words:
            if w < 0 or w >> self.container_bits:
                raise FormatError("container word out of range")
            if w & ((1 << pad) - 1):
                raise FormatError("padding bits must be zero")

    def element_words(self) -> list[int]:
        pad = self.container_bits - self.fmt.total_bits
        return [w >> pad for w in self.words]

    @classmethod
    def from_elements(cls, words, fmt: FormatSpec, container_bits: int = 8) -> "PaddedStream":
        pad = container_bits - fmt.total_bits
        if pad < 0:
            raise FormatError(
                f"container {container_bits} < element width {fmt.total_bits}"
            )
        return cls([int(w) << pad for w in words], container_bits, fmt)


def packed_index(i: int, container: int, precision: int, start_idx: int = 0) -> int:
    """Output position of useful input bit i under the packing map."""
    return start_idx + i - (i // container) * (container - precision)


def pack(stream: PaddedStream, start_idx: int = 0) -> PackedBuffer:
    """Drop container padding, concatenating elements back to back."""
    if start_idx < 0:
        raise FormatError("start_idx must be >= 0")
    p = stream.fmt.total_bits
    c = stream.container_bits
    out = BitVector(start_idx + len(stream.words) * p)
    for k, word in enumerate(stream.words):
        for t in range(c):
            i = k * c + t
            if i % c < p:  # useful bit; padding is dropped
                j = packed_index(i, c, p, start_idx)
                out.set(j, (word >> (c - 1 - t)) & 1)
    return PackedBuffer(out, len(stream.words), stream.fmt, start_idx)


def pack_into(buf: PackedBuffer, stream: PaddedStream) -> PackedBuffer:
    """Append a further chunk, carrying the running start index forward.

    Models the chunked wide-interface behavior: each call continues at
    start_idx = start_bit + elem_count * P.
    """
    if stream.fmt != buf.fmt:
        raise FormatError("appending a stream of a different format")
    carry = buf.start_bit + buf.elem_count * buf.fmt.total_bits
    tail = pack(stream, carry)
    merged = BitVector(len(tail.bits))
    for i in range(len(buf.bits)):
        merged.set(i, buf.bits.get(i))
    for k in range(tail.elem_count):
        p = buf.fmt.total_bits
        for t in range(p):
            merged.set(carry + k * p + t, tail.bits.get(carry + k * p + t))
    return PackedBuffer(merged, buf.elem_count + tail.elem_count, buf.fmt, buf.start_bit)


def unpack(buf: PackedBuffer, container_bits: int) -> PaddedStream:
    """Inverse of pack: re-insert zero padding for off-chip writeback."""
    if container_bits < buf.fmt.total_bits:
        raise FormatError(
            f"container {container_bits} < element width {buf.fmt.total_bits}"
        )
    pad = container_bits - buf.fmt.total_bits
    return PaddedStream([w << pad for w in buf.words()], container_bits, buf.fmt)


def metadata(buf: PackedBuffer) -> dict:
    """Header the packing unit reports to the controller."""
    return {
        "start_addr": buf.start_bit,
        "precision": buf.fmt.total_bits,
        "elem_count": buf.elem_count,
    }


def write_packed_file(path, buf: PackedBuffer) -> None:
    """Serialize with the little-endian FXBP header followed by the raw bit
    payload, padded to a whole byte at the end only."""
    fmt = buf.fmt
    kind = 0 if fmt.kind is Kind.FLOAT else (1 if fmt.signed else 2)
    header = _HEADER.pack(
        _MAGIC, _VERSION, kind, fmt.exp_bits, fmt.man_bits, buf.elem_count, buf.start_bit
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(buf.bits.to_bytes())


def read_packed_file(path) -> PackedBuffer:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError("truncated packed file")
    magic, version, kind, exp_bits, man_bits, elem_count, start_bit = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise FormatError(f"unsupported version {version}")
    if kind == 0:
        fmt = FormatSpec(Kind.FLOAT, exp_bits=exp_bits, man_bits=man_bits)
    elif kind in (1, 2):
        fmt = FormatSpec(Kind.INT, man_bits=man_bits, signed=(kind == 1))
    else:
        raise FormatError(f"unknown kind byte {kind}")
    nbits = start_bit + elem_count * fmt.total_bits
    payload = raw[_HEADER.size :]
    if len(payload) != (nbits + 7) // 8:
        raise FormatError("payload length does not match header")
    return PackedBuffer(BitVector.from_bytes(payload, nbits), elem_count, fmt, start_bit)

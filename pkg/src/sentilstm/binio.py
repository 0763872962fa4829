"""Low-level helpers for the binary artifact formats.

All multi-byte integers are little-endian u32, all float payloads are
row-major little-endian float32. Files that carry a trailing CRC32 store
it over every preceding byte.
"""

import hashlib
import struct
import zlib

import numpy as np

from .errors import FormatError

U32 = struct.Struct("<I")


def pack_u32(value: int) -> bytes:
    return U32.pack(value)


def pack_f32_array(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def pack_f64_array(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


class Reader:
    """Sequential reader over one file's bytes with strict length checks."""

    def __init__(self, data: bytes, path: str = "<bytes>"):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated file (wanted {n} bytes at offset {self.pos})")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def peek(self, n: int) -> bytes:
        return self.data[self.pos:self.pos + n]

    def u32(self) -> int:
        return U32.unpack(self.take(4))[0]

    def f32_array(self, shape) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)

    def f64_array(self, shape) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

    def expect_magic(self, magic: bytes, kind: str):
        got = self.take(len(magic))
        if got != magic:
            raise FormatError(f"{self.path}: not a {kind} file (bad magic)")

    def expect_version(self, supported: int, kind: str):
        version = self.u32()
        if version != supported:
            raise FormatError(
                f"{self.path}: unsupported {kind} version {version} (this build reads version {supported})"
            )
        return version

    def expect_eof(self):
        if self.pos != len(self.data):
            raise FormatError(f"{self.path}: {len(self.data) - self.pos} unexpected trailing bytes")

def strip_crc(data: bytes, path: str = "<bytes>") -> bytes:
    """Validate a trailing u32 CRC32 and return the body it covers."""
    if len(data) < 4:
        raise FormatError(f"{path}: truncated file (no room for a checksum)")
    body, tail = data[:-4], data[-4:]
    if U32.unpack(tail)[0] != (zlib.crc32(body) & 0xFFFFFFFF):
        raise FormatError(f"{path}: CRC mismatch (file is corrupt)")
    return body


def append_crc(chunks: list) -> bytes:
    body = b"".join(chunks)
    return body + pack_u32(zlib.crc32(body) & 0xFFFFFFFF)


def sha256(*chunks: bytes) -> bytes:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.digest()


def sha256_file(path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()

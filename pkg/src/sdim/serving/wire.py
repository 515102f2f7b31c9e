"""Binary wire format: length-prefixed frames and the payloads they carry.

Frame layout: ``u32 length`` (bytes that follow), ``u8 message type``,
payload. All integers are little-endian.

Bucket-table payload: magic ``SDIM``, u16 version, u16 d, u16 m, u16 tau,
u64 user_id, u64 family_seed, u64 sequence_version; then per round a u16
bucket count followed by ``(u16 signature, u32 count, f32[d] vector)``
entries. Version 1 carries float32 vectors bit-exactly; version 2 is the
optional half-precision variant (off by default since it quantizes).

The remaining payloads:
  encode request   u64 user_id
  score request    u64 user_id, u16 B, f32[B][d]
  score response   u16 B, per candidate u16 hit_rounds + f32[d]
  error            u16 code, u16 message length, UTF-8 message
"""

from __future__ import annotations

import struct

import numpy as np

from .buckets import Bucket, BucketTable

__all__ = [
    "MAGIC",
    "VERSION_F32",
    "VERSION_F16",
    "MSG_ENCODE_REQUEST",
    "MSG_BUCKET_TABLE",
    "MSG_SCORE_REQUEST",
    "MSG_SCORE_RESPONSE",
    "MSG_ERROR",
    "ERR_UNKNOWN_USER",
    "ERR_MALFORMED",
    "ERR_INTERNAL",
    "MalformedPayloadError",
    "VersionMismatchError",
    "serialize_bucket_table",
    "deserialize_bucket_table",
    "bucket_table_wire_size",
    "pack_frame",
    "read_frame",
    "iter_frames",
    "pack_encode_request",
    "parse_encode_request",
    "pack_score_request",
    "parse_score_request",
    "pack_score_response",
    "parse_score_response",
    "pack_error",
    "parse_error",
]

MAGIC = b"SDIM"
VERSION_F32 = 1
VERSION_F16 = 2

MSG_ENCODE_REQUEST = 1
MSG_BUCKET_TABLE = 2
MSG_SCORE_REQUEST = 3
MSG_SCORE_RESPONSE = 4
MSG_ERROR = 5

ERR_UNKNOWN_USER = 1
ERR_MALFORMED = 2
ERR_INTERNAL = 3

_HEADER = struct.Struct("<4sHHHHQQQ")
_BUCKET_COUNT = struct.Struct("<H")
_BUCKET_ENTRY = struct.Struct("<HI")
_FRAME_PREFIX = struct.Struct("<IB")

# Refuse frames beyond this size rather than attempting a giant allocation.
MAX_FRAME_PAYLOAD = 1 << 28


class MalformedPayloadError(ValueError):
    """Payload bytes violate the format; carries the offending byte offset."""

    def __init__(self, offset: int, reason: str):
        super().__init__(f"malformed payload at byte {offset}: {reason}")
        self.offset = offset


class VersionMismatchError(ValueError):
    """Payload declares a format version this implementation cannot read."""


def serialize_bucket_table(table: BucketTable, *, half_precision: bool = False) -> bytes:
    """Encode a bucket table; identical tables yield identical bytes.

    Buckets are written in ascending signature order per round so the
    encoding is independent of dict insertion history.
    """
    for name, value, limit in (("d", table.d, 1 << 16), ("m", table.m, 1 << 16), ("tau", table.tau, 17)):
        if not 0 < value < limit:
            raise ValueError(f"{name}={value} does not fit the wire format")
    version = VERSION_F16 if half_precision else VERSION_F32
    dtype = "<f2" if half_precision else "<f4"
    parts = [
        _HEADER.pack(
            MAGIC,
            version,
            table.d,
            table.m,
            table.tau,
            table.user_id & ((1 << 64) - 1),
            table.family_seed & ((1 << 64) - 1),
            table.sequence_version & ((1 << 64) - 1),
        )
    ]
    for round_buckets in table.buckets:
        parts.append(_BUCKET_COUNT.pack(len(round_buckets)))
        for code in sorted(round_buckets):
            bucket = round_buckets[code]
            if code >> table.tau:
                raise ValueError(f"signature {code} exceeds tau={table.tau} bits")
            if not 0 <= bucket.count < (1 << 32):
                raise ValueError(f"bucket count {bucket.count} does not fit u32")
            parts.append(_BUCKET_ENTRY.pack(code, bucket.count))
            parts.append(np.ascontiguousarray(bucket.vector, dtype=dtype).tobytes())
    return b"".join(parts)


def bucket_table_wire_size(table: BucketTable, *, half_precision: bool = False) -> int:
    """Exact serialized size, computable without serializing:
    header + per round (2 + entries * (2 + 4 + vector bytes)).
    """
    vector_bytes = 2 * table.d if half_precision else 4 * table.d
    size = _HEADER.size
    for round_buckets in table.buckets:
        size += 2 + len(round_buckets) * (2 + 4 + vector_bytes)
    return size


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise MalformedPayloadError(
                self.offset,
                f"truncated while reading {what}: need {n} bytes, have {len(self.data) - self.offset}",
            )
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, spec: struct.Struct, what: str):
        return spec.unpack(self.take(spec.size, what))

    def done(self, what: str) -> None:
        if self.offset != len(self.data):
            raise MalformedPayloadError(
                self.offset, f"{len(self.data) - self.offset} trailing bytes after {what}"
            )


def deserialize_bucket_table(data: bytes) -> BucketTable:
    """Decode a bucket-table payload, validating structure as it goes."""
    reader = _Reader(data)
    magic, version, d, m, tau, user_id, family_seed, sequence_version = reader.unpack(
        _HEADER, "header"
    )
    if magic != MAGIC:
        raise MalformedPayloadError(0, f"bad magic {magic!r}")
    if version not in (VERSION_F32, VERSION_F16):
        raise VersionMismatchError(f"unsupported bucket-table version {version}")
    if tau < 1 or tau > 16:
        raise MalformedPayloadError(10, f"tau={tau} out of range")
    if d < 1:
        raise MalformedPayloadError(6, f"d={d} out of range")
    if m < 1 or m % tau != 0:
        raise MalformedPayloadError(8, f"m={m} is not a positive multiple of tau={tau}")
    dtype = "<f2" if version == VERSION_F16 else "<f4"
    item_bytes = 2 if version == VERSION_F16 else 4

    rounds = []
    for i in range(m // tau):
        (bucket_count,) = reader.unpack(_BUCKET_COUNT, f"round {i} bucket count")
        round_buckets: dict[int, Bucket] = {}
        for _ in range(bucket_count):
            entry_offset = reader.offset
            code, count = reader.unpack(_BUCKET_ENTRY, f"round {i} bucket entry")
            if code >> tau:
                raise MalformedPayloadError(
                    entry_offset, f"signature {code} exceeds tau={tau} bits"
                )
            if code in round_buckets:
                raise MalformedPayloadError(
                    entry_offset, f"duplicate signature {code} in round {i}"
                )
            raw = reader.take(item_bytes * d, f"round {i} bucket vector")
            vector = np.frombuffer(raw, dtype=dtype).astype(np.float32)
            round_buckets[code] = Bucket(vector, count)
        rounds.append(round_buckets)
    reader.done("bucket table")
    return BucketTable(
        d=d,
        m=m,
        tau=tau,
        user_id=user_id,
        family_seed=family_seed,
        sequence_version=sequence_version,
        buckets=tuple(rounds),
    )


# --- frames ---------------------------------------------------------------


def pack_frame(msg_type: int, payload: bytes) -> bytes:
    return _FRAME_PREFIX.pack(len(payload) + 1, msg_type) + payload


def _read_exact(recv, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = recv(remaining)
        if not chunk:
            raise EOFError("connection closed before a complete frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(recv) -> tuple[int, bytes]:
    """Read one frame via a ``recv(n) -> bytes`` callable (socket-style).

    Raises EOFError on a cleanly closed stream before any byte of a frame.
    """
    prefix = _read_exact(recv, _FRAME_PREFIX.size)
    length, msg_type = _FRAME_PREFIX.unpack(prefix)
    if length < 1:
        raise MalformedPayloadError(0, "frame length must cover the message type byte")
    if length - 1 > MAX_FRAME_PAYLOAD:
        raise MalformedPayloadError(0, f"frame payload of {length - 1} bytes exceeds limit")
    payload = _read_exact(recv, length - 1) if length > 1 else b""
    return msg_type, payload


def iter_frames(stream):
    """Yield ``(msg_type, payload)`` from a binary file object until EOF."""
    while True:
        head = stream.read(_FRAME_PREFIX.size)
        if not head:
            return
        if len(head) < _FRAME_PREFIX.size:
            raise MalformedPayloadError(0, "truncated frame prefix")
        length, msg_type = _FRAME_PREFIX.unpack(head)
        if length < 1:
            raise MalformedPayloadError(0, "frame length must cover the message type byte")
        body = stream.read(length - 1)
        if len(body) < length - 1:
            raise MalformedPayloadError(0, "truncated frame payload")
        yield msg_type, body


# --- request / response payloads -------------------------------------------


def pack_encode_request(user_id: int) -> bytes:
    return struct.pack("<Q", user_id & ((1 << 64) - 1))


def parse_encode_request(payload: bytes) -> int:
    reader = _Reader(payload)
    (user_id,) = reader.unpack(struct.Struct("<Q"), "user id")
    reader.done("encode request")
    return user_id


def pack_score_request(user_id: int, candidates: np.ndarray) -> bytes:
    candidates = np.ascontiguousarray(candidates, dtype="<f4")
    if candidates.ndim != 2:
        raise ValueError("candidates must be a 2-D (B, d) array")
    b = candidates.shape[0]
    if b >= 1 << 16:
        raise ValueError(f"candidate count {b} does not fit u16")
    return struct.pack("<QH", user_id & ((1 << 64) - 1), b) + candidates.tobytes()


def parse_score_request(payload: bytes) -> tuple[int, np.ndarray]:
    reader = _Reader(payload)
    user_id, b = reader.unpack(struct.Struct("<QH"), "score request header")
    rest = len(payload) - reader.offset
    if b == 0:
        reader.done("score request")
        return user_id, np.zeros((0, 0), dtype=np.float32)
    if rest % (4 * b) != 0 or rest == 0:
        raise MalformedPayloadError(
            reader.offset, f"{rest} candidate bytes do not divide into {b} f32 rows"
        )
    d = rest // (4 * b)
    raw = reader.take(4 * b * d, "candidate vectors")
    reader.done("score request")
    return user_id, np.frombuffer(raw, dtype="<f4").reshape(b, d).astype(np.float32)


def pack_score_response(interests: np.ndarray, hit_rounds: np.ndarray) -> bytes:
    interests = np.ascontiguousarray(interests, dtype="<f4")
    if interests.ndim != 2 or len(hit_rounds) != interests.shape[0]:
        raise ValueError("interests must be (B, d) with one hit count per row")
    b = interests.shape[0]
    if b >= 1 << 16:
        raise ValueError(f"candidate count {b} does not fit u16")
    parts = [struct.pack("<H", b)]
    for row, hits in zip(interests, hit_rounds):
        parts.append(struct.pack("<H", int(hits)))
        parts.append(row.tobytes())
    return b"".join(parts)


def parse_score_response(payload: bytes) -> tuple[np.ndarray, np.ndarray]:
    reader = _Reader(payload)
    (b,) = reader.unpack(struct.Struct("<H"), "score response header")
    if b == 0:
        reader.done("score response")
        return np.zeros((0, 0), dtype=np.float32), np.zeros(0, dtype=np.int64)
    rest = len(payload) - reader.offset
    if rest % b != 0 or (rest // b - 2) % 4 != 0 or rest // b < 2:
        raise MalformedPayloadError(reader.offset, f"{rest} bytes do not divide into {b} rows")
    d = (rest // b - 2) // 4
    interests = np.empty((b, d), dtype=np.float32)
    hits = np.empty(b, dtype=np.int64)
    for row in range(b):
        (hits[row],) = reader.unpack(struct.Struct("<H"), "hit count")
        interests[row] = np.frombuffer(reader.take(4 * d, "interest vector"), dtype="<f4")
    reader.done("score response")
    return interests, hits


def pack_error(code: int, message: str) -> bytes:
    encoded = message.encode("utf-8")[: (1 << 16) - 1]
    return struct.pack("<HH", code, len(encoded)) + encoded


def parse_error(payload: bytes) -> tuple[int, str]:
    reader = _Reader(payload)
    code, length = reader.unpack(struct.Struct("<HH"), "error header")
    message = reader.take(length, "error message").decode("utf-8", errors="replace")
    reader.done("error payload")
    return code, message

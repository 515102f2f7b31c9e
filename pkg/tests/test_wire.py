"""Wire-format framing and payload round trips."""

import io
import struct

import numpy as np
import pytest

from sdim import BehaviorSequence, sample_hash_family
from sdim.serving import (
    Bucket,
    BucketTable,
    MalformedPayloadError,
    VersionMismatchError,
    bucket_table_wire_size,
    deserialize_bucket_table,
    encode_sequence,
    serialize_bucket_table,
)
from sdim.serving import wire
from conftest import random_bucket_table, random_unit_rows


def empty_table(d=4, m=12, tau=3) -> BucketTable:
    return BucketTable(
        d=d, m=m, tau=tau, user_id=1, family_seed=2, sequence_version=3,
        buckets=tuple({} for _ in range(m // tau)),
    )


class TestBucketTablePayload:
    def test_header_layout(self):
        """36-byte header then one u16 bucket count per round."""
        table = empty_table(m=12, tau=3)
        blob = serialize_bucket_table(table)
        assert len(blob) == 36 + 2 * 4
        assert blob[:4] == b"SDIM"
        version, d, m, tau = struct.unpack_from("<HHHH", blob, 4)
        assert (version, d, m, tau) == (1, 4, 12, 3)
        user_id, family_seed, sequence_version = struct.unpack_from("<QQQ", blob, 12)
        assert (user_id, family_seed, sequence_version) == (1, 2, 3)
        assert blob[36:] == b"\x00" * 8

    def test_single_bucket_payload_decodes_exactly(self):
        vector = np.array([0.6, 0.8], dtype=np.float32)
        table = BucketTable(
            d=2, m=3, tau=3, user_id=9, family_seed=8, sequence_version=7,
            buckets=({5: Bucket(vector, 3)},),
        )
        restored = deserialize_bucket_table(serialize_bucket_table(table))
        bucket = restored.buckets[0][5]
        assert bucket.count == 3
        assert np.array_equal(bucket.vector, vector)

    def test_size_formula(self, rng):
        for _ in range(50):
            table = random_bucket_table(rng)
            assert len(serialize_bucket_table(table)) == bucket_table_wire_size(table)

    def test_roundtrip_identity_fuzz(self, rng):
        for _ in range(100):
            table = random_bucket_table(rng)
            blob = serialize_bucket_table(table)
            restored = deserialize_bucket_table(blob)
            assert restored == table
            assert serialize_bucket_table(restored) == blob

    def test_identical_tables_identical_bytes(self, rng):
        """Serialization is canonical: bucket insertion order is immaterial."""
        table = random_bucket_table(rng)
        shuffled = BucketTable(
            d=table.d, m=table.m, tau=table.tau, user_id=table.user_id,
            family_seed=table.family_seed, sequence_version=table.sequence_version,
            buckets=tuple(
                dict(sorted(round_buckets.items(), reverse=True))
                for round_buckets in table.buckets
            ),
        )
        assert serialize_bucket_table(table) == serialize_bucket_table(shuffled)

    def test_encoded_sequence_roundtrip(self, rng):
        family = sample_hash_family(seed=3, m=24, tau=3, d=8)
        sequence = BehaviorSequence(random_unit_rows(rng, 40, 8))
        table = encode_sequence(sequence, family, user_id=77, sequence_version=5)
        restored = deserialize_bucket_table(serialize_bucket_table(table))
        assert restored == table

    def test_half_precision_variant(self, rng):
        """Version 2 quantizes to f16 but re-serializes stably."""
        family = sample_hash_family(seed=4, m=12, tau=3, d=8)
        sequence = BehaviorSequence(random_unit_rows(rng, 16, 8))
        table = encode_sequence(sequence, family)
        blob = serialize_bucket_table(table, half_precision=True)
        assert len(blob) == bucket_table_wire_size(table, half_precision=True)
        restored = deserialize_bucket_table(blob)
        for i, round_buckets in enumerate(table.buckets):
            for code, bucket in round_buckets.items():
                np.testing.assert_allclose(
                    restored.buckets[i][code].vector, bucket.vector, atol=2e-3
                )
        assert serialize_bucket_table(restored, half_precision=True) == blob


class TestMalformedPayloads:
    def test_truncated_header(self):
        with pytest.raises(MalformedPayloadError, match="truncated"):
            deserialize_bucket_table(b"SDIM\x01\x00")

    def test_truncation_reports_offset(self):
        blob = serialize_bucket_table(empty_table())  # 36-byte header + 4 round counts
        with pytest.raises(MalformedPayloadError, match="byte 42"):
            deserialize_bucket_table(blob[:-2])

    def test_bad_magic(self):
        blob = bytearray(serialize_bucket_table(empty_table()))
        blob[:4] = b"XXXX"
        with pytest.raises(MalformedPayloadError, match="magic"):
            deserialize_bucket_table(bytes(blob))

    def test_unsupported_version(self):
        blob = bytearray(serialize_bucket_table(empty_table()))
        blob[4] = 9
        with pytest.raises(VersionMismatchError, match="version 9"):
            deserialize_bucket_table(bytes(blob))

    def test_trailing_garbage(self):
        blob = serialize_bucket_table(empty_table())
        with pytest.raises(MalformedPayloadError, match="trailing"):
            deserialize_bucket_table(blob + b"\x00")

    def test_signature_beyond_tau(self):
        vector = np.zeros(2, dtype=np.float32)
        table = BucketTable(
            d=2, m=2, tau=2, user_id=0, family_seed=0, sequence_version=0,
            buckets=({3: Bucket(vector, 1)},),
        )
        blob = bytearray(serialize_bucket_table(table))
        # bump the signature (first u16 after the round's bucket count) past 2^tau
        struct.pack_into("<H", blob, 36 + 2, 4)
        with pytest.raises(MalformedPayloadError, match="exceeds tau"):
            deserialize_bucket_table(bytes(blob))

    def test_duplicate_signature(self):
        vector = np.zeros(1, dtype=np.float32)
        table = BucketTable(
            d=1, m=2, tau=2, user_id=0, family_seed=0, sequence_version=0,
            buckets=({0: Bucket(vector, 1), 1: Bucket(vector, 1)},),
        )
        blob = bytearray(serialize_bucket_table(table))
        struct.pack_into("<H", blob, 36 + 2 + 10, 0)  # second entry's signature -> 0
        with pytest.raises(MalformedPayloadError, match="duplicate"):
            deserialize_bucket_table(bytes(blob))

    def test_indivisible_m(self):
        blob = bytearray(serialize_bucket_table(empty_table()))
        struct.pack_into("<H", blob, 8, 13)  # m=13 with tau=3
        with pytest.raises(MalformedPayloadError, match="multiple"):
            deserialize_bucket_table(bytes(blob))


class TestFrames:
    def test_frame_roundtrip_via_stream(self):
        frames = [
            (wire.MSG_ENCODE_REQUEST, wire.pack_encode_request(42)),
            (wire.MSG_ERROR, wire.pack_error(wire.ERR_UNKNOWN_USER, "nope")),
        ]
        stream = io.BytesIO(b"".join(wire.pack_frame(t, p) for t, p in frames))
        assert list(wire.iter_frames(stream)) == frames

    def test_read_frame_from_socketlike(self):
        blob = wire.pack_frame(wire.MSG_ENCODE_REQUEST, wire.pack_encode_request(7))
        stream = io.BytesIO(blob)
        msg_type, payload = wire.read_frame(stream.read)
        assert msg_type == wire.MSG_ENCODE_REQUEST
        assert wire.parse_encode_request(payload) == 7

    def test_read_frame_eof(self):
        with pytest.raises(EOFError):
            wire.read_frame(io.BytesIO(b"").read)

    def test_score_request_roundtrip(self, rng):
        candidates = rng.standard_normal((5, 3)).astype(np.float32)
        user_id, restored = wire.parse_score_request(wire.pack_score_request(11, candidates))
        assert user_id == 11
        assert np.array_equal(restored, candidates)

    def test_score_request_empty_batch(self):
        user_id, restored = wire.parse_score_request(
            wire.pack_score_request(4, np.zeros((0, 8), dtype=np.float32))
        )
        assert user_id == 4 and restored.shape[0] == 0

    def test_score_response_roundtrip(self, rng):
        interests = rng.standard_normal((4, 6)).astype(np.float32)
        hits = np.array([0, 3, 16, 1])
        restored, restored_hits = wire.parse_score_response(
            wire.pack_score_response(interests, hits)
        )
        assert np.array_equal(restored, interests)
        assert np.array_equal(restored_hits, hits)

    def test_error_roundtrip(self):
        code, message = wire.parse_error(wire.pack_error(wire.ERR_MALFORMED, "bad bytes"))
        assert code == wire.ERR_MALFORMED
        assert message == "bad bytes"

    def test_score_request_bad_length(self):
        payload = wire.pack_score_request(1, np.zeros((2, 3), dtype=np.float32))
        with pytest.raises(MalformedPayloadError, match="divide"):
            wire.parse_score_request(payload[:-1])

"""Serving testbed: signature bucket tables, their wire format, and the
sequence-encoder / scorer server pair."""

from .buckets import Bucket, BucketTable, encode_sequence, gather_interest, gather_interest_batch
from .servers import (
    BseServer,
    CtrServer,
    SequenceStore,
    ServingError,
    bse_serve,
    ctr_serve,
    request_table,
    score_candidates,
    simulate,
)
from .wire import (
    MalformedPayloadError,
    VersionMismatchError,
    bucket_table_wire_size,
    deserialize_bucket_table,
    serialize_bucket_table,
)

__all__ = [
    "Bucket",
    "BucketTable",
    "encode_sequence",
    "gather_interest",
    "gather_interest_batch",
    "BseServer",
    "CtrServer",
    "SequenceStore",
    "ServingError",
    "bse_serve",
    "ctr_serve",
    "request_table",
    "score_candidates",
    "simulate",
    "MalformedPayloadError",
    "VersionMismatchError",
    "bucket_table_wire_size",
    "deserialize_bucket_table",
    "serialize_bucket_table",
]

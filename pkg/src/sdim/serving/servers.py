"""The two-server deployment miniature.

The sequence-encoder (BSE) server owns the user store: it buckets each
user's behavior sequence by signature, caches the serialized table until the
sequence changes, and ships it on request. The scorer (CTR) server hashes
only candidates: per score request it fetches the user's table once, gathers
bucket vectors for all candidates, and never loops over sequence items. The
simulator drives synthetic request streams through both and reports
per-stage latency percentiles.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
import time

import numpy as np

from ..attention import BehaviorSequence
from ..hashing import HashFamily, sample_hash_family
from .buckets import encode_sequence, gather_interest_batch
from . import wire

__all__ = [
    "ServingError",
    "SequenceStore",
    "BseServer",
    "CtrServer",
    "bse_serve",
    "ctr_serve",
    "request_table",
    "score_candidates",
    "simulate",
]

logger = logging.getLogger(__name__)


class ServingError(RuntimeError):
    """An error frame received from a server."""

    def __init__(self, code: int, message: str):
        super().__init__(f"server error {code}: {message}")
        self.code = code
        self.server_message = message


class SequenceStore:
    """In-memory user-sequence store with versioned replacement.

    Replacement swaps the (sequence, version) pair atomically, so a reader
    observes either the old or the new sequence, never a mix.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[int, tuple[BehaviorSequence, int]] = {}

    def replace(self, user_id: int, sequence: BehaviorSequence) -> int:
        """Install a new sequence for the user; returns the new version."""
        with self._lock:
            _, version = self._entries.get(user_id, (None, 0))
            self._entries[user_id] = (sequence, version + 1)
            return version + 1

    def get(self, user_id: int) -> tuple[BehaviorSequence, int]:
        with self._lock:
            if user_id not in self._entries:
                raise KeyError(user_id)
            return self._entries[user_id]

    def user_ids(self) -> list[int]:
        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class _FrameHandler(socketserver.BaseRequestHandler):
    """Reads frames off one connection until EOF; one reply per frame."""

    def handle(self) -> None:
        while True:
            try:
                msg_type, payload = wire.read_frame(self.request.recv)
            except (EOFError, ConnectionError):
                return
            except ValueError as exc:
                self._reply(wire.MSG_ERROR, wire.pack_error(wire.ERR_MALFORMED, str(exc)))
                return
            try:
                reply_type, reply = self.server.owner.handle_message(msg_type, payload)
            except ValueError as exc:
                reply_type, reply = wire.MSG_ERROR, wire.pack_error(wire.ERR_MALFORMED, str(exc))
            except ServingError as exc:
                reply_type, reply = wire.MSG_ERROR, wire.pack_error(exc.code, exc.server_message)
            except Exception as exc:  # transport must answer, never crash
                logger.warning("request failed: %s", exc)
                reply_type, reply = wire.MSG_ERROR, wire.pack_error(wire.ERR_INTERNAL, str(exc))
            if not self._reply(reply_type, reply):
                return

    def _reply(self, msg_type: int, payload: bytes) -> bool:
        try:
            self.request.sendall(wire.pack_frame(msg_type, payload))
            return True
        except OSError:
            return False


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class _ServerBase:
    """Shared lifecycle for the two TCP services."""

    def __init__(self, address: tuple[str, int]):
        self._tcp = _Server(address, _FrameHandler)
        self._tcp.owner = self
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._lock = threading.Lock()

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address

    def start(self):
        self._thread.start()
        return self

    def shutdown(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()


class BseServer(_ServerBase):
    """Sequence-encoder service: answers encode requests with serialized
    bucket tables, cached per (user, sequence version)."""

    def __init__(self, store: SequenceStore, family: HashFamily, address=("127.0.0.1", 0)):
        super().__init__(address)
        self.store = store
        self.family = family
        self._cache: dict[int, tuple[int, bytes]] = {}
        self.stats = {"requests": 0, "cache_hits": 0, "cache_misses": 0}
        self._encode_ns: list[int] = []

    def table_bytes(self, user_id: int) -> bytes:
        try:
            sequence, version = self.store.get(user_id)
        except KeyError:
            raise ServingError(wire.ERR_UNKNOWN_USER, f"unknown user {user_id}") from None
        with self._lock:
            cached = self._cache.get(user_id)
            if cached is not None and cached[0] == version:
                self.stats["cache_hits"] += 1
                return cached[1]
        started = time.perf_counter_ns()
        table = encode_sequence(sequence, self.family, user_id, version)
        data = wire.serialize_bucket_table(table)
        elapsed = time.perf_counter_ns() - started
        with self._lock:
            self.stats["cache_misses"] += 1
            self._encode_ns.append(elapsed)
            self._cache[user_id] = (version, data)
        return data

    def handle_message(self, msg_type: int, payload: bytes) -> tuple[int, bytes]:
        with self._lock:
            self.stats["requests"] += 1
        if msg_type != wire.MSG_ENCODE_REQUEST:
            raise ValueError(f"unexpected message type {msg_type}")
        user_id = wire.parse_encode_request(payload)
        return wire.MSG_BUCKET_TABLE, self.table_bytes(user_id)

    def encode_times_ns(self) -> list[int]:
        with self._lock:
            return list(self._encode_ns)


class CtrServer(_ServerBase):
    """Scorer service: hashes candidates, gathers bucket vectors from the
    table fetched per request, and returns interest vectors with hit counts."""

    def __init__(self, bse_address: tuple[str, int], address=("127.0.0.1", 0)):
        super().__init__(address)
        self.bse_address = bse_address
        self._families: dict[tuple[int, int, int, int], HashFamily] = {}
        self.stats = {"requests": 0, "candidates": 0}
        self._fetch_ns: list[int] = []
        self._table_bytes: list[int] = []
        self._score_ns: list[int] = []
        self._batch_sizes: list[int] = []

    def _family_for(self, table) -> HashFamily:
        key = (table.family_seed, table.m, table.tau, table.d)
        with self._lock:
            family = self._families.get(key)
        if family is None:
            family = sample_hash_family(*key)
            with self._lock:
                self._families[key] = family
        return family

    def handle_message(self, msg_type: int, payload: bytes) -> tuple[int, bytes]:
        if msg_type != wire.MSG_SCORE_REQUEST:
            raise ValueError(f"unexpected message type {msg_type}")
        user_id, candidates = wire.parse_score_request(payload)

        started = time.perf_counter_ns()
        data = request_table(self.bse_address, user_id)
        fetched = time.perf_counter_ns()
        table = wire.deserialize_bucket_table(data)

        if candidates.shape[0] and candidates.shape[1] != table.d:
            raise ValueError(
                f"candidate dimension {candidates.shape[1]} does not match table d={table.d}"
            )
        family = self._family_for(table)
        score_started = time.perf_counter_ns()
        if candidates.shape[0]:
            interests, hits = gather_interest_batch(
                candidates.astype(np.float64), table, family
            )
        else:
            interests = np.zeros((0, table.d))
            hits = np.zeros(0, dtype=np.int64)
        done = time.perf_counter_ns()

        with self._lock:
            self.stats["requests"] += 1
            self.stats["candidates"] += int(candidates.shape[0])
            self._fetch_ns.append(fetched - started)
            self._table_bytes.append(len(data))
            self._score_ns.append(done - score_started)
            self._batch_sizes.append(int(candidates.shape[0]))
        return wire.MSG_SCORE_RESPONSE, wire.pack_score_response(interests, hits)

    def stage_samples(self) -> dict[str, list[int]]:
        with self._lock:
            return {
                "fetch_ns": list(self._fetch_ns),
                "table_bytes": list(self._table_bytes),
                "score_ns": list(self._score_ns),
                "batch_sizes": list(self._batch_sizes),
            }


def bse_serve(store: SequenceStore, family: HashFamily, address=("127.0.0.1", 0)) -> BseServer:
    """Start a sequence-encoder server; returns the running handle."""
    return BseServer(store, family, address).start()


def ctr_serve(bse_address: tuple[str, int], address=("127.0.0.1", 0)) -> CtrServer:
    """Start a scorer server pointed at a sequence encoder."""
    return CtrServer(bse_address, address).start()


# --- client helpers ---------------------------------------------------------


def _roundtrip(address: tuple[str, int], msg_type: int, payload: bytes) -> tuple[int, bytes]:
    with socket.create_connection(address) as conn:
        conn.sendall(wire.pack_frame(msg_type, payload))
        reply_type, reply = wire.read_frame(conn.recv)
    if reply_type == wire.MSG_ERROR:
        code, message = wire.parse_error(reply)
        raise ServingError(code, message)
    return reply_type, reply


def request_table(address: tuple[str, int], user_id: int) -> bytes:
    """Fetch the serialized bucket table for a user from a BSE server."""
    reply_type, reply = _roundtrip(address, wire.MSG_ENCODE_REQUEST, wire.pack_encode_request(user_id))
    if reply_type != wire.MSG_BUCKET_TABLE:
        raise ServingError(wire.ERR_INTERNAL, f"unexpected reply type {reply_type}")
    return reply


def score_candidates(
    address: tuple[str, int], user_id: int, candidates: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Score a candidate batch against a user's long-term interest."""
    reply_type, reply = _roundtrip(
        address, wire.MSG_SCORE_REQUEST, wire.pack_score_request(user_id, candidates)
    )
    if reply_type != wire.MSG_SCORE_RESPONSE:
        raise ServingError(wire.ERR_INTERNAL, f"unexpected reply type {reply_type}")
    return wire.parse_score_response(reply)


# --- simulation -------------------------------------------------------------


def _percentiles(samples: list[int]) -> dict[str, float]:
    if not samples:
        return {"count": 0, "p50": 0.0, "p95": 0.0, "mean": 0.0}
    arr = np.asarray(samples, dtype=np.float64)
    return {
        "count": int(arr.size),
        "p50": float(np.percentile(arr, 50)),
        "p95": float(np.percentile(arr, 95)),
        "mean": float(arr.mean()),
    }


def simulate(store: SequenceStore, request_stream, family: HashFamily) -> dict:
    """Drive score requests through a live server pair and report per-stage
    wall-clock percentiles.

    ``request_stream`` yields ``(user_id, candidates)`` pairs. Stages:
    sequence hashing (encoder side, cache misses only), transmission
    (table size and fetch time), candidate scoring per batch and per
    candidate, and end-to-end request time.
    """
    with bse_serve(store, family) as bse, ctr_serve(bse.address) as ctr:
        end_to_end = []
        requests = 0
        for user_id, candidates in request_stream:
            started = time.perf_counter_ns()
            score_candidates(ctr.address, user_id, candidates)
            end_to_end.append(time.perf_counter_ns() - started)
            requests += 1
        ctr_stages = ctr.stage_samples()
        per_candidate = [
            score / batch
            for score, batch in zip(ctr_stages["score_ns"], ctr_stages["batch_sizes"])
            if batch
        ]
        report = {
            "requests": requests,
            "stages": {
                "sequence_hash_ns": _percentiles(bse.encode_times_ns()),
                "transmission_bytes": _percentiles(ctr_stages["table_bytes"]),
                "transmission_ns": _percentiles(ctr_stages["fetch_ns"]),
                "candidate_score_ns": _percentiles(ctr_stages["score_ns"]),
                "per_candidate_gather_ns": _percentiles(per_candidate),
                "end_to_end_ns": _percentiles(end_to_end),
            },
            "bse_cache": {
                "hits": bse.stats["cache_hits"],
                "misses": bse.stats["cache_misses"],
            },
        }
    return report

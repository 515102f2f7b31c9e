"""Signature bucketing: the candidate-independent encoding of a behavior
sequence that the sequence-encoder server ships to the scorer.

Per hash round, every item lands in the bucket named by its signature code;
a bucket stores the l2-normalized sum of its items plus the item count.
Normalizing here is sound because the l2 step applies to the
query-independent bucket sum, so the table needs no knowledge of candidates.
Scoring then reduces to hashing the candidate and averaging the bucket
vectors its codes select.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..attention import BehaviorSequence
from ..hashing import HashFamily, hash_codes, signature_matrix, signatures

__all__ = ["Bucket", "BucketTable", "encode_sequence", "gather_interest", "gather_interest_batch"]

# Vectorized encode/gather flatten the rounds x 2^tau bucket grid; beyond
# this many slots the dense arrays stop paying for themselves and the
# dict-walking fallback takes over.
_MAX_DENSE_SLOTS = 8192


@dataclass(frozen=True, eq=False)
class Bucket:
    """One signature bucket: float32 unit vector (or zeros on exact
    cancellation) and the number of items summed into it."""

    vector: np.ndarray
    count: int

    def __eq__(self, other) -> bool:
        if not isinstance(other, Bucket):
            return NotImplemented
        return self.count == other.count and np.array_equal(self.vector, other.vector)


@dataclass(frozen=True, eq=False)
class BucketTable:
    """Per-round sparse maps from signature code to bucket.

    ``buckets[i]`` maps round-i codes to their buckets; empty buckets are
    never stored. The family is referenced by ``family_seed`` (plus m, tau,
    d) rather than by matrix, so both servers regenerate identical
    projections from the seed alone.
    """

    d: int
    m: int
    tau: int
    user_id: int
    family_seed: int
    sequence_version: int
    buckets: tuple[dict[int, Bucket], ...] = field(repr=False)

    def __post_init__(self) -> None:
        if self.m < 1 or self.tau < 1 or self.m % self.tau != 0:
            raise ValueError(f"m must be a positive multiple of tau, got m={self.m}, tau={self.tau}")
        if len(self.buckets) != self.rounds:
            raise ValueError(
                f"expected {self.rounds} rounds of buckets, got {len(self.buckets)}"
            )

    @property
    def rounds(self) -> int:
        return self.m // self.tau

    def __eq__(self, other) -> bool:
        if not isinstance(other, BucketTable):
            return NotImplemented
        return (
            (self.d, self.m, self.tau, self.user_id, self.family_seed, self.sequence_version)
            == (other.d, other.m, other.tau, other.user_id, other.family_seed, other.sequence_version)
            and self.buckets == other.buckets
        )


def encode_sequence(
    sequence: BehaviorSequence,
    family: HashFamily,
    user_id: int = 0,
    sequence_version: int = 0,
) -> BucketTable:
    """Bucket every item of the sequence by its per-round signature.

    An empty sequence is allowed and yields an all-empty table. Each item
    lands in exactly one bucket per round, so per-round counts always sum
    to the sequence length.
    """
    if sequence.L and family.d != sequence.d:
        raise ValueError(f"family d={family.d} does not match item dimension {sequence.d}")

    rounds: list[dict[int, Bucket]] = [{} for _ in range(family.rounds)]
    if sequence.L:
        codes = signature_matrix(sequence.items, family, label="sequence")  # (L, rounds)
        slots = 1 << family.tau
        flat_dim = family.rounds * slots
        if flat_dim <= _MAX_DENSE_SLOTS:
            # One scatter plus one matmul: items land in a flattened
            # rounds x slots grid, summed in a single pass.
            flat = codes.astype(np.int64) + slots * np.arange(family.rounds)
            onehot = np.zeros((sequence.L, flat_dim))
            onehot[np.arange(sequence.L)[:, np.newaxis], flat] = 1.0
            sums = onehot.T @ sequence.items  # (flat_dim, d)
            counts = np.bincount(flat.ravel(), minlength=flat_dim)
            norms = np.linalg.norm(sums, axis=1)
            vectors = np.divide(
                sums, np.where(norms > 0, norms, 1.0)[:, np.newaxis]
            ).astype(np.float32)
            for slot in np.flatnonzero(counts):
                rounds[slot // slots][int(slot % slots)] = Bucket(
                    vectors[slot], int(counts[slot])
                )
        else:
            for i in range(family.rounds):
                unique, inverse = np.unique(codes[:, i], return_inverse=True)
                onehot = (inverse == np.arange(unique.size)[:, np.newaxis]).astype(np.float64)
                sums = onehot @ sequence.items
                counts = np.bincount(inverse, minlength=unique.size)
                norms = np.linalg.norm(sums, axis=1)
                vectors = np.divide(
                    sums, np.where(norms > 0, norms, 1.0)[:, np.newaxis]
                ).astype(np.float32)
                rounds[i] = {
                    int(code): Bucket(vector, int(count))
                    for code, vector, count in zip(unique, vectors, counts)
                }
    return BucketTable(
        d=sequence.d if sequence.L else family.d,
        m=family.m,
        tau=family.tau,
        user_id=int(user_id),
        family_seed=family.seed,
        sequence_version=int(sequence_version),
        buckets=tuple(rounds),
    )


def _check_family(table: BucketTable, family: HashFamily) -> None:
    ours = (family.m, family.tau, family.d, family.seed)
    theirs = (table.m, table.tau, table.d, table.family_seed)
    if ours != theirs:
        raise ValueError(
            f"family (m, tau, d, seed)={ours} does not match table {theirs}"
        )


def gather_interest(
    candidate: np.ndarray,
    table: BucketTable,
    family: HashFamily,
) -> tuple[np.ndarray, int]:
    """Look up the candidate's bucket in every round and average the hits.

    Returns ``(interest, hit_rounds)``; no hit in any round yields the zero
    vector. Up to summation order this equals hash-sampling attention run
    against the raw sequence.
    """
    _check_family(table, family)
    codes = signatures(hash_codes(candidate, family, label="query"), family.tau)
    accumulator = np.zeros(table.d)
    hits = 0
    for i in range(table.rounds):
        bucket = table.buckets[i].get(int(codes[i]))
        if bucket is not None:
            accumulator += bucket.vector
            hits += 1
    if hits:
        accumulator /= hits
    return accumulator, hits


def gather_interest_batch(
    candidates: np.ndarray,
    table: BucketTable,
    family: HashFamily,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``gather_interest`` over a (B, d) candidate stack.

    Candidates hash in one projection pass; gathering never touches the raw
    sequence, so per-candidate work is independent of its length.
    """
    _check_family(table, family)
    candidates = np.asarray(candidates, dtype=np.float64)
    if candidates.ndim != 2 or candidates.shape[1] != table.d:
        raise ValueError(
            f"candidates of shape {candidates.shape} do not match table d={table.d}"
        )
    if candidates.shape[0] == 0:
        return np.zeros((0, table.d)), np.zeros(0, dtype=np.int64)

    codes = signature_matrix(candidates, family, label="candidates")  # (B, rounds)
    slots = 1 << table.tau
    flat_dim = table.rounds * slots
    if flat_dim <= _MAX_DENSE_SLOTS:
        dense = np.zeros((flat_dim, table.d))
        present = np.zeros(flat_dim, dtype=bool)
        for i, round_buckets in enumerate(table.buckets):
            base = i * slots
            for code, bucket in round_buckets.items():
                dense[base + code] = bucket.vector
                present[base + code] = True
        flat = codes.astype(np.int64) + slots * np.arange(table.rounds)  # (B, rounds)
        onehot = np.zeros((candidates.shape[0], flat_dim))
        onehot[np.arange(candidates.shape[0])[:, np.newaxis], flat] = 1.0
        totals = onehot @ dense  # (B, d); absent slots contribute zeros
        hits = present[flat].sum(axis=1)
    else:
        hits = np.zeros(candidates.shape[0], dtype=np.int64)
        totals = np.zeros((candidates.shape[0], table.d))
        for b in range(candidates.shape[0]):
            for i in range(table.rounds):
                bucket = table.buckets[i].get(int(codes[b, i]))
                if bucket is not None:
                    totals[b] += bucket.vector
                    hits[b] += 1
    divisor = np.where(hits > 0, hits, 1).astype(np.float64)
    interests = totals / divisor[:, np.newaxis]
    interests[hits == 0] = 0.0
    return interests, hits.astype(np.int64)

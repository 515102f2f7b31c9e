"""SimHash machinery: random-projection families, sign codes, and the
tau-wide signatures built from them.

A family holds ``m`` Gaussian projection directions. Each direction turns a
vector into one sign bit, and consecutive groups of ``tau`` bits are packed
into one signature code per round (``rounds = m / tau``). Two vectors
"collide" in a round iff their round codes are equal, which happens with
probability ``(1 - angle/pi) ** tau``.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MAX_TAU",
    "HashFamily",
    "sample_hash_family",
    "hash_codes",
    "hash_code_matrix",
    "signatures",
    "signature_matrix",
    "hamming_distance",
    "record_projections",
]

_MASK64 = (1 << 64) - 1

# Signatures must fit a 16-bit code on the wire.
MAX_TAU = 16


def _philox_normal(word0: int, word1: int, size) -> np.ndarray:
    """Standard-normal draws from a counter-based generator keyed by two words.

    Every (word0, word1) pair owns an independent stream, so any row of a
    projection matrix can be regenerated without materializing the others.
    """
    key = np.array([word0 & _MASK64, word1 & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(size)


@dataclass(frozen=True)
class HashFamily:
    """``m`` Gaussian projection directions of dimension ``d`` plus the
    signature width ``tau``.

    Immutable after construction and safe to share across threads. Row ``k``
    of ``projections`` is a pure function of ``(seed, k)``, which lets two
    processes derive identical families from the seed alone.
    """

    projections: np.ndarray
    m: int
    tau: int
    d: int
    seed: int

    def __post_init__(self) -> None:
        _validate_family_params(self.m, self.tau, self.d)
        if self.projections.shape != (self.m, self.d):
            raise ValueError(
                f"projections shape {self.projections.shape} does not match "
                f"(m, d) = ({self.m}, {self.d})"
            )

    @property
    def rounds(self) -> int:
        return self.m // self.tau


def _validate_family_params(m: int, tau: int, d: int) -> None:
    if tau < 1 or tau > MAX_TAU:
        raise ValueError(f"tau must be in [1, {MAX_TAU}], got {tau}")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    if m % tau != 0:
        raise ValueError(f"m must be divisible by tau, got m={m}, tau={tau}")
    if d < 1:
        raise ValueError(f"d must be positive, got {d}")


def sample_hash_family(seed: int, m: int, tau: int, d: int) -> HashFamily:
    """Draw a deterministic family of ``m`` standard-normal projection rows.

    Identical arguments yield bit-identical families. Rows are keyed by
    ``(seed, row_index)``, so a family sampled with a larger ``m`` extends a
    smaller one row-for-row.
    """
    _validate_family_params(m, tau, d)
    rows = np.stack([_philox_normal(seed, k, d) for k in range(m)])
    return HashFamily(projections=rows, m=m, tau=tau, d=d, seed=int(seed) & _MASK64)


# --- projection kernel instrumentation ----------------------------------
#
# The serving contract is that one request hashes the behavior sequence
# exactly once no matter how many candidates it scores. That is asserted
# structurally: while recording, every projection-kernel call appends a
# (label, row_count) entry.

_PROJECTION_LOG: list[tuple[str, int]] | None = None
_LOG_LOCK = threading.Lock()


@contextmanager
def record_projections():
    """Capture ``(label, rows)`` for every projection-kernel call.

    Yields the live list; entries from concurrent threads are appended in
    completion order.
    """
    global _PROJECTION_LOG
    with _LOG_LOCK:
        previous = _PROJECTION_LOG
        _PROJECTION_LOG = log = []
    try:
        yield log
    finally:
        with _LOG_LOCK:
            _PROJECTION_LOG = previous


def _sign_bits(vectors: np.ndarray, family: HashFamily, label: str) -> np.ndarray:
    """Project ``vectors`` (rows) through the family and take sign bits.

    The tie ``dot == 0`` maps to bit 1; with Gaussian projections it has
    probability zero, and a fixed rule keeps hashing deterministic.
    """
    if _PROJECTION_LOG is not None:
        with _LOG_LOCK:
            if _PROJECTION_LOG is not None:
                _PROJECTION_LOG.append((label, vectors.shape[0]))
    dots = vectors @ family.projections.T
    return (dots >= 0.0).astype(np.uint8)


def hash_codes(x: np.ndarray, family: HashFamily, *, label: str = "vector") -> np.ndarray:
    """Sign codes of a single vector: ``m`` bits, bit k = 1 iff row_k . x >= 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != family.d:
        raise ValueError(
            f"vector of dimension {x.shape} does not match family d={family.d}"
        )
    return _sign_bits(x[np.newaxis, :], family, label)[0]


def hash_code_matrix(
    vectors: np.ndarray, family: HashFamily, *, label: str = "matrix"
) -> np.ndarray:
    """Sign codes for a stack of vectors, shape (n, d) -> (n, m)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != family.d:
        raise ValueError(
            f"matrix of shape {vectors.shape} does not match family d={family.d}"
        )
    return _sign_bits(vectors, family, label)


def signatures(bits: np.ndarray, tau: int) -> np.ndarray:
    """Pack consecutive groups of ``tau`` sign bits into signature codes.

    Round i packs bits [i*tau, (i+1)*tau), most-significant bit first. Works
    on a single code vector of shape (m,) or a batch (n, m); returns uint16
    codes of shape (rounds,) or (n, rounds).
    """
    arr = np.asarray(bits)
    if arr.ndim not in (1, 2):
        raise ValueError("bits must be a 1-D or 2-D array")
    m = arr.shape[-1]
    if tau < 1 or tau > MAX_TAU:
        raise ValueError(f"tau must be in [1, {MAX_TAU}], got {tau}")
    if m == 0 or m % tau != 0:
        raise ValueError(f"bit count must be a positive multiple of tau, got m={m}, tau={tau}")
    rounds = m // tau
    weights = 2 ** np.arange(tau - 1, -1, -1, dtype=np.int64)
    grouped = arr.astype(np.int64).reshape(arr.shape[:-1] + (rounds, tau))
    return (grouped @ weights).astype(np.uint16)


def signature_matrix(
    vectors: np.ndarray, family: HashFamily, *, label: str = "matrix"
) -> np.ndarray:
    """Signature codes for a stack of vectors, shape (n, d) -> (n, rounds)."""
    return signatures(hash_code_matrix(vectors, family, label=label), family.tau)


def hamming_distance(codes_a: np.ndarray, codes_b: np.ndarray) -> np.ndarray:
    """Count of differing bits; broadcasts over leading dimensions."""
    a = np.asarray(codes_a)
    b = np.asarray(codes_b)
    return (a != b).sum(axis=-1)

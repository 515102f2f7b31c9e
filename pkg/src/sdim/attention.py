"""Interest-vector estimators over a user's behavior sequence.

The exact softmax estimator (``target_attention``) is the oracle everything
else is measured against. ``sdim_attention`` approximates it by signature
collision sampling; ``expected_attention`` is its closed-form limit, weighting
each item by ``(1 - arccos(q . s) / pi) ** tau``. The remaining estimators are
the baselines that bracket it: mean pooling (the zero-width limit),
category-filtered attention, and Hamming-distance top-k retrieval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hashing import HashFamily, hamming_distance, hash_code_matrix, hash_codes, signature_matrix, signatures

__all__ = [
    "UNIT_NORM_ATOL",
    "BehaviorSequence",
    "AttentionResult",
    "target_attention",
    "sdim_attention",
    "sdim_attention_tau0",
    "expected_attention",
    "collision_prob",
    "mean_pooling",
    "sim_hard",
    "eta_topk",
]

# Item embeddings must be unit vectors so dot products are valid cosines.
UNIT_NORM_ATOL = 1e-6


@dataclass(frozen=True)
class BehaviorSequence:
    """A user's behavior items as rows of unit-norm embeddings.

    ``categories`` carries one integer id per item; only the category-match
    baseline reads it and it defaults to all zeros.
    """

    items: np.ndarray
    categories: np.ndarray | None = None

    def __post_init__(self) -> None:
        items = np.ascontiguousarray(self.items, dtype=np.float64)
        if items.ndim != 2:
            raise ValueError("items must be a 2-D (L, d) array")
        if self.categories is None:
            categories = np.zeros(items.shape[0], dtype=np.int64)
        else:
            categories = np.ascontiguousarray(self.categories, dtype=np.int64)
        if categories.shape != (items.shape[0],):
            raise ValueError(
                f"categories length {categories.shape} does not match {items.shape[0]} items"
            )
        if items.size:
            if not np.isfinite(items).all():
                raise ValueError("items must be finite")
            norms = np.linalg.norm(items, axis=1)
            worst = np.abs(norms - 1.0).max()
            if worst > UNIT_NORM_ATOL:
                raise ValueError(
                    f"items must be unit-norm within {UNIT_NORM_ATOL:g} (worst deviation {worst:.3g})"
                )
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "categories", categories)

    @property
    def L(self) -> int:
        return self.items.shape[0]

    @property
    def d(self) -> int:
        return self.items.shape[1]

    def __len__(self) -> int:
        return self.L


@dataclass(frozen=True)
class AttentionResult:
    """A d-dimensional interest vector, plus per-item weights when requested.

    Weights are analysis-only: production paths never materialize them. When
    present they are non-negative and sum to 1; when an estimator has no
    evidence at all (every hash round empty, or zero collision mass) the
    interest is the zero vector and weights stay absent.
    """

    interest: np.ndarray
    weights: np.ndarray | None = None


def _require_nonempty(sequence: BehaviorSequence) -> None:
    if sequence.L == 0:
        raise ValueError("behavior sequence is empty")


def _as_query(q: np.ndarray, d: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != d:
        raise ValueError(f"query of shape {q.shape} does not match item dimension {d}")
    if not np.isfinite(q).all():
        raise ValueError("query must be finite")
    return q


def _resolve_scale(scale: float | None, d: int) -> float:
    if scale is None:
        return math.sqrt(d)
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return float(scale)


def _softmax_pool(q: np.ndarray, items: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray]:
    logits = items @ q / scale
    logits -= logits.max()
    unnorm = np.exp(logits)
    weights = unnorm / unnorm.sum()
    return weights @ items, weights


def target_attention(
    q: np.ndarray,
    sequence: BehaviorSequence,
    scale: float | None = None,
    *,
    return_weights: bool = False,
) -> AttentionResult:
    """Exact softmax attention with the candidate as query.

    Weight of item j is ``exp(q . s_j / scale)`` normalized to sum 1; the
    interest vector is the weighted sum of items. ``scale`` defaults to
    ``sqrt(d)`` to keep the inner products from saturating the exponential.
    """
    _require_nonempty(sequence)
    q = _as_query(q, sequence.d)
    scale = _resolve_scale(scale, sequence.d)
    interest, weights = _softmax_pool(q, sequence.items, scale)
    return AttentionResult(interest, weights if return_weights else None)


def sdim_attention(
    q: np.ndarray,
    sequence: BehaviorSequence,
    family: HashFamily,
    *,
    return_weights: bool = False,
    seq_signatures: np.ndarray | None = None,
    normalization: str = "l2",
) -> AttentionResult:
    """Hash-sampling attention: gather, normalize, and average per round.

    For each of the ``m / tau`` rounds, the items whose round signature
    equals the candidate's form a bucket; the round contributes the
    l2-normalized bucket sum, and the interest vector is the average over
    rounds with a nonempty bucket. If every round is empty the result is the
    zero vector, signalling "no long-term interest evidence" downstream
    (empty rounds are excluded rather than averaged in as zeros, which would
    bias the interest norm down for sparse-history users).

    ``seq_signatures`` accepts a precomputed ``signature_matrix`` of the
    sequence so that scoring many candidates hashes the sequence only once.
    ``normalization="sum"`` divides each bucket by its item count instead of
    its l2 norm; the two perform on par and l2 is the primary path.
    """
    _require_nonempty(sequence)
    q = _as_query(q, sequence.d)
    if family.d != sequence.d:
        raise ValueError(f"family d={family.d} does not match item dimension {sequence.d}")
    if normalization not in ("l2", "sum"):
        raise ValueError(f"normalization must be 'l2' or 'sum', got {normalization!r}")

    sig_q = signatures(hash_codes(q, family, label="query"), family.tau)
    if seq_signatures is None:
        sig_s = signature_matrix(sequence.items, family, label="sequence")
    else:
        sig_s = np.asarray(seq_signatures)
        if sig_s.shape != (sequence.L, family.rounds):
            raise ValueError(
                f"seq_signatures shape {sig_s.shape} does not match "
                f"(L, rounds) = ({sequence.L}, {family.rounds})"
            )

    match = sig_s == sig_q  # (L, rounds)
    occupancy = match.sum(axis=0)
    nonempty = occupancy > 0
    if not nonempty.any():
        return AttentionResult(np.zeros(sequence.d))

    bucket_sums = sequence.items.T @ match.astype(np.float64)  # (d, rounds)
    if normalization == "l2":
        divisor = np.linalg.norm(bucket_sums, axis=0)
    else:
        divisor = occupancy.astype(np.float64)
    # A nonempty bucket whose items cancel exactly contributes a zero vector.
    live = nonempty & (divisor > 0)
    contributions = np.zeros_like(bucket_sums)
    contributions[:, live] = bucket_sums[:, live] / divisor[live]
    interest = contributions[:, nonempty].mean(axis=1)

    if not return_weights:
        return AttentionResult(interest)
    inverse = np.zeros(family.rounds)
    inverse[live] = 1.0 / divisor[live]
    coefficients = (match @ inverse) / nonempty.sum()
    total = coefficients.sum()
    if total <= 0:
        return AttentionResult(interest)
    return AttentionResult(interest, coefficients / total)


def sdim_attention_tau0(
    q: np.ndarray,
    sequence: BehaviorSequence,
    *,
    return_weights: bool = False,
) -> AttentionResult:
    """Zero-width limit: every item collides in every round.

    Returns the l2-normalized item sum, which points the same way as mean
    pooling; an exactly cancelling sum falls back to the zero vector.
    """
    _require_nonempty(sequence)
    _as_query(q, sequence.d)
    total = sequence.items.sum(axis=0)
    norm = np.linalg.norm(total)
    if norm == 0:
        return AttentionResult(np.zeros(sequence.d))
    interest = total / norm
    if not return_weights:
        return AttentionResult(interest)
    return AttentionResult(interest, np.full(sequence.L, 1.0 / sequence.L))


def collision_prob(cos_sim, tau):
    """Probability that two unit vectors at the given cosine share one
    tau-wide signature: ``(1 - arccos(cos) / pi) ** tau``.

    Accepts scalars or arrays; the cosine is clamped to [-1, 1] to absorb
    float drift in dot products of unit vectors.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    clamped = np.clip(cos_sim, -1.0, 1.0)
    return (1.0 - np.arccos(clamped) / np.pi) ** tau


def expected_attention(
    q: np.ndarray,
    sequence: BehaviorSequence,
    tau: float,
    *,
    return_weights: bool = False,
) -> AttentionResult:
    """Closed-form limit of hash-sampling attention as rounds grow.

    Item j gets weight proportional to its round-collision probability
    ``(1 - arccos(q . s_j) / pi) ** tau``. ``tau`` may be real-valued here
    (the sampling path needs an integer, but the closed form does not),
    which is what the entropy analysis exploits.
    """
    _require_nonempty(sequence)
    q = _as_query(q, sequence.d)
    raw = collision_prob(sequence.items @ q, tau)
    total = raw.sum()
    if total == 0:
        return AttentionResult(np.zeros(sequence.d))
    weights = raw / total
    interest = weights @ sequence.items
    return AttentionResult(interest, weights if return_weights else None)


def mean_pooling(sequence: BehaviorSequence, *, return_weights: bool = False) -> AttentionResult:
    """Candidate-independent average of the behavior items."""
    _require_nonempty(sequence)
    interest = sequence.items.mean(axis=0)
    if not return_weights:
        return AttentionResult(interest)
    return AttentionResult(interest, np.full(sequence.L, 1.0 / sequence.L))


def sim_hard(
    q: np.ndarray,
    q_category: int,
    sequence: BehaviorSequence,
    scale: float | None = None,
    *,
    return_weights: bool = False,
) -> AttentionResult:
    """Category-filtered retrieval baseline.

    Keeps only items whose category id equals the candidate's, then applies
    exact attention to the filtered subsequence. No matching category yields
    the zero vector.
    """
    _require_nonempty(sequence)
    q = _as_query(q, sequence.d)
    scale = _resolve_scale(scale, sequence.d)
    mask = sequence.categories == q_category
    if not mask.any():
        return AttentionResult(np.zeros(sequence.d))
    interest, sub_weights = _softmax_pool(q, sequence.items[mask], scale)
    if not return_weights:
        return AttentionResult(interest)
    weights = np.zeros(sequence.L)
    weights[mask] = sub_weights
    return AttentionResult(interest, weights)


def eta_topk(
    q: np.ndarray,
    sequence: BehaviorSequence,
    family: HashFamily,
    k: int,
    scale: float | None = None,
    *,
    return_weights: bool = False,
) -> AttentionResult:
    """Hamming top-k retrieval baseline.

    Hashes the candidate and every item to m-bit sign codes, keeps the k
    items with the smallest Hamming distance (ties broken by lower index,
    i.e. most recent first in a most-recent-first sequence), and applies
    exact attention to the selection. ``k >= L`` selects everything.
    """
    _require_nonempty(sequence)
    q = _as_query(q, sequence.d)
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if family.d != sequence.d:
        raise ValueError(f"family d={family.d} does not match item dimension {sequence.d}")
    scale = _resolve_scale(scale, sequence.d)

    distances = hamming_distance(
        hash_code_matrix(sequence.items, family, label="sequence"),
        hash_codes(q, family, label="query"),
    )
    order = np.argsort(distances, kind="stable")
    selected = np.sort(order[: min(k, sequence.L)])
    interest, sub_weights = _softmax_pool(q, sequence.items[selected], scale)
    if not return_weights:
        return AttentionResult(interest)
    weights = np.zeros(sequence.L)
    weights[selected] = sub_weights
    return AttentionResult(interest, weights)

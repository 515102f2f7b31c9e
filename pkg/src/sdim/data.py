"""Behavior data: a loader for CSV behavior logs, deterministic embedding
synthesis, and clustered synthetic instances.

No embeddings are trained here. Items get hash-seeded unit vectors whose
geometry (same-category items closer than cross-category ones) is all the
attention math needs, and the instance generator produces
interest-concentrated users so estimators have signal to find.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .attention import BehaviorSequence
from .hashing import _philox_normal

__all__ = [
    "BehaviorType",
    "BehaviorEvent",
    "BehaviorLog",
    "MalformedLogError",
    "load_behavior_log",
    "embed_item",
    "sequence_from_events",
    "InstanceConfig",
    "CandidateBatch",
    "SyntheticInstance",
    "generate_instance",
]

_MASK64 = (1 << 64) - 1

_CATEGORY_SALT = 0x6A09E667F3BCC908
_ITEM_SALT = 0xBB67AE8584CAA73B
_INSTANCE_SALT = 0x3C6EF372FE94F82B


class BehaviorType(IntEnum):
    PAGE_VIEW = 0
    ADD_TO_CART = 1
    FAVORITE = 2
    PURCHASE = 3


_BEHAVIOR_ALIASES = {
    "pv": BehaviorType.PAGE_VIEW,
    "cart": BehaviorType.ADD_TO_CART,
    "fav": BehaviorType.FAVORITE,
    "buy": BehaviorType.PURCHASE,
}


def _parse_behavior(text: str) -> int:
    token = text.strip().lower()
    if token in _BEHAVIOR_ALIASES:
        return int(_BEHAVIOR_ALIASES[token])
    value = int(token)
    if not 0 <= value < 256:
        raise ValueError(f"behavior type {value} out of range")
    return value


@dataclass(frozen=True)
class BehaviorEvent:
    user_id: int
    item_id: int
    category_id: int
    behavior_type: int
    timestamp: int


class MalformedLogError(ValueError):
    """More than 1% of data rows failed to parse."""

    def __init__(self, total: int, malformed: int, samples: list[str]):
        detail = "; ".join(samples)
        super().__init__(
            f"{malformed} of {total} rows malformed (>1%); first problems: {detail}"
        )
        self.total = total
        self.malformed = malformed


@dataclass(frozen=True)
class BehaviorLog:
    """Per-user events, most recent first, plus load accounting."""

    users: dict[int, list[BehaviorEvent]]
    total_rows: int
    malformed_rows: int


def load_behavior_log(path, max_len: int) -> BehaviorLog:
    """Read ``user,item,category,behavior_type,timestamp`` CSV rows.

    Per user, events are sorted by timestamp and truncated to the most
    recent ``max_len``, most-recent-first; ties keep input order. An
    optional header is auto-detected by a non-numeric first field.
    Malformed rows are counted and skipped, but more than 1% of them
    aborts the load.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be positive, got {max_len}")
    by_user: dict[int, list[BehaviorEvent]] = {}
    total = 0
    malformed = 0
    samples: list[str] = []
    with open(path, newline="", encoding="utf-8-sig") as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if not row:
                continue
            if line_no == 1 and row and not _looks_numeric(row[0]):
                continue  # header
            total += 1
            try:
                if len(row) != 5:
                    raise ValueError(f"expected 5 fields, got {len(row)}")
                event = BehaviorEvent(
                    user_id=int(row[0]),
                    item_id=int(row[1]),
                    category_id=int(row[2]),
                    behavior_type=_parse_behavior(row[3]),
                    timestamp=int(row[4]),
                )
                if event.timestamp < 0:
                    raise ValueError("negative timestamp")
            except ValueError as exc:
                malformed += 1
                if len(samples) < 5:
                    samples.append(f"line {line_no}: {exc}")
                continue
            by_user.setdefault(event.user_id, []).append(event)
    if total and malformed > 0.01 * total:
        raise MalformedLogError(total, malformed, samples)
    users = {
        user_id: sorted(events, key=lambda e: -e.timestamp)[:max_len]
        for user_id, events in by_user.items()
    }
    return BehaviorLog(users=users, total_rows=total, malformed_rows=malformed)


def _looks_numeric(text: str) -> bool:
    try:
        int(text.strip())
        return True
    except ValueError:
        return False


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("cannot normalize a zero vector")
    return v / norm


def embed_item(item_id: int, category_id: int, d: int, seed: int, blend: float = 0.7) -> np.ndarray:
    """Deterministic unit embedding: a category anchor blended with
    item-specific noise.

    ``blend`` is the anchor share: 1.0 makes all items of a category share
    one vector; lower values spread items while keeping same-category pairs
    closer than cross-category pairs in expectation. Identical arguments
    yield bit-identical vectors.
    """
    if d < 2:
        raise ValueError(f"d must be at least 2, got {d}")
    if not 0.0 <= blend <= 1.0:
        raise ValueError(f"blend must be in [0, 1], got {blend}")
    anchor = _unit(_philox_normal(seed ^ _CATEGORY_SALT, category_id, d))
    if blend == 1.0:
        return anchor
    noise = _unit(_philox_normal(seed ^ _ITEM_SALT, item_id, d))
    return _unit(blend * anchor + (1.0 - blend) * noise)


def sequence_from_events(
    events: list[BehaviorEvent], d: int, seed: int, blend: float = 0.7
) -> BehaviorSequence:
    """Embed a user's events into a behavior sequence, order preserved."""
    items = np.empty((len(events), d))
    categories = np.empty(len(events), dtype=np.int64)
    for row, event in enumerate(events):
        items[row] = embed_item(event.item_id, event.category_id, d, seed, blend)
        categories[row] = event.category_id
    return BehaviorSequence(items, categories)


@dataclass(frozen=True)
class InstanceConfig:
    """Shape of a synthetic workload.

    ``intra_cluster_cos`` is the exact cosine between an item and its
    cluster anchor; higher values make users' interests more concentrated.
    """

    n_users: int
    L: int
    B: int
    d: int
    cluster_count: int = 8
    intra_cluster_cos: float = 0.7
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_users", "L", "B", "d", "cluster_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if not 0.0 <= self.intra_cluster_cos < 1.0:
            raise ValueError("intra_cluster_cos must be in [0, 1)")


@dataclass(frozen=True)
class CandidateBatch:
    user_id: int
    candidates: np.ndarray
    categories: np.ndarray


@dataclass(frozen=True)
class SyntheticInstance:
    config: InstanceConfig
    users: dict[int, BehaviorSequence] = field(repr=False)
    requests: tuple[CandidateBatch, ...] = field(repr=False)


# Share of a user's behaviors drawn from their primary interest cluster, and
# share of request candidates that are in-cluster (relevant).
_SEQUENCE_IN_CLUSTER = 0.75
_CANDIDATE_IN_CLUSTER = 0.5


def _cluster_point(rng: np.random.Generator, anchor: np.ndarray, rho: float) -> np.ndarray:
    """Unit vector at exactly cosine ``rho`` to the anchor."""
    g = rng.standard_normal(anchor.size)
    g -= (g @ anchor) * anchor
    norm = np.linalg.norm(g)
    if norm == 0:  # measure-zero; redraw once deterministically
        g = rng.standard_normal(anchor.size)
        g -= (g @ anchor) * anchor
        norm = np.linalg.norm(g)
    return rho * anchor + np.sqrt(1.0 - rho * rho) * (g / norm)


def generate_instance(config: InstanceConfig) -> SyntheticInstance:
    """Deterministically generate clustered users and candidate batches.

    Each user has a primary cluster; most behavior items come from it and
    the rest from other clusters. Candidates mix in-cluster (relevant) and
    out-of-cluster (irrelevant) items so retrieval baselines have signal to
    find. Category ids equal cluster ids. Sequences are exactly length L;
    the store records true lengths, there is no padding.
    """
    key = np.array([config.seed & _MASK64, _INSTANCE_SALT], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    anchors = rng.standard_normal((config.cluster_count, config.d))
    anchors /= np.linalg.norm(anchors, axis=1, keepdims=True)
    rho = config.intra_cluster_cos

    def draw(primary: int, in_cluster_share: float, count: int):
        vectors = np.empty((count, config.d))
        categories = np.empty(count, dtype=np.int64)
        for row in range(count):
            if config.cluster_count == 1 or rng.random() < in_cluster_share:
                cluster = primary
            else:
                cluster = int(rng.integers(config.cluster_count - 1))
                if cluster >= primary:
                    cluster += 1
            vectors[row] = _cluster_point(rng, anchors[cluster], rho)
            categories[row] = cluster
        return vectors, categories

    users: dict[int, BehaviorSequence] = {}
    requests: list[CandidateBatch] = []
    for index in range(config.n_users):
        user_id = index + 1
        primary = index % config.cluster_count
        items, item_categories = draw(primary, _SEQUENCE_IN_CLUSTER, config.L)
        users[user_id] = BehaviorSequence(items, item_categories)
        candidates, candidate_categories = draw(primary, _CANDIDATE_IN_CLUSTER, config.B)
        requests.append(CandidateBatch(user_id, candidates, candidate_categories))
    return SyntheticInstance(config=config, users=users, requests=tuple(requests))

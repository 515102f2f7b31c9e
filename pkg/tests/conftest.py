"""Shared test fixtures and small builders."""

import numpy as np
import pytest

from sdim import BehaviorSequence, InstanceConfig, generate_instance
from sdim.serving import Bucket, BucketTable


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def random_unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    rows = rng.standard_normal((n, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def convergence_case(seed: int, L: int, d: int):
    """An interest-concentrated user and an in-cluster query candidate."""
    config = InstanceConfig(
        n_users=1, L=L, B=8, d=d, cluster_count=8, intra_cluster_cos=0.7, seed=seed
    )
    instance = generate_instance(config)
    request = instance.requests[0]
    matches = np.flatnonzero(request.categories == 0)
    pick = int(matches[0]) if matches.size else 0
    return request.candidates[pick], instance.users[request.user_id]


def random_bucket_table(rng: np.random.Generator) -> BucketTable:
    """A structurally valid bucket table with randomized contents."""
    tau = int(rng.integers(1, 9))
    rounds = int(rng.integers(1, 6))
    d = int(rng.integers(1, 24))
    buckets = []
    for _ in range(rounds):
        codes = rng.choice(1 << tau, size=rng.integers(0, min(6, 1 << tau) + 1), replace=False)
        round_buckets = {}
        for code in codes:
            vector = rng.standard_normal(d).astype(np.float32)
            norm = np.linalg.norm(vector)
            if norm > 0:
                vector /= norm
            round_buckets[int(code)] = Bucket(vector, int(rng.integers(1, 1 << 20)))
        buckets.append(round_buckets)
    return BucketTable(
        d=d,
        m=rounds * tau,
        tau=tau,
        user_id=int(rng.integers(0, 1 << 63)),
        family_seed=int(rng.integers(0, 1 << 63)),
        sequence_version=int(rng.integers(0, 1 << 31)),
        buckets=tuple(buckets),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240)


def sequence_of(*rows, categories=None) -> BehaviorSequence:
    return BehaviorSequence(np.array([unit(np.asarray(r, dtype=float)) for r in rows]), categories)

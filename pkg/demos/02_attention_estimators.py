#!/usr/bin/env python3
"""Every interest estimator on one synthetic user, side by side.

A user with clustered interests scores one in-cluster candidate. The
hash-sampling estimate should land near both the exact softmax interest and
its own closed-form expectation, while the cruder baselines drift.
"""

import numpy as np

from sdim import (
    InstanceConfig,
    eta_topk,
    expected_attention,
    generate_instance,
    mean_pooling,
    sample_hash_family,
    sdim_attention,
    sdim_attention_tau0,
    sim_hard,
    target_attention,
)

instance = generate_instance(
    InstanceConfig(n_users=1, L=256, B=8, d=64, cluster_count=8, intra_cluster_cos=0.7, seed=11)
)
user = instance.users[1]
request = instance.requests[0]

# pick an in-cluster candidate so there is interest to recover
pick = int(np.flatnonzero(request.categories == 0)[0])
q = request.candidates[pick]
q_category = int(request.categories[pick])

family = sample_hash_family(seed=3, m=48, tau=3, d=64)


def cosine(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return a @ b / (na * nb) if na and nb else 0.0


exact = target_attention(q, user).interest

estimates = {
    "target attention (exact)": exact,
    "hash sampling (m=48, tau=3)": sdim_attention(q, user, family).interest,
    "closed-form expectation": expected_attention(q, user, 3).interest,
    "category filter": sim_hard(q, q_category, user).interest,
    "hamming top-64": eta_topk(q, user, family, k=64).interest,
    "mean pooling": mean_pooling(user).interest,
    "zero-width limit": sdim_attention_tau0(q, user).interest,
}

print(f"user: L={user.L}, d={user.d}; candidate category {q_category}\n")
print(f"{'estimator':<30} cos(  , exact)   |interest|")
for name, interest in estimates.items():
    print(f"{name:<30} {cosine(interest, exact):+.4f}          {np.linalg.norm(interest):.4f}")

# The per-item weights behind the estimates, for the ten best-aligned items.
weights = sdim_attention(q, user, family, return_weights=True).weights
expected_weights = expected_attention(q, user, 3, return_weights=True).weights
softmax_weights = target_attention(q, user, return_weights=True).weights
top = np.argsort(user.items @ q)[::-1][:10]
print("\nitem   cos(q,s)   softmax w   sampled w   expected w")
for j in top:
    print(
        f"{j:>4}   {user.items[j] @ q:+.3f}     {softmax_weights[j]:.4f}      "
        f"{weights[j]:.4f}      {expected_weights[j]:.4f}"
    )

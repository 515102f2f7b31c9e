#!/usr/bin/env python3
"""The deployment miniature: encoder and scorer as separate TCP services.

The sequence encoder buckets each user's history by signature once and
caches the serialized table; the scorer fetches the table per request,
hashes only the candidates, and gathers bucket vectors. The projection log
proves the sequence is hashed exactly once however many candidates arrive.
"""

import numpy as np

from sdim import InstanceConfig, generate_instance, record_projections, sample_hash_family, sdim_attention
from sdim.serving import (
    SequenceStore,
    bse_serve,
    bucket_table_wire_size,
    ctr_serve,
    deserialize_bucket_table,
    encode_sequence,
    request_table,
    score_candidates,
    serialize_bucket_table,
)

family = sample_hash_family(seed=5, m=48, tau=3, d=64)
instance = generate_instance(InstanceConfig(n_users=3, L=256, B=32, d=64, seed=33))

store = SequenceStore()
for user_id, sequence in instance.users.items():
    store.replace(user_id, sequence)

# The wire format round-trips bit-exactly and its size is known a priori.
table = encode_sequence(instance.users[1], family, user_id=1, sequence_version=1)
blob = serialize_bucket_table(table)
assert deserialize_bucket_table(blob) == table
print(f"user 1 table: {len(blob)} bytes on the wire "
      f"(predicted {bucket_table_wire_size(table)}), {table.rounds} rounds")

with bse_serve(store, family) as bse, ctr_serve(bse.address) as ctr:
    print(f"encoder on {bse.address}, scorer on {ctr.address}\n")
    request = instance.requests[0]

    with record_projections() as log:
        interests, hits = score_candidates(ctr.address, request.user_id, request.candidates)
    print("projection-kernel calls during the request:", log)

    reference = sdim_attention(request.candidates[0], instance.users[request.user_id], family)
    drift = np.abs(interests[0] - reference.interest).max()
    print(f"served vs in-process interest, l-inf: {drift:.2e}")
    print(f"hit rounds per candidate: min {hits.min()}, max {hits.max()} of {family.rounds}")

    # Second identical request: the encoder serves its cache.
    score_candidates(ctr.address, request.user_id, request.candidates)
    print(f"encoder cache: {bse.stats['cache_hits']} hit(s), {bse.stats['cache_misses']} miss(es)")

    # Replacing the sequence bumps its version and invalidates the cache.
    store.replace(request.user_id, instance.users[2])
    fresh = deserialize_bucket_table(request_table(bse.address, request.user_id))
    print(f"after replacement: sequence_version={fresh.sequence_version}, "
          f"cache misses={bse.stats['cache_misses']}")

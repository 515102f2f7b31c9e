"""Hash-sampling attention for long user behavior sequences.

The library approximates softmax target attention by SimHash signature
collisions: items sharing a signature with the candidate are summed,
normalized, and averaged across hash rounds. Alongside the estimator live
the exact-attention oracle, its closed-form expectation, retrieval
baselines, a two-server serving testbed with a binary wire format, and the
statistical machinery that verifies the collision law, convergence,
entropy behavior, and complexity separation at desk scale.
"""

from .analysis import (
    CurveTable,
    attention_entropy,
    emit_attention_curves,
    empirical_collision_curve,
    entropy_vs_tau,
)
from .attention import (
    AttentionResult,
    BehaviorSequence,
    collision_prob,
    eta_topk,
    expected_attention,
    mean_pooling,
    sdim_attention,
    sdim_attention_tau0,
    sim_hard,
    target_attention,
)
from .data import (
    BehaviorEvent,
    BehaviorLog,
    BehaviorType,
    CandidateBatch,
    InstanceConfig,
    MalformedLogError,
    SyntheticInstance,
    embed_item,
    generate_instance,
    load_behavior_log,
    sequence_from_events,
)
from .hashing import (
    HashFamily,
    hamming_distance,
    hash_code_matrix,
    hash_codes,
    record_projections,
    sample_hash_family,
    signature_matrix,
    signatures,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AttentionResult",
    "BehaviorEvent",
    "BehaviorLog",
    "BehaviorSequence",
    "BehaviorType",
    "CandidateBatch",
    "CurveTable",
    "HashFamily",
    "InstanceConfig",
    "MalformedLogError",
    "SyntheticInstance",
    "attention_entropy",
    "collision_prob",
    "embed_item",
    "emit_attention_curves",
    "empirical_collision_curve",
    "entropy_vs_tau",
    "eta_topk",
    "expected_attention",
    "generate_instance",
    "hamming_distance",
    "hash_code_matrix",
    "hash_codes",
    "load_behavior_log",
    "mean_pooling",
    "record_projections",
    "sample_hash_family",
    "sdim_attention",
    "sdim_attention_tau0",
    "sequence_from_events",
    "signature_matrix",
    "signatures",
    "sim_hard",
    "target_attention",
]

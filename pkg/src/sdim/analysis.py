"""Statistical verification helpers: Monte-Carlo collision rates, attention
entropy and its behavior in the signature width, and the aligned weight
curves used to compare hash-sampling weights against the softmax kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attention import BehaviorSequence, collision_prob, expected_attention

__all__ = [
    "CurveTable",
    "attention_entropy",
    "entropy_vs_tau",
    "empirical_collision_curve",
    "emit_attention_curves",
]

_MASK64 = (1 << 64) - 1


def attention_entropy(weights: np.ndarray) -> float:
    """Shannon entropy ``-sum(w ln w)`` of an attention distribution,
    with ``0 ln 0 := 0``. Natural log; monotonicity claims are base-invariant.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty 1-D array")
    if not np.isfinite(w).all() or (w < 0).any():
        raise ValueError("weights must be finite and non-negative")
    total = w.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"weights must sum to 1 within 1e-6, got {total!r}")
    positive = w[w > 0]
    return float(-(positive * np.log(positive)).sum())


def entropy_vs_tau(
    q: np.ndarray,
    sequence: BehaviorSequence,
    taus,
) -> list[tuple[float, float]]:
    """Entropy of the closed-form attention weights at each signature width.

    ``taus`` must be positive and strictly increasing; real values are fine
    because the closed form is defined for any positive exponent. The output
    entropies are non-increasing, and strictly decreasing unless all
    candidate-item cosines coincide.
    """
    if sequence.L < 2:
        raise ValueError("entropy analysis needs at least two items")
    taus = [float(t) for t in taus]
    if not taus:
        raise ValueError("taus must be nonempty")
    if any(t <= 0 for t in taus):
        raise ValueError("taus must be positive")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("taus must be strictly increasing")
    out = []
    for tau in taus:
        result = expected_attention(q, sequence, tau, return_weights=True)
        if result.weights is None:
            raise ValueError(f"collision mass vanished at tau={tau}")
        out.append((tau, attention_entropy(result.weights)))
    return out


def empirical_collision_curve(
    cos_grid,
    tau: int,
    trials: int,
    seed: int,
) -> list[tuple[float, float, float]]:
    """Measured vs. closed-form round-collision rate along a cosine grid.

    For each grid cosine, a unit-vector pair at that angle is built in two
    dimensions (the collision law depends only on the angle) and ``trials``
    independent tau-wide signature rounds are drawn. Returns
    ``(cos, empirical_rate, expected_rate)`` per grid point.
    """
    if int(tau) != tau or tau < 1:
        raise ValueError(f"tau must be a positive integer, got {tau}")
    tau = int(tau)
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    rows = []
    for index, cos in enumerate(cos_grid):
        c = float(np.clip(cos, -1.0, 1.0))
        x2 = np.array([c, math.sqrt(max(0.0, 1.0 - c * c))])
        key = np.array([int(seed) & _MASK64, index], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        directions = rng.standard_normal((trials, tau, 2))
        # Same tie rule as hash_codes: dot >= 0 maps to bit 1.
        bits_1 = directions[..., 0] >= 0.0
        bits_2 = directions @ x2 >= 0.0
        collided = (bits_1 == bits_2).all(axis=1)
        rows.append((c, float(collided.mean()), float(collision_prob(c, tau))))
    return rows


@dataclass(frozen=True)
class CurveTable:
    """Hash-sampling and softmax attention weights on a shared cosine axis."""

    x: np.ndarray
    sdim_weight: np.ndarray
    ta_weight: np.ndarray

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        sdim = np.ascontiguousarray(self.sdim_weight, dtype=np.float64)
        ta = np.ascontiguousarray(self.ta_weight, dtype=np.float64)
        if not (x.ndim == 1 and x.shape == sdim.shape == ta.shape):
            raise ValueError("x, sdim_weight, ta_weight must be 1-D arrays of equal length")
        if x.size < 1 or (np.diff(x) <= 0).any():
            raise ValueError("x must be strictly increasing")
        for name, col in (("sdim_weight", sdim), ("ta_weight", ta)):
            if not np.isfinite(col).all() or (col < 0).any():
                raise ValueError(f"{name} must be finite and non-negative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "sdim_weight", sdim)
        object.__setattr__(self, "ta_weight", ta)

    def __len__(self) -> int:
        return self.x.size

    def write_csv(self, target) -> None:
        """Write ``x,sdim_weight,ta_weight`` rows: header line, 9 significant
        digits, LF line endings. ``target`` is a path or a text file object.
        """
        if hasattr(target, "write"):
            _write_csv_rows(target, self)
        else:
            with open(target, "w", encoding="utf-8", newline="") as handle:
                _write_csv_rows(handle, self)


def _write_csv_rows(handle, table: CurveTable) -> None:
    handle.write("x,sdim_weight,ta_weight\n")
    for x, a, b in zip(table.x, table.sdim_weight, table.ta_weight):
        handle.write(f"{x:.9g},{a:.9g},{b:.9g}\n")


def emit_attention_curves(tau: float, scale: float, n_points: int) -> CurveTable:
    """Tabulate both weight kernels over cosines uniformly spaced on [-1, 1].

    The softmax column is shifted so its input lives on the same axis:
    ``exp((x - 1) / scale)``, whose maximum coincides with the hash-sampling
    column at x = 1 (normalization makes the shift immaterial).
    """
    if n_points < 2:
        raise ValueError(f"n_points must be at least 2, got {n_points}")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    x = np.linspace(-1.0, 1.0, n_points)
    return CurveTable(
        x=x,
        sdim_weight=collision_prob(x, tau),
        ta_weight=np.exp((x - 1.0) / scale),
    )

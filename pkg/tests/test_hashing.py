"""Projection families, sign codes, and signature packing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdim import (
    HashFamily,
    collision_prob,
    hamming_distance,
    hash_code_matrix,
    hash_codes,
    sample_hash_family,
    signature_matrix,
    signatures,
)


def family_of(projections, tau=1, seed=0) -> HashFamily:
    projections = np.asarray(projections, dtype=float)
    return HashFamily(
        projections=projections,
        m=projections.shape[0],
        tau=tau,
        d=projections.shape[1],
        seed=seed,
    )


class TestSampleHashFamily:
    def test_production_shape(self):
        """m=48, tau=3 gives 16 rounds of 3-bit signatures."""
        family = sample_hash_family(seed=7, m=48, tau=3, d=128)
        assert family.rounds == 16
        assert family.projections.shape == (48, 128)

    def test_single_round(self):
        assert sample_hash_family(seed=7, m=4, tau=4, d=2).rounds == 1

    def test_indivisible_m_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            sample_hash_family(seed=7, m=5, tau=3, d=2)

    @pytest.mark.parametrize("tau", [0, 17, -1])
    def test_tau_range(self, tau):
        with pytest.raises(ValueError, match="tau"):
            sample_hash_family(seed=7, m=16 * max(tau, 1), tau=tau, d=2)

    def test_deterministic(self):
        a = sample_hash_family(seed=123, m=24, tau=3, d=16)
        b = sample_hash_family(seed=123, m=24, tau=3, d=16)
        assert np.array_equal(a.projections, b.projections)

    def test_rows_keyed_independently(self):
        """A larger family extends a smaller one row-for-row, which is what
        lets two servers derive the same family from the seed alone."""
        small = sample_hash_family(seed=9, m=24, tau=3, d=8)
        large = sample_hash_family(seed=9, m=48, tau=3, d=8)
        assert np.array_equal(small.projections, large.projections[:24])

    def test_seed_changes_family(self):
        a = sample_hash_family(seed=1, m=12, tau=3, d=8)
        b = sample_hash_family(seed=2, m=12, tau=3, d=8)
        assert not np.array_equal(a.projections, b.projections)

    def test_rows_are_standard_normal(self, rng):
        family = sample_hash_family(seed=5, m=64, tau=1, d=512)
        flat = family.projections.ravel()
        assert abs(flat.mean()) < 0.02
        assert abs(flat.std() - 1.0) < 0.02


class TestHashCodes:
    def test_positive_dot_is_one(self):
        family = family_of([[0.5, -2.0]])
        assert hash_codes(np.array([1.0, 0.0]), family).tolist() == [1]

    def test_negative_dot_is_zero(self):
        family = family_of([[-0.5, -2.0]])
        assert hash_codes(np.array([1.0, 0.0]), family).tolist() == [0]

    def test_zero_dot_tie_maps_to_one(self):
        family = family_of([[1.0, 0.0]])
        assert hash_codes(np.array([0.0, 1.0]), family).tolist() == [1]

    def test_dimension_mismatch(self):
        family = family_of([[1.0, 0.0]])
        with pytest.raises(ValueError, match="dimension"):
            hash_codes(np.array([1.0, 0.0, 0.0]), family)

    def test_matrix_matches_per_vector(self, rng):
        family = sample_hash_family(seed=3, m=12, tau=3, d=6)
        vectors = rng.standard_normal((10, 6))
        batch = hash_code_matrix(vectors, family)
        for row in range(10):
            assert np.array_equal(batch[row], hash_codes(vectors[row], family))

    def test_sign_symmetry(self, rng):
        """Codes of -x are the bitwise complement of codes of x (no exact
        zero dots occur with continuous draws)."""
        family = sample_hash_family(seed=11, m=32, tau=1, d=9)
        for _ in range(25):
            x = rng.standard_normal(9)
            assert np.array_equal(hash_codes(-x, family), 1 - hash_codes(x, family))


class TestSignatures:
    def test_packs_msb_first(self):
        assert signatures(np.array([1, 1, 0, 1]), tau=2).tolist() == [3, 1]

    def test_four_bit_round(self):
        assert signatures(np.array([1, 0, 1, 0]), tau=4).tolist() == [10]

    def test_tau_equal_m_single_round(self, rng):
        bits = (rng.random(16) < 0.5).astype(np.uint8)
        assert signatures(bits, tau=16).shape == (1,)

    def test_indivisible_rejected(self):
        with pytest.raises(ValueError, match="multiple of tau"):
            signatures(np.array([1, 0, 1]), tau=2)

    def test_batch_shape(self, rng):
        bits = (rng.random((5, 12)) < 0.5).astype(np.uint8)
        assert signatures(bits, tau=3).shape == (5, 4)

    @given(
        bits=st.lists(st.integers(0, 1), min_size=1, max_size=64),
        tau=st.integers(1, 16),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_binary_string_oracle(self, bits, tau):
        """Each round code equals the round's bits read as a binary numeral."""
        if len(bits) % tau:
            bits = bits + [0] * (tau - len(bits) % tau)
        codes = signatures(np.array(bits), tau)
        for i, code in enumerate(codes):
            expected = int("".join(str(b) for b in bits[i * tau : (i + 1) * tau]), 2)
            assert int(code) == expected

    def test_signature_matrix_composes(self, rng):
        family = sample_hash_family(seed=4, m=12, tau=4, d=5)
        vectors = rng.standard_normal((7, 5))
        expected = signatures(hash_code_matrix(vectors, family), 4)
        assert np.array_equal(signature_matrix(vectors, family), expected)


class TestHammingDistance:
    def test_counts_differing_bits(self):
        assert hamming_distance(np.array([1, 1, 0, 1]), np.array([1, 0, 0, 0])) == 2

    def test_broadcasts(self):
        codes = np.array([[1, 1], [0, 0], [1, 0]])
        assert hamming_distance(codes, np.array([1, 0])).tolist() == [1, 1, 0]


class TestCollisionStatistics:
    """Monte-Carlo convergence of measured collision rates to the law."""

    def test_single_hash_rate(self):
        """Over independent families, the single-bit collision rate between
        two fixed unit vectors approaches 1 - angle/pi."""
        cos = 0.5
        pair = np.array([[1.0, 0.0], [cos, np.sqrt(1 - cos**2)]])
        n_families = 4000
        hits = 0
        for s in range(n_families):
            family = sample_hash_family(seed=50_000 + s, m=1, tau=1, d=2)
            codes = hash_code_matrix(pair, family)
            hits += int(codes[0, 0] == codes[1, 0])
        expected = float(collision_prob(cos, 1))
        sigma = np.sqrt(expected * (1 - expected) / n_families)
        assert abs(hits / n_families - expected) <= 4 * sigma

    def test_round_collision_rate(self):
        """tau-bit rounds collide at rate (1 - angle/pi)^tau; measured on the
        production signature path with one wide family."""
        cos, tau, rounds = 0.3, 3, 20_000
        pair = np.array([[1.0, 0.0], [cos, np.sqrt(1 - cos**2)]])
        family = sample_hash_family(seed=77, m=rounds * tau, tau=tau, d=2)
        sigs = signature_matrix(pair, family)
        rate = float((sigs[0] == sigs[1]).mean())
        expected = float(collision_prob(cos, tau))
        sigma = np.sqrt(expected * (1 - expected) / rounds)
        assert abs(rate - expected) <= 4 * sigma

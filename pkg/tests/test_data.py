"""Log loading, embedding synthesis, and instance generation."""

import numpy as np
import pytest

from sdim import (
    InstanceConfig,
    MalformedLogError,
    embed_item,
    generate_instance,
    load_behavior_log,
    sequence_from_events,
)


def write_log(path, rows, header=None):
    lines = ([header] if header else []) + rows
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestLoadBehaviorLog:
    def test_truncates_to_most_recent(self, tmp_path):
        path = write_log(
            tmp_path / "log.csv",
            ["1,10,5,pv,100", "1,11,5,buy,300", "1,12,5,pv,200"],
        )
        log = load_behavior_log(path, max_len=2)
        items = [event.item_id for event in log.users[1]]
        assert items == [11, 12]  # most recent first

    def test_empty_file(self, tmp_path):
        path = tmp_path / "log.csv"
        path.write_text("", encoding="utf-8")
        log = load_behavior_log(path, max_len=8)
        assert log.users == {} and log.total_rows == 0

    def test_header_autodetected(self, tmp_path):
        path = write_log(
            tmp_path / "log.csv",
            ["1,10,5,pv,100"],
            header="user_id,item_id,category_id,behavior_type,timestamp",
        )
        log = load_behavior_log(path, max_len=4)
        assert log.total_rows == 1
        assert [event.item_id for event in log.users[1]] == [10]

    def test_stable_tie_order(self, tmp_path):
        """Equal timestamps keep input order in the most-recent-first list."""
        path = write_log(
            tmp_path / "log.csv",
            ["7,1,0,pv,50", "7,2,0,pv,50", "7,3,0,pv,50"],
        )
        log = load_behavior_log(path, max_len=10)
        assert [event.item_id for event in log.users[7]] == [1, 2, 3]

    def test_few_malformed_rows_skipped(self, tmp_path):
        rows = [f"1,{i},0,pv,{i}" for i in range(200)] + ["not,a,valid,row"]
        log = load_behavior_log(write_log(tmp_path / "log.csv", rows), max_len=500)
        assert log.malformed_rows == 1
        assert len(log.users[1]) == 200

    def test_too_many_malformed_aborts(self, tmp_path):
        rows = [f"1,{i},0,pv,{i}" for i in range(50)] + ["x,y", "1,2,3,unknown,5"]
        with pytest.raises(MalformedLogError, match="malformed"):
            load_behavior_log(write_log(tmp_path / "log.csv", rows), max_len=10)

    def test_negative_timestamp_is_malformed(self, tmp_path):
        path = write_log(tmp_path / "log.csv", ["1,1,1,pv,-5"] + [f"2,{i},0,buy,{i}" for i in range(5)])
        with pytest.raises(MalformedLogError):
            load_behavior_log(path, max_len=4)

    def test_numeric_behavior_type_accepted(self, tmp_path):
        log = load_behavior_log(write_log(tmp_path / "log.csv", ["1,1,1,2,10"]), max_len=4)
        assert log.users[1][0].behavior_type == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_behavior_log(tmp_path / "absent.csv", max_len=4)


class TestEmbedItem:
    def test_deterministic(self):
        a = embed_item(12, 3, d=16, seed=9)
        b = embed_item(12, 3, d=16, seed=9)
        assert np.array_equal(a, b)

    def test_unit_norm(self):
        for item in range(20):
            v = embed_item(item, item % 4, d=10, seed=1)
            assert abs(np.linalg.norm(v) - 1.0) < 1e-12

    def test_full_blend_collapses_category(self):
        a = embed_item(1, 7, d=12, seed=2, blend=1.0)
        b = embed_item(999, 7, d=12, seed=2, blend=1.0)
        assert np.array_equal(a, b)

    def test_within_category_closer_than_cross(self):
        """Sampled pairs: same-category cosine exceeds cross-category cosine."""
        per_category = 50
        categories = 4
        vectors = np.array(
            [
                embed_item(item, category, d=24, seed=3, blend=0.7)
                for category in range(categories)
                for item in range(category * 1000, category * 1000 + per_category)
            ]
        )
        labels = np.repeat(np.arange(categories), per_category)
        cosines = vectors @ vectors.T
        same = labels[:, None] == labels[None, :]
        off_diagonal = ~np.eye(len(labels), dtype=bool)
        within = cosines[same & off_diagonal].mean()
        cross = cosines[~same].mean()
        assert within > cross + 0.1

    def test_seed_changes_embedding(self):
        assert not np.array_equal(embed_item(1, 1, 8, seed=1), embed_item(1, 1, 8, seed=2))

    def test_sequence_from_events(self, tmp_path):
        from sdim import BehaviorEvent

        events = [
            BehaviorEvent(1, 10, 2, 0, 100),
            BehaviorEvent(1, 11, 3, 0, 90),
        ]
        sequence = sequence_from_events(events, d=8, seed=4)
        assert sequence.L == 2
        assert sequence.categories.tolist() == [2, 3]
        np.testing.assert_array_equal(sequence.items[0], embed_item(10, 2, 8, 4))


class TestGenerateInstance:
    def test_deterministic(self):
        config = InstanceConfig(n_users=3, L=16, B=4, d=8, seed=11)
        a = generate_instance(config)
        b = generate_instance(config)
        for user_id in a.users:
            assert np.array_equal(a.users[user_id].items, b.users[user_id].items)
        for ra, rb in zip(a.requests, b.requests):
            assert np.array_equal(ra.candidates, rb.candidates)

    def test_shapes_and_exact_length(self):
        config = InstanceConfig(n_users=2, L=256, B=8, d=16, seed=1)
        instance = generate_instance(config)
        assert len(instance.users) == 2
        for sequence in instance.users.values():
            assert sequence.L == 256
        for request in instance.requests:
            assert request.candidates.shape == (8, 16)
            assert request.categories.shape == (8,)

    def test_items_unit_norm(self):
        instance = generate_instance(InstanceConfig(n_users=1, L=64, B=4, d=12, seed=2))
        norms = np.linalg.norm(instance.users[1].items, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-9)

    def test_intra_cluster_cosine_exact(self):
        """Items sit at exactly the configured cosine to their cluster anchor,
        so same-cluster pairs are systematically closer."""
        config = InstanceConfig(
            n_users=1, L=128, B=4, d=16, cluster_count=4, intra_cluster_cos=0.8, seed=3
        )
        instance = generate_instance(config)
        sequence = instance.users[1]
        same = sequence.categories[:, None] == sequence.categories[None, :]
        cosines = sequence.items @ sequence.items.T
        off_diagonal = ~np.eye(sequence.L, dtype=bool)
        assert cosines[same & off_diagonal].mean() > cosines[~same].mean() + 0.2

    def test_single_item_single_candidate(self):
        instance = generate_instance(InstanceConfig(n_users=1, L=1, B=1, d=4, seed=5))
        assert instance.users[1].L == 1
        assert instance.requests[0].candidates.shape == (1, 4)

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            InstanceConfig(n_users=0, L=4, B=2, d=8)
        with pytest.raises(ValueError):
            InstanceConfig(n_users=1, L=4, B=2, d=8, intra_cluster_cos=1.0)

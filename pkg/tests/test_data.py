import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bherd.data import (
    IMAGES_MAGIC,
    LABELS_MAGIC,
    Dataset,
    load_mnist_idx,
    make_batches,
    partition,
    save_mnist_idx,
    synth_dataset,
)
from bherd.errors import ConfigError, FormatError


def write_idx_pair(tmp_path, pixels, labels, shape=(2, 2)):
    n = len(labels)
    images_path = tmp_path / "images-idx3"
    labels_path = tmp_path / "labels-idx1"
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">iiii", IMAGES_MAGIC, n, *shape))
        fh.write(bytes(pixels))
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">ii", LABELS_MAGIC, n))
        fh.write(bytes(labels))
    return images_path, labels_path


class TestIdx:
    def test_load_scales_and_orders(self, tmp_path):
        pixels = [0, 255, 128, 64, 10, 20, 30, 40]
        ip, lp = write_idx_pair(tmp_path, pixels, [3, 7])
        ds = load_mnist_idx(ip, lp)
        assert len(ds) == 2 and ds.feature_dim == 4
        assert ds.features[0, 1] == 1.0 and ds.features[0, 0] == 0.0
        assert list(ds.labels) == [3, 7]

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        pixels = rng.integers(0, 256, 3 * 4).tolist()
        ip, lp = write_idx_pair(tmp_path, pixels, [1, 2, 3])
        ds = load_mnist_idx(ip, lp)
        ip2, lp2 = tmp_path / "im2", tmp_path / "lb2"
        save_mnist_idx(ds, ip2, lp2, image_shape=(2, 2))
        assert ip.read_bytes() == ip2.read_bytes()
        assert lp.read_bytes() == lp2.read_bytes()

    def test_bad_images_magic(self, tmp_path):
        ip, lp = write_idx_pair(tmp_path, [0, 0, 0, 0], [1])
        bad = tmp_path / "bad"
        bad.write_bytes(struct.pack(">iiii", 0x00000804, 1, 2, 2) + bytes(4))
        with pytest.raises(FormatError, match="magic"):
            load_mnist_idx(bad, lp)

    def test_truncated_payload(self, tmp_path):
        ip, lp = write_idx_pair(tmp_path, [0, 0, 0, 0], [1])
        truncated = tmp_path / "trunc"
        truncated.write_bytes(ip.read_bytes()[:-2])
        with pytest.raises(FormatError, match="payload"):
            load_mnist_idx(truncated, lp)

    def test_image_label_count_mismatch(self, tmp_path):
        ip, _ = write_idx_pair(tmp_path, [0, 0, 0, 0], [1])
        lp = tmp_path / "two-labels"
        lp.write_bytes(struct.pack(">ii", LABELS_MAGIC, 2) + bytes([1, 2]))
        with pytest.raises(FormatError, match="count mismatch"):
            load_mnist_idx(ip, lp)


class TestSynth:
    def test_smallest_instance(self):
        ds = synth_dataset(2, 1, 2, 0.5, seed=0)
        assert len(ds) == 2 and sorted(ds.labels) == [0, 1]

    def test_deterministic(self):
        a = synth_dataset(4, 10, 3, 0.5, seed=9)
        b = synth_dataset(4, 10, 3, 0.5, seed=9)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ConfigError):
            synth_dataset(1, 10, 3, 0.5, seed=0)
        with pytest.raises(ConfigError):
            synth_dataset(2, 0, 3, 0.5, seed=0)
        with pytest.raises(ConfigError):
            synth_dataset(2, 10, 3, 0.0, seed=0)

    def test_small_spread_is_linearly_separable(self):
        # Oracle: an independent library classifier must fit it near-perfectly.
        from sklearn.svm import LinearSVC

        ds = synth_dataset(10, 1000, 20, 0.1, seed=3)
        y = np.where(ds.labels % 2 == 0, 1, -1)
        clf = LinearSVC(dual="auto").fit(ds.features, y)
        assert clf.score(ds.features, y) > 0.95


def labeled_dataset(counts, seed=0):
    """Dataset with the given per-class sample counts, shuffled."""
    labels = np.repeat(np.arange(len(counts)), counts)
    rng = np.random.default_rng(seed)
    labels = rng.permutation(labels)
    features = rng.standard_normal((len(labels), 3))
    return Dataset(features=features, labels=labels.astype(np.int64), n_classes=len(counts))


class TestPartition:
    @pytest.mark.parametrize("case", [1, 2, 3])
    def test_single_client_gets_everything(self, case):
        ds = labeled_dataset([10] * 10)
        shards = partition(ds, 1, case, seed=0)
        assert len(shards) == 1 and len(shards[0]) == len(ds)

    @pytest.mark.parametrize("case", [1, 2, 3])
    @pytest.mark.parametrize("n_clients", [2, 3, 5, 7])
    def test_disjoint_cover(self, case, n_clients):
        ds = labeled_dataset([31, 40, 25, 33, 28, 36, 30, 29, 35, 27])
        shards = partition(ds, n_clients, case, seed=1)
        merged = np.concatenate([s.indices for s in shards])
        assert len(merged) == len(ds)
        assert len(np.unique(merged)) == len(ds)

    def test_case2_two_labels_per_client(self):
        # Oracle: count labels per shard of the sorted split.
        ds = labeled_dataset([120, 95, 110, 100, 105, 98, 112, 103, 99, 108])
        shards = partition(ds, 5, 2, seed=0)
        label_sets = [sorted(set(ds.labels[s.indices].tolist())) for s in shards]
        assert label_sets == [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]]

    def test_case2_minimal_label_diversity(self):
        ds = labeled_dataset([50] * 10)
        for n in (2, 3, 4, 5, 10):
            shards = partition(ds, n, 2, seed=0)
            max_labels = max(len(set(ds.labels[s.indices].tolist())) for s in shards)
            assert max_labels <= -(-ds.n_classes // n)  # ceil(C / N)

    def test_case2_more_clients_than_labels(self):
        ds = labeled_dataset([40] * 4)
        shards = partition(ds, 8, 2, seed=0)
        assert all(len(set(ds.labels[s.indices].tolist())) == 1 for s in shards)

    def test_case1_label_histogram_near_uniform(self):
        # Chi-square goodness-of-fit oracle per shard.
        from scipy.stats import chisquare

        ds = labeled_dataset([600] * 10, seed=2)
        shards = partition(ds, 5, 1, seed=7)
        for shard in shards:
            m = len(shard)
            assert m == 1200
            counts = np.bincount(ds.labels[shard.indices], minlength=10)
            assert chisquare(counts).pvalue > 1e-3

    def test_case3_split_structure(self):
        ds = labeled_dataset([60] * 10)
        shards = partition(ds, 5, 3, seed=0)
        # ceil(5/2) = 3 IID clients over labels 0-4, 2 label-skew clients over 5-9.
        for shard in shards[:3]:
            assert set(ds.labels[shard.indices].tolist()) == {0, 1, 2, 3, 4}
        skew_sets = [sorted(set(ds.labels[s.indices].tolist())) for s in shards[3:]]
        assert skew_sets == [[5, 6, 7], [8, 9]]

    def test_too_many_clients(self):
        ds = labeled_dataset([2, 2])
        with pytest.raises(ConfigError):
            partition(ds, 5, 1, seed=0)


class TestMakeBatches:
    @pytest.fixture
    def shard(self):
        ds = labeled_dataset([600] * 10, seed=4)
        return partition(ds, 5, 1, seed=0)[2]  # 1200 samples

    def test_full_epoch_batch_count(self, shard):
        batches = make_batches(shard, 100, 1.0, rr=False, seed=0, round_index=0)
        assert len(batches) == 12
        assert all(len(b) == 100 for b in batches)

    def test_fractional_epoch(self, shard):
        assert len(make_batches(shard, 100, 0.5, rr=False, seed=0, round_index=0)) == 6

    def test_multi_epoch_repeats_permutation(self, shard):
        batches = make_batches(shard, 100, 2.0, rr=False, seed=0, round_index=0)
        assert len(batches) == 24
        assert np.array_equal(batches[0], batches[12])

    def test_no_reshuffle_is_round_invariant(self, shard):
        a = make_batches(shard, 100, 1.0, rr=False, seed=0, round_index=3)
        b = make_batches(shard, 100, 1.0, rr=False, seed=0, round_index=7)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_reshuffle_changes_order_not_contents(self, shard):
        fixed = make_batches(shard, 100, 1.0, rr=False, seed=0, round_index=5)
        shuffled = make_batches(shard, 100, 1.0, rr=True, seed=0, round_index=5)
        assert not all(np.array_equal(x, y) for x, y in zip(fixed, shuffled))
        assert sorted(np.concatenate(fixed)) == sorted(np.concatenate(shuffled))

    def test_zero_batches_is_config_error(self, shard):
        with pytest.raises(ConfigError, match="batch size"):
            make_batches(shard, 100000, 1.0, rr=False, seed=0, round_index=0)


@given(
    n_clients=st.integers(1, 6),
    case=st.sampled_from([1, 2, 3]),
    seed=st.integers(0, 1000),
)
@settings(max_examples=40, deadline=None)
def test_partition_property_disjoint_cover(n_clients, case, seed):
    ds = labeled_dataset([12, 15, 9, 14, 11, 13], seed=seed % 7)
    shards = partition(ds, n_clients, case, seed=seed)
    merged = np.concatenate([s.indices for s in shards])
    assert sorted(merged) == list(range(len(ds)))

import warnings
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedhealth.data import (
    CHANNELS,
    ChannelStandardizer,
    HarDataset,
    compute_stats,
    load_har,
    make_synthetic_har,
    merge,
    normalize,
    partition_by_subject,
    train_eval_split,
    write_uci_layout,
)
from fedhealth.exceptions import IntegrityError, InvalidInputError, LoadError, StratificationError


def multiset(ds):
    return Counter((int(s), int(y), ds.X[i].tobytes()) for i, (s, y) in enumerate(zip(ds.subjects, ds.y)))


@pytest.fixture(scope="module")
def har_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("har")
    ds = make_synthetic_har(total_windows=360, seed=11)
    write_uci_layout(ds, root)
    return root, ds


class TestLoad:
    def test_channel_order(self):
        assert CHANNELS == (
            "body_acc_x", "body_acc_y", "body_acc_z",
            "body_gyro_x", "body_gyro_y", "body_gyro_z",
            "total_acc_x", "total_acc_y", "total_acc_z",
        )

    def test_roundtrip_through_files(self, har_root):
        root, ds = har_root
        loaded = load_har(root)
        assert len(loaded) == len(ds)
        assert loaded.X.shape[1:] == (9, 128)
        key = lambda d: np.lexsort(np.round(d.X.reshape(len(d), -1), 6).T[::-1])  # noqa: E731
        a, b = key(loaded), key(ds)
        np.testing.assert_allclose(loaded.X[a], ds.X[b], rtol=0, atol=1e-6)
        np.testing.assert_array_equal(loaded.y[a], ds.y[b])
        np.testing.assert_array_equal(loaded.subjects[a], ds.subjects[b])
        assert sorted(loaded.y.tolist()) == sorted(ds.y.tolist())
        assert np.all(np.isfinite(loaded.X))

    def test_load_is_idempotent(self, har_root):
        root, _ = har_root
        a, b = load_har(root), load_har(root)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.subjects, b.subjects)

    def test_train_part_precedes_test_part(self, har_root):
        root, _ = har_root
        loaded = load_har(root)
        n_train = len(np.loadtxt(root / "train" / "y_train.txt"))
        assert set(loaded.subjects[:n_train]).isdisjoint({2, 4, 9, 10, 12, 13, 18, 20, 24})

    def test_missing_file_named(self, har_root, tmp_path):
        root, ds = har_root
        write_uci_layout(ds, tmp_path)
        victim = tmp_path / "test" / "Inertial Signals" / "body_gyro_y_test.txt"
        victim.unlink()
        with pytest.raises(LoadError, match="body_gyro_y_test.txt"):
            load_har(tmp_path)

    def test_truncated_labels(self, har_root, tmp_path):
        _, ds = har_root
        write_uci_layout(ds, tmp_path)
        path = tmp_path / "train" / "y_train.txt"
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(IntegrityError):
            load_har(tmp_path)

    def test_wrong_column_count(self, har_root, tmp_path):
        _, ds = har_root
        write_uci_layout(ds, tmp_path)
        path = tmp_path / "train" / "Inertial Signals" / "total_acc_x_train.txt"
        lines = path.read_text().splitlines()
        lines[0] = " ".join(lines[0].split()[:-1])
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(IntegrityError):
            load_har(tmp_path)

    def test_out_of_range_label(self, har_root, tmp_path):
        _, ds = har_root
        write_uci_layout(ds, tmp_path)
        path = tmp_path / "test" / "y_test.txt"
        lines = path.read_text().splitlines()
        lines[0] = "7"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(IntegrityError):
            load_har(tmp_path)


class TestPartition:
    def test_clients_vs_rest(self, small_har):
        clients, rest = partition_by_subject(small_har, range(26, 31))
        assert set(clients.subject_ids) == set(range(26, 31))
        assert set(rest.subject_ids).isdisjoint(range(26, 31))
        assert len(clients) + len(rest) == len(small_har)

    def test_all_subjects_flags_empty_complement(self, small_har):
        with pytest.warns(UserWarning):
            _, rest = partition_by_subject(small_har, range(1, 31))
        assert len(rest) == 0 and "empty_complement" in rest.flags

    def test_remerge_conserves_multiset(self, small_har):
        a, b = partition_by_subject(small_har, {1})
        assert multiset(merge(a, b)) == multiset(small_har)

    @pytest.mark.parametrize("ids", [set(), {0}, {31}])
    def test_invalid_ids(self, small_har, ids):
        with pytest.raises(InvalidInputError):
            partition_by_subject(small_har, ids)


class TestSplit:
    def test_balanced_seventy_thirty(self):
        ds = HarDataset(np.zeros((100, 9, 128)), np.repeat([1, 2], 50), np.ones(100))
        a, b = train_eval_split(ds, 0.7, seed=0)
        assert (len(a), len(b)) == (70, 30)
        assert (a.y == 1).sum() == 35

    def test_deterministic(self, small_har):
        a1, _ = train_eval_split(small_har, 0.7, seed=5)
        a2, _ = train_eval_split(small_har, 0.7, seed=5)
        np.testing.assert_array_equal(a1.X, a2.X)

    def test_too_few_per_class(self):
        ds = HarDataset(np.zeros((3, 9, 128)), [1, 1, 2], [1, 1, 1])
        with pytest.raises(StratificationError):
            train_eval_split(ds, 0.7)

    @pytest.mark.parametrize("ratio", [0.0, 1.0, -0.2])
    def test_bad_ratio(self, small_har, ratio):
        with pytest.raises(InvalidInputError):
            train_eval_split(small_har, ratio)

    @given(st.floats(0.05, 0.95), st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_split_is_a_partition(self, ratio, seed):
        ds = make_synthetic_har(total_windows=120, subjects=[3, 7], seed=1)
        a, b = train_eval_split(ds, ratio, seed)
        assert multiset(merge(a, b)) == multiset(ds)
        for c in np.unique(ds.y):
            n_c = (ds.y == c).sum()
            assert abs((a.y == c).sum() - ratio * n_c) <= 1


class TestNormalize:
    def test_zero_mean_unit_std(self, small_har):
        out = normalize(small_har)
        stats = compute_stats(out.X)
        assert np.max(np.abs(stats.mean)) < 1e-9
        assert np.max(np.abs(stats.std - 1)) < 1e-9
        assert out.stats is not None

    def test_uses_given_stats(self, small_har):
        cloud, client = partition_by_subject(small_har, range(1, 26))
        cloud_n = normalize(cloud)
        client_n = normalize(client, cloud_n.stats)
        assert client_n.stats is cloud_n.stats
        expected = (client.X - cloud_n.stats.mean[:, None]) / cloud_n.stats.std[:, None]
        np.testing.assert_allclose(client_n.X, expected, rtol=0, atol=1e-12)
        # its own statistics would differ
        assert not np.allclose(compute_stats(client.X).mean, cloud_n.stats.mean)

    def test_constant_channel_flagged(self, small_har):
        X = np.array(small_har.X)
        X[:, 4, :] = 2.5
        ds = HarDataset(X, small_har.y, small_har.subjects)
        with pytest.warns(UserWarning):
            out = normalize(ds)
        assert np.all(out.X[:, 4, :] == 0)
        assert "degenerate_channels" in out.flags and out.stats.degenerate == (4,)

    def test_already_normalized(self, small_har):
        with pytest.raises(InvalidInputError):
            normalize(normalize(small_har))

    def test_split_keeps_stats(self, small_har):
        n = normalize(small_har)
        a, b = train_eval_split(n, 0.7)
        assert a.stats is n.stats and b.stats is n.stats


class TestStandardizer:
    def test_matches_normalize(self, small_har):
        est = ChannelStandardizer().fit(small_har.X)
        np.testing.assert_allclose(est.transform(small_har.X), normalize(small_har).X)

    def test_inverse(self, small_har):
        est = ChannelStandardizer().fit(small_har.X)
        np.testing.assert_allclose(est.inverse_transform(est.transform(small_har.X)), small_har.X, atol=1e-12)

    def test_given_stats_not_refitted(self, small_har):
        stats = compute_stats(small_har.X[:50])
        est = ChannelStandardizer(stats=stats).fit(small_har.X)
        assert est.stats_ is stats

    def test_get_params(self):
        assert ChannelStandardizer().get_params() == {"stats": None}

    def test_no_warning_on_regular_data(self, small_har):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ChannelStandardizer().fit(small_har.X)

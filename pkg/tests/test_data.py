import json
import os

import numpy as np
import pytest

from tinyde.data import (Dataset, corrupt_gaussian, corrupt_permute_features,
                         dataset_manifest, destandardize_target, load_csv,
                         make_folds, standardize, synth_classification,
                         synth_regression, write_manifest)
from tinyde.errors import ConfigError, DataError
from tinyde.experiments import DATA_DIR_ENV, UCI_DATASETS, resolve_data_dir


class TestDataset:
    def test_target_promoted_to_2d(self):
        ds = Dataset(np.zeros((3, 2)), np.array([1.0, 2.0, 3.0]))
        assert ds.y.shape == (3, 1)
        assert ds.N == 3 and ds.Q == 2

    def test_row_count_mismatch(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 2)), np.zeros((4, 1)))

    def test_nan_rejected(self):
        with pytest.raises(DataError):
            Dataset(np.array([[np.nan, 1.0]]), np.zeros((1, 1)))


class TestLoadCsv:
    def test_last_column_target(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text("1.0,2.0,10.0\n3.0,4.0,20.0\n")
        ds = load_csv(path)
        assert np.array_equal(ds.X, [[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(ds.y, [[10.0], [20.0]])

    def test_explicit_target_column(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text("10.0,1.0,2.0\n20.0,3.0,4.0\n")
        ds = load_csv(path, target_cols=0)
        assert np.array_equal(ds.y, [[10.0], [20.0]])
        assert np.array_equal(ds.X, [[1.0, 2.0], [3.0, 4.0]])

    def test_header_skipped(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text("a,b\n1.0,2.0\n")
        ds = load_csv(path, header=True)
        assert ds.N == 1

    def test_space_delimited(self, tmp_path):
        path = tmp_path / "toy.txt"
        path.write_text("1.0  2.0   10.0\n3.0 4.0 20.0\n")
        ds = load_csv(path, delimiter=" ")
        assert ds.N == 2 and ds.Q == 2

    def test_ragged_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(DataError, match=":2:"):
            load_csv(path)

    def test_non_numeric_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0,oops\n")
        with pytest.raises(DataError, match=":2:"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "nope.csv")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataError):
            load_csv(path)


class TestFolds:
    def test_sizes_and_disjointness(self):
        ds = synth_regression(100, seed=0)
        folds = make_folds(ds, 5, seed=1)
        assert len(folds) == 5
        for train_idx, test_idx in folds:
            assert len(test_idx) == 10
            assert len(train_idx) == 90
            assert not set(train_idx) & set(test_idx)
            assert set(train_idx) | set(test_idx) == set(range(100))

    def test_seed_reproducible(self):
        ds = synth_regression(50, seed=0)
        a = make_folds(ds, 3, seed=7)
        b = make_folds(ds, 3, seed=7)
        for (ta, sa), (tb, sb) in zip(a, b):
            assert np.array_equal(ta, tb) and np.array_equal(sa, sb)

    def test_folds_differ(self):
        ds = synth_regression(50, seed=0)
        folds = make_folds(ds, 2, seed=7)
        assert not np.array_equal(folds[0][1], folds[1][1])

    def test_bad_count(self):
        with pytest.raises(ConfigError):
            make_folds(synth_regression(10, seed=0), 0, seed=0)


class TestStandardize:
    def test_train_moments(self):
        ds = synth_regression(200, seed=2)
        tr, te, params = standardize(ds, ds)
        assert np.allclose(tr.X.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(tr.X.std(axis=0), 1.0, atol=1e-12)
        assert np.allclose(tr.y.mean(), 0.0, atol=1e-12)

    def test_round_trip(self):
        ds = synth_regression(64, seed=3)
        tr, _, params = standardize(ds, ds)
        back = destandardize_target(tr.y, params)
        assert np.max(np.abs(back - ds.y)) <= 1e-12

    def test_constant_column_not_scaled(self):
        X = np.column_stack([np.ones(10), np.arange(10.0)])
        ds = Dataset(X, np.arange(10.0))
        tr, _, params = standardize(ds, ds)
        assert params.x_std[0] == 1.0
        assert np.allclose(tr.X[:, 0], 0.0)

    def test_test_split_uses_train_stats(self):
        tr_ds = synth_regression(100, seed=4)
        te_ds = synth_regression(30, seed=5)
        _, te, params = standardize(tr_ds, te_ds)
        assert np.allclose(te.X, (te_ds.X - params.x_mean) / params.x_std)


class TestSynthetic:
    def test_classification_shapes_and_labels(self):
        ds = synth_classification(64, seed=0, n_classes=3, n_features=5)
        assert ds.X.shape == (64, 5)
        assert set(np.unique(ds.y)) <= {0.0, 1.0, 2.0}
        assert ds.task == "classification"

    def test_same_seed_same_data(self):
        a = synth_classification(32, seed=1)
        b = synth_classification(32, seed=1)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)

    def test_sample_seed_resamples_same_distribution(self):
        a = synth_classification(512, seed=1)
        b = synth_classification(512, seed=1, sample_seed=99)
        assert not np.array_equal(a.X, b.X)
        # same class means: per-class centroids agree between draws
        for cls in (0, 1):
            ca = a.X[a.y[:, 0] == cls].mean(axis=0)
            cb = b.X[b.y[:, 0] == cls].mean(axis=0)
            assert np.linalg.norm(ca - cb) < 0.5

    def test_blobs_linearly_learnable(self):
        # separation 4 means a nearest-centroid rule is nearly perfect
        ds = synth_classification(512, seed=2, n_classes=2)
        means = [ds.X[ds.y[:, 0] == c].mean(axis=0) for c in (0, 1)]
        d = np.stack([np.linalg.norm(ds.X - m, axis=1) for m in means])
        acc = float(np.mean(np.argmin(d, axis=0) == ds.y[:, 0]))
        assert acc >= 0.95

    def test_regression_reproducible(self):
        a = synth_regression(32, seed=6)
        b = synth_regression(32, seed=6)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


class TestCorruptors:
    def test_zero_scale_is_copy(self):
        X = np.random.default_rng(0).normal(size=(8, 3))
        out = corrupt_gaussian(X, 0.0, seed=1)
        assert np.array_equal(out, X) and out is not X

    def test_noise_magnitude_tracks_feature_scale(self):
        rng = np.random.default_rng(1)
        X = np.column_stack([rng.normal(0, 1, 4000), rng.normal(0, 10, 4000)])
        out = corrupt_gaussian(X, 1.0, seed=2)
        noise = out - X
        assert 0.8 < noise[:, 0].std() < 1.2
        assert 8.0 < noise[:, 1].std() < 12.0

    def test_permute_preserves_values(self):
        X = np.random.default_rng(3).normal(size=(5, 4))
        out = corrupt_permute_features(X, seed=4)
        assert not np.array_equal(out, X)
        assert np.array_equal(np.sort(out, axis=1), np.sort(X, axis=1))

    def test_permute_single_feature_noop(self):
        X = np.random.default_rng(5).normal(size=(5, 1))
        assert np.array_equal(corrupt_permute_features(X, seed=0), X)


class TestManifest:
    def test_checksum_and_counts(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text("1.0,2.0,3.0\n")
        ds = load_csv(path)
        man = dataset_manifest(path, ds, -1)
        assert man["N"] == 1 and man["Q"] == 2
        assert len(man["sha256"]) == 64
        out = tmp_path / "manifest.json"
        write_manifest(out, man)
        assert json.loads(out.read_text())["sha256"] == man["sha256"]
        # same bytes, same digest
        assert dataset_manifest(path, ds, -1)["sha256"] == man["sha256"]


class TestDataDir:
    def test_env_var_wins(self, monkeypatch, tmp_path):
        monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
        assert str(resolve_data_dir(None)) == str(tmp_path)

    def test_explicit_beats_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv(DATA_DIR_ENV, "/somewhere/else")
        assert str(resolve_data_dir(tmp_path)) == str(tmp_path)


def _dataset_path(key):
    root = os.environ.get(DATA_DIR_ENV, os.path.join(os.getcwd(), "data"))
    return os.path.join(root, UCI_DATASETS[key].filename)


@pytest.mark.parametrize("key", sorted(UCI_DATASETS))
def test_benchmark_csv_row_and_feature_counts(key):
    path = _dataset_path(key)
    if not os.path.exists(path):
        pytest.skip(f"benchmark file not present: {path}")
    info = UCI_DATASETS[key]
    ds = load_csv(path, name=info.name)
    assert ds.N == info.N
    assert ds.Q == info.Q

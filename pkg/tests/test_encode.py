import numpy as np
import pytest

from spikelth.core import DomainError
from spikelth.encode import CsvParseError, LabeledSpikeDataset, load_feature_csv, rate_encode, synthetic_patterns


class TestRateEncode:
    def test_zero_rate(self):
        np.testing.assert_array_equal(rate_encode([0.0], 5, seed=1), np.zeros((5, 1)))

    def test_full_rate(self):
        np.testing.assert_array_equal(rate_encode([1.0], 5, seed=1), np.ones((5, 1)))

    def test_mean_rate(self):
        s = rate_encode([0.5], 10_000, seed=7)
        assert abs(s.mean() - 0.5) <= 0.02
        assert abs(s.mean() - 0.5) <= 3 * np.sqrt(0.25 / 10_000)

    def test_seeded(self):
        np.testing.assert_array_equal(rate_encode([0.3, 0.8], 50, 11), rate_encode([0.3, 0.8], 50, 11))

    @pytest.mark.parametrize("bad", [[-0.1], [1.01], [float("nan")]])
    def test_out_of_range(self, bad):
        with pytest.raises(DomainError):
            rate_encode(bad, 3, 0)

    def test_bad_T(self):
        with pytest.raises(DomainError):
            rate_encode([0.5], 0, 0)


class TestSyntheticPatterns:
    def test_noise_free_equals_prototype(self):
        ds = synthetic_patterns(3, 8, 4, 0.0, 10, seed=2)
        for spikes, label in ds.samples:
            for t in range(4):
                np.testing.assert_array_equal(spikes[t], ds.prototypes[label])

    def test_nearest_prototype_accuracy(self):
        ds = synthetic_patterns(2, 8, 3, 0.05, 500, seed=4)
        assert len(ds) == 1000
        dist = np.abs(ds.spikes[:, 0, None, :].astype(int) - ds.prototypes[None].astype(int)).sum(-1)
        assert np.mean(dist.argmin(axis=1) == ds.labels) > 0.99

    def test_deterministic(self):
        a = synthetic_patterns(2, 16, 4, 0.1, 20, seed=3)
        b = synthetic_patterns(2, 16, 4, 0.1, 20, seed=3)
        np.testing.assert_array_equal(a.spikes, b.spikes)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_invalid_noise(self):
        with pytest.raises(DomainError):
            synthetic_patterns(2, 4, 2, 0.5, 3, 0)

    def test_distinct_prototypes(self):
        ds = synthetic_patterns(4, 3, 1, 0.0, 1, seed=0)
        assert len({tuple(p) for p in ds.prototypes}) == 4

    def test_split_partitions(self):
        ds = synthetic_patterns(2, 6, 2, 0.1, 25, seed=0)
        tr, ev = ds.split(0.6, seed=1)
        assert len(tr) + len(ev) == len(ds) and len(tr) == 30


class TestCsv:
    def test_single_row(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("0.0,0.0,1\n")
        ds = load_feature_csv(p, T=2, seed=0)
        assert len(ds) == 1 and ds.labels[0] == 1
        np.testing.assert_array_equal(ds.spikes[0], np.zeros((2, 2)))

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("")
        assert len(load_feature_csv(p, T=3, seed=0)) == 0

    def test_parse_error_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,c\n")
        with pytest.raises(CsvParseError) as exc:
            load_feature_csv(p, T=1, seed=0)
        assert exc.value.line == 1

    def test_parse_error_later_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("0.1,0.2,0\n0.1,0\n0.3,0.4,x\n")
        with pytest.raises(CsvParseError) as exc:
            load_feature_csv(p, T=1, seed=0)
        assert exc.value.line == 2

    def test_out_of_range_names_column(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("0.1,1.5,0\n")
        with pytest.raises(DomainError, match="column 2"):
            load_feature_csv(p, T=1, seed=0)

    def test_row_encoding_independent_of_position_in_file(self, tmp_path):
        a = tmp_path / "a.csv"
        a.write_text("0.5,0.5,0\n0.3,0.9,1\n")
        b = tmp_path / "b.csv"
        b.write_text("0.5,0.5,0\n0.3,0.9,1\n0.2,0.2,0\n")
        da, db = load_feature_csv(a, 20, 5), load_feature_csv(b, 20, 5)
        np.testing.assert_array_equal(da.spikes, db.spikes[:2])


class TestDataset:
    def test_label_range_checked(self):
        with pytest.raises(DomainError):
            LabeledSpikeDataset(np.zeros((1, 2, 2), np.uint8), np.array([3]), 2)

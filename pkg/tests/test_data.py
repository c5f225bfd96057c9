import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cura.data import (
    Series,
    WindowedDataset,
    chrono_split,
    gen_synth,
    load_csv,
    make_windows,
    window_count,
    write_csv,
    zscore_apply,
    zscore_fit,
    zscore_invert,
)
from cura.errors import (
    DegenerateError,
    InsufficientDataError,
    ParameterError,
    ParseError,
    SchemaError,
    UsageError,
)


def ramp(n, channels=1):
    values = np.arange(n, dtype=np.float64)[:, None] * (1.0 + np.arange(channels))
    return Series(values, tuple(f"x{c}" for c in range(channels)))


class TestCsv:
    def test_shape_and_order(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("time,a,b,y\nt0,1,2,3\nt1,4,5,6\nt2,7,8,9\n")
        s = load_csv(path, target_column="y", feature_columns=["b", "a"], timestamp_column="time")
        assert s.columns == ("b", "a", "y")
        assert s.values.shape == (3, 3)
        assert s.values[1].tolist() == [5.0, 4.0, 6.0]
        assert s.timestamps == ("t0", "t1", "t2")

    def test_all_columns_by_default(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n3,4\n")
        assert load_csv(path).columns == ("a", "b")

    def test_bad_cell_reports_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n3,4\n5,6\n7,oops\n")
        with pytest.raises(ParseError) as info:
            load_csv(path)
        assert info.value.line == 5
        assert "line 5" in str(info.value)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n3\n")
        with pytest.raises(ParseError) as info:
            load_csv(path)
        assert info.value.line == 3

    def test_missing_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(SchemaError):
            load_csv(path, target_column="y")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(ParseError):
            load_csv(path)

    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        s = Series(rng.standard_normal((50, 3)) * 1e3, ("p", "q", "r"))
        write_csv(tmp_path / "s.csv", s)
        back = load_csv(tmp_path / "s.csv")
        assert back.columns == s.columns
        assert back.values.tobytes() == s.values.tobytes()

    def test_series_rejects_nan(self):
        with pytest.raises(UsageError):
            Series(np.array([[1.0], [np.nan]]), ("a",))


class TestZscore:
    def test_hand_values(self):
        s = Series(np.array([1.0, 2.0, 3.0]), ("a",))
        norm = zscore_fit(s, 3)
        z = zscore_apply(norm, s.values)[:, 0]
        np.testing.assert_allclose(z, [-1.2247, 0.0, 1.2247], atol=1e-4)

    def test_moments(self):
        rng = np.random.default_rng(1)
        s = Series(rng.standard_normal((200, 3)) * [1.0, 5.0, 0.01] + [3.0, -2.0, 100.0], ("a", "b", "c"))
        z = zscore_apply(zscore_fit(s, 200), s.values)
        np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(z.var(axis=0), 1.0, atol=1e-9)

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        s = Series(rng.standard_normal((100, 2)) * 40 + 7, ("a", "b"))
        norm = zscore_fit(s, 60)
        back = zscore_invert(norm, zscore_apply(norm, s.values))
        np.testing.assert_allclose(back, s.values, atol=1e-9, rtol=0)

    def test_fit_uses_only_train_rows(self):
        s = Series(np.concatenate([np.zeros(5), np.ones(5)]) + np.arange(10) * 1e-3, ("a",))
        norm = zscore_fit(s, 5)
        assert norm.mean[0] == pytest.approx(0.002)

    def test_zero_variance(self):
        s = Series(np.array([[1.0, 2.0], [1.0, 3.0]]), ("flat", "ok"))
        with pytest.raises(DegenerateError, match="flat"):
            zscore_fit(s, 2)


class TestWindows:
    def test_count_hand(self):
        ds = make_windows(ramp(100), 20, horizon=1)
        assert len(ds) == 80
        assert ds.inputs.shape == (80, 20, 1)
        assert ds.targets.shape == (80, 1)

    @pytest.mark.parametrize(
        "n, L, H, stride, expected",
        [(21, 20, 1, 1, 1), (20, 20, 1, 1, 0), (30, 5, 3, 4, 6), (10, 1, 1, 1, 9), (10, 3, 2, 10, 1)],
    )
    def test_window_count_boundaries(self, n, L, H, stride, expected):
        assert window_count(n, L, H, stride) == expected

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            make_windows(ramp(20), 20, horizon=1)

    def test_bad_arguments(self):
        with pytest.raises(ParameterError):
            make_windows(ramp(50), 0)
        with pytest.raises(ParameterError):
            make_windows(ramp(50), 5, task="ranking")

    def test_contents_denormalize(self):
        s = ramp(40, 2)
        ds = make_windows(s, 5, horizon=2, stride=3, target_column="x1")
        j = ds.normalizer.index("x0")
        raw = ds.inputs[2, :, 0] * ds.normalizer.std[j] + ds.normalizer.mean[j]
        np.testing.assert_allclose(raw, np.arange(6, 11), atol=1e-12)
        np.testing.assert_allclose(ds.denormalize_targets(ds.targets[2]), 2.0 * np.array([11, 12]), atol=1e-12)

    def test_classification_label_at_last_row(self):
        labels = np.array([0, 0, 1, 1, 2, 2, 0, 1], dtype=float)
        s = Series(np.column_stack([np.arange(8.0), labels]), ("x0", "label"))
        ds = make_windows(s, 3, task="classification", target_column="label")
        assert ds.feature_columns == ("x0",)
        assert ds.targets.tolist() == labels[2:].astype(int).tolist()

    def test_classification_rejects_fractional_labels(self):
        s = Series(np.column_stack([np.arange(8.0), np.full(8, 0.5)]), ("x0", "label"))
        with pytest.raises(UsageError):
            make_windows(s, 3, task="classification", target_column="label")

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 120), st.integers(1, 30), st.integers(1, 10), st.integers(1, 12))
    def test_count_matches_enumeration(self, n, L, H, stride):
        enumerated = len([i for i in range(0, n, stride) if i + L + H <= n])
        assert window_count(n, L, H, stride) == enumerated
        if enumerated:
            assert len(make_windows(ramp(n), L, horizon=H, stride=stride)) == enumerated


class TestSplit:
    def dataset(self, S):
        return WindowedDataset.from_arrays(np.arange(S, dtype=float).reshape(S, 1, 1), np.arange(S, dtype=float))

    @pytest.mark.parametrize("S, frac, n_train", [(10, 0.8, 8), (5, 0.5, 2), (7, 0.3, 2)])
    def test_sizes(self, S, frac, n_train):
        train, test = chrono_split(self.dataset(S), frac)
        assert (len(train), len(test)) == (n_train, S - n_train)

    def test_order_preserved(self):
        train, test = chrono_split(self.dataset(10))
        assert train.targets[:, 0].tolist() == list(range(8))
        assert test.targets[:, 0].tolist() == [8.0, 9.0]

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.2, 1.5])
    def test_bad_fraction(self, frac):
        with pytest.raises(UsageError):
            chrono_split(self.dataset(10), frac)

    def test_no_training_samples(self):
        with pytest.raises(UsageError):
            chrono_split(self.dataset(3), 0.2)

    def test_leakage_guard(self):
        ds = make_windows(ramp(100), 10, train_fraction=0.9)
        with pytest.raises(UsageError, match="beyond"):
            chrono_split(ds, 0.5)


class TestPipelineProperties:
    @settings(max_examples=100, deadline=None)
    @given(
        st.integers(30, 200),
        st.integers(1, 12),
        st.integers(1, 4),
        st.integers(1, 5),
        st.floats(0.3, 0.9),
        st.integers(0, 2**32 - 1),
    )
    def test_no_leakage_and_adjacency(self, n, L, H, stride, frac, seed):
        if window_count(n, L, H, stride) < 4:
            return
        rng = np.random.default_rng(seed)
        s = Series(rng.standard_normal((n, 2)), ("a", "b"))
        ds = make_windows(s, L, horizon=H, stride=stride, target_column="b", train_fraction=frac)
        train, test = chrono_split(ds, frac)
        if len(test) == 0:
            return
        last_train_row = train.sample_end(len(train) - 1) - 1
        # statistics come from training rows only
        assert ds.fit_rows == last_train_row + 1
        ref = zscore_fit(s, last_train_row + 1)
        np.testing.assert_allclose(ds.normalizer.mean, ref.mean, rtol=0, atol=1e-12)
        # rewriting every later row leaves the statistics untouched
        poisoned = s.values.copy()
        poisoned[last_train_row + 1 :] = 1e6
        again = make_windows(
            Series(poisoned, s.columns), L, horizon=H, stride=stride, target_column="b", train_fraction=frac
        )
        assert again.normalizer.mean.tobytes() == ds.normalizer.mean.tobytes()
        assert again.normalizer.std.tobytes() == ds.normalizer.std.tobytes()
        # test windows start right after the last training window
        assert int(test.starts[0]) == int(train.starts[-1]) + stride
        assert int(test.starts[0]) > int(train.starts[-1])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_normalize_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        values = rng.standard_normal((50, 3)) * rng.uniform(0.1, 100, 3) + rng.uniform(-50, 50, 3)
        s = Series(values, ("a", "b", "c"))
        norm = zscore_fit(s, 40)
        assert np.max(np.abs(zscore_invert(norm, zscore_apply(norm, values)) - values)) <= 1e-9


class TestSynth:
    def test_sine_starts_at_zero(self):
        s = gen_synth("sine_mix", 50, 3)
        np.testing.assert_array_equal(s.values[0], 0.0)

    @pytest.mark.parametrize("kind", ["sine_mix", "freq_classes", "linear_ar"])
    def test_deterministic(self, kind):
        a = gen_synth(kind, 300, 2, seed=5, noise_std=0.1)
        b = gen_synth(kind, 300, 2, seed=5, noise_std=0.1)
        assert a.values.tobytes() == b.values.tobytes()
        c = gen_synth(kind, 300, 2, seed=6, noise_std=0.1)
        assert a.values.tobytes() != c.values.tobytes()

    def test_ar_coefficients_recovered(self):
        x = gen_synth("linear_ar", 2000, 1, seed=0, noise_std=0.01).values[:, 0]
        design = np.column_stack([x[1:-1], x[:-2]])
        coef, *_ = np.linalg.lstsq(design, x[2:], rcond=None)
        np.testing.assert_allclose(coef, [0.5, 0.3], atol=0.05)

    def test_freq_classes_layout(self):
        s = gen_synth("freq_classes", 320, 3, seed=1, num_classes=4, segment_len=32)
        assert s.columns == ("x0", "x1", "x2", "label")
        labels = s.column("label")
        assert set(np.unique(labels)) <= {0.0, 1.0, 2.0, 3.0}
        # constant within each segment
        assert np.all(labels.reshape(10, 32) == labels.reshape(10, 32)[:, :1])

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            gen_synth("brownian", 10)

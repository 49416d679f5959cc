import math

import numpy as np
import pytest
import scipy.stats

from bstskit.timeseries import (AlignmentError, CellError, DesignMatrix,
                                Month, SchemaError, TimeSeries, Transform,
                                TransformDomainError, align, apply_transform,
                                diagnostics, load_csv, shannon_entropy)


def series(values, start=Month(2000, 1), name="s"):
    return TimeSeries(name, start, np.asarray(values, dtype=float))


class TestMonth:
    def test_parse_and_arithmetic(self):
        m = Month.parse("1987-04")
        assert (m.year, m.month) == (1987, 4)
        assert Month.parse("1987-04-01") == m
        assert m.shift(14) == Month(1988, 6)
        assert Month(1988, 6) - m == 14
        assert str(m) == "1987-04"

    def test_rejects_garbage(self):
        with pytest.raises(SchemaError):
            Month.parse("April 1987")
        with pytest.raises(ValueError):
            Month(2000, 13)


class TestLoadCsv:
    def test_three_row_csv(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,cpu\n2000-01,1.0\n2000-02,2.0\n2000-03,3.0\n")
        table = load_csv(p)
        assert set(table) == {"cpu"}
        s = table["cpu"]
        assert len(s) == 3
        assert s.start == Month(2000, 1)
        np.testing.assert_array_equal(s.values, [1.0, 2.0, 3.0])

    def test_duplicate_month_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,cpu\n2000-01,1\n2000-01,2\n")
        with pytest.raises(SchemaError, match="duplicate"):
            load_csv(p)

    def test_unparseable_date(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,cpu\nJan-2000,1\n")
        with pytest.raises(SchemaError):
            load_csv(p)

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,a,b\n2000-01,1,2\n2000-02,1,oops\n")
        with pytest.raises(CellError) as err:
            load_csv(p)
        assert err.value.row == 3
        assert err.value.column == "b"

    def test_rows_sorted_and_gaps_become_missing(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,a\n2000-03,3\n2000-01,1\n")
        s = load_csv(p)["a"]
        assert s.start == Month(2000, 1)
        assert len(s) == 3
        assert math.isnan(s.values[1])

    def test_columns_trimmed_to_own_span(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,a,b\n2000-01,1,\n2000-02,2,5\n2000-03,3,6\n")
        table = load_csv(p)
        assert table["a"].start == Month(2000, 1)
        assert table["b"].start == Month(2000, 2)
        assert len(table["b"]) == 2

    def test_wide_monthly_panel(self, tmp_path):
        # 137 numeric columns, 435 monthly rows starting 1987-04
        rng = np.random.default_rng(0)
        names = [f"v{i}" for i in range(137)]
        lines = ["date," + ",".join(names)]
        month = Month(1987, 4)
        for r in range(435):
            vals = rng.standard_normal(137)
            lines.append(str(month.shift(r)) + "," + ",".join(f"{v:.6f}" for v in vals))
        p = tmp_path / "panel.csv"
        p.write_text("\n".join(lines) + "\n")
        table = load_csv(p)
        assert len(table) == 137
        assert all(len(s) == 435 for s in table.values())
        assert table["v0"].start == Month(1987, 4)
        assert table["v0"].end == Month(2023, 6)


class TestTransform:
    def test_identity_returns_input(self):
        s = series([1.0, 2.0, 3.0])
        assert apply_transform(s, Transform.identity()) is s

    def test_log_diff_closed_form(self):
        # ln(x[t-1]) - ln(x[t-4]) at the single surviving stamp t = 4:
        # ln(e^1) - ln(e^1) = 0
        s = series(np.exp([1.0, 1.0, 1.0, 1.0, 2.0]))
        out = apply_transform(s, Transform.log_diff(1, 4))
        assert len(out) == 1
        assert out.start == s.start.shift(4)
        assert out.values[0] == pytest.approx(0.0, abs=1e-15)

    def test_log_diff_uses_stated_lags(self):
        s = series(np.exp([5.0, 1.0, 1.0, 1.0, 2.0]))
        out = apply_transform(s, Transform.log_diff(1, 4))
        # value at t=4: ln(x[3]) - ln(x[0]) = 1 - 5
        assert out.values[0] == pytest.approx(-4.0)

    def test_log_diff_length_arithmetic(self):
        rng = np.random.default_rng(1)
        s = series(np.exp(rng.standard_normal(435)))
        out = apply_transform(s, Transform.log_diff(1, 4))
        # oracle: count the valid stamps by brute loop
        count = sum(1 for t in range(len(s)) if t - 4 >= 0)
        assert len(out) == count == 431

    def test_log_diff_matches_naive_loop(self):
        rng = np.random.default_rng(2)
        for a, b in [(0, 1), (1, 4), (2, 7)]:
            vals = np.exp(rng.standard_normal(40))
            s = series(vals)
            out = apply_transform(s, Transform.log_diff(a, b))
            expected = [
                math.log(vals[t - a]) - math.log(vals[t - b])
                for t in range(b, len(vals))
            ]
            np.testing.assert_array_equal(out.values, expected)

    def test_log_requires_positive(self):
        s = series([1.0, -2.0, 3.0])
        with pytest.raises(TransformDomainError):
            apply_transform(s, Transform.log())

    def test_parse_round_trip(self):
        t = Transform.parse("log_diff(1,4)")
        assert (t.lag_a, t.lag_b) == (1, 4)
        assert Transform.parse("log").kind == "log"
        with pytest.raises(ValueError):
            Transform.parse("sqrt")


class TestAlign:
    def test_overlap_window(self):
        target = series(np.arange(411) + 1.0, start=Month(1987, 4), name="y")
        predictor = series(np.arange(210) + 2.0, start=Month(2004, 1), name="x")
        dm = align(target, [predictor])
        assert dm.months[0] == Month(2004, 1)
        assert dm.months[-1] == Month(2021, 6)
        assert dm.n_rows == Month(2021, 6) - Month(2004, 1) + 1

    def test_identical_dates_full_length(self):
        target = series(np.arange(24) + 1.0, name="y")
        predictor = series(np.arange(24) ** 1.5 + 1.0, name="x")
        dm = align(target, [predictor])
        assert dm.n_rows == 24

    def test_interior_missing_reduces_rows(self):
        rng = np.random.default_rng(3)
        target = series(rng.standard_normal(48), name="y")
        vals = rng.standard_normal(48)
        vals[[10, 20, 30]] = np.nan
        predictor = series(vals, name="x")
        dm = align(target, [predictor])
        # oracle: explicit date-set intersection
        good = {
            target.start.shift(i)
            for i in range(48)
            if not math.isnan(vals[i])
        }
        assert dm.n_rows == len(good) == 45
        assert set(dm.months) == good

    def test_empty_intersection(self):
        target = series([1.0, 2.0], start=Month(2000, 1), name="y")
        predictor = series([1.0, 2.0], start=Month(2010, 1), name="x")
        with pytest.raises(AlignmentError):
            align(target, [predictor])

    def test_constant_column_dropped_with_record(self):
        target = series(np.arange(12) + 1.0, name="y")
        flat = series(np.full(12, 3.0), name="flat")
        live = series(np.arange(12) ** 2 + 1.0, name="live")
        dm = align(target, [flat, live])
        assert dm.column_names == ("live",)
        assert dm.dropped_constant == ("flat",)

    def test_no_missing_cells_invariant(self):
        with pytest.raises(ValueError):
            DesignMatrix(
                column_names=("a",),
                values=np.array([[np.nan]]),
                target_name="y",
                target=np.array([1.0]),
                months=(Month(2000, 1),),
            )


class TestDiagnostics:
    def test_constant_series(self):
        rep = diagnostics(series(np.full(30, 5.0)))
        assert rep.cov == 0.0
        assert rep.entropy == 0.0
        assert rep.hurst is None
        assert "hurst_degenerate" in rep.flags

    def test_zero_mean_rejected(self):
        with pytest.raises(ValueError, match="zero"):
            diagnostics(series([-1.0, 1.0, -1.0, 1.0]))

    def test_quantiles_match_sort_oracle(self):
        rng = np.random.default_rng(4)
        vals = rng.standard_normal(101) + 10.0
        rep = diagnostics(series(vals))
        s = np.sort(vals)
        assert rep.minimum == s[0]
        assert rep.maximum == s[-1]
        assert rep.median == s[50]
        # type-7 interpolation oracle for q1 at position 0.25 * (n - 1) = 25
        assert rep.q1 == pytest.approx(s[25], rel=1e-12)
        assert rep.q3 == pytest.approx(s[75], rel=1e-12)

    def test_mean_sd_two_pass(self):
        rng = np.random.default_rng(5)
        vals = rng.standard_normal(300) * 7 + 100
        rep = diagnostics(series(vals))
        mean = sum(vals) / len(vals)
        sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / (len(vals) - 1))
        assert rep.mean == pytest.approx(mean, rel=1e-12)
        assert rep.cov == pytest.approx(100 * sd / mean, rel=1e-12)

    def test_moments_match_scipy(self):
        rng = np.random.default_rng(6)
        vals = rng.gamma(2.0, 3.0, size=400)
        rep = diagnostics(series(vals))
        assert rep.skewness == pytest.approx(scipy.stats.skew(vals, bias=True), rel=1e-12)
        assert rep.excess_kurtosis == pytest.approx(
            scipy.stats.kurtosis(vals, fisher=True, bias=True), rel=1e-10
        )
        assert rep.kurtosis == pytest.approx(rep.excess_kurtosis + 3.0)

    def test_entropy_maximal_on_uniform_midpoints(self):
        for bins in (4, 7, 10):
            mids = np.arange(bins) + 0.5
            vals = np.repeat(mids, 9)
            assert shannon_entropy(vals, bins) == pytest.approx(math.log(bins), rel=1e-12)

    def test_entropy_zero_for_constant(self):
        assert shannon_entropy(np.full(50, 2.5), 8) == 0.0

    def test_hurst_iid_gaussian_band(self):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            rep = diagnostics(series(rng.standard_normal(2048) + 10.0))
            if 0.4 < rep.hurst < 0.6:
                hits += 1
        assert hits >= 90

    def test_short_series_hurst_flagged(self):
        rep = diagnostics(series(np.arange(10) + 1.0))
        assert rep.hurst is None
        assert "hurst_series_too_short" in rep.flags

    def test_integrated_series_hurst_clamped_into_unit_interval(self):
        rng = np.random.default_rng(12)
        walk = 100 + np.cumsum(np.cumsum(rng.standard_normal(512)))
        rep = diagnostics(series(walk))
        assert 0.0 < rep.hurst < 1.0
        assert "hurst_clamped" in rep.flags

    def test_missing_entries_ignored(self):
        vals = np.array([1.0, np.nan, 3.0, 5.0, np.nan, 7.0])
        rep = diagnostics(series(vals))
        assert rep.mean == pytest.approx(4.0)

"""Country CSV loading, series normalization, smoothing, and the simulation
artifact writers."""

import numpy as np
import pytest

from epinetsim.core import RECORD_NAMES
from epinetsim.dataio import (
    RUN_CSV_HEADER,
    DataError,
    GroundTruth,
    PolicyTimeline,
    SchemaError,
    file_sha256,
    load_country,
    read_run_csv,
    smooth,
    write_aggregate_csv,
    write_compare_csv,
    write_controller_log_csv,
    write_manifest,
    write_run_csv,
)
from epinetsim.metapop import CountrySetup, run_simulation
from epinetsim.params import EpiParams, GBR_BEHAVIOR

from conftest import flat_timeline

BASE_COLUMNS = (
    "date,confirmed,deaths,hosp,tests,vaccines,stay_home_restrictions,"
    "school_closing,workplace_closing,testing_policy,contact_tracing"
)


def write_csv(tmp_path, rows, header=BASE_COLUMNS, name="country.csv"):
    path = tmp_path / name
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def day_row(date, confirmed="", deaths="", hosp="", tests="", vaccines="",
            stay="0", school="0", work="0", testing="0", tracing="1"):
    return f"{date},{confirmed},{deaths},{hosp},{tests},{vaccines},{stay},{school},{work},{testing},{tracing}"


class TestSmooth:
    def reference(self, series, window):
        # plain truncated centered mean, written independently of the library
        half = window // 2
        out = []
        for i in range(len(series)):
            lo = max(0, i - half)
            hi = min(len(series), i + half + 1)
            out.append(sum(series[lo:hi]) / (hi - lo))
        return out

    def test_window_shrinks_at_boundaries(self):
        got = smooth(np.array([0.0, 0, 7, 0, 0]), 7)
        expected = self.reference([0.0, 0, 7, 0, 0], 7)
        assert expected == [1.75, 1.4, 1.4, 1.4, 1.75]
        assert np.allclose(got, expected)

    def test_matches_reference_on_random_series(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 40))
            window = int(rng.choice([1, 3, 5, 7, 9, 21]))
            series = rng.random(n) * 100
            assert np.allclose(smooth(series, window),
                               self.reference(series.tolist(), window))

    def test_window_one_is_identity(self):
        series = np.array([3.0, 1.0, 4.0, 1.0, 5.0])
        assert np.array_equal(smooth(series, 1), series)

    def test_constant_series_unchanged(self):
        series = np.full(30, 2.5)
        for window in (1, 3, 7, 29):
            assert np.allclose(smooth(series, window), 2.5)

    def test_huge_window_returns_global_mean(self):
        series = np.arange(9, dtype=np.float64)
        out = smooth(series, 2 * 9 - 1)
        assert np.allclose(out, series.mean())

    def test_mean_preserved_up_to_boundary_effects(self):
        rng = np.random.default_rng(1)
        series = rng.random(200)
        for window in (3, 7, 15):
            assert smooth(series, window).mean() == pytest.approx(
                series.mean(), rel=0.02
            )

    @pytest.mark.parametrize("window", [0, -3, 2, 8])
    def test_even_or_nonpositive_window_rejected(self, window):
        with pytest.raises(DataError):
            smooth(np.ones(5), window)

    def test_empty_and_bad_shape(self):
        assert smooth(np.empty(0), 3).size == 0
        with pytest.raises(DataError):
            smooth(np.ones((3, 3)), 3)


class TestLoadCountry:
    def test_cumulative_to_daily_with_decrease_clamp(self, tmp_path):
        # reported cumulative deaths 10, 9, 12 -> daily 10, 0, 3
        rows = [
            day_row("2020-01-01", confirmed="10", deaths="10", hosp="1"),
            day_row("2020-01-02", confirmed="11", deaths="9", hosp="1"),
            day_row("2020-01-03", confirmed="15", deaths="12", hosp="2"),
        ]
        _, gt = load_country(write_csv(tmp_path, rows), population=1e6)
        assert gt.deaths_daily.tolist() == [10.0, 0.0, 3.0]
        assert gt.deaths_cumulative.tolist() == [10.0, 10.0, 13.0]
        assert gt.confirmed_cumulative.tolist() == [10.0, 11.0, 15.0]

    def test_empty_series_becomes_zeros(self, tmp_path):
        rows = [
            day_row("2020-01-01", confirmed="5", deaths="0", hosp=""),
            day_row("2020-01-02", confirmed="6", deaths="0", hosp=""),
        ]
        timeline, gt = load_country(write_csv(tmp_path, rows), population=1e6)
        assert np.all(timeline.daily_tests == 0)
        assert np.all(timeline.daily_vaccines == 0)
        assert np.all(gt.hospitalized_current == 0)

    def test_gap_in_dates_is_reindexed_and_filled(self, tmp_path):
        rows = [
            day_row("2020-01-01", confirmed="10", deaths="1", hosp="4", stay="1"),
            day_row("2020-01-04", confirmed="22", deaths="4", hosp="6", stay="0"),
        ]
        timeline, gt = load_country(write_csv(tmp_path, rows), population=1e6)
        assert len(timeline) == 4
        # policies forward-fill through the gap
        assert timeline.stay_home.tolist() == [1, 1, 1, 0]
        # cumulative series interpolate linearly inside the gap
        assert gt.confirmed_cumulative.tolist() == [10.0, 14.0, 18.0, 22.0]
        assert gt.deaths_daily.tolist() == [1.0, 1.0, 1.0, 1.0]
        # current hospitalization forward-fills
        assert gt.hospitalized_current.tolist() == [4.0, 4.0, 4.0, 6.0]

    def test_missing_column_is_named(self, tmp_path):
        header = BASE_COLUMNS.replace("hosp,", "")
        rows = ["2020-01-01,1,0,0,0,0,0,0,1"]
        with pytest.raises(SchemaError, match="hosp"):
            load_country(write_csv(tmp_path, rows, header=header), population=1e6)

    def test_unparseable_date_reports_line_number(self, tmp_path):
        rows = [
            day_row("2020-01-01", confirmed="1", deaths="0", hosp="0"),
            day_row("not-a-date", confirmed="2", deaths="0", hosp="0"),
        ]
        with pytest.raises(DataError, match="line 3"):
            load_country(write_csv(tmp_path, rows), population=1e6)

    def test_duplicate_date_rejected(self, tmp_path):
        rows = [
            day_row("2020-01-01", confirmed="1", deaths="0", hosp="0"),
            day_row("2020-01-01", confirmed="2", deaths="0", hosp="0"),
        ]
        with pytest.raises(DataError, match="duplicate"):
            load_country(write_csv(tmp_path, rows), population=1e6)

    def test_confirmed_cannot_exceed_population(self, tmp_path):
        rows = [day_row("2020-01-01", confirmed="5000", deaths="0", hosp="0")]
        with pytest.raises(DataError, match="population"):
            load_country(write_csv(tmp_path, rows), population=1000)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            load_country(tmp_path / "nope.csv", population=1e6)

    def test_tracing_levels_kept_when_in_range(self, tmp_path):
        rows = [
            day_row("2020-01-01", confirmed="1", deaths="0", hosp="0", tracing="1"),
            day_row("2020-01-02", confirmed="1", deaths="0", hosp="0", tracing="3"),
            day_row("2020-01-03", confirmed="1", deaths="0", hosp="0", tracing="2"),
        ]
        timeline, _ = load_country(write_csv(tmp_path, rows), population=1e6)
        assert timeline.contact_tracing.tolist() == [1, 3, 2]

    def test_tracing_levels_mapped_affinely(self, tmp_path):
        # observed range 0..2 maps min -> 1 and max -> 3
        rows = [
            day_row("2020-01-01", confirmed="1", deaths="0", hosp="0", tracing="0"),
            day_row("2020-01-02", confirmed="1", deaths="0", hosp="0", tracing="1"),
            day_row("2020-01-03", confirmed="1", deaths="0", hosp="0", tracing="2"),
        ]
        timeline, _ = load_country(write_csv(tmp_path, rows), population=1e6)
        assert timeline.contact_tracing.tolist() == [1, 2, 3]

    def test_constant_tracing_maps_to_level_one(self, tmp_path):
        rows = [
            day_row("2020-01-01", confirmed="1", deaths="0", hosp="0", tracing="7"),
            day_row("2020-01-02", confirmed="1", deaths="0", hosp="0", tracing="7"),
        ]
        timeline, _ = load_country(write_csv(tmp_path, rows), population=1e6)
        assert timeline.contact_tracing.tolist() == [1, 1]

    def test_internal_travel_proxied_from_stay_home(self, tmp_path):
        rows = [
            day_row("2020-01-01", confirmed="1", deaths="0", hosp="0", stay="0"),
            day_row("2020-01-02", confirmed="1", deaths="0", hosp="0", stay="1"),
        ]
        timeline, _ = load_country(write_csv(tmp_path, rows), population=1e6)
        assert timeline.internal_from_proxy
        assert timeline.internal_open.tolist() == [True, False]

    def test_transport_column_overrides_proxy(self, tmp_path):
        header = BASE_COLUMNS + ",transport_closing"
        rows = [
            day_row("2020-01-01", confirmed="1", deaths="0", hosp="0", stay="1") + ",0",
            day_row("2020-01-02", confirmed="1", deaths="0", hosp="0", stay="0") + ",2",
        ]
        timeline, _ = load_country(write_csv(tmp_path, rows, header=header),
                                   population=1e6)
        assert not timeline.internal_from_proxy
        assert timeline.internal_open.tolist() == [True, False]

    def test_international_column_gates_imports(self, tmp_path):
        header = BASE_COLUMNS + ",international_movement_restrictions"
        rows = [
            day_row("2020-01-01", confirmed="1", deaths="0", hosp="0") + ",1",
            day_row("2020-01-02", confirmed="1", deaths="0", hosp="0") + ",3",
        ]
        timeline, _ = load_country(write_csv(tmp_path, rows, header=header),
                                   population=1e6)
        assert timeline.international_open.tolist() == [True, False]

    def test_policy_flags_clipped_to_range(self, tmp_path):
        rows = [
            day_row("2020-01-01", confirmed="1", deaths="0", hosp="0",
                    stay="4", school="9", work="-1", testing="5"),
        ]
        timeline, _ = load_country(write_csv(tmp_path, rows), population=1e6)
        assert timeline.stay_home.tolist() == [1]
        assert timeline.school_closing.tolist() == [3]
        assert timeline.workplace_closing.tolist() == [0]
        assert timeline.testing_policy.tolist() == [3]


class TestTimelineHelpers:
    def test_copy_with_refreshes_proxied_internal_gate(self):
        timeline = flat_timeline(4)
        timeline.internal_from_proxy = True
        edited = timeline.copy_with(stay_home=np.array([0, 1, 1, 0]))
        assert edited.internal_open.tolist() == [True, False, False, True]

    def test_from_days_marks_gate_explicit(self):
        assert flat_timeline(2).internal_from_proxy is False

    def test_copy_with_respects_explicit_gate(self):
        timeline = flat_timeline(3)
        timeline.internal_from_proxy = False
        edited = timeline.copy_with(stay_home=np.array([1, 1, 1]))
        assert edited.internal_open.tolist() == [True, True, True]

    def test_node_unit_conversion(self):
        gt = GroundTruth(
            dates=np.arange(3),
            confirmed_cumulative=np.array([100.0, 200.0, 300.0]),
            deaths_cumulative=np.array([10.0, 10.0, 20.0]),
            deaths_daily=np.array([10.0, 0.0, 10.0]),
            hospitalized_current=np.array([50.0, 60.0, 40.0]),
        )
        nodes = gt.to_node_units(100.0)
        assert nodes.confirmed_cumulative.tolist() == [1.0, 2.0, 3.0]
        assert nodes.hospitalized_current.tolist() == [0.5, 0.6, 0.4]
        assert len(nodes) == 3


@pytest.fixture(scope="module")
def tiny_result():
    setup = CountrySetup(population=300_000, child_fraction=0.2)
    return run_simulation(setup, flat_timeline(40), EpiParams(), GBR_BEHAVIOR,
                          n_runs=2, seed=21)


class TestArtifacts:
    def test_run_csv_roundtrip(self, tmp_path, tiny_result):
        path = write_run_csv(tmp_path / "runs.csv", tiny_result)
        counts, start = read_run_csv(path)
        assert start == 0
        assert np.array_equal(counts, tiny_result.region_counts)
        header = path.read_text().splitlines()[0]
        assert header == ",".join(RUN_CSV_HEADER)
        assert header == (
            "run,day,region,S,E,Asy,Sy,H,R,D,Q_S,Q_E,Q_Asy,Q_Sy,cum_exposed"
        )

    def test_run_csv_write_is_deterministic(self, tmp_path, tiny_result):
        a = write_run_csv(tmp_path / "a.csv", tiny_result)
        b = write_run_csv(tmp_path / "b.csv", tiny_result)
        assert file_sha256(a) == file_sha256(b)

    def test_read_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(SchemaError):
            read_run_csv(path)
        empty = tmp_path / "empty.csv"
        empty.write_text(",".join(RUN_CSV_HEADER) + "\n")
        with pytest.raises(DataError):
            read_run_csv(empty)

    def test_aggregate_csv_shape_and_scaling(self, tmp_path, tiny_result):
        path = write_aggregate_csv(tmp_path / "agg.csv", tiny_result, scale=100.0)
        lines = path.read_text().splitlines()
        assert len(lines) == 1 + tiny_result.n_days
        header = lines[0].split(",")
        assert header[0] == "day"
        assert header[1] == "S_mean" and header[2] == "S_std"
        first = lines[1].split(",")
        expected_s = tiny_result.mean_totals()[0, 0] * 100.0
        assert float(first[1]) == pytest.approx(expected_s)

    def test_compare_csv_contains_both_arms(self, tmp_path, tiny_result):
        path = write_compare_csv(tmp_path / "cmp.csv", tiny_result, tiny_result)
        header = path.read_text().splitlines()[0].split(",")
        assert "baseline_S_mean" in header and "scenario_D_std" in header
        assert len(path.read_text().splitlines()) == 1 + tiny_result.n_days

    def test_controller_log_csv(self, tmp_path, tiny_result):
        import dataclasses

        logged = dataclasses.replace(
            tiny_result,
            controller_logs=[np.array([[0, 5, 0], [1, 9, 1]]), None],
        )
        path = write_controller_log_csv(tmp_path / "ctl.csv", logged)
        lines = path.read_text().splitlines()
        assert lines[0] == "run,day,hospitalized,flag"
        assert lines[1] == "0,0,5,0" and lines[2] == "0,1,9,1"
        assert len(lines) == 3

    def test_manifest_is_stable_json(self, tmp_path):
        payload = {"b": 1, "a": {"z": [1, 2], "y": "s"}}
        p1 = write_manifest(tmp_path / "m1.json", payload)
        p2 = write_manifest(tmp_path / "m2.json", payload)
        assert p1.read_text() == p2.read_text()
        assert p1.read_text().startswith("{\n")

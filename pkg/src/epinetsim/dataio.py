"""Data ingestion and artifact files.

``load_country`` reads a per-country daily CSV (one row per date) with the
columns date, confirmed, deaths, hosp, tests, vaccines,
stay_home_restrictions, school_closing, workplace_closing, testing_policy,
contact_tracing, plus the optional international_movement_restrictions and
transport_closing. Cumulative counts are linearly interpolated over gaps and
differenced into daily series (negative corrections clamp to zero); policy
levels are forward-filled and clamped to their documented ranges.

The writers in this module produce the delimited artifacts of a simulation:
per-run counts, across-run aggregates, controller logs, and a JSON manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .core import N_RECORD, N_STATES, RECORD_NAMES

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = (
    "date",
    "confirmed",
    "deaths",
    "hosp",
    "tests",
    "vaccines",
    "stay_home_restrictions",
    "school_closing",
    "workplace_closing",
    "testing_policy",
    "contact_tracing",
)

RUN_CSV_HEADER = ("run", "day", "region") + RECORD_NAMES


class SchemaError(ValueError):
    """The input file does not have the expected shape (missing columns...)."""


class DataError(ValueError):
    """The input file has the right shape but unusable values."""


@dataclass(frozen=True)
class PolicyDay:
    """One day of government policy, in model units."""

    stay_home: int
    school_closing: int
    workplace_closing: int
    testing_policy: int
    contact_tracing: int
    daily_tests: float
    daily_vaccines: float
    international_open: bool = True
    internal_open: bool = True


@dataclass
class PolicyTimeline:
    """Per-day policy arrays covering a contiguous date range."""

    dates: np.ndarray
    stay_home: np.ndarray
    school_closing: np.ndarray
    workplace_closing: np.ndarray
    testing_policy: np.ndarray
    contact_tracing: np.ndarray
    daily_tests: np.ndarray
    daily_vaccines: np.ndarray
    international_open: np.ndarray
    internal_open: np.ndarray
    internal_from_proxy: bool = True

    def __len__(self) -> int:
        return int(self.dates.shape[0])

    def __getitem__(self, day: int) -> PolicyDay:
        return PolicyDay(
            stay_home=int(self.stay_home[day]),
            school_closing=int(self.school_closing[day]),
            workplace_closing=int(self.workplace_closing[day]),
            testing_policy=int(self.testing_policy[day]),
            contact_tracing=int(self.contact_tracing[day]),
            daily_tests=float(self.daily_tests[day]),
            daily_vaccines=float(self.daily_vaccines[day]),
            international_open=bool(self.international_open[day]),
            internal_open=bool(self.internal_open[day]),
        )

    def copy_with(self, **overrides) -> "PolicyTimeline":
        """Copy the timeline, replacing some arrays; refreshes the proxied
        internal-travel gate when stay_home changes and the gate came from it."""
        new = replace(self, **{k: np.asarray(v) for k, v in overrides.items()})
        if "stay_home" in overrides and new.internal_from_proxy and "internal_open" not in overrides:
            new.internal_open = new.stay_home == 0
        return new

    @classmethod
    def from_days(cls, days: list[PolicyDay], start_date: str = "2020-01-01") -> "PolicyTimeline":
        dates = np.datetime64(start_date) + np.arange(len(days))
        return cls(
            dates=dates,
            stay_home=np.array([d.stay_home for d in days], dtype=np.int64),
            school_closing=np.array([d.school_closing for d in days], dtype=np.int64),
            workplace_closing=np.array([d.workplace_closing for d in days], dtype=np.int64),
            testing_policy=np.array([d.testing_policy for d in days], dtype=np.int64),
            contact_tracing=np.array([d.contact_tracing for d in days], dtype=np.int64),
            daily_tests=np.array([d.daily_tests for d in days], dtype=np.float64),
            daily_vaccines=np.array([d.daily_vaccines for d in days], dtype=np.float64),
            international_open=np.array([d.international_open for d in days], dtype=bool),
            internal_open=np.array([d.internal_open for d in days], dtype=bool),
            internal_from_proxy=False,
        )


@dataclass
class GroundTruth:
    """Observed country series, person units unless rescaled."""

    dates: np.ndarray
    confirmed_cumulative: np.ndarray
    deaths_cumulative: np.ndarray
    deaths_daily: np.ndarray
    hospitalized_current: np.ndarray

    def __len__(self) -> int:
        return int(self.dates.shape[0])

    def to_node_units(self, scale: float) -> "GroundTruth":
        """Divide every count series by ``scale`` (persons per node)."""
        return GroundTruth(
            dates=self.dates,
            confirmed_cumulative=self.confirmed_cumulative / scale,
            deaths_cumulative=self.deaths_cumulative / scale,
            deaths_daily=self.deaths_daily / scale,
            hospitalized_current=self.hospitalized_current / scale,
        )


def _interp_cumulative(series: pd.Series) -> np.ndarray:
    """Linear interpolation inside gaps, 0 before the first observation,
    forward fill after the last, then daily differences clamped at 0."""
    v = pd.to_numeric(series, errors="coerce")
    v = v.interpolate(method="linear", limit_area="inside").ffill().fillna(0.0)
    daily = np.diff(v.to_numpy(dtype=np.float64), prepend=0.0)
    return np.clip(daily, 0.0, None)


def _fill_policy(series: pd.Series, lo: int, hi: int) -> np.ndarray:
    v = pd.to_numeric(series, errors="coerce").ffill().fillna(0.0)
    return np.clip(np.rint(v.to_numpy(dtype=np.float64)), lo, hi).astype(np.int64)


def _map_contact_tracing(raw: np.ndarray, source: str) -> np.ndarray:
    """Normalize the tracing column to levels 1..3.

    Values already inside [1, 3] are kept; otherwise the observed range is
    mapped affinely with min -> 1 and max -> 3. The applied mapping is logged.
    """
    vmin, vmax = int(raw.min()), int(raw.max())
    if vmin >= 1 and vmax <= 3:
        log.info("contact_tracing in %s already uses levels %d..%d, kept as-is", source, vmin, vmax)
        return raw.astype(np.int64)
    if vmin == vmax:
        log.info("contact_tracing in %s is constant (%d), mapped to level 1", source, vmin)
        return np.ones_like(raw, dtype=np.int64)
    mapped = np.rint(1.0 + 2.0 * (raw - vmin) / (vmax - vmin)).astype(np.int64)
    log.info(
        "contact_tracing in %s mapped affinely from observed range %d..%d onto 1..3",
        source,
        vmin,
        vmax,
    )
    return np.clip(mapped, 1, 3)


def load_country(csv_path: str | Path, population: float) -> tuple[PolicyTimeline, GroundTruth]:
    """Load one country's daily policy timeline and ground-truth series."""
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise SchemaError(f"data file not found: {csv_path}")
    df = pd.read_csv(csv_path)
    missing = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{csv_path}: missing required column(s): {', '.join(missing)}")

    dates = pd.to_datetime(df["date"], errors="coerce", format="mixed")
    bad = np.flatnonzero(dates.isna().to_numpy())
    if bad.size:
        row = int(bad[0])
        raise DataError(
            f"{csv_path}: unparseable date {df['date'].iloc[row]!r} at line {row + 2}"
        )
    dup = np.flatnonzero(dates.duplicated().to_numpy())
    if dup.size:
        row = int(dup[0])
        raise DataError(f"{csv_path}: duplicate date {df['date'].iloc[row]!r} at line {row + 2}")

    df = df.set_index(pd.DatetimeIndex(dates)).sort_index()
    full_range = pd.date_range(df.index[0], df.index[-1], freq="D")
    df = df.reindex(full_range)

    stay_home = _fill_policy(df["stay_home_restrictions"], 0, 1)
    school = _fill_policy(df["school_closing"], 0, 3)
    workplace = _fill_policy(df["workplace_closing"], 0, 3)
    testing_policy = _fill_policy(df["testing_policy"], 0, 3)
    tracing = _map_contact_tracing(_fill_policy(df["contact_tracing"], 0, 10), str(csv_path))

    daily_confirmed = _interp_cumulative(df["confirmed"])
    daily_deaths = _interp_cumulative(df["deaths"])
    daily_tests = _interp_cumulative(df["tests"])
    daily_vaccines = _interp_cumulative(df["vaccines"])
    hosp = (
        pd.to_numeric(df["hosp"], errors="coerce").ffill().fillna(0.0).to_numpy(dtype=np.float64)
    )

    confirmed_cum = np.cumsum(daily_confirmed)
    if confirmed_cum[-1] > population:
        raise DataError(
            f"{csv_path}: cumulative confirmed ({confirmed_cum[-1]:.0f}) exceeds the "
            f"declared population ({population:.0f})"
        )

    if "international_movement_restrictions" in df.columns:
        intl_level = _fill_policy(df["international_movement_restrictions"], 0, 4)
        international_open = intl_level <= 1
    else:
        international_open = np.ones(len(df), dtype=bool)

    if "transport_closing" in df.columns:
        transport = _fill_policy(df["transport_closing"], 0, 2)
        internal_open = transport < 2
        internal_from_proxy = False
    else:
        internal_open = stay_home == 0
        internal_from_proxy = True

    timeline = PolicyTimeline(
        dates=full_range.to_numpy(dtype="datetime64[D]"),
        stay_home=stay_home,
        school_closing=school,
        workplace_closing=workplace,
        testing_policy=testing_policy,
        contact_tracing=tracing,
        daily_tests=daily_tests,
        daily_vaccines=daily_vaccines,
        international_open=international_open,
        internal_open=internal_open,
        internal_from_proxy=internal_from_proxy,
    )
    gt = GroundTruth(
        dates=full_range.to_numpy(dtype="datetime64[D]"),
        confirmed_cumulative=confirmed_cum,
        deaths_cumulative=np.cumsum(daily_deaths),
        deaths_daily=daily_deaths,
        hospitalized_current=hosp,
    )
    return timeline, gt


def smooth(series: np.ndarray, window: int = 7) -> np.ndarray:
    """Centered moving average whose window shrinks at the boundaries.

    Position i averages the in-range part of [i - window//2, i + window//2].
    The window must be odd so the full-size window is centered.
    """
    if window < 1 or window % 2 == 0:
        raise DataError(f"smoothing window must be a positive odd integer, got {window!r}")
    v = np.asarray(series, dtype=np.float64)
    if v.ndim != 1:
        raise DataError(f"smooth expects a 1-d series, got shape {v.shape}")
    n = v.shape[0]
    if n == 0:
        return v.copy()
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(n)
    lo = np.maximum(0, idx - half)
    hi = np.minimum(n, idx + half + 1)
    return (csum[hi] - csum[lo]) / (hi - lo)


# --- simulation artifacts ---


def write_run_csv(path: str | Path, result) -> Path:
    """Per-run, per-day, per-region compartment counts."""
    path = Path(path)
    days = result.day_index
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_CSV_HEADER)
        for run in range(result.n_runs):
            for d in range(result.n_days):
                day = int(days[d])
                for region in range(result.n_regions):
                    row = result.region_counts[run, d, region]
                    writer.writerow([run, day, region, *row.tolist()])
    return path


def read_run_csv(path: str | Path) -> tuple[np.ndarray, int]:
    """Inverse of ``write_run_csv``: (n_runs, n_days, m, 12) counts and start day."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != RUN_CSV_HEADER:
            raise SchemaError(f"{path}: unexpected run CSV header {header!r}")
        rows = np.array([[int(x) for x in row] for row in reader], dtype=np.int64)
    if rows.size == 0:
        raise DataError(f"{path}: empty run CSV")
    n_runs = int(rows[:, 0].max()) + 1
    start_day = int(rows[:, 1].min())
    n_days = int(rows[:, 1].max()) - start_day + 1
    m = int(rows[:, 2].max()) + 1
    counts = np.zeros((n_runs, n_days, m, N_RECORD), dtype=np.int64)
    counts[rows[:, 0], rows[:, 1] - start_day, rows[:, 2]] = rows[:, 3:]
    return counts, start_day


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_aggregate_csv(path: str | Path, result, scale: float = 1.0) -> Path:
    """Across-run mean and standard deviation of the country totals per day.

    ``scale`` = 1 writes node units; ``scale`` = persons-per-node rescales to
    person units.
    """
    path = Path(path)
    mean = result.mean_totals() * scale
    std = result.std_totals() * scale
    days = result.day_index
    header = ["day"]
    for name in RECORD_NAMES:
        header += [f"{name}_mean", f"{name}_std"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for d in range(result.n_days):
            row = [str(int(days[d]))]
            for c in range(N_RECORD):
                row += [_fmt(mean[d, c]), _fmt(std[d, c])]
            writer.writerow(row)
    return path


def write_compare_csv(path: str | Path, baseline, scenario, scale: float = 1.0) -> Path:
    """Side-by-side aggregate of a baseline and a scenario over shared days."""
    path = Path(path)
    days_b = baseline.day_index
    days_s = scenario.day_index
    shared = np.intersect1d(days_b, days_s)
    mb, sb = baseline.mean_totals() * scale, baseline.std_totals() * scale
    ms, ss = scenario.mean_totals() * scale, scenario.std_totals() * scale
    header = ["day"]
    for prefix in ("baseline", "scenario"):
        for name in RECORD_NAMES:
            header += [f"{prefix}_{name}_mean", f"{prefix}_{name}_std"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for day in shared.tolist():
            ib = int(np.searchsorted(days_b, day))
            is_ = int(np.searchsorted(days_s, day))
            row = [str(day)]
            for c in range(N_RECORD):
                row += [_fmt(mb[ib, c]), _fmt(sb[ib, c])]
            for c in range(N_RECORD):
                row += [_fmt(ms[is_, c]), _fmt(ss[is_, c])]
            writer.writerow(row)
    return path


def write_controller_log_csv(path: str | Path, result) -> Path:
    """day, hospitalized, applied lockdown flag per run."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "day", "hospitalized", "flag"])
        if result.controller_logs:
            for run, logarr in enumerate(result.controller_logs):
                if logarr is None:
                    continue
                for day, hosp, flag in logarr.tolist():
                    writer.writerow([run, day, hosp, flag])
    return path


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path

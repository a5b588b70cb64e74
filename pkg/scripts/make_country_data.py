#!/usr/bin/env python3
"""Generate the bundled country CSVs (data/gbr.csv, data/isr.csv).

The files are deterministic reconstructions of the 2020-21 policy and
surveillance record for Great Britain and Israel, not copies of any single
dataset: restriction windows, testing/tracing/vaccination rollouts, wave
timing and wave heights follow the published country-level record. Counts are
kept at the national reporting scale for both countries (Israel's population
is 9.2 million; the British record is carried at its national magnitudes
while the bundled configs model Britain at the same 9.2 million reference
population, so the British series read as counts per ~7 modelled persons).
Day 0 is 2020-01-22, the first day of the international case-recording era,
and both records span 650 days (through early November 2021). Small
multiplicative noise and a weekend reporting dip are applied to the daily
counts so the series behave like real surveillance data. See data/README.md
for the full provenance notes.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import pandas as pd

POPULATION = 9_200_000
START_DATE = "2020-01-22"
N_DAYS = 650
NOISE_SEED = 20200122

COLUMNS = [
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
    "international_movement_restrictions",
    "transport_closing",
]


def wave(n_days: int, center: int, rise: float, fall: float, height: float) -> np.ndarray:
    """Asymmetric gaussian bump: distinct widths before and after the peak."""
    t = np.arange(n_days, dtype=np.float64)
    width = np.where(t < center, rise, fall)
    return height * np.exp(-0.5 * ((t - center) / width) ** 2)


def steps(n_days: int, intervals: list[tuple[int, int, int]], default: int = 0) -> np.ndarray:
    """Piecewise-constant policy level from closed [start, end] day intervals."""
    out = np.full(n_days, default, dtype=np.int64)
    for start, end, level in intervals:
        out[max(0, start) : min(n_days, end + 1)] = level
    return out


def ramp(n_days: int, knots: list[tuple[int, float]]) -> np.ndarray:
    """Piecewise-linear daily series through (day, value) knots."""
    days = [k[0] for k in knots]
    values = [k[1] for k in knots]
    return np.interp(np.arange(n_days), days, values)


def _noisy_cumulative(daily: np.ndarray, rng: np.random.Generator,
                      weekend: np.ndarray, dip: float = 0.75) -> np.ndarray:
    noise = rng.lognormal(mean=0.0, sigma=0.04, size=daily.size)
    factor = np.where(weekend, dip, 1.0)
    return np.round(np.cumsum(np.clip(daily * noise * factor, 0.0, None))).astype(np.int64)


def build_country(
    hosp_waves: list[tuple[int, float, float, float]],
    death_waves: list[tuple[int, float, float, float]],
    case_waves: list[tuple[int, float, float, float]],
    test_knots: list[tuple[int, float]],
    vaccine_knots: list[tuple[int, float]],
    stay_home: list[tuple[int, int, int]],
    school: list[tuple[int, int, int]],
    workplace: list[tuple[int, int, int]],
    testing_policy: list[tuple[int, int, int]],
    tracing: list[tuple[int, int, int]],
    international: list[tuple[int, int, int]],
    transport: list[tuple[int, int, int]] | None,
    hosp_report_start: int,
    test_report_start: int,
    rng: np.random.Generator,
) -> pd.DataFrame:
    n_days = N_DAYS
    dates = pd.date_range(START_DATE, periods=n_days, freq="D")
    weekend = dates.dayofweek.to_numpy() >= 5

    def total(waves: list[tuple[int, float, float, float]]) -> np.ndarray:
        out = np.zeros(n_days)
        for center, rise, fall, height in waves:
            out += wave(n_days, center, rise, fall, height)
        return out

    hosp = np.round(total(hosp_waves) * rng.lognormal(0.0, 0.03, n_days)).astype(np.int64)
    confirmed = _noisy_cumulative(total(case_waves), rng, weekend)
    deaths = _noisy_cumulative(total(death_waves), rng, weekend)
    tests = _noisy_cumulative(ramp(n_days, test_knots), rng, weekend)
    vaccines = np.round(np.cumsum(ramp(n_days, vaccine_knots))).astype(np.int64)

    frame = pd.DataFrame(
        {
            "date": dates.strftime("%Y-%m-%d"),
            "confirmed": confirmed,
            "deaths": deaths,
            "hosp": hosp.astype(object),
            "tests": tests.astype(object),
            "vaccines": vaccines,
            "stay_home_restrictions": steps(n_days, stay_home),
            "school_closing": steps(n_days, school),
            "workplace_closing": steps(n_days, workplace),
            "testing_policy": steps(n_days, testing_policy),
            "contact_tracing": steps(n_days, tracing),
            "international_movement_restrictions": steps(n_days, international),
        }
    )
    # reporting for these series only began partway into the record
    frame.loc[: hosp_report_start - 1, "hosp"] = ""
    frame.loc[: test_report_start - 1, "tests"] = ""
    if transport is not None:
        frame["transport_closing"] = steps(n_days, transport)
    assert int(confirmed[-1]) < POPULATION
    return frame


def make_gbr(rng: np.random.Generator) -> pd.DataFrame:
    """Britain, national surveillance counts. Vaccination data from day 354."""
    return build_country(
        # spring-2020 wave, autumn shoulder, winter-2021 peak, delta-era plateau
        hosp_waves=[(81, 10, 16, 20000.0), (305, 26, 18, 16500.0), (362, 13, 22, 39000.0),
                    (560, 30, 45, 6000.0), (625, 30, 30, 8500.0)],
        death_waves=[(79, 10, 16, 950.0), (307, 26, 20, 430.0), (367, 14, 24, 1250.0),
                     (570, 30, 45, 110.0), (630, 30, 30, 150.0)],
        case_waves=[(76, 10, 15, 5000.0), (300, 26, 22, 24000.0), (360, 13, 20, 58000.0),
                    (555, 28, 38, 36000.0), (632, 28, 18, 36000.0)],
        test_knots=[(0, 0.0), (38, 2000.0), (60, 10000.0), (100, 80000.0),
                    (150, 150000.0), (229, 250000.0), (300, 400000.0),
                    (360, 750000.0), (430, 900000.0), (520, 700000.0),
                    (600, 850000.0), (N_DAYS - 1, 900000.0)],
        vaccine_knots=[(0, 0.0), (353, 0.0), (354, 50000.0), (400, 400000.0),
                       (450, 700000.0), (520, 350000.0), (560, 150000.0),
                       (N_DAYS - 1, 120000.0)],
        stay_home=[(61, 131, 1), (288, 314, 1), (350, 431, 1)],
        school=[(58, 160, 3), (161, 229, 2), (230, 349, 1), (350, 410, 3),
                (411, N_DAYS - 1, 1)],
        workplace=[(58, 60, 1), (61, 131, 3), (132, 229, 2), (230, 287, 1),
                   (288, 314, 3), (315, 349, 2), (350, 431, 3), (432, 543, 2),
                   (544, N_DAYS - 1, 1)],
        testing_policy=[(40, 109, 1), (110, 289, 2), (290, N_DAYS - 1, 3)],
        tracing=[(9, 52, 1), (127, N_DAYS - 1, 2)],
        international=[(138, 353, 2), (354, 480, 3), (481, N_DAYS - 1, 2)],
        transport=[(61, 131, 2), (132, 180, 1), (288, 314, 2), (350, 431, 2)],
        hosp_report_start=58,
        test_report_start=38,
        rng=rng,
    )


def make_isr(rng: np.random.Generator) -> pd.DataFrame:
    """Israel, native population 9.2 M. Vaccination data from day 333."""
    return build_country(
        # small spring wave, summer wave, autumn peak, winter peak, delta wave
        hosp_waves=[(84, 10, 15, 180.0), (190, 28, 24, 380.0), (257, 16, 16, 900.0),
                    (369, 16, 22, 1200.0), (601, 22, 26, 1100.0)],
        death_waves=[(90, 12, 18, 5.0), (195, 28, 26, 10.0), (262, 16, 18, 30.0),
                     (374, 16, 24, 40.0), (607, 22, 28, 28.0)],
        case_waves=[(82, 10, 14, 500.0), (185, 26, 24, 1800.0), (253, 14, 14, 7000.0),
                    (365, 14, 18, 8300.0), (595, 18, 22, 9500.0)],
        test_knots=[(0, 0.0), (28, 500.0), (130, 30000.0), (230, 90000.0),
                    (330, 100000.0), (560, 200000.0), (600, 300000.0),
                    (N_DAYS - 1, 250000.0)],
        vaccine_knots=[(0, 0.0), (332, 0.0), (333, 8000.0), (363, 80000.0),
                       (395, 60000.0), (430, 15000.0), (480, 5000.0),
                       (N_DAYS - 1, 3000.0)],
        stay_home=[(63, 103, 1), (240, 269, 1), (340, 380, 1)],
        school=[(52, 120, 3), (121, 179, 1), (180, 239, 2), (240, 299, 3),
                (300, 339, 1), (340, 395, 3), (396, N_DAYS - 1, 1)],
        workplace=[(56, 62, 1), (63, 103, 3), (104, 239, 1), (240, 269, 3),
                   (270, 339, 1), (340, 380, 3), (381, N_DAYS - 1, 1)],
        testing_policy=[(28, 89, 1), (90, 209, 2), (210, N_DAYS - 1, 3)],
        tracing=[(30, 55, 1), (56, 449, 2), (450, N_DAYS - 1, 1)],
        international=[(49, 199, 3), (200, 239, 1), (240, N_DAYS - 1, 3)],
        transport=None,  # internal movement restrictions were not reported separately
        hosp_report_start=55,
        test_report_start=28,
        rng=rng,
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=Path(__file__).resolve().parent.parent / "data",
                        type=Path, help="output directory")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(NOISE_SEED)
    for name, builder in (("gbr", make_gbr), ("isr", make_isr)):
        frame = builder(rng)
        path = args.out / f"{name}.csv"
        frame.to_csv(path, index=False)
        print(f"wrote {path} ({len(frame)} days)")


if __name__ == "__main__":
    main()

"""Regenerate the bundled traces under data/ from their recorded seeds."""

from pathlib import Path

from dspforecast.cli import main

DATA = Path(__file__).resolve().parents[1] / "data"

TRACES = {
    # trended hourly trace with light raw noise, used to check dataset adjustment
    "synth_hourly.csv": ["--seed", "7", "--trend", "0.004", "--noise", "0.005"],
    # flat daily-seasonal trace for the seasonal-method comparison
    "synth_seasonal_hourly.csv": ["--seed", "0", "--trend", "0", "--noise", "0.015"],
}

if __name__ == "__main__":
    for name, flags in TRACES.items():
        main(["synth", "--out", str(DATA / name), "--days", "28", "--step", "3600", *flags])

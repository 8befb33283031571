"""Time-series ingestion, windowing, normalization and synthetic generation.

CSV schema (one file per client):
  timestamp,load,temperature,windspeed,floor_area,wall_area,window_area
ISO-8601 timestamps at a strict 15-minute cadence. Hour-of-day and
day-of-week are derived from the timestamp, giving 7 feature channels per
step: [hour, day-of-week, temperature, windspeed, floor_area, wall_area,
window_area], with hour and day-of-week scaled into [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

CADENCE = np.timedelta64(15, "m")
CSV_COLUMNS = ("timestamp", "load", "temperature", "windspeed",
               "floor_area", "wall_area", "window_area")
EXOG_COLUMNS = CSV_COLUMNS[2:]
N_FEATURES = 7
STD_FLOOR = 1e-8
STEPS_PER_DAY = 96
STEPS_PER_WEEK = 672


class DataError(ValueError):
    pass


@dataclass
class ClientSeries:
    """One client's validated load series plus per-step feature vectors."""

    timestamps: np.ndarray          # datetime64[m], strictly 15-min cadence
    load: np.ndarray                # (n,) kW
    exog: np.ndarray                # (n, 5) temperature..window_area
    name: str = "client"

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[m]")
        self.load = np.asarray(self.load, dtype=np.float64)
        self.exog = np.asarray(self.exog, dtype=np.float64)
        n = len(self.timestamps)
        if self.load.shape != (n,) or self.exog.shape != (n, len(EXOG_COLUMNS)):
            raise DataError(
                f"{self.name}: inconsistent lengths "
                f"(timestamps {n}, load {self.load.shape}, exog {self.exog.shape})"
            )
        if n >= 2:
            deltas = np.diff(self.timestamps)
            bad = np.nonzero(deltas != CADENCE)[0]
            if bad.size:
                r = int(bad[0])
                raise DataError(
                    f"{self.name}: non-uniform cadence at row {r + 1}: "
                    f"{self.timestamps[r]} -> {self.timestamps[r + 1]} (expected 15 min)"
                )
        if np.isnan(self.load).any():
            rows = np.nonzero(np.isnan(self.load))[0]
            raise DataError(f"{self.name}: NaN load at rows {rows[:5].tolist()}")
        if np.isnan(self.exog).any():
            rows = np.nonzero(np.isnan(self.exog).any(axis=1))[0]
            raise DataError(f"{self.name}: NaN feature at rows {rows[:5].tolist()}")

    def __len__(self) -> int:
        return len(self.load)

    def features(self) -> np.ndarray:
        """(n, 7) feature matrix with derived time channels first."""
        ts = pd.DatetimeIndex(self.timestamps)
        hour = ts.hour.to_numpy(dtype=np.float64) / 23.0
        dow = ts.dayofweek.to_numpy(dtype=np.float64) / 6.0
        return np.column_stack([hour, dow, self.exog])


def load_csv(path, name: str | None = None) -> ClientSeries:
    path = Path(path)
    df = pd.read_csv(path)
    missing = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    try:
        ts = pd.to_datetime(df["timestamp"]).to_numpy()
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: bad timestamps: {exc}") from exc
    return ClientSeries(
        timestamps=ts,
        load=df["load"].to_numpy(dtype=np.float64),
        exog=df[list(EXOG_COLUMNS)].to_numpy(dtype=np.float64),
        name=name or path.stem,
    )


def write_csv(series: ClientSeries, path) -> None:
    df = pd.DataFrame({"timestamp": pd.DatetimeIndex(series.timestamps).strftime("%Y-%m-%dT%H:%M:%S")})
    df["load"] = series.load
    for k, col in enumerate(EXOG_COLUMNS):
        df[col] = series.exog[:, k]
    df.to_csv(path, index=False)


# -- normalization ------------------------------------------------------------

@dataclass
class Scaler:
    """Per-channel affine normalization fitted on the training split.

    Channel 0 is the load; channels 1..7 are the features. The two time
    channels are already in [0, 1] and pass through (mean 0, std 1).
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, chans: np.ndarray) -> "Scaler":
        mean = chans.mean(axis=0)
        std = np.maximum(chans.std(axis=0), STD_FLOOR)
        # pass-through for hour / day-of-week channels
        mean[1] = mean[2] = 0.0
        std[1] = std[2] = 1.0
        return cls(mean, std)

    def transform(self, chans: np.ndarray) -> np.ndarray:
        return (chans - self.mean) / self.std

    def denorm_load(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y) * self.std[0] + self.mean[0]


@dataclass
class WindowedDataset:
    """Supervised pairs: inputs (n, T, 8) and labels (n,), normalized.

    Window i covers series rows i .. i+T-1 and its label sits at row
    i+T+L-1, so the last input load is exactly the lag-L persistence
    forecast for the label.
    """

    inputs: np.ndarray
    labels: np.ndarray
    lookback: int
    lookahead: int
    scaler: Scaler

    def __len__(self) -> int:
        return len(self.labels)

    def labels_denorm(self) -> np.ndarray:
        return self.scaler.denorm_load(self.labels)

    def persistence_denorm(self) -> np.ndarray:
        return self.scaler.denorm_load(self.inputs[:, -1, 0])


@dataclass
class ClientDataset:
    train: WindowedDataset
    val: WindowedDataset
    test: WindowedDataset
    scaler: Scaler
    name: str = "client"


def _window(chans: np.ndarray, lookback: int, lookahead: int, scaler: Scaler) -> WindowedDataset:
    n = len(chans) - (lookback + lookahead) + 1
    if n <= 0:
        inputs = np.zeros((0, lookback, chans.shape[1]))
        labels = np.zeros(0)
    else:
        idx = np.arange(n)[:, None] + np.arange(lookback)[None, :]
        inputs = chans[idx]
        labels = chans[np.arange(n) + lookback + lookahead - 1, 0]
    return WindowedDataset(inputs, labels, lookback, lookahead, scaler)


def split_and_window(series: ClientSeries, fractions=(0.8, 0.1, 0.1),
                     lookback: int = 12, lookahead: int = 4) -> ClientDataset:
    """Contiguous time-ordered train/val/test splits, windowed within each
    split (no window straddles a boundary); normalization statistics come
    from the training split only."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions must be three positive numbers summing to 1, got {fractions}")
    n = len(series)
    n_train = int(round(n * fractions[0]))
    n_val = int(round(n * fractions[1]))
    chans = np.column_stack([series.load, series.features()])
    parts = (chans[:n_train], chans[n_train : n_train + n_val], chans[n_train + n_val :])
    if len(parts[0]) < lookback + lookahead + 1:
        raise DataError(
            f"{series.name}: training split of {len(parts[0])} rows is too short "
            f"for lookback {lookback} + lookahead {lookahead}"
        )
    scaler = Scaler.fit(parts[0])
    train, val, test = (_window(scaler.transform(p), lookback, lookahead, scaler) for p in parts)
    return ClientDataset(train, val, test, scaler, name=series.name)


# -- synthetic generator ------------------------------------------------------

@dataclass
class SyntheticSpec:
    n_clients: int = 6
    length: int = 4 * STEPS_PER_WEEK
    scale_spread: float = 0.6
    offset_spread: float = 0.5
    phase_spread: float = 1.0
    base_load: float = 50.0
    daily_amp: float = 12.0
    weekly_amp: float = 4.0
    noise_std: float = 1.5
    start: str = "2023-01-01T00:00"

    def __post_init__(self):
        if min(self.scale_spread, self.offset_spread, self.phase_spread) < 0:
            raise DataError("spread parameters must be non-negative")
        if self.length < 2 * STEPS_PER_WEEK:
            raise DataError(
                f"length {self.length} too short; need at least two weeks "
                f"({2 * STEPS_PER_WEEK} points) for daily and weekly harmonics"
            )


def generate_synthetic(spec: SyntheticSpec, rng: np.random.Generator) -> list[ClientSeries]:
    """Heterogeneous client fleet: per-client offset, amplitude scale, daily
    phase and waveform shape drawn around a common profile. Temperature is
    correlated with the daily harmonic; static building features are constant
    per client."""
    t = np.arange(spec.length, dtype=np.float64)
    timestamps = np.datetime64(spec.start, "m") + (np.arange(spec.length) * 15).astype("timedelta64[m]")
    day = 2 * np.pi * t / STEPS_PER_DAY
    week = 2 * np.pi * t / STEPS_PER_WEEK
    out = []
    for c in range(spec.n_clients):
        offset = spec.base_load * (1.0 + spec.offset_spread * rng.uniform(-1, 1))
        scale = float(np.exp(spec.scale_spread * rng.uniform(-1, 1)))
        phase = np.pi * spec.phase_spread * rng.uniform(-1, 1)
        # second-harmonic weight controls per-client waveform shape
        shape2 = spec.phase_spread * rng.uniform(-0.6, 0.6)
        load = (
            offset
            + scale * spec.daily_amp * (np.sin(day + phase) + shape2 * np.sin(2 * day + 2 * phase))
            + scale * spec.weekly_amp * np.sin(week)
            + scale * spec.noise_std * rng.normal(size=spec.length)
        )
        temp = 15.0 + 8.0 * np.sin(day + phase - 0.5) + 0.5 * rng.normal(size=spec.length)
        wind = np.maximum(0.0, 5.0 + 2.0 * np.sin(day) + 0.8 * rng.normal(size=spec.length))
        floor_area = rng.uniform(500.0, 5000.0)
        wall_area = rng.uniform(200.0, 2000.0)
        window_area = rng.uniform(20.0, 400.0)
        exog = np.column_stack([
            temp, wind,
            np.full(spec.length, floor_area),
            np.full(spec.length, wall_area),
            np.full(spec.length, window_area),
        ])
        out.append(ClientSeries(timestamps, load, exog, name=f"client{c:02d}"))
    return out

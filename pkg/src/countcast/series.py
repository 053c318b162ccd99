from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

HOUR = pd.Timedelta(hours=1)


@dataclass(frozen=True)
class CountSeries:
    """Gap-free hourly count sequence starting at ``start``."""

    start: pd.Timestamp
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        start = pd.Timestamp(self.start)
        if start.tzinfo is not None:
            raise ValueError("timestamps must be naive local time")
        if start != start.floor("h"):
            raise ValueError(f"series start {start} is not on an hour boundary")
        values = np.asarray(self.values)
        if values.ndim != 1 or len(values) == 0:
            raise ValueError("a count series needs at least one value")
        if not np.issubdtype(values.dtype, np.integer):
            if not np.all(np.isfinite(values)) or np.any(values != np.round(values)):
                raise ValueError("counts must be integers")
        values = values.astype(np.int64)
        if np.any(values < 0):
            raise ValueError("counts must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=len(self.values), freq="h")

    @property
    def end(self) -> pd.Timestamp:
        """Timestamp of the last observation."""
        return self.start + (len(self.values) - 1) * HOUR

    def index_of(self, ts) -> int:
        offset = (pd.Timestamp(ts) - self.start) / HOUR
        if offset != int(offset):
            raise ValueError(f"{ts} is not on the hourly grid of the series")
        return int(offset)

    def window(self, start=None, stop=None) -> "CountSeries":
        """Sub-series covering ``[start, stop)``; ``None`` means open-ended."""
        i = 0 if start is None else self.index_of(start)
        j = len(self) if stop is None else self.index_of(stop)
        if not 0 <= i < j <= len(self):
            raise ValueError(f"window [{start}, {stop}) lies outside the series")
        return CountSeries(self.start + i * HOUR, self.values[i:j])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"timestamp": self.timestamps, "count": self.values})

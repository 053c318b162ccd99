"""Optional SVG line charts of the report tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "countcast"


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_plots(frames: dict, out: Path) -> list[str]:
    names = []
    prof = frames["profile_hour_of_week.csv"]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
    for col, label in (("test", "observed (test)"), ("sim", "simulated"), ("train", "observed (train)")):
        if f"{col}_mean" in prof:
            ax1.plot(prof["hour_of_week"] / 24, prof[f"{col}_mean"], label=label)
            ax2.plot(prof["hour_of_week"] / 24, prof[f"{col}_sd"], label=label)
    ax1.set_ylabel("mean")
    ax2.set_ylabel("sd")
    ax2.set_xlabel("time of week (days from Sunday 00:00)")
    ax1.legend()
    _save(fig, out / "profile_hour_of_week.svg")
    names.append("profile_hour_of_week.svg")

    for period in ("weekly", "annual"):
        df = frames[f"{period}_averages.csv"]
        fig, ax = plt.subplots(figsize=(10, 4))
        for source, part in df.groupby("source", sort=False):
            ax.plot(range(len(part)) if period == "weekly" else part["period_start"].str[:4], part["mean"],
                    marker="" if period == "weekly" else "o", label=source)
        ax.set_ylabel("mean count per hour")
        ax.legend()
        _save(fig, out / f"{period}_averages.svg")
        names.append(f"{period}_averages.svg")

    if "bounds_overlay.csv" in frames:
        df = frames["bounds_overlay.csv"]
        b = df.drop_duplicates("hour_of_week").sort_values("hour_of_week")
        fig, ax = plt.subplots(figsize=(10, 4))
        ax.scatter(df["hour_of_week"] / 24, df["count"], s=2, color="gray", alpha=0.1)
        ax.plot(b["hour_of_week"] / 24, b["m"], "k--", label="m")
        ax.plot(b["hour_of_week"] / 24, b["M"], "k:", label="M")
        ax.set_xlabel("time of week (days from Sunday 00:00)")
        ax.legend()
        _save(fig, out / "bounds_overlay.svg")
        names.append("bounds_overlay.svg")
    return names

"""Track export: flown positions to CSV, plus a top-down plot beside it."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

from ..messages import TelemetrySample
from .config import ScenarioConfig

CSV_HEADER = ("sim_time_ms", "callsign", "east_m", "north_m", "up_m", "leg")

LEG_COLORS = {"initial": "tab:orange", "rerouted": "tab:green"}


def export_tracks(samples: Iterable[TelemetrySample],
                  path: str | Path) -> Path:
    path = Path(path)
    ordered = sorted(samples, key=lambda s: (s.timestamp_ms, s.callsign))
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in ordered:
            writer.writerow((s.timestamp_ms, s.callsign,
                             f"{s.east_m:.3f}", f"{s.north_m:.3f}",
                             f"{s.up_m:.3f}", s.leg))
    return path


def plot_tracks(samples: Sequence[TelemetrySample], csv_path: str | Path,
                config: ScenarioConfig | None = None) -> Path:
    """Render the ground tracks next to the CSV they came from."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    png_path = Path(csv_path).with_suffix(".png")
    fig, ax = plt.subplots(figsize=(7, 7))

    if config is not None:
        for fence in config.geofences:
            xs = [c[0] for c in fence.corners] + [fence.corners[0][0]]
            ys = [c[1] for c in fence.corners] + [fence.corners[0][1]]
            ax.fill(xs, ys, color="tab:red", alpha=0.25, zorder=1)
            ax.plot(xs, ys, color="tab:red", linewidth=1.0, zorder=2)
        for vd in config.vertidromes:
            for pad in vd.pads:
                ax.plot(*pad.center, marker="s", markersize=9,
                        color="0.3", zorder=3)
                ax.annotate(f"{vd.vertidrome_id}/{pad.pad_id}", pad.center,
                            textcoords="offset points", xytext=(6, 6),
                            fontsize=8)

    by_track: dict[tuple[str, str], list[TelemetrySample]] = {}
    for s in sorted(samples, key=lambda s: s.timestamp_ms):
        by_track.setdefault((s.callsign, s.leg), []).append(s)
    for (callsign, leg), points in sorted(by_track.items()):
        ax.plot([p.east_m for p in points], [p.north_m for p in points],
                color=LEG_COLORS.get(leg, "tab:blue"), linewidth=1.6,
                label=f"{callsign} ({leg})", zorder=4)

    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, linewidth=0.3, alpha=0.5)
    if by_track:
        ax.legend(loc="best", fontsize=8)
    if config is not None:
        ax.set_title(config.name)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return png_path

"""Standard 12-lead ECG rendering with clinical calibration.

Layout: three rows of four 2.5-second columns (I,II,III / aVR,aVL,aVF /
V1-V3 / V4-V6 reading down the columns, successive time segments across
them) above a continuous 10-second lead-II rhythm strip. Red grid at
25 mm/s and 10 mm/mV. Because the columns tile time left to right, an
absolute time t always lands at x = 25 t mm, so highlight windows are
simple vertical bands. Output is SVG with hashing and date metadata pinned,
so rendering the same record and spec twice is byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

import numpy as np

from .errors import ConfigurationError
from .records import DURATION_S, LEAD_NAMES, SAMPLE_RATE_HZ

MM_PER_SECOND = 25.0
MM_PER_MV = 10.0
ROW_HEIGHT_MM = 30.0
RHYTHM_LEAD = 1  # lead II
GRID_MAJOR_S = 0.2
GRID_MINOR_S = 0.04
SEGMENT_S = 2.5

# columns read top to bottom: I,II,III | aVR,aVL,aVF | V1,V2,V3 | V4,V5,V6
COLUMN_LEADS = [[0, 1, 2], [3, 4, 5], [6, 7, 8], [9, 10, 11]]

HIGHLIGHT_COLOR = "#9ecbff"
EMPHASIS_COLOR = "#d6e9ff"
TRACE_COLOR = "black"
GRID_MAJOR = "#f4a6a6"
GRID_MINOR = "#fbdcdc"


@dataclass
class RenderSpec:
    highlight_seconds: tuple[float, float] | None = None  # partial-prototype window
    emphasize_rhythm_strip: bool = False                  # rhythm-branch cue
    cutout: bool = False                                  # full-lead zoom of the window
    title: str = ""

    def __post_init__(self):
        if self.highlight_seconds is not None:
            lo, hi = self.highlight_seconds
            if not (0.0 <= lo < hi <= DURATION_S):
                raise ConfigurationError(
                    f"highlight window {self.highlight_seconds} outside 0..{DURATION_S} s"
                )
        if self.cutout and self.highlight_seconds is None:
            raise ConfigurationError("cutout requires a highlight window")


def _grid(ax, x0, x1, y0, y1):
    minor_mm = GRID_MINOR_S * MM_PER_SECOND
    major_mm = GRID_MAJOR_S * MM_PER_SECOND
    for x in np.arange(x0, x1 + 1e-9, minor_mm):
        ax.plot([x, x], [y0, y1], color=GRID_MINOR, lw=0.3, zorder=0)
    for y in np.arange(y0, y1 + 1e-9, minor_mm):
        ax.plot([x0, x1], [y, y], color=GRID_MINOR, lw=0.3, zorder=0)
    for x in np.arange(x0, x1 + 1e-9, major_mm):
        ax.plot([x, x], [y0, y1], color=GRID_MAJOR, lw=0.6, zorder=0)
    for y in np.arange(y0, y1 + 1e-9, major_mm):
        ax.plot([x0, x1], [y, y], color=GRID_MAJOR, lw=0.6, zorder=0)


def render(signal: np.ndarray, spec: RenderSpec, out_path) -> None:
    """Write a deterministic SVG of one 12x1000 record under the spec."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape != (12, 1000):
        raise ConfigurationError(f"expected (12, 1000) signal, got {signal.shape}")
    t = np.arange(signal.shape[1]) / SAMPLE_RATE_HZ

    main_w = DURATION_S * MM_PER_SECOND
    cut_w = 62.0 if spec.cutout else 0.0
    width_mm = main_w + cut_w + 4.0
    height_mm = 4 * ROW_HEIGHT_MM + 8.0

    plt.rcParams["svg.hashsalt"] = "ecg-render"
    fig = plt.figure(figsize=(width_mm / 25.4, height_mm / 25.4))
    ax = fig.add_axes([0, 0, 1, 1])
    ax.set_xlim(0, width_mm)
    ax.set_ylim(-height_mm, 0)
    ax.axis("off")

    _grid(ax, 0, main_w, -4 * ROW_HEIGHT_MM - 4, -4)

    if spec.title:
        ax.text(2, -2.5, spec.title, fontsize=7, family="monospace", va="center")

    def row_center(row):
        return -4 - row * ROW_HEIGHT_MM - ROW_HEIGHT_MM / 2

    if spec.emphasize_rhythm_strip:
        y_c = row_center(3)
        ax.add_patch(Rectangle((0, y_c - ROW_HEIGHT_MM / 2), main_w, ROW_HEIGHT_MM,
                               facecolor=EMPHASIS_COLOR, edgecolor="none", zorder=0.5))

    if spec.highlight_seconds is not None:
        lo, hi = spec.highlight_seconds
        ax.add_patch(Rectangle((lo * MM_PER_SECOND, -4 - 4 * ROW_HEIGHT_MM),
                               (hi - lo) * MM_PER_SECOND, 4 * ROW_HEIGHT_MM,
                               facecolor=HIGHLIGHT_COLOR, alpha=0.45,
                               edgecolor="none", zorder=0.6))

    # three rows of 2.5 s segments
    seg_len = int(SEGMENT_S * SAMPLE_RATE_HZ)
    for col, leads in enumerate(COLUMN_LEADS):
        sl = slice(col * seg_len, (col + 1) * seg_len)
        for row, lead in enumerate(leads):
            y_c = row_center(row)
            ax.plot(t[sl] * MM_PER_SECOND, y_c + signal[lead, sl] * MM_PER_MV,
                    color=TRACE_COLOR, lw=0.55, zorder=2)
            ax.text(col * SEGMENT_S * MM_PER_SECOND + 1.0, y_c + ROW_HEIGHT_MM / 2 - 2.5,
                    LEAD_NAMES[lead], fontsize=6, family="monospace", zorder=3)

    # full-duration lead-II rhythm strip
    y_c = row_center(3)
    ax.plot(t * MM_PER_SECOND, y_c + signal[RHYTHM_LEAD] * MM_PER_MV,
            color=TRACE_COLOR, lw=0.55, zorder=2)
    ax.text(1.0, y_c + ROW_HEIGHT_MM / 2 - 2.5, LEAD_NAMES[RHYTHM_LEAD],
            fontsize=6, family="monospace", zorder=3)

    if spec.cutout:
        lo, hi = spec.highlight_seconds
        i0, i1 = int(lo * SAMPLE_RATE_HZ), int(np.ceil(hi * SAMPLE_RATE_HZ))
        x0 = main_w + 6.0
        zoom_w = 52.0
        cut = signal[:, i0:max(i1, i0 + 2)]
        xs = np.linspace(x0, x0 + zoom_w, cut.shape[1])
        lane = (4 * ROW_HEIGHT_MM) / 12.0
        for lead in range(12):
            y_lead = -4 - lead * lane - lane / 2
            ax.plot(xs, y_lead + cut[lead] * (MM_PER_MV * 0.35),
                    color=TRACE_COLOR, lw=0.5, zorder=2)
            ax.text(x0 - 4.5, y_lead, LEAD_NAMES[lead], fontsize=4.5,
                    family="monospace", va="center", zorder=3)
        ax.add_patch(Rectangle((x0, -4 - 4 * ROW_HEIGHT_MM), zoom_w, 4 * ROW_HEIGHT_MM,
                               facecolor="none", edgecolor=HIGHLIGHT_COLOR, lw=0.8,
                               zorder=1))

    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)

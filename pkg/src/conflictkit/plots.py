"""Figure rendering for the report-producing commands.

Every renderer takes already-computed rows and writes a PNG next to the
delimited data the command emits; nothing here computes statistics. The
Agg backend is forced so rendering works headless and the bytes are stable
across runs.
"""

from __future__ import annotations

from datetime import date
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be set first

from .agonism import ScoredConversation, ZoneThresholds
from .model import EvalReport
from .stats import TopicSummaryReport

_IN_ZONE_COLOR = "#2a9d8f"
_OUTSIDE_COLOR = "#9a9a9a"


def render_cube(
    scored: Sequence[ScoredConversation],
    path: str | Path,
    thresholds: ZoneThresholds = ZoneThresholds(),
) -> Path:
    """3-d scatter of (T, S, C) triples with the agonism-zone box outlined."""
    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(111, projection="3d")
    for in_zone, color, label in (
        (True, _IN_ZONE_COLOR, "in zone"),
        (False, _OUTSIDE_COLOR, "outside"),
    ):
        pts = [s for s in scored if s.in_zone is in_zone]
        if not pts:
            continue
        ax.scatter(
            [s.triple.toxicity for s in pts],
            [s.triple.constructiveness for s in pts],
            [s.triple.conflict for s in pts],
            c=color,
            s=18,
            depthshade=False,
            label=label,
        )
    # edges of the zone box: T in [0, maxT], S in [minS, 1], C in [minC, 1]
    t0, t1 = 0.0, thresholds.max_toxicity
    s0, s1 = thresholds.min_constructiveness, 1.0
    c0, c1 = thresholds.min_conflict, 1.0
    corners = [(t, s, c) for t in (t0, t1) for s in (s0, s1) for c in (c0, c1)]
    edges = [
        (a, b)
        for i, a in enumerate(corners)
        for b in corners[i + 1 :]
        if sum(x != y for x, y in zip(a, b)) == 1
    ]
    for a, b in edges:
        ax.plot(
            [a[0], b[0]], [a[1], b[1]], [a[2], b[2]],
            color=_IN_ZONE_COLOR, linewidth=0.8, alpha=0.6,
        )
    ax.set_xlabel("toxicity")
    ax.set_ylabel("constructiveness")
    ax.set_zlabel("conflict")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_zlim(0, 1)
    ax.legend(loc="upper left")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_sparklines(
    series: Mapping[str, Sequence[tuple[date, int]]], path: str | Path
) -> Path:
    """Small-multiple message counts per topic on a shared time axis."""
    topics = sorted(series)
    if not topics:
        raise ValueError("no series to render")
    fig, axes = plt.subplots(
        len(topics), 1, figsize=(8, max(1.0, 0.75 * len(topics))), sharex=True
    )
    if len(topics) == 1:
        axes = [axes]
    for ax, topic in zip(axes, topics):
        points = series[topic]
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.fill_between(xs, ys, color=_IN_ZONE_COLOR, alpha=0.35, linewidth=0)
        ax.plot(xs, ys, color=_IN_ZONE_COLOR, linewidth=1.0)
        ax.set_ylabel(topic, rotation=0, ha="right", va="center", fontsize=7)
        ax.set_yticks([])
        for spine in ("top", "right", "left"):
            ax.spines[spine].set_visible(False)
    fig.autofmt_xdate()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_topic_summary(report: TopicSummaryReport, path: str | Path) -> Path:
    """Horizontal bars: conversations per topic, shaded by conflict rate."""
    rows = list(report.rows)
    fig, ax = plt.subplots(figsize=(8, max(2.0, 0.4 * len(rows))))
    ys = range(len(rows))
    cmap = plt.get_cmap("RdYlGn_r")
    colors = [cmap(r.conflict_rate) for r in rows]
    ax.barh(list(ys), [r.n for r in rows], color=colors)
    ax.set_yticks(list(ys))
    ax.set_yticklabels([r.topic for r in rows], fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("conversations")
    ax.set_title("conversations per topic (color = conflict rate)")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_confusion(report: EvalReport, path: str | Path, title: Optional[str] = None) -> Path:
    """2x2 confusion heatmap, conflict as the positive class."""
    grid = [[report.tn, report.fp], [report.fn, report.tp]]
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    im = ax.imshow(grid, cmap="Blues")
    for i in range(2):
        for j in range(2):
            peak = max(max(row) for row in grid)
            ax.text(
                j, i, str(grid[i][j]),
                ha="center", va="center",
                color="white" if grid[i][j] > peak / 2 else "black",
            )
    ax.set_xticks([0, 1], labels=["pred non-conflict", "pred conflict"])
    ax.set_yticks([0, 1], labels=["true non-conflict", "true conflict"])
    ax.set_title(title or "confusion matrix")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out

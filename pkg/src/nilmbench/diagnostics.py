"""Data-quality diagnostics: gaps, dropout rates and uptime per channel.

Sign convention: a perfect channel has dropout rate 0, so the rate reported
here is ``(expected - recorded) / expected`` (the fraction of expected
samples that are missing).  Expected samples over a span are counted as
``floor(span / nominal_period) + 1``, i.e. both endpoints inclusive.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .data import Building, Channel, Gap

# One lost packet should not register as a gap, hence the 3x default.
DEFAULT_GAP_FACTOR = 3.0


def default_gap_threshold(c: Channel) -> float:
    return DEFAULT_GAP_FACTOR * c.nominal_period


def detect_gaps(c: Channel, threshold: float) -> list[Gap]:
    """Gaps between consecutive samples spaced more than ``threshold`` apart.

    Returned gaps are ordered and non-overlapping.  A channel with fewer
    than 2 samples has no gaps.
    """
    if not threshold > 0:
        raise ValueError("gap threshold must be > 0")
    t = c.timestamps
    if t.size < 2:
        return []
    diffs = np.diff(t)
    idx = np.nonzero(diffs > threshold)[0]
    return [Gap(float(t[i]), float(t[i + 1])) for i in idx]


def _expected_samples(span: float, period: float) -> int:
    # 1e-9 slack tolerates float representation jitter in span/period.
    return int(math.floor(span / period + 1e-9)) + 1


def dropout_rate(c: Channel) -> float:
    """Fraction of expected samples missing, clamped to [0, 1]."""
    if len(c) < 2:
        return 0.0
    expected = _expected_samples(c.span, c.nominal_period)
    missing = max(expected - len(c), 0)
    return missing / expected


def dropout_rate_ignoring_gaps(c: Channel, gap_threshold: float | None = None) -> float:
    """Dropout rate over the contiguous sections between gaps.

    Each section's rate is weighted by its duration, so sensor-off periods do
    not count as lost samples.  Equals :func:`dropout_rate` when there are no
    gaps.
    """
    if len(c) < 2:
        return 0.0
    if gap_threshold is None:
        gap_threshold = default_gap_threshold(c)
    t = c.timestamps
    diffs = np.diff(t)
    boundaries = np.nonzero(diffs > gap_threshold)[0]
    starts = np.concatenate(([0], boundaries + 1))
    ends = np.concatenate((boundaries, [t.size - 1]))
    total_weight = 0.0
    weighted = 0.0
    for s, e in zip(starts, ends):
        if e <= s:
            continue  # single-sample section carries no duration
        span = float(t[e] - t[s])
        expected = _expected_samples(span, c.nominal_period)
        recorded = int(e - s + 1)
        rate = max(expected - recorded, 0) / expected
        weighted += span * rate
        total_weight += span
    if total_weight == 0.0:
        return 0.0
    return weighted / total_weight


def uptime(c: Channel, gap_threshold: float | None = None) -> float:
    """Recording span minus the duration of all gaps, in seconds."""
    if len(c) < 2:
        return 0.0
    if gap_threshold is None:
        gap_threshold = default_gap_threshold(c)
    gap_total = sum(g.duration for g in detect_gaps(c, gap_threshold))
    return c.span - gap_total


@dataclass(frozen=True)
class ChannelDiagnostics:
    channel: str
    role: str
    gaps: tuple[Gap, ...]
    dropout_rate: float
    dropout_rate_ignoring_gaps: float
    uptime_seconds: float
    percent_uptime: float


@dataclass(frozen=True)
class DiagnosticReport:
    """Per-channel diagnostics for one building."""

    building_id: int
    gap_threshold: float | None
    channels: tuple[ChannelDiagnostics, ...]

    # CSV headers follow the naming used in dataset summary tables.
    _CSV_HEADER = (
        "Building,Role,Channel,Number of gaps,Dropout rate (percent),"
        "Dropout rate (percent) ignoring gaps,Up-time (days),Percentage up-time"
    )

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(self._CSV_HEADER + "\n")
        for d in self.channels:
            buf.write(
                f"{self.building_id},{d.role},{d.channel},{len(d.gaps)},"
                f"{100.0 * d.dropout_rate!r},{100.0 * d.dropout_rate_ignoring_gaps!r},"
                f"{d.uptime_seconds / 86400.0!r},{100.0 * d.percent_uptime!r}\n"
            )
        return buf.getvalue()

    def to_json_text(self) -> str:
        payload = {
            "building": self.building_id,
            "gap_threshold": self.gap_threshold,
            "channels": [
                {
                    "channel": d.channel,
                    "role": d.role,
                    "gaps": [[g.start, g.end] for g in d.gaps],
                    "dropout_rate": d.dropout_rate,
                    "dropout_rate_ignoring_gaps": d.dropout_rate_ignoring_gaps,
                    "uptime_seconds": d.uptime_seconds,
                    "percent_uptime": d.percent_uptime,
                }
                for d in self.channels
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def diagnose_channel(
    c: Channel, role: str, name: str, gap_threshold: float | None = None
) -> ChannelDiagnostics:
    threshold = gap_threshold if gap_threshold is not None else default_gap_threshold(c)
    gaps = tuple(detect_gaps(c, threshold))
    up = uptime(c, threshold)
    span = c.span
    return ChannelDiagnostics(
        channel=name,
        role=role,
        gaps=gaps,
        dropout_rate=dropout_rate(c),
        dropout_rate_ignoring_gaps=dropout_rate_ignoring_gaps(c, threshold),
        uptime_seconds=up,
        percent_uptime=up / span if span > 0 else 0.0,
    )


def diagnose(b: Building, gap_threshold: float | None = None) -> DiagnosticReport:
    """Run every diagnostic on every channel of the building.

    ``gap_threshold=None`` uses the per-channel default of
    ``3 * nominal_period``.
    """
    rows = [
        diagnose_channel(c, role, name, gap_threshold)
        for role, name, c in b.channels()
    ]
    return DiagnosticReport(
        building_id=b.id, gap_threshold=gap_threshold, channels=tuple(rows)
    )

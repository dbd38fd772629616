"""Received-signal-strength model for the buried-pipe radio link.

Signal strength depends only on the vertical water/soil depth between the
robot's antenna and the above-ground node; horizontal distance through air
contributes no measurable loss, so it is ignored by construction. The depth
dependence is a calibrated monotone table interpolated piecewise-linearly.
A frame decodes only when the received strength reaches the decode threshold.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

DEFAULT_TX_POWER_DBM = 14.0
DEFAULT_DECODE_THRESHOLD_DBM = -80.0
# Calibrated depth->RSS anchors: endpoints measured at 10 cm and 60 cm, with
# the middle point placing the -80 dBm decode crossing at the 40 cm read
# range (a straight line through the endpoints alone would cross near 54 cm).
DEFAULT_RSS_POINTS = ((10.0, -66.0), (40.0, -80.0), (60.0, -82.0))


@dataclass(frozen=True)
class LinkGeometry:
    """Vertical medium depth D and horizontal air distance H, both in cm."""

    D: float
    H: float = 0.0

    def __post_init__(self):
        if self.D < 0 or self.H < 0:
            raise ValueError("link distances must be >= 0")


@dataclass(frozen=True)
class RssTable:
    """Monotone depth-to-RSS calibration with a decode threshold."""

    points: tuple[tuple[float, float], ...] = DEFAULT_RSS_POINTS
    tx_power: float = DEFAULT_TX_POWER_DBM
    decode_threshold: float = DEFAULT_DECODE_THRESHOLD_DBM
    # depths shallower than the first point extrapolate at most this far
    shallow_margin: float = 10.0

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("RSS table needs at least two points")
        depths = [p[0] for p in self.points]
        rss = [p[1] for p in self.points]
        if any(d2 <= d1 for d1, d2 in zip(depths, depths[1:])):
            raise ValueError("RSS table depths must be strictly increasing")
        if any(r2 >= r1 for r1, r2 in zip(rss, rss[1:])):
            raise ValueError("RSS table must be strictly decreasing in RSS")


def rss_at(table: RssTable, geom: LinkGeometry) -> float:
    """Signal strength (dBm) at the given geometry; H has no effect.

    Piecewise-linear in depth; beyond the last point the final segment's
    slope extrapolates, and shallow depths extrapolate the first segment
    within the table's margin.
    """
    d = geom.D
    pts = table.points
    if d < pts[0][0] - table.shallow_margin:
        raise ValueError(
            f"depth {d:.1f} cm below calibrated range (min {pts[0][0]:.1f} cm "
            f"- margin {table.shallow_margin:.1f} cm)"
        )
    if d <= pts[0][0]:
        (d0, r0), (d1, r1) = pts[0], pts[1]
    elif d >= pts[-1][0]:
        (d0, r0), (d1, r1) = pts[-2], pts[-1]
    else:
        for (d0, r0), (d1, r1) in zip(pts, pts[1:]):
            if d0 <= d <= d1:
                break
    return r0 + (r1 - r0) * (d - d0) / (d1 - d0)


def link_up(table: RssTable, geom: LinkGeometry) -> bool:
    """True when a frame at this geometry decodes (RSS at or above threshold)."""
    return rss_at(table, geom) >= table.decode_threshold


def sample_rss(
    table: RssTable,
    geom: LinkGeometry,
    jitter_sigma: float = 0.0,
    rng: random.Random | None = None,
) -> float:
    """One fading draw: table RSS plus seeded Gaussian jitter in dBm."""
    base = rss_at(table, geom)
    if jitter_sigma > 0.0:
        if rng is None:
            raise ValueError("jitter requires a seeded rng")
        return base + rng.gauss(0.0, jitter_sigma)
    return base

"""Smooth UAV flight paths from random waypoints.

Per axis, the path is a quintic piecewise polynomial that matches waypoint
values, shape-preserving PCHIP slopes, and zero curvature at every knot, so it
is C2 in time and central differences of sampled positions track the analytic
velocity tightly. Waypoints are drawn inside a shrunken arena box: the quintic
can locally overshoot the waypoint hull by a small fraction of a leg, and the
margin absorbs that. Knot times are spaced by leg length at a cruise speed
below v_max; if the interpolant still peaks above v_max the time axis is
stretched once, which scales speed exactly and restores the bound.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import BPoly, PchipInterpolator

from .config import ScenarioConfig

CRUISE_FRACTION = 0.6      # target mean speed as a fraction of v_max
MEAN_LEG_M = 140.0         # expected distance between random waypoints, used for count
WAYPOINT_MARGIN_FRACTION = 0.08


def _waypoint_count(cfg: ScenarioConfig) -> int:
    total_time = cfg.num_slots * cfg.slot_duration_s
    path_len = CRUISE_FRACTION * cfg.v_max_ms * total_time
    return max(2, int(path_len / MEAN_LEG_M) + 1)


def random_waypoints(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    lows = np.array([ax[0] for ax in cfg.arena])
    highs = np.array([ax[1] for ax in cfg.arena])
    margin = WAYPOINT_MARGIN_FRACTION * (highs - lows)
    return rng.uniform(lows + margin, highs - margin, size=(_waypoint_count(cfg), 3))


def generate_trajectory(
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    waypoints: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Positions and velocities, both (num_slots, 3), sampled at slot times."""
    if waypoints is None:
        waypoints = random_waypoints(cfg, rng)
    waypoints = np.asarray(waypoints, dtype=np.float64)
    if waypoints.ndim != 2 or waypoints.shape[1] != 3:
        raise ValueError("waypoints must be (n, 3)")
    slot_times = np.arange(cfg.num_slots) * cfg.slot_duration_s

    if waypoints.shape[0] == 1:
        positions = np.tile(waypoints[0], (cfg.num_slots, 1))
        return positions, np.zeros_like(positions)

    # Drop coincident waypoints so knot times stay strictly increasing.
    legs = np.linalg.norm(np.diff(waypoints, axis=0), axis=1)
    keep = np.concatenate([[True], legs > 1e-9])
    waypoints = waypoints[keep]
    if waypoints.shape[0] == 1:
        positions = np.tile(waypoints[0], (cfg.num_slots, 1))
        return positions, np.zeros_like(positions)
    legs = np.linalg.norm(np.diff(waypoints, axis=0), axis=1)

    cruise = CRUISE_FRACTION * cfg.v_max_ms
    knot_times = np.concatenate([[0.0], np.cumsum(legs / cruise)])
    total_time = cfg.num_slots * cfg.slot_duration_s
    # Stretch or squeeze so the flight spans the acquisition window.
    knot_times *= total_time / knot_times[-1]

    def build(times):
        slopes = PchipInterpolator(times, waypoints, axis=0).derivative()(times)
        conditions = np.stack([waypoints, slopes, np.zeros_like(waypoints)], axis=1)
        spline = BPoly.from_derivatives(times, conditions)
        return spline, spline.derivative()

    spline, dspline = build(knot_times)
    speeds = np.linalg.norm(dspline(slot_times), axis=1)
    peak = speeds.max()
    if peak > cfg.v_max_ms:
        # Speed scales exactly as 1/s under t -> s*t, so one stretch suffices.
        spline, dspline = build(knot_times * (peak / (0.95 * cfg.v_max_ms)))

    positions = spline(slot_times)
    lows = np.array([ax[0] for ax in cfg.arena])
    highs = np.array([ax[1] for ax in cfg.arena])
    if np.any(positions < lows) or np.any(positions > highs):
        raise RuntimeError("trajectory escaped the arena; waypoint margin too small")
    return positions, dspline(slot_times)

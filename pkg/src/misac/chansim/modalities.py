"""Synthetic multimodal sensor streams with episodic corruption.

Canonical modality order is vision, radar, lidar, position, rf_history; every
consumer (feature assembly, gating reports, file layout) indexes modalities in
this order. Feature vectors are stored raw (unnormalized); z-scoring happens
at model-input assembly, using statistics the dataset manifest computed on its
training split.

Layouts:

* vision (16): frozen random projection of [azimuth, elevation, range/diag]
* radar (8): range, radial velocity, azimuth, elevation, sin/cos of both angles
* lidar (16): coarsely quantized relative position, 13 nearest scatterer distances
* position (6): position and velocity as reported by a navigation sensor
* rf_history (8): previous slot's beam index (one-hot compressed through a
  frozen projection), received signal strength, path loss; zeros at slot 0

Reliability flags mark corruption episodes and are metadata only; they are
never part of a model's input.
"""

from __future__ import annotations

import numpy as np

from .config import CorruptionSpec, ScenarioConfig
from .geometry import BS_POSITION

MODALITIES = ("vision", "radar", "lidar", "position", "rf_history")
MODALITY_WIDTHS = {"vision": 16, "radar": 8, "lidar": 16, "position": 6, "rf_history": 8}
FEATURE_WIDTH = sum(MODALITY_WIDTHS.values())

VISION_INPUTS = 3          # azimuth, elevation, normalized range
LIDAR_NEIGHBORS = 13
LIDAR_QUANTUM_M = 20.0
RF_BEAM_EMBED = 6
VELOCITY_NOISE_MS = 0.5

# Each sensor is deliberately partial: vision resolves bearing finely but drops
# out under corruption, radar ranges well yet points coarsely, lidar sits on a
# coarse spatial grid, and the navigation fix wanders by meters. No stream is
# sufficient on its own; their errors are independent, so fusion pays.
RADAR_RANGE_NOISE_M = 6.0
RADAR_ANGLE_NOISE_RAD = 0.12
RADAR_TRIG_NOISE = 0.08
LIDAR_REL_NOISE_M = 0.5
LIDAR_NEIGHBOR_NOISE_M = 1.0


def base_noise_scales(cfg: ScenarioConfig) -> dict[str, np.ndarray]:
    """Per-feature one-sigma sensor noise, in raw feature units."""
    scales = {
        "vision": np.full(16, 0.02),
        "radar": np.array([RADAR_RANGE_NOISE_M, 0.5,
                           RADAR_ANGLE_NOISE_RAD, RADAR_ANGLE_NOISE_RAD,
                           RADAR_TRIG_NOISE, RADAR_TRIG_NOISE,
                           RADAR_TRIG_NOISE, RADAR_TRIG_NOISE]),
        "lidar": np.concatenate([np.full(3, LIDAR_REL_NOISE_M),
                                 np.full(LIDAR_NEIGHBORS, LIDAR_NEIGHBOR_NOISE_M)]),
        "position": np.concatenate([np.full(3, cfg.position_noise_m),
                                    np.full(3, VELOCITY_NOISE_MS)]),
        "rf_history": np.concatenate([np.full(RF_BEAM_EMBED, 0.05), [1.0, 1.0]]),
    }
    return {k: v * cfg.noise_scale for k, v in scales.items()}


def draw_projections(cfg: ScenarioConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Frozen random feature projections; stored in the dataset manifest."""
    return {
        "vision": rng.normal(size=(VISION_INPUTS, MODALITY_WIDTHS["vision"]))
        / np.sqrt(VISION_INPUTS),
        "rf_history": rng.normal(size=(cfg.codebook_beams, RF_BEAM_EMBED)),
    }


def bearing(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Range, azimuth, elevation of scene points as seen from the array."""
    rel = positions - BS_POSITION
    rng_m = np.linalg.norm(rel, axis=1)
    az = np.arctan2(rel[:, 0], rel[:, 1])
    el = np.arcsin(rel[:, 2] / rng_m)
    return rng_m, az, el


def corruption_schedule(
    spec: CorruptionSpec | None,
    num_slots: int,
    width: int,
    sigma: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Additive corruption (or NaN rows marking dropout) and reliability flags.

    Returns ``(delta, reliable)`` where ``delta`` is (T, width); dropout slots
    hold NaN as an in-band marker the caller turns into hard zeros.
    """
    delta = np.zeros((num_slots, width))
    reliable = np.ones(num_slots, dtype=bool)
    if spec is None or spec.episode_probability == 0.0:
        return delta, reliable
    t = 0
    while t < num_slots:
        if rng.random() >= spec.episode_probability:
            t += 1
            continue
        length = min(spec.episode_length_slots, num_slots - t)
        reliable[t:t + length] = False
        if spec.mode == "dropout_to_zero":
            delta[t:t + length] = np.nan
        elif spec.mode == "gaussian_noise":
            delta[t:t + length] = spec.magnitude * sigma * rng.normal(size=(length, width))
        else:  # bias_drift: a fixed direction ramping up over the episode
            direction = rng.normal(size=width)
            direction /= np.linalg.norm(direction)
            ramp = (np.arange(length) + 1.0) / spec.episode_length_slots
            delta[t:t + length] = np.outer(ramp, spec.magnitude * sigma * direction)
        t += length
    return delta, reliable


def synthesize_modalities(
    cfg: ScenarioConfig,
    positions: np.ndarray,
    velocities: np.ndarray,
    scatterers: np.ndarray,
    beam_labels: np.ndarray,
    rss_db: np.ndarray,
    pl_db: np.ndarray,
    projections: dict[str, np.ndarray],
    seed_seq: np.random.SeedSequence,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """All five raw feature streams plus per-slot reliability flags."""
    T = positions.shape[0]
    rng_m, az, el = bearing(positions)
    arena_diag = float(np.linalg.norm([ax[1] - ax[0] for ax in cfg.arena]))

    unit = (positions - BS_POSITION) / rng_m[:, None]
    radial_v = np.sum(unit * velocities, axis=1)

    scat_d = np.linalg.norm(positions[:, None, :] - scatterers[None, :, :], axis=2)
    scat_d = np.sort(scat_d, axis=1)
    if scat_d.shape[1] >= LIDAR_NEIGHBORS:
        neighbors = scat_d[:, :LIDAR_NEIGHBORS]
    else:  # pad with the arena diagonal so the width is fixed
        pad = np.full((T, LIDAR_NEIGHBORS - scat_d.shape[1]), arena_diag)
        neighbors = np.concatenate([scat_d, pad], axis=1)

    rel_q = np.round((positions - BS_POSITION) / LIDAR_QUANTUM_M) * LIDAR_QUANTUM_M

    prev_beam_embed = np.zeros((T, RF_BEAM_EMBED))
    prev_rss = np.zeros(T)
    prev_pl = np.zeros(T)
    if T > 1:
        prev_beam_embed[1:] = projections["rf_history"][beam_labels[:-1]]
        prev_rss[1:] = rss_db[:-1]
        prev_pl[1:] = pl_db[:-1]

    raw = {
        "vision": np.column_stack([az, el, rng_m / arena_diag]) @ projections["vision"],
        "radar": np.column_stack([rng_m, radial_v, az, el,
                                  np.sin(az), np.cos(az), np.sin(el), np.cos(el)]),
        "lidar": np.concatenate([rel_q, neighbors], axis=1),
        "position": np.concatenate([positions, velocities], axis=1),
        "rf_history": np.concatenate([prev_beam_embed, prev_rss[:, None], prev_pl[:, None]],
                                     axis=1),
    }

    sigma = base_noise_scales(cfg)
    streams = seed_seq.spawn(len(MODALITIES))
    features: dict[str, np.ndarray] = {}
    reliability: dict[str, np.ndarray] = {}
    for name, stream in zip(MODALITIES, streams):
        noise_rng, corrupt_rng = (np.random.default_rng(s) for s in stream.spawn(2))
        width = MODALITY_WIDTHS[name]
        feat = raw[name] + sigma[name] * noise_rng.normal(size=(T, width))
        delta, reliable = corruption_schedule(
            cfg.corruption.get(name), T, width, sigma[name], corrupt_rng)
        dropped = np.isnan(delta[:, 0])
        feat = feat + np.where(np.isnan(delta), 0.0, delta)
        feat[dropped] = 0.0
        features[name] = feat
        reliability[name] = reliable
    return features, reliability

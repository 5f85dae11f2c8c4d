"""Geometric multipath channel: array response, codebook, rates, path synthesis.

The base station is a uniform linear array along the x axis at ``BS_POSITION``;
departure angles are measured against broadside, so a direction with unit
vector u maps to angle arcsin(u_x), which stays inside (-pi/2, pi/2) for any
scene point with y > 0. A narrowband channel is the gain-weighted sum of array
responses over a line-of-sight path and scatterer bounces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SPEED_OF_LIGHT_M_S, ScenarioConfig

BS_POSITION = np.array([0.0, 0.0, 5.0])


class PowerConstraintError(ValueError):
    """Precoder power exceeds the downlink budget."""


class DegenerateChannelError(ValueError):
    """An all-zero channel has no beam or path loss."""


@dataclass(frozen=True)
class PathSet:
    """Per-path complex gains, delays, and departure angles for one link.

    Index 0 is the line-of-sight path and must dominate in magnitude.
    """

    gains: np.ndarray       # complex, (L,)
    delays_s: np.ndarray    # float, (L,), strictly positive
    aods_rad: np.ndarray    # float, (L,), inside (-pi/2, pi/2)

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=np.complex128)
        d = np.asarray(self.delays_s, dtype=np.float64)
        a = np.asarray(self.aods_rad, dtype=np.float64)
        if not (g.ndim == d.ndim == a.ndim == 1 and g.size == d.size == a.size >= 1):
            raise ValueError("gains, delays, aods must be equal-length 1-D arrays")
        if np.any(d <= 0):
            raise ValueError("path delays must be strictly positive")
        if np.any(np.abs(a) >= np.pi / 2):
            raise ValueError("departure angles must lie inside (-pi/2, pi/2)")
        mags = np.abs(g)
        if np.any(mags[0] < mags[1:]):
            raise ValueError("line-of-sight gain must dominate every bounce path")
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "delays_s", d)
        object.__setattr__(self, "aods_rad", a)

    def __len__(self) -> int:
        return self.gains.size


def array_response(angle_rad: float, num_elements: int, spacing_m: float,
                   wavelength_m: float) -> np.ndarray:
    """ULA steering vector exp(j*2pi/lambda*d*m*sin(angle)), m = 0..M-1."""
    if num_elements < 1:
        raise ValueError("num_elements must be >= 1")
    m = np.arange(num_elements)
    phase = (2.0 * np.pi / wavelength_m) * spacing_m * np.sin(angle_rad)
    return np.exp(1j * phase * m)


def synthesize_channel(paths: PathSet, num_elements: int, spacing_m: float,
                       wavelength_m: float, carrier_hz: float) -> np.ndarray:
    """Narrowband channel: sum over paths of gain * e^{-j*2pi*fc*tau} * a(aod)."""
    h = np.zeros(num_elements, dtype=np.complex128)
    for gain, tau, aod in zip(paths.gains, paths.delays_s, paths.aods_rad):
        h += gain * np.exp(-2j * np.pi * carrier_hz * tau) * array_response(
            aod, num_elements, spacing_m, wavelength_m)
    return h


def dft_codebook(num_elements: int, num_beams: int) -> np.ndarray:
    """(B, M) unit-norm beams on the uniform sin-angle grid -1 + (2b+1)/B."""
    if num_beams < 2:
        raise ValueError("num_beams must be >= 2")
    sin_grid = -1.0 + (2.0 * np.arange(num_beams) + 1.0) / num_beams
    m = np.arange(num_elements)
    # Half-wavelength steering grid: (2pi/lambda)*(lambda/2)*sin = pi*sin.
    beams = np.exp(1j * np.pi * np.outer(sin_grid, m))
    return beams / np.sqrt(num_elements)


def beam_gains(h: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """|h^H f_b|^2 for every codebook row."""
    return np.abs(codebook @ np.conj(h)) ** 2


def optimal_beam(h: np.ndarray, codebook: np.ndarray) -> int:
    """Index of the gain-maximizing beam; ties resolve to the lowest index."""
    if not np.any(h != 0):
        raise DegenerateChannelError("all-zero channel has no optimal beam")
    return int(np.argmax(beam_gains(h, codebook)))


def path_loss_db(h: np.ndarray, num_elements: int) -> float:
    """-20*log10(||h|| / sqrt(M)): per-element average amplitude attenuation."""
    norm = float(np.linalg.norm(h))
    if norm == 0.0:
        raise DegenerateChannelError("all-zero channel has no path loss")
    return -20.0 * np.log10(norm / np.sqrt(num_elements))


def sum_rate(channels: np.ndarray, precoders: np.ndarray, noise_power_w: float,
             power_limit_w: float) -> float:
    """Downlink sum rate sum_k log2(1 + SINR_k) for channels (K,M), precoders (M,K).

    SINR_k = |h_k^H v_k|^2 / (sum_{j != k} |h_k^H v_j|^2 + noise). The total
    precoder power trace(V V^H) must respect the downlink budget.
    """
    H = np.asarray(channels, dtype=np.complex128)
    V = np.asarray(precoders, dtype=np.complex128)
    if H.ndim != 2 or V.ndim != 2 or H.shape[1] != V.shape[0] or H.shape[0] != V.shape[1]:
        raise ValueError(f"incompatible channel/precoder shapes {H.shape}, {V.shape}")
    if noise_power_w <= 0:
        raise ValueError("noise_power_w must be positive")
    total_power = float(np.sum(np.abs(V) ** 2))
    if total_power > power_limit_w * (1.0 + 1e-9):
        raise PowerConstraintError(
            f"precoder power {total_power:.6g} exceeds budget {power_limit_w:.6g}")
    amps = np.abs(np.conj(H) @ V) ** 2  # amps[k, j] = |h_k^H v_j|^2
    rate = 0.0
    for k in range(H.shape[0]):
        interference = amps[k].sum() - amps[k, k]
        rate += np.log2(1.0 + amps[k, k] / (interference + noise_power_w))
    return float(rate)


# --- scene-side path construction ------------------------------------------------


def scatter_positions(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniformly placed scatterers inside the arena, fixed for a dataset."""
    lows = np.array([ax[0] for ax in cfg.arena])
    highs = np.array([ax[1] for ax in cfg.arena])
    return rng.uniform(lows, highs, size=(cfg.scatterer_count, 3))


def departure_angle(target: np.ndarray) -> float:
    """Angle to a scene point from the array, measured against broadside."""
    d = target - BS_POSITION
    return float(np.arcsin(d[0] / np.linalg.norm(d)))


@dataclass(frozen=True)
class ScenePhases:
    """Gain phases and bounce attenuation, drawn once per dataset.

    Phases ride on top of the deterministic delay phase e^{-j*2pi*fc*tau};
    freezing them per scene keeps the channel a smooth function of geometry.
    """

    los_phase_rad: float
    bounce_phases_rad: np.ndarray   # (scatterer_count,)
    bounce_scale: np.ndarray        # (scatterer_count,), in [0.05, 0.3]


def draw_scene_phases(cfg: ScenarioConfig, rng: np.random.Generator) -> ScenePhases:
    return ScenePhases(
        los_phase_rad=float(rng.uniform(0.0, 2.0 * np.pi)),
        bounce_phases_rad=rng.uniform(0.0, 2.0 * np.pi, size=cfg.scatterer_count),
        bounce_scale=rng.uniform(0.05, 0.3, size=cfg.scatterer_count),
    )


def make_paths(uav_position: np.ndarray, scatterers: np.ndarray,
               phases: ScenePhases, cfg: ScenarioConfig) -> PathSet:
    """LoS plus the num_paths-1 nearest-scatterer bounces for one slot.

    LoS amplitude decays as 1 m / distance; bounce gains reuse the scene's
    frozen per-scatterer attenuation so they never overtake the LoS path.
    """
    d_los = float(np.linalg.norm(uav_position - BS_POSITION))
    gains = [np.exp(1j * phases.los_phase_rad) / d_los]
    delays = [d_los / SPEED_OF_LIGHT_M_S]
    aods = [departure_angle(uav_position)]

    n_bounce = cfg.num_paths - 1
    if n_bounce > 0:
        dist_to_uav = np.linalg.norm(scatterers - uav_position, axis=1)
        chosen = np.sort(np.argpartition(dist_to_uav, n_bounce - 1)[:n_bounce])
        for s in chosen:
            d_total = float(np.linalg.norm(scatterers[s] - BS_POSITION) + dist_to_uav[s])
            gains.append(phases.bounce_scale[s] / d_los
                         * np.exp(1j * phases.bounce_phases_rad[s]))
            delays.append(d_total / SPEED_OF_LIGHT_M_S)
            aods.append(departure_angle(scatterers[s]))
    return PathSet(np.array(gains), np.array(delays), np.array(aods))

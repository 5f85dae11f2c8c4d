"""Scene and acquisition configuration for the synthetic UAV link simulator."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

SPEED_OF_LIGHT_M_S = 299792458.0

CORRUPTION_MODES = ("gaussian_noise", "dropout_to_zero", "bias_drift")


class ConfigError(ValueError):
    """Configuration outside the simulator's contract."""


@dataclass(frozen=True)
class CorruptionSpec:
    """Episodic sensor degradation for one modality.

    Each slot outside an episode starts one with ``episode_probability``; an
    episode then runs for exactly ``episode_length_slots`` slots. ``magnitude``
    is expressed in multiples of the modality's per-feature base noise scale
    (raw feature units differ wildly within one vector, so absolute magnitudes
    would be meaningless after z-scoring). ``dropout_to_zero`` ignores it.
    """

    episode_probability: float = 0.0
    episode_length_slots: int = 20
    mode: str = "dropout_to_zero"
    magnitude: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.episode_probability <= 1.0):
            raise ConfigError("episode_probability must lie in [0, 1]")
        if self.episode_length_slots < 1:
            raise ConfigError("episode_length_slots must be >= 1")
        if self.mode not in CORRUPTION_MODES:
            raise ConfigError(f"unknown corruption mode {self.mode!r}")
        if self.magnitude < 0.0:
            raise ConfigError("magnitude must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    """Scene, link, and acquisition parameters for one synthetic dataset."""

    num_antennas: int = 4
    num_uavs: int = 1
    carrier_hz: float = 5.915e9
    bandwidth_hz: float = 20e6
    antenna_spacing_m: float | None = None  # None -> half wavelength
    num_paths: int = 3
    noise_power_w: float = 1e-6
    downlink_power_w: float = 1.0
    codebook_beams: int = 32
    num_slots: int = 1024
    slot_duration_s: float = 0.1
    arena: tuple = ((-80.0, 80.0), (40.0, 200.0), (10.0, 80.0))
    scatterer_count: int = 16
    v_max_ms: float = 12.0
    rng_seed: int = 12345
    split_fraction: float = 0.7
    position_noise_m: float = 10.0
    noise_scale: float = 1.0
    corruption: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ConfigError("num_antennas must be >= 1")
        if self.num_uavs < 1:
            raise ConfigError("num_uavs must be >= 1")
        if self.carrier_hz <= 0 or self.bandwidth_hz <= 0:
            raise ConfigError("carrier and bandwidth must be positive")
        if self.antenna_spacing_m is not None and self.antenna_spacing_m <= 0:
            raise ConfigError("antenna_spacing_m must be positive")
        if self.num_paths < 1:
            raise ConfigError("num_paths must be >= 1")
        if self.noise_power_w <= 0 or self.downlink_power_w <= 0:
            raise ConfigError("noise_power_w and downlink_power_w must be positive")
        if self.codebook_beams < 2:
            raise ConfigError("codebook_beams must be >= 2")
        if self.num_slots < 1:
            raise ConfigError("num_slots must be >= 1")
        if self.slot_duration_s <= 0:
            raise ConfigError("slot_duration_s must be positive")
        if len(self.arena) != 3 or any(len(ax) != 2 or ax[0] >= ax[1] for ax in self.arena):
            raise ConfigError("arena must be three (lo, hi) pairs with lo < hi")
        if self.scatterer_count < self.num_paths - 1:
            raise ConfigError("scatterer_count must cover num_paths - 1 bounces")
        if self.v_max_ms <= 0:
            raise ConfigError("v_max_ms must be positive")
        if not (0.0 < self.split_fraction < 1.0):
            raise ConfigError("split_fraction must lie in (0, 1)")
        if self.position_noise_m < 0 or self.noise_scale < 0:
            raise ConfigError("noise scales must be >= 0")
        for name, spec in self.corruption.items():
            if not isinstance(spec, CorruptionSpec):
                raise ConfigError(f"corruption[{name!r}] must be a CorruptionSpec")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT_M_S / self.carrier_hz

    @property
    def spacing_m(self) -> float:
        if self.antenna_spacing_m is not None:
            return self.antenna_spacing_m
        return 0.5 * self.wavelength_m

    def to_dict(self) -> dict:
        d = asdict(self)
        d["arena"] = [list(ax) for ax in self.arena]
        d["corruption"] = {k: asdict(v) for k, v in sorted(self.corruption.items())}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown scenario config keys: {sorted(extra)}")
        d = dict(d)
        if "arena" in d:
            d["arena"] = tuple(tuple(float(v) for v in ax) for ax in d["arena"])
        if "corruption" in d:
            corr = {}
            for name, spec in d["corruption"].items():
                if isinstance(spec, CorruptionSpec):
                    corr[name] = spec
                    continue
                ck = {f.name for f in fields(CorruptionSpec)}
                bad = set(spec) - ck
                if bad:
                    raise ConfigError(f"unknown corruption keys for {name!r}: {sorted(bad)}")
                corr[name] = CorruptionSpec(**spec)
            d["corruption"] = corr
        return cls(**d)


def canonical_json(obj) -> str:
    """Key-sorted, whitespace-free JSON; the hashing wire form."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ScenarioConfig) -> bytes:
    """32-byte digest identifying a scenario config."""
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode()).digest()


def default_corruption() -> dict:
    """Episodic degradation used by the desk-scale experiments.

    Vision drops out entirely, lidar degrades hard, radar stays nearly clean
    (weather-robust sensor), position drifts, rf history gets noisy.
    """
    return {
        "vision": CorruptionSpec(0.02, 20, "dropout_to_zero"),
        "radar": CorruptionSpec(0.02, 20, "gaussian_noise", 2.0),
        "lidar": CorruptionSpec(0.02, 20, "dropout_to_zero"),
        "position": CorruptionSpec(0.02, 20, "bias_drift", 10.0),
        "rf_history": CorruptionSpec(0.02, 20, "gaussian_noise", 5.0),
    }


def desk_scale_config(seed: int = 12345, corruption: dict | None = None, **overrides) -> ScenarioConfig:
    """The 4096-slot, 32-antenna, 32-beam configuration used by the test bench."""
    base = dict(
        num_antennas=32,
        codebook_beams=32,
        num_slots=4096,
        rng_seed=seed,
        corruption=default_corruption() if corruption is None else corruption,
    )
    base.update(overrides)
    return ScenarioConfig(**base)

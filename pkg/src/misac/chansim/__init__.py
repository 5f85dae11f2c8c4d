"""Synthetic low-altitude UAV scene, geometric channel, and sensor suite."""

from .config import (
    SPEED_OF_LIGHT_M_S,
    ConfigError,
    CorruptionSpec,
    ScenarioConfig,
    canonical_json,
    config_hash,
    default_corruption,
    desk_scale_config,
)
from .dataset import (
    Dataset,
    DatasetFormatError,
    DatasetManifest,
    SlotRecord,
    channel_to_reals,
    generate_dataset,
    read_dataset,
    write_dataset,
)
from .geometry import (
    BS_POSITION,
    DegenerateChannelError,
    PathSet,
    PowerConstraintError,
    array_response,
    beam_gains,
    dft_codebook,
    optimal_beam,
    path_loss_db,
    sum_rate,
    synthesize_channel,
)
from .modalities import (
    FEATURE_WIDTH,
    MODALITIES,
    MODALITY_WIDTHS,
    base_noise_scales,
    synthesize_modalities,
)
from .trajectory import generate_trajectory

__all__ = [
    "BS_POSITION",
    "ConfigError",
    "CorruptionSpec",
    "Dataset",
    "DatasetFormatError",
    "DatasetManifest",
    "DegenerateChannelError",
    "FEATURE_WIDTH",
    "MODALITIES",
    "MODALITY_WIDTHS",
    "PathSet",
    "PowerConstraintError",
    "SPEED_OF_LIGHT_M_S",
    "ScenarioConfig",
    "SlotRecord",
    "array_response",
    "base_noise_scales",
    "beam_gains",
    "canonical_json",
    "channel_to_reals",
    "config_hash",
    "default_corruption",
    "desk_scale_config",
    "dft_codebook",
    "generate_dataset",
    "generate_trajectory",
    "optimal_beam",
    "path_loss_db",
    "read_dataset",
    "sum_rate",
    "synthesize_channel",
    "write_dataset",
]

"""Task definitions: what the model reads, what it predicts, how it is scored.

Four task kinds share one input-assembly path:

- beam_prediction: classify the best codebook beam from sensing features.
- pathloss_regression: regress path loss in dB (one real target).
- channel_regression: regress the complex channel as 2M reals (real parts
  then imaginary parts).
- trajectory_tracking: regress the current position from a sliding window
  of the last L+1 slots of every input stream.

Sensing-only tasks default to the four sensing modalities; trajectory also
reads the RF-history stream. The modality set stays configurable so the
same task can be trained on any canonical-order subset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..chansim import MODALITY_WIDTHS, Dataset, channel_to_reals

TASK_KINDS = ("beam_prediction", "pathloss_regression", "channel_regression",
              "trajectory_tracking")
CANONICAL_MODALITIES = tuple(MODALITY_WIDTHS)
SENSING_MODALITIES = ("vision", "radar", "lidar", "position")
DEFAULT_WINDOW = 4


class ConfigurationError(ValueError):
    """A task/run configuration that cannot be satisfied."""


def default_modalities(kind: str) -> tuple[str, ...]:
    return CANONICAL_MODALITIES if kind == "trajectory_tracking" else SENSING_MODALITIES


@dataclass(frozen=True)
class TaskSpec:
    """One prediction task over the dataset.

    ``window`` is the trajectory context length L: inputs cover slots
    [t-L, t], clamped at the start of the episode. Non-trajectory tasks
    use single-slot inputs (window 0).
    """

    kind: str
    input_modalities: tuple[str, ...] = ()
    window: int = field(default=-1)  # -1: use the kind's default

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigurationError(f"unknown task kind {self.kind!r}")
        mods = tuple(self.input_modalities) or default_modalities(self.kind)
        unknown = [m for m in mods if m not in CANONICAL_MODALITIES]
        if unknown:
            raise ConfigurationError(f"unknown modalities {unknown}")
        if len(set(mods)) != len(mods):
            raise ConfigurationError("duplicate modalities")
        mods = tuple(m for m in CANONICAL_MODALITIES if m in mods)
        window = self.window
        if window == -1:
            window = DEFAULT_WINDOW if self.kind == "trajectory_tracking" else 0
        if window < 0:
            raise ConfigurationError("window must be >= 0")
        if self.kind != "trajectory_tracking" and window != 0:
            raise ConfigurationError(f"{self.kind} uses single-slot inputs (window 0)")
        object.__setattr__(self, "input_modalities", mods)
        object.__setattr__(self, "window", window)

    @property
    def loss_name(self) -> str:
        return "cross_entropy" if self.kind == "beam_prediction" else "mse"

    @property
    def metric_name(self) -> str:
        return {"beam_prediction": "top1_accuracy",
                "pathloss_regression": "nmse_db",
                "channel_regression": "nmse_db",
                "trajectory_tracking": "mean_euclidean_m"}[self.kind]

    @property
    def target_name(self) -> str:
        return {"beam_prediction": "beam_label",
                "pathloss_regression": "path_loss_db",
                "channel_regression": "channel",
                "trajectory_tracking": "position"}[self.kind]

    def out_dim(self, num_antennas: int, num_beams: int) -> int:
        return {"beam_prediction": num_beams,
                "pathloss_regression": 1,
                "channel_regression": 2 * num_antennas,
                "trajectory_tracking": 3}[self.kind]

    def model_input_widths(self) -> tuple[tuple[str, int], ...]:
        """Per-modality input width after windowing, in canonical order."""
        steps = self.window + 1
        return tuple((m, MODALITY_WIDTHS[m] * steps) for m in self.input_modalities)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "input_modalities": list(self.input_modalities),
                "window": self.window}

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        unknown = set(d) - {"kind", "input_modalities", "window"}
        if unknown:
            raise ConfigurationError(f"unknown TaskSpec keys {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigurationError("TaskSpec needs a kind")
        return cls(kind=d["kind"],
                   input_modalities=tuple(d.get("input_modalities", ())),
                   window=d.get("window", -1))


def raw_targets(dataset: Dataset, spec: TaskSpec) -> np.ndarray:
    """Unnormalized targets for every slot: labels (T,) or reals (T, k)."""
    if spec.kind == "beam_prediction":
        return dataset.beam_labels.astype(np.intp)
    if spec.kind == "pathloss_regression":
        return dataset.path_loss_db.reshape(-1, 1)
    if spec.kind == "channel_regression":
        return channel_to_reals(dataset.channels)
    return dataset.positions.copy()


def normalized_targets(dataset: Dataset, spec: TaskSpec) -> np.ndarray:
    """Training targets: labels stay raw, regression targets are z-scored."""
    raw = raw_targets(dataset, spec)
    if spec.kind == "beam_prediction":
        return raw
    mean, std = dataset.manifest.target_normalizer(spec.target_name)
    return (raw - mean) / std


def assemble_input(dataset: Dataset, spec: TaskSpec,
                   indices: np.ndarray | None = None) -> list[np.ndarray]:
    """Per-modality model inputs for the given slots, z-scored per manifest.

    Trajectory windows concatenate slots t-L .. t per stream (oldest
    first), clamping below slot 0 so early slots repeat their history.
    """
    missing = [m for m in spec.input_modalities if m not in dataset.features]
    if missing:
        raise ConfigurationError(f"dataset lacks modalities {missing}")
    if indices is None:
        indices = np.arange(len(dataset))
    indices = np.asarray(indices, dtype=np.intp)
    offsets = np.arange(spec.window, -1, -1)
    window_idx = np.clip(indices[:, None] - offsets[None, :], 0, None)

    blocks = []
    for name in spec.input_modalities:
        mean, std = dataset.manifest.normalizer(name)
        z = (dataset.features[name] - mean) / std
        if spec.window == 0:
            blocks.append(z[indices])
        else:
            n, steps = indices.size, offsets.size
            blocks.append(z[window_idx].reshape(n, steps * z.shape[1]))
    return blocks

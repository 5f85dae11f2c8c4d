"""Dataset generation, the on-disk binary format, and its manifest.

Binary layout (little endian, no padding):

    header:  magic ``MISAC1`` (6 bytes) | format version u32 | slot count u64
             | 32-byte sha256 of the canonical scenario-config JSON
    records: ``num_slots`` fixed-width records, one per slot:

    ======================  =========================  ======================
    field                   dtype                      meaning
    ======================  =========================  ======================
    slot                    u8 x8  (<u8)               slot index t
    position                f64 x3                     UAV position, m
    velocity                f64 x3                     UAV velocity, m/s
    path_gain_re / _im      f64 x num_paths            complex path gains
    path_delay_s            f64 x num_paths            path delays, s
    path_aod_rad            f64 x num_paths            departure angles, rad
    channel_re / _im        f64 x num_antennas         narrowband channel
    beam_label              u32                        argmax codebook beam
    path_loss_db            f64                        -20 log10(||h||/sqrt(M))
    features                f64 x 54                   modalities, canonical order
    reliability             u8 x 5                     per-modality clean flag
    ======================  =========================  ======================

The JSON manifest alongside carries the full config, frozen feature
projections, the canonical train/test split, and normalization statistics
computed on that training split only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig, canonical_json, config_hash
from .geometry import (
    PathSet,
    beam_gains,
    dft_codebook,
    draw_scene_phases,
    make_paths,
    optimal_beam,
    path_loss_db,
    scatter_positions,
    synthesize_channel,
)
from .modalities import (
    FEATURE_WIDTH,
    MODALITIES,
    MODALITY_WIDTHS,
    draw_projections,
    synthesize_modalities,
)
from .trajectory import generate_trajectory

MAGIC = b"MISAC1"
FORMAT_VERSION = 1
STD_FLOOR = 1e-8


class DatasetFormatError(ValueError):
    """On-disk bytes do not match the declared format."""


@dataclass(frozen=True)
class SlotRecord:
    """One slot of ground truth plus the sensed feature vectors."""

    slot: int
    position: np.ndarray
    velocity: np.ndarray
    paths: PathSet
    channel: np.ndarray
    beam_label: int
    path_loss_db: float
    features: dict[str, np.ndarray]
    reliability: dict[str, bool]


@dataclass
class DatasetManifest:
    config: dict
    config_hash_hex: str
    num_slots: int
    modality_widths: dict[str, int]
    projections: dict[str, list]
    feature_mean: dict[str, list]
    feature_std: dict[str, list]
    target_mean: dict[str, list]
    target_std: dict[str, list]
    split_fraction: float
    train_indices: list[int]
    test_indices: list[int]
    format_version: int = FORMAT_VERSION

    def to_json(self) -> str:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        d = json.loads(text)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise DatasetFormatError(f"unknown manifest keys: {sorted(extra)}")
        missing = known - set(d)
        if missing:
            raise DatasetFormatError(f"missing manifest keys: {sorted(missing)}")
        return cls(**d)

    def projection(self, name: str) -> np.ndarray:
        return np.asarray(self.projections[name], dtype=np.float64)

    def normalizer(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        return (np.asarray(self.feature_mean[name]), np.asarray(self.feature_std[name]))

    def target_normalizer(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        return (np.asarray(self.target_mean[name]), np.asarray(self.target_std[name]))


@dataclass
class Dataset:
    """In-memory dataset: per-slot arrays plus the manifest."""

    config: ScenarioConfig
    positions: np.ndarray
    velocities: np.ndarray
    path_gains: np.ndarray    # complex (T, num_paths)
    path_delays: np.ndarray
    path_aods: np.ndarray
    channels: np.ndarray      # complex (T, M)
    beam_labels: np.ndarray
    path_loss_db: np.ndarray
    features: dict[str, np.ndarray]
    reliability: dict[str, np.ndarray]
    manifest: DatasetManifest

    def __len__(self) -> int:
        return self.positions.shape[0]

    def record(self, t: int) -> SlotRecord:
        return SlotRecord(
            slot=t,
            position=self.positions[t],
            velocity=self.velocities[t],
            paths=PathSet(self.path_gains[t], self.path_delays[t], self.path_aods[t]),
            channel=self.channels[t],
            beam_label=int(self.beam_labels[t]),
            path_loss_db=float(self.path_loss_db[t]),
            features={m: self.features[m][t] for m in MODALITIES},
            reliability={m: bool(self.reliability[m][t]) for m in MODALITIES},
        )

    @property
    def train_indices(self) -> np.ndarray:
        return np.asarray(self.manifest.train_indices, dtype=np.intp)

    @property
    def test_indices(self) -> np.ndarray:
        return np.asarray(self.manifest.test_indices, dtype=np.intp)


def _stats(x: np.ndarray) -> tuple[list, list]:
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), STD_FLOOR)
    return mean.tolist(), std.tolist()


def channel_to_reals(channels: np.ndarray) -> np.ndarray:
    """(T, 2M): all real parts, then all imaginary parts."""
    return np.concatenate([channels.real, channels.imag], axis=1)


def generate_dataset(cfg: ScenarioConfig) -> Dataset:
    """Simulate one flight and sensor suite; deterministic in cfg.rng_seed."""
    if cfg.num_uavs != 1:
        raise ConfigError("dataset generation tracks a single UAV; "
                          "multi-user sum rate is an evaluation utility")
    root = np.random.SeedSequence(cfg.rng_seed)
    ss_scatter, ss_phases, ss_traj, ss_modal, ss_split = root.spawn(5)

    scatterers = scatter_positions(cfg, np.random.default_rng(ss_scatter))
    phases = draw_scene_phases(cfg, np.random.default_rng(ss_phases))
    positions, velocities = generate_trajectory(cfg, np.random.default_rng(ss_traj))

    T, M, L = cfg.num_slots, cfg.num_antennas, cfg.num_paths
    codebook = dft_codebook(M, cfg.codebook_beams)
    path_gains = np.zeros((T, L), dtype=np.complex128)
    path_delays = np.zeros((T, L))
    path_aods = np.zeros((T, L))
    channels = np.zeros((T, M), dtype=np.complex128)
    beam_labels = np.zeros(T, dtype=np.int64)
    pl_db = np.zeros(T)
    rss_db = np.zeros(T)
    for t in range(T):
        paths = make_paths(positions[t], scatterers, phases, cfg)
        path_gains[t] = paths.gains
        path_delays[t] = paths.delays_s
        path_aods[t] = paths.aods_rad
        h = synthesize_channel(paths, M, cfg.spacing_m, cfg.wavelength_m, cfg.carrier_hz)
        channels[t] = h
        b = optimal_beam(h, codebook)
        beam_labels[t] = b
        pl_db[t] = path_loss_db(h, M)
        rss_db[t] = 10.0 * np.log10(cfg.downlink_power_w * beam_gains(h, codebook)[b])

    projections = draw_projections(cfg, np.random.default_rng(ss_modal.spawn(1)[0]))
    features, reliability = synthesize_modalities(
        cfg, positions, velocities, scatterers, beam_labels, rss_db, pl_db,
        projections, ss_modal)

    perm = np.random.default_rng(ss_split).permutation(T)
    n_train = math.ceil(cfg.split_fraction * T)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])

    feature_mean, feature_std = {}, {}
    for m in MODALITIES:
        feature_mean[m], feature_std[m] = _stats(features[m][train_idx])
    target_mean, target_std = {}, {}
    target_mean["path_loss_db"], target_std["path_loss_db"] = _stats(
        pl_db[train_idx, None])
    target_mean["channel"], target_std["channel"] = _stats(
        channel_to_reals(channels[train_idx]))
    target_mean["position"], target_std["position"] = _stats(positions[train_idx])

    manifest = DatasetManifest(
        config=cfg.to_dict(),
        config_hash_hex=config_hash(cfg).hex(),
        num_slots=T,
        modality_widths=dict(MODALITY_WIDTHS),
        projections={k: v.tolist() for k, v in projections.items()},
        feature_mean=feature_mean,
        feature_std=feature_std,
        target_mean=target_mean,
        target_std=target_std,
        split_fraction=cfg.split_fraction,
        train_indices=train_idx.tolist(),
        test_indices=test_idx.tolist(),
    )
    return Dataset(cfg, positions, velocities, path_gains, path_delays, path_aods,
                   channels, beam_labels, pl_db, features, reliability, manifest)


def _record_dtype(cfg: ScenarioConfig) -> np.dtype:
    L, M = cfg.num_paths, cfg.num_antennas
    return np.dtype([
        ("slot", "<u8"),
        ("position", "<f8", (3,)),
        ("velocity", "<f8", (3,)),
        ("path_gain_re", "<f8", (L,)),
        ("path_gain_im", "<f8", (L,)),
        ("path_delay_s", "<f8", (L,)),
        ("path_aod_rad", "<f8", (L,)),
        ("channel_re", "<f8", (M,)),
        ("channel_im", "<f8", (M,)),
        ("beam_label", "<u4"),
        ("path_loss_db", "<f8"),
        ("features", "<f8", (FEATURE_WIDTH,)),
        ("reliability", "u1", (len(MODALITIES),)),
    ])


def _feature_offsets() -> dict[str, tuple[int, int]]:
    offsets, lo = {}, 0
    for m in MODALITIES:
        offsets[m] = (lo, lo + MODALITY_WIDTHS[m])
        lo += MODALITY_WIDTHS[m]
    return offsets


def write_dataset(ds: Dataset, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``dataset.bin`` and ``manifest.json``; byte-deterministic."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    T = len(ds)
    rec = np.zeros(T, dtype=_record_dtype(ds.config))
    rec["slot"] = np.arange(T)
    rec["position"] = ds.positions
    rec["velocity"] = ds.velocities
    rec["path_gain_re"] = ds.path_gains.real
    rec["path_gain_im"] = ds.path_gains.imag
    rec["path_delay_s"] = ds.path_delays
    rec["path_aod_rad"] = ds.path_aods
    rec["channel_re"] = ds.channels.real
    rec["channel_im"] = ds.channels.imag
    rec["beam_label"] = ds.beam_labels
    rec["path_loss_db"] = ds.path_loss_db
    for m, (lo, hi) in _feature_offsets().items():
        rec["features"][:, lo:hi] = ds.features[m]
    for i, m in enumerate(MODALITIES):
        rec["reliability"][:, i] = ds.reliability[m]

    bin_path = out_dir / "dataset.bin"
    with open(bin_path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint32(FORMAT_VERSION).tobytes())
        f.write(np.uint64(T).tobytes())
        f.write(bytes.fromhex(ds.manifest.config_hash_hex))
        f.write(rec.tobytes())
    man_path = out_dir / "manifest.json"
    man_path.write_text(ds.manifest.to_json())
    return bin_path, man_path


def read_dataset(in_dir: str | Path) -> Dataset:
    in_dir = Path(in_dir)
    manifest = DatasetManifest.from_json((in_dir / "manifest.json").read_text())
    cfg = ScenarioConfig.from_dict(manifest.config)
    expected_hash = config_hash(cfg)
    if manifest.config_hash_hex != expected_hash.hex():
        raise DatasetFormatError("manifest config hash does not match its config")

    raw = (in_dir / "dataset.bin").read_bytes()
    if raw[:6] != MAGIC:
        raise DatasetFormatError("bad magic; not a dataset file")
    version = int(np.frombuffer(raw, "<u4", count=1, offset=6)[0])
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported format version {version}")
    T = int(np.frombuffer(raw, "<u8", count=1, offset=10)[0])
    if T != manifest.num_slots:
        raise DatasetFormatError("slot count disagrees with manifest")
    stored_hash = raw[18:50]
    if stored_hash != expected_hash:
        raise DatasetFormatError("dataset/config hash mismatch")

    dtype = _record_dtype(cfg)
    body = raw[50:]
    if len(body) != T * dtype.itemsize:
        raise DatasetFormatError("truncated or oversized record section")
    rec = np.frombuffer(body, dtype=dtype)

    features = {m: rec["features"][:, lo:hi].copy()
                for m, (lo, hi) in _feature_offsets().items()}
    reliability = {m: rec["reliability"][:, i].astype(bool)
                   for i, m in enumerate(MODALITIES)}
    return Dataset(
        config=cfg,
        positions=rec["position"].copy(),
        velocities=rec["velocity"].copy(),
        path_gains=rec["path_gain_re"] + 1j * rec["path_gain_im"],
        path_delays=rec["path_delay_s"].copy(),
        path_aods=rec["path_aod_rad"].copy(),
        channels=rec["channel_re"] + 1j * rec["channel_im"],
        beam_labels=rec["beam_label"].astype(np.int64),
        path_loss_db=rec["path_loss_db"].copy(),
        features=features,
        reliability=reliability,
        manifest=manifest,
    )

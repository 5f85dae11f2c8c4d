"""Non-gated comparison models at matched encoder capacity.

Three fusion strategies over the same per-modality encoder architecture as
the mixture's experts (one encoder per used modality) and the same head:

- concat: encoder outputs concatenated, head input width D * z_dim.
- static_weighted: fixed simplex weights over encoder outputs; the weights
  are construction-time constants, never trained.
- unimodal: a single encoder and head over one modality; pair it with a
  task spec restricted to that modality.

Each model mirrors the mixture's forward contract (same decision object,
parameters(), zero_grad()), so the training loop, checkpoints, and metrics
treat every model identically. The decision's weight entries are the fixed
per-modality fusion weights (uniform for concat, which has no weighting);
the mask is all-ones since every encoder always runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import numcore as nc
from ..moefusion import GateDecision
from ..moefusion.layers import MLP
from ..numcore import NumericError, Tensor

BASELINE_KINDS = ("concat", "static_weighted", "unimodal")


class BaselineError(ValueError):
    """Invalid baseline configuration or call."""


@dataclass(frozen=True)
class BaselineConfig:
    """Architecture of one baseline model.

    ``modalities`` lists (name, input width) for every stream the model
    reads; a unimodal model lists exactly one. ``static_weights`` applies
    to static_weighted only and must lie on the simplex.
    """

    kind: str
    modalities: tuple[tuple[str, int], ...]
    out_dim: int
    z_dim: int = 32
    h_expert: int = 64
    h_head: int = 64
    static_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise BaselineError(f"unknown baseline kind {self.kind!r}")
        mods = tuple((str(m), int(w)) for m, w in self.modalities)
        if not mods or any(w < 1 for _, w in mods):
            raise BaselineError("modalities must be nonempty with positive widths")
        if len({m for m, _ in mods}) != len(mods):
            raise BaselineError("duplicate modality names")
        if self.kind == "unimodal" and len(mods) != 1:
            raise BaselineError("unimodal models read exactly one modality")
        if min(self.out_dim, self.z_dim, self.h_expert, self.h_head) < 1:
            raise BaselineError("widths must be positive")
        weights = self.static_weights
        if self.kind == "static_weighted":
            if weights is None:
                weights = tuple(1.0 / len(mods) for _ in mods)
            weights = tuple(float(w) for w in weights)
            if len(weights) != len(mods):
                raise BaselineError("one static weight per modality")
            if min(weights) < 0.0 or abs(sum(weights) - 1.0) > 1e-9:
                raise BaselineError("static weights must lie on the simplex")
        elif weights is not None:
            raise BaselineError("static_weights only apply to static_weighted")
        object.__setattr__(self, "modalities", mods)
        object.__setattr__(self, "static_weights", weights)

    @property
    def num_experts(self) -> int:
        # one encoder per modality; named for interface parity
        return len(self.modalities)

    @property
    def experts_per_modality(self) -> int:
        return 1

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "modalities": [[m, w] for m, w in self.modalities],
                "out_dim": self.out_dim, "z_dim": self.z_dim,
                "h_expert": self.h_expert, "h_head": self.h_head,
                "static_weights": list(self.static_weights)
                if self.static_weights else None}

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineConfig":
        unknown = set(d) - {"kind", "modalities", "out_dim", "z_dim", "h_expert",
                            "h_head", "static_weights"}
        if unknown:
            raise BaselineError(f"unknown BaselineConfig keys {sorted(unknown)}")
        d = dict(d)
        d["modalities"] = tuple((m, w) for m, w in d["modalities"])
        if d.get("static_weights") is not None:
            d["static_weights"] = tuple(d["static_weights"])
        return cls(**d)


class BaselineModel:
    """Encoders plus head; fusion behavior set by cfg.kind."""

    def __init__(self, cfg: BaselineConfig, seed: int):
        self.cfg = cfg
        streams = np.random.SeedSequence(seed).spawn(cfg.num_experts + 1)
        self.encoders = [
            MLP(np.random.default_rng(streams[i]),
                [width, cfg.h_expert, cfg.h_expert, cfg.z_dim])
            for i, (_, width) in enumerate(cfg.modalities)]
        head_in = cfg.z_dim * cfg.num_experts if cfg.kind == "concat" else cfg.z_dim
        self.head = MLP(np.random.default_rng(streams[-1]),
                        [head_in, cfg.h_head, cfg.out_dim])
        if cfg.kind == "static_weighted":
            self._weights = np.asarray(cfg.static_weights)
        elif cfg.kind == "unimodal":
            self._weights = np.ones(1)
        else:
            self._weights = np.full(cfg.num_experts, 1.0 / cfg.num_experts)
        self.lifetime_expert_evals = 0

    def parameters(self) -> list[Tensor]:
        params = [p for enc in self.encoders for p in enc.parameters]
        return params + self.head.parameters

    def parameter_names(self) -> list[str]:
        names = []
        for (m, _), enc in zip(self.cfg.modalities, self.encoders):
            names += enc.parameter_names(f"encoder_{m}")
        return names + self.head.parameter_names("head")

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def _check_features(self, features) -> int:
        if len(features) != len(self.cfg.modalities):
            raise BaselineError(
                f"expected {len(self.cfg.modalities)} feature blocks, "
                f"got {len(features)}")
        n = None
        for (name, width), block in zip(self.cfg.modalities, features):
            arr = np.asarray(block)
            if arr.ndim != 2 or arr.shape[1] != width:
                raise BaselineError(f"{name} expects width {width}, got {arr.shape}")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise BaselineError("feature blocks disagree on batch size")
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"non-finite values in {name} features")
        return n

    def forward(self, features, forced_mask=None) -> tuple[Tensor, GateDecision]:
        if forced_mask is not None:
            raise BaselineError("baselines do not route; forced_mask unsupported")
        n = self._check_features(features)
        inputs = [Tensor(np.asarray(f)) for f in features]
        embeddings = [enc(x) for enc, x in zip(self.encoders, inputs)]

        if self.cfg.kind == "concat":
            fused = nc.concat_cols(embeddings)
        else:
            fused = None
            for w, z in zip(self._weights, embeddings):
                if w == 0.0:
                    continue
                term = nc.scale_rows(z, Tensor(np.full(n, w)))
                fused = term if fused is None else nc.add(fused, term)
        out = self.head(fused)

        weights = np.tile(self._weights, (n, 1))
        evals = n * self.cfg.num_experts
        self.lifetime_expert_evals += evals
        decision = GateDecision(logits=np.zeros((n, self.cfg.num_experts)),
                                weights=weights, mask=np.ones_like(weights),
                                renorm_weights=weights.copy(),
                                experts_evaluated=evals)
        return out, decision


def concat_fusion(modalities, out_dim, seed=0, **widths) -> BaselineModel:
    return BaselineModel(BaselineConfig(kind="concat", modalities=tuple(modalities),
                                        out_dim=out_dim, **widths), seed)


def static_weighted(modalities, out_dim, weights=None, seed=0, **widths) -> BaselineModel:
    cfg = BaselineConfig(kind="static_weighted", modalities=tuple(modalities),
                         out_dim=out_dim,
                         static_weights=tuple(weights) if weights else None, **widths)
    return BaselineModel(cfg, seed)


def unimodal(modality, width, out_dim, seed=0, **widths) -> BaselineModel:
    cfg = BaselineConfig(kind="unimodal", modalities=((modality, width),),
                         out_dim=out_dim, **widths)
    return BaselineModel(cfg, seed)

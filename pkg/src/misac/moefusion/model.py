"""Mixture-of-experts fusion with dense and sparse top-N routing.

Every modality owns ``experts_per_modality`` expert MLPs that embed its
feature vector into a shared latent space. A gating MLP reads the raw
(normalized) features of all modalities concatenated and emits one softmax
weight per expert in the full pool; per-modality gate mass is the sum over
that modality's experts. The fused latent is the weight-averaged expert
embedding, and a prediction head maps it to the task output.

Sparse mode keeps only the N highest-weighted experts per sample (ties to the
lower expert index), renormalizes the surviving weights to the simplex with a
small epsilon guard, and never evaluates unselected experts. The selection
mask is a constant in backward (straight-through): gradients flow through the
renormalization exactly on the support, and unselected experts receive
exactly zero parameter gradient from that sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .. import numcore as nc
from ..numcore import Tensor
from .layers import MLP

ROUTING_MODES = ("dense", "sparse")


class RoutingError(ValueError):
    """Routing parameters outside the contract."""


@dataclass(frozen=True)
class MoEConfig:
    """Architecture of one fusion model; serializes into checkpoints."""

    modalities: tuple            # ((name, input_width), ...) in canonical order
    out_dim: int
    experts_per_modality: int = 3
    z_dim: int = 32
    h_expert: int = 64
    h_head: int = 64
    gate_hidden: int = 128
    routing: str = "dense"
    top_n: int = 5
    renorm_eps: float = 1e-12

    def __post_init__(self):
        if not self.modalities:
            raise RoutingError("at least one modality is required")
        if self.routing not in ROUTING_MODES:
            raise RoutingError(f"unknown routing mode {self.routing!r}")
        if self.experts_per_modality < 1 or self.out_dim < 1:
            raise RoutingError("experts_per_modality and out_dim must be >= 1")
        total = len(self.modalities) * self.experts_per_modality
        if self.routing == "sparse" and not (1 <= self.top_n <= total):
            raise RoutingError(f"top_n must lie in [1, {total}]")
        if self.renorm_eps <= 0.0:
            raise RoutingError("renorm_eps must be positive")
        object.__setattr__(self, "modalities",
                           tuple((str(n), int(w)) for n, w in self.modalities))

    @property
    def num_experts(self) -> int:
        return len(self.modalities) * self.experts_per_modality

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["modalities"] = [list(m) for m in self.modalities]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MoEConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise RoutingError(f"unknown model config keys: {sorted(extra)}")
        d = dict(d)
        d["modalities"] = tuple(tuple(m) for m in d["modalities"])
        return cls(**d)


@dataclass
class GateDecision:
    """Routing snapshot for one forward pass (detached numpy copies)."""

    logits: np.ndarray          # (n, E)
    weights: np.ndarray         # (n, E) softmax over the full pool
    mask: np.ndarray            # (n, E) 0/1 selection
    renorm_weights: np.ndarray  # (n, E); equals weights in dense mode
    experts_evaluated: int      # total sample-expert evaluations in the pass

    @property
    def active_sets(self) -> list[np.ndarray]:
        return [np.flatnonzero(row) for row in self.mask]

    @property
    def per_sample_evals(self) -> np.ndarray:
        return self.mask.sum(axis=1).astype(np.int64)


def top_n_mask(weights: np.ndarray, n: int) -> np.ndarray:
    """0/1 mask of the n largest entries per row; ties keep the lower index."""
    if weights.ndim != 2:
        raise RoutingError("weights must be (batch, experts)")
    if not (1 <= n <= weights.shape[1]):
        raise RoutingError(f"top_n must lie in [1, {weights.shape[1]}]")
    order = np.argsort(-weights, axis=1, kind="stable")[:, :n]
    mask = np.zeros_like(weights)
    np.put_along_axis(mask, order, 1.0, axis=1)
    return mask


def modality_gate_mass(weights: np.ndarray, experts_per_modality: int) -> np.ndarray:
    """(n, D) sum of expert weights per owning modality."""
    n, e_total = weights.shape
    d = e_total // experts_per_modality
    return weights.reshape(n, d, experts_per_modality).sum(axis=2)


class MoEModel:
    """Experts, gating network, and prediction head with a routing mode."""

    def __init__(self, cfg: MoEConfig, seed: int | np.random.SeedSequence):
        self.cfg = cfg
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        streams = ss.spawn(cfg.num_experts + 2)
        self.experts = []
        self.expert_modality = []
        for e in range(cfg.num_experts):
            d = e // cfg.experts_per_modality
            width = cfg.modalities[d][1]
            self.experts.append(MLP(np.random.default_rng(streams[e]),
                                    [width, cfg.h_expert, cfg.h_expert, cfg.z_dim]))
            self.expert_modality.append(d)
        gate_in = sum(w for _, w in cfg.modalities)
        self.gate = MLP(np.random.default_rng(streams[-2]),
                        [gate_in, cfg.gate_hidden, cfg.gate_hidden, cfg.num_experts])
        self.head = MLP(np.random.default_rng(streams[-1]),
                        [cfg.z_dim, cfg.h_head, cfg.out_dim])
        self.lifetime_expert_evals = 0

    # -- parameter plumbing ------------------------------------------------

    def parameters(self) -> list[Tensor]:
        params = [p for ex in self.experts for p in ex.parameters]
        return params + self.gate.parameters + self.head.parameters

    def parameter_names(self) -> list[str]:
        names = []
        for e, ex in enumerate(self.experts):
            names += ex.parameter_names(f"expert{e}")
        names += self.gate.parameter_names("gate")
        names += self.head.parameter_names("head")
        return names

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    # -- forward -----------------------------------------------------------

    def _check_features(self, features: list[np.ndarray]) -> int:
        if len(features) != len(self.cfg.modalities):
            raise RoutingError(
                f"expected {len(self.cfg.modalities)} feature blocks, got {len(features)}")
        n = features[0].shape[0]
        for f, (name, width) in zip(features, self.cfg.modalities):
            if f.ndim != 2 or f.shape != (n, width):
                raise RoutingError(f"modality {name!r} expects shape ({n}, {width}), "
                                   f"got {f.shape}")
        if any(not np.all(np.isfinite(f)) for f in features):
            raise nc.NumericError("model input features must be finite")
        return n

    def gate_forward(self, features: list[np.ndarray]) -> tuple[Tensor, Tensor]:
        """Logits and full-pool softmax weights for a feature batch."""
        self._check_features(features)
        gate_in = Tensor(np.concatenate(features, axis=1))
        logits = self.gate(gate_in)
        return logits, nc.softmax(logits)

    def forward(
        self,
        features: list[np.ndarray],
        forced_mask: np.ndarray | None = None,
    ) -> tuple[Tensor, GateDecision]:
        """Task output and the routing decision for a feature batch.

        ``forced_mask`` pins the sparse selection (used by gradient checking,
        where the loss surface must keep the mask of the reference pass).
        """
        n = self._check_features(features)
        logits, weights = self.gate_forward(features)
        if self.cfg.routing == "dense":
            if forced_mask is not None:
                raise RoutingError("forced_mask only applies to sparse routing")
            fused, applied = self._fuse_dense(features, weights)
            mask = np.ones((n, self.cfg.num_experts))
            evals = n * self.cfg.num_experts
        else:
            fused, applied, mask, evals = self._fuse_sparse(features, weights, forced_mask)
        self.lifetime_expert_evals += evals
        out = self.head(fused)
        decision = GateDecision(
            logits=logits.data.copy(),
            weights=weights.data.copy(),
            mask=mask.copy(),
            renorm_weights=applied.data.copy(),
            experts_evaluated=evals,
        )
        return out, decision

    def _expert_inputs(self, features: list[np.ndarray]) -> list[Tensor]:
        return [Tensor(f) for f in features]

    def _fuse_dense(self, features, weights) -> tuple[Tensor, Tensor]:
        inputs = self._expert_inputs(features)
        fused = None
        for e, expert in enumerate(self.experts):
            z = expert(inputs[self.expert_modality[e]])
            contrib = nc.scale_rows(z, nc.take_column(weights, e))
            fused = contrib if fused is None else nc.add(fused, contrib)
        return fused, weights

    def _fuse_sparse(self, features, weights, forced_mask):
        n, e_total = weights.data.shape
        if forced_mask is None:
            mask = top_n_mask(weights.data, self.cfg.top_n)
        else:
            mask = np.asarray(forced_mask, dtype=np.float64)
            if mask.shape != (n, e_total) or not np.all((mask == 0) | (mask == 1)):
                raise RoutingError("forced_mask must be a 0/1 (batch, experts) array")
            if np.any(mask.sum(axis=1) < 1):
                raise RoutingError("forced_mask must keep at least one expert per sample")
        # Mask is a constant here: backward treats selection as frozen and
        # differentiates only the renormalization on the surviving support.
        masked = nc.mul(weights, Tensor(mask))
        denom = nc.add(nc.tsum(masked, axis=1), self.cfg.renorm_eps)
        renormed = nc.scale_rows(masked, nc.reciprocal(denom))

        fused = None
        evals = 0
        for e, expert in enumerate(self.experts):
            rows = np.flatnonzero(mask[:, e])
            if rows.size == 0:
                continue
            evals += int(rows.size)
            sub_in = Tensor(features[self.expert_modality[e]][rows])
            z = expert(sub_in)
            w_e = nc.gather_rows(nc.take_column(renormed, e), rows)
            contrib = nc.scatter_rows(nc.scale_rows(z, w_e), rows, n)
            fused = contrib if fused is None else nc.add(fused, contrib)
        return fused, renormed, mask, evals

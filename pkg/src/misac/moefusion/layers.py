"""MLP building blocks over the autodiff engine."""

from __future__ import annotations

import numpy as np

from .. import numcore as nc
from ..numcore import Tensor


class Linear:
    """Affine map with He-initialized weights and uniform-initialized bias.

    Bias draws from U(-1/sqrt(n_in), 1/sqrt(n_in)) rather than zero so a
    dead relu layer never parks the next layer's pre-activations exactly
    on the kink (which would make finite differences disagree with the
    one-sided subgradient there).
    """

    def __init__(self, rng: np.random.Generator, n_in: int, n_out: int):
        scale = np.sqrt(2.0 / n_in)
        bound = 1.0 / np.sqrt(n_in)
        self.weight = Tensor(rng.normal(0.0, scale, size=(n_in, n_out)), requires_grad=True)
        self.bias = Tensor(rng.uniform(-bound, bound, size=n_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return nc.add(nc.matmul(x, self.weight), self.bias)

    @property
    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


class MLP:
    """Dense stack with relu between layers and a linear output."""

    def __init__(self, rng: np.random.Generator, sizes: list[int]):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self.layers = [Linear(rng, a, b) for a, b in zip(sizes[:-1], sizes[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = nc.relu(layer(x))
        return self.layers[-1](x)

    @property
    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters]

    def parameter_names(self, prefix: str) -> list[str]:
        names = []
        for i in range(len(self.layers)):
            names += [f"{prefix}/w{i}", f"{prefix}/b{i}"]
        return names

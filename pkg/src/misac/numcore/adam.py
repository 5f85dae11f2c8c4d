"""Adam optimizer over numcore tensors.

Standard bias-corrected update: with gradient g at step t,

    m <- beta1*m + (1-beta1)*g          mhat = m / (1 - beta1^t)
    v <- beta2*v + (1-beta2)*g*g        vhat = v / (1 - beta2^t)
    p <- p - lr * mhat / (sqrt(vhat) + eps)

``step`` reads gradients but never mutates them; the caller zeroes.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class StateError(ValueError):
    """Optimizer state does not match the parameter layout."""


class Adam:
    def __init__(
        self,
        params: list[Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if lr < 0.0:
            raise ValueError("lr must be >= 0")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if eps <= 0.0:
            raise ValueError("eps must be > 0")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p, m, v in zip(self.params, self.first_moment, self.second_moment):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def state_arrays(self) -> tuple[list[np.ndarray], list[np.ndarray], int]:
        """Moment buffers and step count, in parameter order."""
        return self.first_moment, self.second_moment, self.step_count

    def load_state(
        self,
        first_moment: list[np.ndarray],
        second_moment: list[np.ndarray],
        step_count: int,
    ) -> None:
        if len(first_moment) != len(self.params) or len(second_moment) != len(self.params):
            raise StateError("moment list length does not match parameter count")
        for p, m, v in zip(self.params, first_moment, second_moment):
            if m.shape != p.data.shape or v.shape != p.data.shape:
                raise StateError(
                    f"moment shape {m.shape}/{v.shape} does not match parameter {p.data.shape}"
                )
        self.first_moment = [np.asarray(m, dtype=np.float64).copy() for m in first_moment]
        self.second_moment = [np.asarray(v, dtype=np.float64).copy() for v in second_moment]
        self.step_count = int(step_count)

"""Central finite-difference validation of tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, TapeError, Tensor


def finite_difference_check(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-6,
) -> float:
    """Compare tape gradients of a scalar-valued ``fn`` against central differences.

    ``fn`` must be deterministic and rebuild its graph on every call (it is
    re-evaluated twice per parameter coordinate, outside any tape). Returns
    the max over coordinates of ``|analytic - central| / max(1e-8, |central|)``.
    Parameter data is restored exactly; gradients are left zeroed.
    """
    if step <= 0.0:
        raise ValueError("step must be > 0")
    params = list(params)
    for p in params:
        p.zero_grad()

    with Tape() as tape:
        out = fn()
    if out.data.ndim != 0:
        raise TapeError(f"finite_difference_check needs a scalar output, got {out.shape}")
    tape.backward(out)
    analytic = [p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()

    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        aflat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = float(fn().data)
            flat[i] = orig - step
            f_minus = float(fn().data)
            flat[i] = orig
            central = (f_plus - f_minus) / (2.0 * step)
            rel = abs(aflat[i] - central) / max(1e-8, abs(central))
            if rel > worst:
                worst = rel
    return worst

"""Gradient penalty on interpolates between two sample batches."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, tensor


def gradient_penalty(net, x_policy: np.ndarray, x_expert: np.ndarray,
                     coeff: float = 1.0, rng: np.random.Generator | None = None) -> Tensor:
    """Mean squared deviation of the input-gradient norm from 1.

    `net` must expose forward_with_input_gradient(x) -> (out, d out/d x);
    interpolation weights are uniform per sample.
    """
    x_policy = np.asarray(x_policy, dtype=np.float64)
    x_expert = np.asarray(x_expert, dtype=np.float64)
    if x_policy.shape != x_expert.shape:
        raise ValueError(f"batch shape mismatch: {x_policy.shape} vs {x_expert.shape}")
    if rng is None:
        eps = np.full((x_policy.shape[0], 1), 0.5)
    else:
        eps = rng.uniform(size=(x_policy.shape[0], 1))
    mixed = eps * x_expert + (1.0 - eps) * x_policy
    _, grad = net.forward_with_input_gradient(tensor(mixed))
    # 1e-24 keeps the zero-gradient corner finite without perturbing
    # float64 values near 1
    norm = ((grad * grad).sum(axis=1) + 1e-24).sqrt()
    dev = norm - 1.0
    return (dev * dev).mean() * coeff

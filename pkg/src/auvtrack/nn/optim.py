"""First-order adaptive-moment optimizer."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def adam_step(value: np.ndarray, grad: np.ndarray, lr: float, state: dict) -> np.ndarray:
    """One update on a single array; `state` holds m, v, t and is mutated."""
    b1, b2, eps = state["betas"][0], state["betas"][1], state["eps"]
    state["t"] += 1
    m, v = state["m"], state["v"]
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * grad * grad
    m_hat = np.asarray(m / (1.0 - b1 ** state["t"]))
    v_hat = np.asarray(v / (1.0 - b2 ** state["t"]))
    np.sqrt(v_hat, out=v_hat)
    v_hat += eps
    m_hat /= v_hat
    m_hat *= lr
    return value - m_hat


class Adam:
    def __init__(self, params: list[tuple[str, Tensor]], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.state = [
            {"m": np.zeros_like(p.data), "v": np.zeros_like(p.data), "t": 0,
             "betas": betas, "eps": eps}
            for _, p in self.params
        ]

    def step(self) -> None:
        for (name, p), st in zip(self.params, self.state):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(grad)):
                raise FloatingPointError(f"non-finite gradient in parameter '{name}'")
            p.data = adam_step(p.data, grad, self.lr, st)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None

"""Network building blocks: linear/MLP layers, layer norm, spectral
normalization, and causal/anti-causal decoder blocks."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, affine, param, tensor

MASK_NEG = -1e9


class Module:
    """Parameter container. Submodules and Tensor attributes are walked
    recursively; lists of modules are supported."""

    def parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for name, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                out.append((name, val))
            elif isinstance(val, Module):
                out.extend((f"{name}.{k}", p) for k, p in val.parameters())
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.extend((f"{name}.{i}.{k}", p) for k, p in item.parameters())
        return out

    def zero_grad(self) -> None:
        for _, p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.parameters())
        missing = set(own) ^ set(state)
        if missing:
            raise KeyError(f"state dict mismatch on keys: {sorted(missing)}")
        for k, p in own.items():
            if p.data.shape != state[k].shape:
                raise ValueError(f"shape mismatch for {k}: {p.data.shape} vs {state[k].shape}")
            p.data = np.asarray(state[k], dtype=np.float64).copy()


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, scale: float | None = None):
        if scale is None:
            scale = np.sqrt(2.0 / n_in)
        self.W = param(rng.normal(0.0, scale, size=(n_in, n_out)))
        self.b = param(np.zeros(n_out))

    def weight(self) -> Tensor:
        return self.W

    def weight_np(self) -> np.ndarray:
        return self.W.data

    def __call__(self, x: Tensor) -> Tensor:
        return affine(x, self.weight(), self.b)

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weight_np() + self.b.data


def power_iteration(w: np.ndarray, u: np.ndarray, steps: int = 1):
    """Estimate the top singular value of `w` ((in, out) layout).

    Returns (sigma, u, v); u has length `in`, v length `out`.
    """
    v = None
    for _ in range(steps):
        v = w.T @ u
        v_norm = np.linalg.norm(v)
        v = v / max(v_norm, 1e-12)
        u = w @ v
        u_norm = np.linalg.norm(u)
        u = u / max(u_norm, 1e-12)
    sigma = float(u @ w @ v)
    return sigma, u, v


class SpectralLinear(Linear):
    """Linear layer whose weight is divided by a running top-singular-value
    estimate (one power-iteration step per forward, persistent u)."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, scale: float | None = None):
        super().__init__(n_in, n_out, rng, scale)
        self.u = rng.normal(size=n_in)
        self.u /= np.linalg.norm(self.u)

    def weight(self) -> Tensor:
        sigma, self.u, v = power_iteration(self.W.data, self.u, steps=1)
        if sigma < 1e-12:
            return self.W  # zero matrix passes through unchanged
        sigma_t = (tensor(self.u[None, :]) @ self.W @ tensor(v[:, None])).reshape(())
        return self.W * (1.0 / sigma_t)

    def weight_np(self) -> np.ndarray:
        # pure evaluation: use the persisted u without advancing the iteration
        sigma = float(self.u @ self.W.data @ (self.W.data.T @ self.u)
                      / max(np.linalg.norm(self.W.data.T @ self.u), 1e-12))
        if sigma < 1e-12:
            return self.W.data
        return self.W.data / sigma


def spectral_normalize(w: np.ndarray, u: np.ndarray | None = None, steps: int = 1):
    """Normalize a raw 2-D weight by its estimated top singular value.

    Returns (w_normalized, u) so callers can persist u between calls.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError("spectral normalization expects a 2-D weight")
    if u is None:
        u = np.ones(w.shape[0]) / np.sqrt(w.shape[0])
    sigma, u, _ = power_iteration(w, u, steps=steps)
    if sigma < 1e-12:
        return w, u
    return w / sigma, u


_ACTS = {
    "relu": lambda z: z.relu(),
    "tanh": lambda z: z.tanh(),
}


def _act_derivative(z: Tensor, act: str) -> Tensor:
    if act == "relu":
        return tensor((z.data > 0.0).astype(np.float64))
    t = z.tanh()
    return 1.0 - t * t


class MLP(Module):
    """Fully connected stack; `sizes` includes input and output widths."""

    def __init__(self, sizes: list[int], rng: np.random.Generator, act: str = "relu",
                 spectral: bool = False, out_scale: float | None = None):
        cls = SpectralLinear if spectral else Linear
        self.act = act
        self.layers = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            scale = out_scale if (last and out_scale is not None) else None
            self.layers.append(cls(a, b, rng, scale))

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for layer in self.layers[:-1]:
            h = _ACTS[self.act](layer(h))
        return self.layers[-1](h)

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        h = x
        for layer in self.layers[:-1]:
            h = layer.forward_np(h)
            h = np.maximum(h, 0.0) if self.act == "relu" else np.tanh(h)
        return self.layers[-1].forward_np(h)

    def forward_with_input_gradient(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Return (output, d output / d input) with the input gradient built
        from tape ops, so a loss on the gradient reaches the weights.

        Output must be a single unit per sample (batch, 1).
        """
        h = x
        pre = []
        weights = [layer.weight() for layer in self.layers]
        for layer, w in zip(self.layers[:-1], weights[:-1]):
            z = h @ w + layer.b
            pre.append(z)
            h = _ACTS[self.act](z)
        out = h @ weights[-1] + self.layers[-1].b
        if out.shape[-1] != 1:
            raise ValueError("input gradient path requires a scalar head")
        g = tensor(np.ones((x.shape[0], 1)))
        for w, z in zip(reversed(weights[1:]), reversed(pre)):
            g = (g @ w.transpose_last()) * _act_derivative(z, self.act)
        g = g @ weights[0].transpose_last()
        return out, g


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = param(np.ones(dim))
        self.beta = param(np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered / (var + self.eps).sqrt() * self.gamma + self.beta


class CausalSelfAttention(Module):
    """Dot-product self-attention; the mask argument carries causal and
    padding structure as an additive bias (0 or MASK_NEG)."""

    def __init__(self, embed_dim: int, n_heads: int, rng: np.random.Generator):
        if embed_dim % n_heads:
            raise ValueError("embed_dim must divide by n_heads")
        self.n_heads = n_heads
        self.head_dim = embed_dim // n_heads
        s = 0.02
        self.wq = Linear(embed_dim, embed_dim, rng, s)
        self.wk = Linear(embed_dim, embed_dim, rng, s)
        self.wv = Linear(embed_dim, embed_dim, rng, s)
        self.wo = Linear(embed_dim, embed_dim, rng, s)

    def __call__(self, x: Tensor, mask_bias: np.ndarray) -> Tensor:
        B, T, e = x.shape
        h, d = self.n_heads, self.head_dim

        def split(t: Tensor) -> Tensor:
            return t.reshape(B, T, h, d).transpose(0, 2, 1, 3)

        q, k, v = split(self.wq(x)), split(self.wk(x)), split(self.wv(x))
        scores = (q @ k.transpose_last()) * (1.0 / np.sqrt(d)) + tensor(mask_bias)
        att = scores.softmax(axis=-1)
        ctx = (att @ v).transpose(0, 2, 1, 3).reshape(B, T, e)
        return self.wo(ctx)


class DecoderBlock(Module):
    """Pre-norm transformer decoder block (attention + MLP, residual)."""

    def __init__(self, embed_dim: int, n_heads: int, rng: np.random.Generator, mlp_ratio: int = 4):
        self.ln1 = LayerNorm(embed_dim)
        self.attn = CausalSelfAttention(embed_dim, n_heads, rng)
        self.ln2 = LayerNorm(embed_dim)
        self.fc1 = Linear(embed_dim, mlp_ratio * embed_dim, rng, 0.02)
        self.fc2 = Linear(mlp_ratio * embed_dim, embed_dim, rng, 0.02)

    def __call__(self, x: Tensor, mask_bias: np.ndarray) -> Tensor:
        x = x + self.attn(self.ln1(x), mask_bias)
        return x + self.fc2(self.fc1(self.ln2(x)).gelu())


def causal_mask_bias(T: int) -> np.ndarray:
    """(1, 1, T, T) additive bias: position i may attend to j <= i."""
    bias = np.zeros((1, 1, T, T))
    bias[:, :, np.triu_indices(T, 1)[0], np.triu_indices(T, 1)[1]] = MASK_NEG
    return bias


def pad_mask_bias(valid: np.ndarray) -> np.ndarray:
    """(B, 1, 1, T) additive bias masking attention TO padded positions.

    `valid` is a (B, T) boolean array, True where the token is real.
    """
    bias = np.where(valid[:, None, None, :], 0.0, MASK_NEG)
    return bias

from .tensor import Tensor, backward, concat, embedding, param, stack, tensor
from .layers import (
    MLP,
    CausalSelfAttention,
    DecoderBlock,
    LayerNorm,
    Linear,
    Module,
    SpectralLinear,
    causal_mask_bias,
    pad_mask_bias,
    power_iteration,
    spectral_normalize,
)
from .optim import Adam, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .penalty import gradient_penalty

__all__ = [
    "Adam", "CausalSelfAttention", "DecoderBlock", "LayerNorm", "Linear",
    "MLP", "Module", "SpectralLinear", "Tensor", "adam_step", "backward",
    "causal_mask_bias", "concat", "embedding", "gradient_penalty",
    "load_checkpoint", "pad_mask_bias", "param", "power_iteration",
    "save_checkpoint", "spectral_normalize", "stack", "tensor",
]

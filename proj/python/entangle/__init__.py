"""Disentangled-representation experiments: core operations bound from C++."""

from ._core import (
    __version__,
    apply_primitive,
    cfn_param_count,
    disentanglement,
    ffn_param_count,
    gaussian_kl_to_standard,
    prelu,
    primitive_names,
    render_sprite,
    sample_batch,
    sharpen,
    softmax,
)

__all__ = [
    "__version__",
    "apply_primitive",
    "cfn_param_count",
    "disentanglement",
    "ffn_param_count",
    "gaussian_kl_to_standard",
    "prelu",
    "primitive_names",
    "render_sprite",
    "sample_batch",
    "sharpen",
    "softmax",
]

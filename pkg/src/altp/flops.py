"""Analytic transformer FLOPs model for image-token pruning."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple


def layer_flops(n: int, d: int, m: int) -> int:
    """FLOPs of one attention + FFN layer over ``n`` tokens.

    ``4nd^2`` for the QKV/output projections, ``2n^2 d`` for attention
    scores and mixing, ``2ndm`` for the feed-forward block. Integer inputs
    give an exact integer.
    """
    if n < 0:
        raise ValueError("token count must be >= 0")
    return 4 * n * d * d + 2 * n * n * d + 2 * n * d * m


@dataclass(frozen=True)
class FlopsConfig:
    hidden_size: int = 4096
    ffn_intermediate: int = 11008
    num_layers: int = 32
    prune_layer: int = 2
    tokens_before: int = 576
    drop_ratio: float = 0.0

    def __post_init__(self):
        for name in ("hidden_size", "ffn_intermediate", "num_layers", "tokens_before"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.prune_layer <= self.num_layers:
            raise ValueError("prune_layer must lie in [0, num_layers]")
        if not 0.0 <= self.drop_ratio <= 1.0:
            raise ValueError("drop_ratio must lie in [0, 1]")

    @property
    def tokens_after(self) -> int:
        return math.floor((1.0 - self.drop_ratio) * self.tokens_before + 1e-9)

    def to_dict(self) -> dict:
        return {
            "hidden_size": self.hidden_size,
            "ffn_intermediate": self.ffn_intermediate,
            "num_layers": self.num_layers,
            "prune_layer": self.prune_layer,
            "tokens_before": self.tokens_before,
            "drop_ratio": self.drop_ratio,
        }


class FlopsRatio(NamedTuple):
    remaining: float
    reduction: float


def remaining_ratio(config: FlopsConfig) -> FlopsRatio:
    """Fraction of image-token FLOPs left after pruning at ``prune_layer``.

    The first ``prune_layer`` layers see all ``n`` tokens, the rest see
    ``floor((1 - R) * n)``. Evaluated in exact rational arithmetic.
    """
    d, m = config.hidden_size, config.ffn_intermediate
    t, k = config.num_layers, config.prune_layer
    full = layer_flops(config.tokens_before, d, m)
    pruned = layer_flops(config.tokens_after, d, m)
    remaining = Fraction(k * full + (t - k) * pruned, t * full)
    return FlopsRatio(float(remaining), float(1 - remaining))

"""Max-selection fusion of aligned feature maps.

Fuses N warped views by taking the elementwise maximum over maps; the
winning input index is recorded per position so gradients can be routed
back deterministically. Ties go to the lowest input index. The learned
post-fusion layer (conv + norm + relu) would attach immediately after
`max_select`; it is out of scope here.
"""

from typing import List, Sequence, Tuple

import numpy as np

__all__ = ["max_select", "max_select_backward"]


def max_select(maps: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Elementwise maximum across N equally shaped maps.

    Returns (fused, winners) where winners holds the smallest input index
    attaining the maximum at each position.
    """
    if len(maps) == 0:
        raise ValueError("max_select needs at least one input map")
    stack = np.stack([np.asarray(m) for m in maps], axis=0)
    fused = stack.max(axis=0)
    winners = stack.argmax(axis=0)  # argmax returns the first (lowest) index
    return fused, winners


def max_select_backward(
    winners: np.ndarray, dfused: np.ndarray, n: int
) -> List[np.ndarray]:
    """Route the fused gradient entirely to each position's winning input."""
    winners = np.asarray(winners)
    dfused = np.asarray(dfused)
    if winners.shape != dfused.shape:
        raise ValueError("winners and dfused shapes must match")
    if winners.size and winners.max() >= n:
        raise ValueError(f"winner index {winners.max()} out of range for n={n}")
    return [np.where(winners == i, dfused, 0.0) for i in range(n)]

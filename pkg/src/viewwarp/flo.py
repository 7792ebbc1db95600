"""Middlebury .flo optical-flow file format.

Layout (all little-endian): float32 magic 202021.25, int32 width, int32
height, then height*width interleaved (u, v) float32 pairs in row-major
order.
"""

import numpy as np

from .errors import DataFormatError

__all__ = ["FLO_MAGIC", "read_flo", "write_flo"]

FLO_MAGIC = 202021.25


def write_flo(path, flow: np.ndarray) -> None:
    """Write an (H, W, 2) flow array."""
    flow = np.asarray(flow, dtype=np.float32)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must have shape (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    with open(path, "wb") as fh:
        np.float32(FLO_MAGIC).astype("<f4").tofile(fh)
        np.array([w, h], dtype="<i4").tofile(fh)
        flow.astype("<f4").tofile(fh)


def read_flo(path) -> np.ndarray:
    """Read a .flo file back into an (H, W, 2) float32 array."""
    with open(path, "rb") as fh:
        magic = np.fromfile(fh, "<f4", count=1)
        if magic.size != 1 or magic[0] != np.float32(FLO_MAGIC):
            raise DataFormatError(f"{path}: bad .flo magic number")
        dims = np.fromfile(fh, "<i4", count=2)
        if dims.size != 2 or (dims <= 0).any():
            raise DataFormatError(f"{path}: bad .flo dimensions")
        w, h = int(dims[0]), int(dims[1])
        data = np.fromfile(fh, "<f4", count=2 * w * h)
        if data.size != 2 * w * h:
            raise DataFormatError(f"{path}: truncated .flo payload")
    return data.reshape(h, w, 2)

"""Parametric sampling-grid generation and the differentiable bilinear sampler.

The sampling grid maps every output pixel to a source coordinate in the
input feature map, in normalized [-1, 1] coordinates:

    source = g @ (x, y, x^2, xy, y^2, 1)^T + d * h @ (x, y, 1)^T

with (x, y) the normalized target coordinate and d the inverse-depth value
at the source, approximated by a short fixed-point iteration (one pass by
default): d starts at the target pixel's value and is re-sampled at the
current source estimate.

The coefficient matrices g (2x6) and h (2x3) either come from small fully
connected networks (training path) or from `analytic_coeffs`, which makes
the grid reproduce backward warping under the instantaneous motion model
exactly; the rotational flow is quadratic and the translational flow affine
in the normalized coordinates, so both fit the bases without residue.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .geometry import CameraIntrinsics, EgoMotion, InverseDepthMap

__all__ = [
    "SamplingGrid",
    "TransformCoeffs",
    "CoeffNetWeights",
    "normalize_coords",
    "denormalize_coords",
    "monomials",
    "analytic_coeffs",
    "identity_coeffs",
    "generate_grid",
    "bilinear_sample",
    "bilinear_backward",
    "coeff_net_init",
    "coeff_net_forward",
    "coeff_net_backward",
    "dropout_noise",
]

# Pixel coordinates this close to an integer are snapped to it before the
# bilinear weights are formed. Covers the ~1e-13 px noise of the normalize/
# denormalize round trip so that an identity grid copies the input bitwise.
_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class SamplingGrid:
    """Normalized source coordinates, one (x, y) row per output pixel
    (row-major). Values may fall outside [-1, 1]; sampling there is defined
    by zero padding."""

    height: int
    width: int
    coords: np.ndarray  # (H*W, 2) float64

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.shape != (self.height * self.width, 2):
            raise ValueError(
                f"grid coords shape {coords.shape} does not match "
                f"{self.height}x{self.width}"
            )
        object.__setattr__(self, "coords", coords)


@dataclass(frozen=True)
class TransformCoeffs:
    g: np.ndarray  # (2, 6) rotation pathway over (x, y, x^2, xy, y^2, 1)
    h: np.ndarray  # (2, 3) translation pathway over (x, y, 1)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.float64)
        h = np.asarray(self.h, dtype=np.float64)
        if g.shape != (2, 6) or h.shape != (2, 3):
            raise ValueError("g must be 2x6 and h 2x3")
        if not (np.isfinite(g).all() and np.isfinite(h).all()):
            raise ValueError("transform coefficients must be finite")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)


IDENTITY_G = np.array([[1.0, 0, 0, 0, 0, 0], [0, 1.0, 0, 0, 0, 0]])


def identity_coeffs() -> TransformCoeffs:
    return TransformCoeffs(g=IDENTITY_G.copy(), h=np.zeros((2, 3)))


def normalize_coords(x, y, width: int, height: int):
    """Map pixel coordinates to [-1, 1] (corners at -1 and 1)."""
    if width < 2 or height < 2:
        raise ValueError("normalization needs width, height >= 2")
    return 2.0 * np.asarray(x) / (width - 1) - 1.0, 2.0 * np.asarray(y) / (height - 1) - 1.0


def denormalize_coords(xn, yn, width: int, height: int):
    """Inverse of normalize_coords."""
    return (np.asarray(xn) + 1.0) * (width - 1) / 2.0, (np.asarray(yn) + 1.0) * (height - 1) / 2.0


def monomials(xn, yn) -> np.ndarray:
    """Quadratic monomial basis (x, y, x^2, xy, y^2, 1)."""
    xn = np.asarray(xn, dtype=np.float64)
    yn = np.asarray(yn, dtype=np.float64)
    return np.stack(
        [xn, yn, xn * xn, xn * yn, yn * yn, np.ones_like(xn)], axis=-1
    )


def _affine_product(p, q):
    """Product of two affine polynomials (px*x + py*y + pc) expressed in the
    6-monomial basis."""
    px, py, pc = p
    qx, qy, qc = q
    return np.array(
        [
            px * qc + pc * qx,  # x
            py * qc + pc * qy,  # y
            px * qx,            # x^2
            px * qy + py * qx,  # xy
            py * qy,            # y^2
            pc * qc,            # 1
        ]
    )


def analytic_coeffs(
    m: EgoMotion,
    k: CameraIntrinsics,
    width: int,
    height: int,
    depth_scale: float = 1.0,
) -> TransformCoeffs:
    """Closed-form g, h reproducing the instantaneous-model backward warp.

    The resulting grid satisfies source = target - normalized(flow at
    target) when the inverse-depth map holds d/depth_scale, i.e. the grid's
    depth values times depth_scale are metric inverse depths.
    """
    sx = (width - 1) / 2.0
    sy = (height - 1) / 2.0
    f = k.f
    # centered pixel coordinates as affine functions of normalized coords
    xt = (sx, 0.0, sx - k.x0)  # (coeff of x, coeff of y, constant)
    yt = (0.0, sy, sy - k.y0)

    xy = _affine_product(xt, yt)
    xx = _affine_product(xt, xt)
    yy = _affine_product(yt, yt)
    one = np.array([0, 0, 0, 0, 0, 1.0])
    xt6 = np.array([xt[0], xt[1], 0, 0, 0, xt[2]])
    yt6 = np.array([yt[0], yt[1], 0, 0, 0, yt[2]])

    wx, wy, wz = m.omega
    flow_x = (wx / f) * xy + wy * (-f * one - xx / f) + wz * yt6
    flow_y = wx * (f * one + yy / f) + (-wy / f) * xy + (-wz) * xt6

    g = np.zeros((2, 6))
    g[0] = np.array([1.0, 0, 0, 0, 0, 0]) - flow_x / sx
    g[1] = np.array([0, 1.0, 0, 0, 0, 0]) - flow_y / sy

    tx, ty, tz = m.t
    h = np.zeros((2, 3))
    h[0] = -(depth_scale / sx) * np.array([tz * xt[0], 0.0, -f * tx + tz * xt[2]])
    h[1] = -(depth_scale / sy) * np.array([0.0, tz * yt[1], -f * ty + tz * yt[2]])
    return TransformCoeffs(g=g, h=h)


def _sample_depth_masked(values, mask, xp, yp):
    """Bilinear lookup on a masked 2D map at pixel coordinates (xp, yp).

    Invalid and out-of-bounds neighbors are dropped and the remaining
    weights renormalized. Returns (samples, ok) where ok is False when all
    four neighbors were unusable.
    """
    h, w = values.shape
    x0 = np.floor(xp).astype(np.int64)
    y0 = np.floor(yp).astype(np.int64)
    wx = xp - x0
    wy = yp - y0

    total = np.zeros(xp.shape)
    wsum = np.zeros(xp.shape)
    for dy, fy in ((0, 1.0 - wy), (1, wy)):
        for dx, fx in ((0, 1.0 - wx), (1, wx)):
            xi = x0 + dx
            yi = y0 + dy
            inb = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            xi_c = np.clip(xi, 0, w - 1)
            yi_c = np.clip(yi, 0, h - 1)
            usable = inb & mask[yi_c, xi_c]
            wgt = np.where(usable, fx * fy, 0.0)
            total += wgt * values[yi_c, xi_c]
            wsum += wgt
    ok = wsum > 0
    samples = np.where(ok, total / np.where(ok, wsum, 1.0), 0.0)
    return samples, ok


def generate_grid(
    coeffs: TransformCoeffs, depth: InverseDepthMap, iterations: int = 1
) -> SamplingGrid:
    """Evaluate the grid equation with the inverse-depth fixed point.

    Pass 0 reads d at the target pixel; each further pass re-samples d
    bilinearly at the current source estimate and re-evaluates. Target
    pixels with invalid depth use d = 0 in pass 0 (translation term dropped
    there); where a re-sample finds no valid neighbor the previous d is
    kept.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    h, w = depth.height, depth.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    xn, yn = normalize_coords(xs.ravel(), ys.ravel(), w, h)
    mono = monomials(xn, yn)                  # (HW, 6)
    aff = np.stack([xn, yn, np.ones_like(xn)], axis=-1)  # (HW, 3)

    base = mono @ coeffs.g.T                  # (HW, 2)
    haff = aff @ coeffs.h.T                   # (HW, 2)

    d = np.where(depth.mask, depth.values, 0.0).ravel()
    src = base + d[:, None] * haff
    for _ in range(iterations):
        xp, yp = denormalize_coords(src[:, 0], src[:, 1], w, h)
        d_new, ok = _sample_depth_masked(depth.values, depth.mask, xp, yp)
        d = np.where(ok, d_new, d)
        src = base + d[:, None] * haff
    return SamplingGrid(height=h, width=w, coords=src)


def _pixel_coords(grid: SamplingGrid, width: int, height: int):
    xp, yp = denormalize_coords(grid.coords[:, 0], grid.coords[:, 1], width, height)
    xr = np.rint(xp)
    yr = np.rint(yp)
    xp = np.where(np.abs(xp - xr) <= _SNAP_TOL, xr, xp)
    yp = np.where(np.abs(yp - yr) <= _SNAP_TOL, yr, yp)
    return xp, yp


def bilinear_sample(u: np.ndarray, grid: SamplingGrid) -> np.ndarray:
    """Sample feature map u (H, W, C) at the grid's source coordinates.

    Out-of-bounds coordinates read zeros. The output has the grid's spatial
    shape and u's channel count and dtype; arithmetic is float64.
    """
    u = np.asarray(u)
    squeeze = u.ndim == 2
    if squeeze:
        u = u[..., None]
    hi, wi, c = u.shape
    uf = u.astype(np.float64, copy=False)
    xp, yp = _pixel_coords(grid, wi, hi)

    x0 = np.floor(xp).astype(np.int64)
    y0 = np.floor(yp).astype(np.int64)
    wx = xp - x0
    wy = yp - y0

    out = np.zeros((xp.shape[0], c))
    for dy, fy in ((0, 1.0 - wy), (1, wy)):
        for dx, fx in ((0, 1.0 - wx), (1, wx)):
            xi = x0 + dx
            yi = y0 + dy
            inb = (xi >= 0) & (xi < wi) & (yi >= 0) & (yi < hi)
            vals = uf[np.clip(yi, 0, hi - 1), np.clip(xi, 0, wi - 1)]
            vals = np.where(inb[:, None], vals, 0.0)
            out += (fx * fy)[:, None] * vals
    out = out.reshape(grid.height, grid.width, c)
    if squeeze:
        out = out[..., 0]
    return out.astype(u.dtype, copy=False)


def bilinear_backward(u: np.ndarray, grid: SamplingGrid, dv: np.ndarray):
    """Gradients of bilinear_sample w.r.t. the feature map and the grid.

    Returns (du with u's shape, dgrid with shape (H*W, 2)) where dgrid is in
    normalized coordinates (the hat-kernel derivative chained through the
    denormalization scale). The scatter into du uses a fixed accumulation
    order, so results are deterministic.
    """
    u = np.asarray(u)
    squeeze = u.ndim == 2
    if squeeze:
        u = u[..., None]
    hi, wi, c = u.shape
    uf = u.astype(np.float64, copy=False)
    dv = np.asarray(dv, dtype=np.float64).reshape(grid.height * grid.width, c)
    xp, yp = _pixel_coords(grid, wi, hi)

    x0 = np.floor(xp).astype(np.int64)
    y0 = np.floor(yp).astype(np.int64)
    wx = xp - x0
    wy = yp - y0

    du = np.zeros((hi, wi, c))
    dxp = np.zeros(xp.shape[0])
    dyp = np.zeros(yp.shape[0])
    for dy, fy, sy in ((0, 1.0 - wy, -1.0), (1, wy, 1.0)):
        for dx, fx, sx in ((0, 1.0 - wx, -1.0), (1, wx, 1.0)):
            xi = x0 + dx
            yi = y0 + dy
            inb = (xi >= 0) & (xi < wi) & (yi >= 0) & (yi < hi)
            xi_c = np.clip(xi, 0, wi - 1)
            yi_c = np.clip(yi, 0, hi - 1)
            wgt = np.where(inb, fx * fy, 0.0)
            np.add.at(du, (yi_c, xi_c), np.where(inb[:, None], wgt[:, None] * dv, 0.0))
            vals = np.where(inb[:, None], uf[yi_c, xi_c], 0.0)
            contrib = np.einsum("ij,ij->i", vals, dv)
            dxp += np.where(inb, sx * fy, 0.0) * contrib
            dyp += np.where(inb, fx * sy, 0.0) * contrib
    dgrid = np.stack([dxp * (wi - 1) / 2.0, dyp * (hi - 1) / 2.0], axis=-1)
    if squeeze:
        du = du[..., 0]
    return du.astype(u.dtype, copy=False), dgrid


# ---------------------------------------------------------------------------
# Coefficient-generator networks (tiny fully connected nets, tanh hidden
# layers, linear head). Identity initialization makes the untrained pipeline
# a no-op: zero rotation input -> identity-grid g, zero translation -> h = 0.
# ---------------------------------------------------------------------------


@dataclass
class CoeffNetWeights:
    weights: List[np.ndarray]  # each (out, in)
    biases: List[np.ndarray]   # each (out,)
    out_shape: Tuple[int, int]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must pair up")
        dim = None
        for wmat, b in zip(self.weights, self.biases):
            if wmat.ndim != 2 or b.shape != (wmat.shape[0],):
                raise ValueError("layer shapes do not chain")
            if dim is not None and wmat.shape[1] != dim:
                raise ValueError("layer shapes do not chain")
            dim = wmat.shape[0]
        rows, cols = self.out_shape
        if dim != rows * cols:
            raise ValueError(
                f"final layer produces {dim} values, expected {rows * cols}"
            )


def coeff_net_init(pathway: str, hidden=(32, 32), seed: int = 0) -> CoeffNetWeights:
    """Weights for the g ("rotation") or h ("translation") pathway.

    Hidden layers get small random weights; the head is zero with its bias
    set to the identity-grid coefficients, so the fresh net outputs the
    identity transform regardless of input.
    """
    if pathway == "rotation":
        out_shape = (2, 6)
        identity = IDENTITY_G.ravel()
    elif pathway == "translation":
        out_shape = (2, 3)
        identity = np.zeros(6)
    else:
        raise ValueError(f"unknown pathway {pathway!r}")

    rng = np.random.default_rng(seed)
    sizes = [3, *hidden, out_shape[0] * out_shape[1]]
    weights, biases = [], []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        if i == len(sizes) - 2:
            weights.append(np.zeros((fan_out, fan_in)))
            biases.append(identity.copy())
        else:
            weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), (fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
    return CoeffNetWeights(weights=weights, biases=biases, out_shape=out_shape)


def coeff_net_forward(x, w: CoeffNetWeights) -> np.ndarray:
    """Run the net on a 3-vector; returns the pathway matrix (2x6 or 2x3)."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (w.weights[0].shape[1],):
        raise ValueError(f"input shape {a.shape} does not match the first layer")
    n = len(w.weights)
    for i in range(n):
        a = w.weights[i] @ a + w.biases[i]
        if i < n - 1:
            a = np.tanh(a)
    return a.reshape(w.out_shape)


def coeff_net_backward(x, w: CoeffNetWeights, dout):
    """Reverse-mode gradients of coeff_net_forward.

    Returns (dx, (dweights, dbiases)) matching the layer list layout.
    """
    a = np.asarray(x, dtype=np.float64)
    n = len(w.weights)
    acts = [a]  # post-activation inputs to each layer
    for i in range(n):
        z = w.weights[i] @ acts[-1] + w.biases[i]
        acts.append(np.tanh(z) if i < n - 1 else z)

    grad = np.asarray(dout, dtype=np.float64).reshape(-1)
    dws = [None] * n
    dbs = [None] * n
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            grad = grad * (1.0 - acts[i + 1] ** 2)  # tanh'
        dws[i] = np.outer(grad, acts[i])
        dbs[i] = grad.copy()
        grad = w.weights[i].T @ grad
    return grad, (dws, dbs)


def dropout_noise(v: np.ndarray, rate: float, seed: int) -> np.ndarray:
    """Seeded inverted dropout; the source of generation randomness (applied
    after the sampling layer at train and test time)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    v = np.asarray(v)
    if rate == 0.0:
        return v.copy()
    rng = np.random.default_rng(seed)
    keep = rng.random(v.shape) >= rate
    return np.where(keep, v / (1.0 - rate), 0.0).astype(v.dtype, copy=False)

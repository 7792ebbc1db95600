"""Finite-difference verification of every analytic gradient in the package.

Each suite draws random instances, compares the analytic gradients against
central differences, and reports the worst relative error. Relative error
uses the denominator max(1, |analytic|, |numeric|) so near-zero gradients
are compared absolutely.

Kink exclusion: sampling-grid points are kept at least 1e-3 px away from
integer pixel coordinates, and L1 residuals at least 1e-6 away from zero,
where the respective derivatives are undefined.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np

from . import losses
from .grid_sampler import (
    CoeffNetWeights,
    SamplingGrid,
    bilinear_backward,
    bilinear_sample,
    coeff_net_backward,
    coeff_net_forward,
    coeff_net_init,
)

__all__ = [
    "central_difference",
    "rel_error",
    "check_bilinear",
    "check_coeff_net",
    "check_losses",
    "run_all",
    "SAMPLER_TOL",
    "LOSS_TOL",
]

SAMPLER_TOL = 1e-4
LOSS_TOL = 1e-5
FD_STEP = 1e-4
KINK_MARGIN = 1e-3


def central_difference(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Gradient of scalar-valued f at x by central differences, entrywise."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros(x.shape)
    flat = x.copy()
    for i in range(flat.size):
        orig = flat.flat[i]
        flat.flat[i] = orig + step
        up = f(flat)
        flat.flat[i] = orig - step
        down = f(flat)
        flat.flat[i] = orig
        grad.flat[i] = (up - down) / (2.0 * step)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def _random_grid(rng, h, w, hi, wi) -> SamplingGrid:
    """Random grid whose pixel coordinates avoid integer kinks."""
    xp = rng.uniform(-1.0, wi, size=h * w)
    yp = rng.uniform(-1.0, hi, size=h * w)
    for arr in (xp, yp):
        near = np.abs(arr - np.rint(arr)) < KINK_MARGIN
        arr[near] += 2 * KINK_MARGIN
    xn = 2.0 * xp / (wi - 1) - 1.0
    yn = 2.0 * yp / (hi - 1) - 1.0
    return SamplingGrid(height=h, width=w, coords=np.stack([xn, yn], axis=-1))


def check_bilinear(seed: int = 0, instances: int = 100, max_size: int = 16) -> Dict[str, float]:
    """FD check of bilinear_backward's feature-map and grid gradients."""
    rng = np.random.default_rng(seed)
    worst = {"bilinear_dU": 0.0, "bilinear_dGrid": 0.0}
    for _ in range(instances):
        hi = int(rng.integers(2, max_size + 1))
        wi = int(rng.integers(2, max_size + 1))
        c = int(rng.integers(1, 5))
        h = int(rng.integers(2, max_size + 1))
        w = int(rng.integers(2, max_size + 1))
        u = rng.standard_normal((hi, wi, c))
        grid = _random_grid(rng, h, w, hi, wi)
        dv = rng.standard_normal((h, w, c))

        du, dgrid = bilinear_backward(u, grid, dv)

        def loss_u(uu):
            return float(np.sum(bilinear_sample(uu, grid) * dv))

        def loss_grid(coords):
            g = SamplingGrid(height=h, width=w, coords=coords.reshape(-1, 2))
            return float(np.sum(bilinear_sample(u, g) * dv))

        fd_u = central_difference(loss_u, u)
        fd_grid = central_difference(loss_grid, grid.coords).reshape(-1, 2)
        worst["bilinear_dU"] = max(worst["bilinear_dU"], rel_error(du, fd_u))
        worst["bilinear_dGrid"] = max(worst["bilinear_dGrid"], rel_error(dgrid, fd_grid))
    return worst


def _flatten_weights(w: CoeffNetWeights) -> np.ndarray:
    return np.concatenate([m.ravel() for m in w.weights] + [b for b in w.biases])


def _with_weights(w: CoeffNetWeights, flat: np.ndarray) -> CoeffNetWeights:
    ws, bs = [], []
    pos = 0
    for m in w.weights:
        ws.append(flat[pos : pos + m.size].reshape(m.shape))
        pos += m.size
    for b in w.biases:
        bs.append(flat[pos : pos + b.size].copy())
        pos += b.size
    return CoeffNetWeights(weights=ws, biases=bs, out_shape=w.out_shape)


def check_coeff_net(seed: int = 0, instances: int = 100) -> Dict[str, float]:
    """FD check of the coefficient-net input and weight gradients."""
    rng = np.random.default_rng(seed)
    worst = {"coeffnet_dInput": 0.0, "coeffnet_dWeights": 0.0}
    for i in range(instances):
        pathway = "rotation" if i % 2 == 0 else "translation"
        w = coeff_net_init(pathway, hidden=(8, 8), seed=int(rng.integers(1 << 30)))
        # randomize the head too so gradients are non-trivial
        w.weights[-1] = rng.standard_normal(w.weights[-1].shape) * 0.3
        w.biases[-1] = rng.standard_normal(w.biases[-1].shape) * 0.3
        x = rng.standard_normal(3)
        dout = rng.standard_normal(w.out_shape)

        dx, (dws, dbs) = coeff_net_backward(x, w, dout)
        danalytic = np.concatenate([m.ravel() for m in dws] + [b for b in dbs])

        def loss_x(xx):
            return float(np.sum(coeff_net_forward(xx, w) * dout))

        def loss_w(flat):
            return float(np.sum(coeff_net_forward(x, _with_weights(w, flat)) * dout))

        fd_x = central_difference(loss_x, x)
        fd_w = central_difference(loss_w, _flatten_weights(w))
        worst["coeffnet_dInput"] = max(worst["coeffnet_dInput"], rel_error(dx, fd_x))
        worst["coeffnet_dWeights"] = max(
            worst["coeffnet_dWeights"], rel_error(danalytic, fd_w)
        )
    return worst


def check_losses(seed: int = 0, instances: int = 100) -> Dict[str, float]:
    """FD check of every loss gradient, away from L1 kinks."""
    rng = np.random.default_rng(seed)
    w = losses.LossWeights(lambda_aux=0.1, phi=10.0)
    worst = {
        "loss_ls_d": 0.0,
        "loss_aux_d": 0.0,
        "loss_g_fake": 0.0,
        "loss_g_pose": 0.0,
        "loss_g_image": 0.0,
    }
    for _ in range(instances):
        n_real = int(rng.integers(1, 9))
        n_fake = int(rng.integers(1, 9))
        real = rng.standard_normal(n_real)
        fake = rng.standard_normal(n_fake)
        dr, df = losses.ls_d_loss_grad(real, fake)
        worst["loss_ls_d"] = max(
            worst["loss_ls_d"],
            rel_error(dr, central_difference(lambda r: losses.ls_d_loss(r, fake), real, 1e-5)),
            rel_error(df, central_difference(lambda f: losses.ls_d_loss(real, f), fake, 1e-5)),
        )

        theta = rng.standard_normal(6)
        z = losses.PoseNoise(z_t=rng.standard_normal(6))
        pr = rng.standard_normal(6)
        pf = rng.standard_normal(6)
        gr, gf = losses.aux_d_loss_grad(pr, theta, pf, z)
        worst["loss_aux_d"] = max(
            worst["loss_aux_d"],
            rel_error(gr, central_difference(lambda p: losses.aux_d_loss(p, theta, pf, z), pr, 1e-5)),
            rel_error(gf, central_difference(lambda p: losses.aux_d_loss(pr, theta, p, z), pf, 1e-5)),
        )

        gen = rng.random((5, 7, 3))
        target = rng.random((5, 7, 3))
        # keep residuals off the L1 kink
        resid = gen - target
        small = np.abs(resid) < 1e-3
        gen = np.where(small, target + np.sign(resid + 1e-12) * 1e-2, gen)
        d_fake, d_pose, d_gen = losses.g_total_grad(fake, pf, theta, gen, target, w)
        worst["loss_g_fake"] = max(
            worst["loss_g_fake"],
            rel_error(d_fake, central_difference(
                lambda f: losses.g_total(f, pf, theta, gen, target, w), fake, 1e-5)),
        )
        worst["loss_g_pose"] = max(
            worst["loss_g_pose"],
            rel_error(d_pose, central_difference(
                lambda p: losses.g_total(fake, p, theta, gen, target, w), pf, 1e-5)),
        )
        worst["loss_g_image"] = max(
            worst["loss_g_image"],
            rel_error(d_gen, central_difference(
                lambda g: losses.g_total(fake, pf, theta, g, target, w), gen, 1e-5)),
        )
    return worst


def run_all(seed: int = 0, instances: int = 100, max_size: int = 16,
            corrupt: str = "") -> Dict[str, float]:
    """All suites; `corrupt` names a component to deliberately break (used
    as a negative control by the CLI tests)."""
    report = {}
    report.update(check_bilinear(seed=seed, instances=instances, max_size=max_size))
    report.update(check_coeff_net(seed=seed, instances=instances))
    report.update(check_losses(seed=seed, instances=instances))
    if corrupt:
        if corrupt not in report:
            raise ValueError(f"unknown component to corrupt: {corrupt!r}")
        report[corrupt] += 1.0
    return report


def tolerance_for(component: str) -> float:
    return LOSS_TOL if component.startswith("loss_") else SAMPLER_TOL

"""Adversarial loss algebra and the pixel-L1 evaluation metric.

The discriminator has two heads: a least-squares real/fake score (real
target +1, fake target -1, kept exactly as printed even though the -1 fake
label is a nonstandard LSGAN choice) and an auxiliary 6-DoF pose regressor.
The discriminator's fake-pose branch regresses toward random normal noise
z_t, while the generator's pose term targets the true motion; both forms
are implemented as written.

All expectations are arithmetic means over flat per-sample lists. Analytic
gradients accompany every objective; the L1 subgradient at 0 is 0.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LossWeights",
    "PoseNoise",
    "ls_d_loss",
    "ls_d_loss_grad",
    "aux_d_loss",
    "aux_d_loss_grad",
    "d_total",
    "g_total",
    "g_total_grad",
    "mean_pixel_l1",
    "mean_pixel_l1_grad",
]


@dataclass(frozen=True)
class LossWeights:
    """lambda_aux weights the pose term; phi the reconstruction term.

    The reconstruction weight is not specified by the loss definition
    itself; 10 is a conventional L1-dominant default and is configurable.
    """

    lambda_aux: float = 0.1
    phi: float = 10.0

    def __post_init__(self):
        if self.lambda_aux < 0 or self.phi < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class PoseNoise:
    """Standard-normal 6-vector used as the fake-pose regression target."""

    z_t: np.ndarray

    @classmethod
    def sample(cls, seed: int) -> "PoseNoise":
        return cls(z_t=np.random.default_rng(seed).standard_normal(6))


def _as_samples(scores) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("score list must be non-empty")
    return arr


def ls_d_loss(real_scores, fake_scores) -> float:
    """Least-squares discriminator term: real toward +1, fake toward -1."""
    real = _as_samples(real_scores)
    fake = _as_samples(fake_scores)
    return 0.5 * np.mean((real - 1.0) ** 2) + 0.5 * np.mean((fake + 1.0) ** 2)


def ls_d_loss_grad(real_scores, fake_scores):
    real = _as_samples(real_scores)
    fake = _as_samples(fake_scores)
    return (real - 1.0) / real.size, (fake + 1.0) / fake.size


def aux_d_loss(pose_real_est, theta_t, pose_fake_est, z_t: PoseNoise) -> float:
    """Auxiliary pose regression: real toward the true motion, fake toward noise."""
    pr = np.asarray(pose_real_est, dtype=np.float64)
    pf = np.asarray(pose_fake_est, dtype=np.float64)
    th = np.asarray(theta_t, dtype=np.float64)
    return 0.5 * np.mean((pr - th) ** 2) + 0.5 * np.mean((pf - z_t.z_t) ** 2)


def aux_d_loss_grad(pose_real_est, theta_t, pose_fake_est, z_t: PoseNoise):
    pr = np.asarray(pose_real_est, dtype=np.float64)
    pf = np.asarray(pose_fake_est, dtype=np.float64)
    th = np.asarray(theta_t, dtype=np.float64)
    return (pr - th) / pr.size, (pf - z_t.z_t) / pf.size


def d_total(ls: float, aux: float, w: LossWeights) -> float:
    """Full discriminator objective: ls + lambda * aux."""
    return ls + w.lambda_aux * aux


def g_total(
    fake_scores, pose_fake_est, theta_t, gen_image, target_image, w: LossWeights
) -> float:
    """Generator objective: LS score toward 0, pose toward the true motion,
    plus weighted pixel L1 against the target image."""
    fake = _as_samples(fake_scores)
    pf = np.asarray(pose_fake_est, dtype=np.float64)
    th = np.asarray(theta_t, dtype=np.float64)
    return (
        0.5 * np.mean(fake**2)
        + w.lambda_aux * np.mean((pf - th) ** 2)
        + w.phi * mean_pixel_l1(gen_image, target_image)
    )


def g_total_grad(
    fake_scores, pose_fake_est, theta_t, gen_image, target_image, w: LossWeights
):
    """Gradients of g_total w.r.t. fake scores, fake-pose estimate, and the
    generated image."""
    fake = _as_samples(fake_scores)
    pf = np.asarray(pose_fake_est, dtype=np.float64)
    th = np.asarray(theta_t, dtype=np.float64)
    d_fake = fake / fake.size
    d_pose = 2.0 * w.lambda_aux * (pf - th) / pf.size
    d_gen = w.phi * mean_pixel_l1_grad(gen_image, target_image)
    return d_fake, d_pose, d_gen


def mean_pixel_l1(a, b) -> float:
    """Mean absolute difference over all pixels and channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def mean_pixel_l1_grad(a, b) -> np.ndarray:
    """Subgradient of mean_pixel_l1 w.r.t. its first argument (0 at kinks)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return np.sign(a - b) / a.size

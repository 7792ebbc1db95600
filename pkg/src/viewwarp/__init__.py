"""Differentiable view-synthesis kernels: instantaneous-motion flow fields,
parametric grid sampling with analytic gradients, max-selection fusion,
adversarial loss heads, and KITTI-style I/O."""

from .geometry import (
    CameraIntrinsics,
    EgoMotion,
    FlowField,
    InverseDepthMap,
    centered_coords,
    flow_field,
    pixel_flow,
    q_omega,
    q_t,
)
from .grid_sampler import (
    SamplingGrid,
    TransformCoeffs,
    analytic_coeffs,
    bilinear_backward,
    bilinear_sample,
    generate_grid,
    identity_coeffs,
    normalize_coords,
    denormalize_coords,
    monomials,
)
from .fusion import max_select, max_select_backward
from .losses import (
    LossWeights,
    PoseNoise,
    aux_d_loss,
    aux_d_loss_grad,
    d_total,
    g_total,
    g_total_grad,
    ls_d_loss,
    ls_d_loss_grad,
    mean_pixel_l1,
)
from .kitti_io import (
    DepthImage,
    PoseRecord,
    densify_depth,
    load_depth_png,
    load_odometry_poses,
    normalize_inverse_depth,
    relative_motion,
    resize_to,
    scale_intrinsics_for_resize,
    write_depth_png,
)
from .flo import read_flo, write_flo
from .reproject import (
    RigidTransform,
    SyntheticScene,
    euler_to_rotation,
    exact_flow_field,
    exact_reproject,
    forward_warp,
    motion_point_transform,
    render_synthetic,
)

__version__ = "0.1.0"

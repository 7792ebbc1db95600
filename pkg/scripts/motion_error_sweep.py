#!/usr/bin/env python3
"""Sweep motion magnitude and report how far the instantaneous flow model
drifts from exact pinhole reprojection on a synthetic depth ramp.

The error should shrink roughly 4x per halving of the motion, confirming the
first-order model's quadratic truncation error.
"""

import argparse

import numpy as np

from viewwarp import (
    CameraIntrinsics,
    EgoMotion,
    InverseDepthMap,
    SyntheticScene,
    exact_flow_field,
    flow_field,
    motion_point_transform,
    render_synthetic,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--height", type=int, default=64)
    ap.add_argument("--width", type=int, default=192)
    ap.add_argument("--focal", type=float, default=120.0)
    ap.add_argument("--omega-y-deg", type=float, default=2.0,
                    help="starting yaw rate in degrees")
    ap.add_argument("--t-z", type=float, default=0.5,
                    help="starting forward translation in metres")
    ap.add_argument("--levels", type=int, default=6,
                    help="number of halvings to sweep")
    ap.add_argument("--near", type=float, default=5.0)
    ap.add_argument("--far", type=float, default=20.0)
    args = ap.parse_args()

    k = CameraIntrinsics(f=args.focal, x0=(args.width - 1) / 2,
                         y0=(args.height - 1) / 2)
    _, depth = render_synthetic(SyntheticScene.ramp(args.near, args.far), k,
                                (args.height, args.width))
    inv = InverseDepthMap(values=1.0 / depth)

    print(f"{'omega_y [deg]':>14} {'t_z [m]':>9} {'max |err| [px]':>15} {'ratio':>7}")
    prev = None
    for level in range(args.levels):
        s = 0.5 ** level
        m = EgoMotion(
            omega=np.array([0.0, np.deg2rad(args.omega_y_deg) * s, 0.0]),
            t=np.array([0.0, 0.0, args.t_z * s]),
        )
        exact = exact_flow_field(depth, motion_point_transform(m), k)
        inst = flow_field(inv, m, k)
        err = np.abs(exact.u - inst.u)[exact.valid].max()
        ratio = f"{prev / err:7.3f}" if prev else "      -"
        print(f"{args.omega_y_deg * s:14.4f} {args.t_z * s:9.4f} {err:15.6e} {ratio}")
        prev = err


if __name__ == "__main__":
    main()

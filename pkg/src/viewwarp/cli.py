"""Command-line surface: warping, flow export, fusion, gradient checking,
evaluation, and pose/depth ingestion.

Exit codes (stable contract): 0 success, 1 check failure, 2 config/usage
error, 3 I/O error, 4 numerical degeneracy.

Configuration is a flat ``key=value`` text file; command-line flags override
file values. Images are 8-bit PNG, mapped internally to [0, 1].
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from . import gradcheck
from .errors import ConfigError, DataFormatError, DegeneracyError
from .flo import read_flo, write_flo
from .fusion import max_select
from .geometry import (
    CameraIntrinsics,
    EgoMotion,
    InverseDepthMap,
    flow_field,
)
from .grid_sampler import analytic_coeffs, bilinear_sample, generate_grid
from .kitti_io import (
    densify_depth,
    load_depth_png,
    load_odometry_poses,
    normalize_inverse_depth,
    relative_motion,
)
from .losses import mean_pixel_l1
from .reproject import exact_flow_field, forward_warp, motion_point_transform

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DEGENERATE = 4

_CONFIG_KEYS = {
    "focal", "x0", "y0", "motion", "pose_file", "pose_i", "pose_j",
    "seed", "iterations", "lambda", "phi", "backend",
}


@dataclass
class RunConfig:
    focal: float = None
    x0: float = None
    y0: float = None
    motion: np.ndarray = None
    pose_file: str = None
    pose_i: int = None
    pose_j: int = None
    seed: int = 0
    iterations: int = 1
    lambda_aux: float = 0.1
    phi: float = 10.0
    backend: str = "grid"

    def intrinsics(self) -> CameraIntrinsics:
        if self.focal is None or self.x0 is None or self.y0 is None:
            raise ConfigError("intrinsics incomplete: need focal, x0 and y0")
        try:
            return CameraIntrinsics(self.focal, self.x0, self.y0)
        except ValueError as exc:
            raise ConfigError(f"focal: {exc}") from exc

    def egomotion(self) -> EgoMotion:
        if self.motion is not None:
            return EgoMotion(omega=self.motion[:3], t=self.motion[3:])
        if self.pose_file is not None:
            if self.pose_i is None or self.pose_j is None:
                raise ConfigError("pose_file given but pose_i/pose_j missing")
            poses = load_odometry_poses(self.pose_file)
            for name, idx in (("pose_i", self.pose_i), ("pose_j", self.pose_j)):
                if not 0 <= idx < len(poses):
                    raise ConfigError(
                        f"{name}: index {idx} out of range (file has {len(poses)} poses)"
                    )
            return relative_motion(poses[self.pose_i], poses[self.pose_j])
        raise ConfigError("motion: provide --motion or a pose-pair reference")


def _parse_motion(text: str) -> np.ndarray:
    parts = text.replace(",", " ").split()
    if len(parts) != 6:
        raise ConfigError(f"motion: expected 6 values, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ConfigError(f"motion: {exc}") from exc


def load_config_file(path) -> dict:
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"config: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config:{lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"config:{lineno}: unknown key {key!r}")
        values[key] = val.strip()
    return values


def build_config(args) -> RunConfig:
    cfg = RunConfig()
    file_vals = load_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(flag_name, file_key, conv):
        flag = getattr(args, flag_name, None)
        if flag is not None:
            return conv(flag)
        if file_key in file_vals:
            try:
                return conv(file_vals[file_key])
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"config: {file_key}: {exc}") from exc
        return None

    cfg.focal = pick("focal", "focal", float)
    cfg.x0 = pick("x0", "x0", float)
    cfg.y0 = pick("y0", "y0", float)
    motion = pick("motion", "motion", _parse_motion)
    if motion is not None:
        cfg.motion = motion
    cfg.pose_file = pick("pose_file", "pose_file", str)
    cfg.pose_i = pick("pose_i", "pose_i", int)
    cfg.pose_j = pick("pose_j", "pose_j", int)
    cfg.seed = pick("seed", "seed", int) or 0
    it = pick("iterations", "iterations", int)
    cfg.iterations = 1 if it is None else it
    lam = pick("lambda_aux", "lambda", float)
    if lam is not None:
        cfg.lambda_aux = lam
    phi = pick("phi", "phi", float)
    if phi is not None:
        cfg.phi = phi
    backend = pick("backend", "backend", str)
    if backend is not None:
        if backend not in ("grid", "forward"):
            raise ConfigError(f"backend: must be 'grid' or 'forward', got {backend!r}")
        cfg.backend = backend
    return cfg


# ---------------------------------------------------------------------------
# image helpers
# ---------------------------------------------------------------------------


def read_image_png(path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataFormatError(f"cannot read image: {path}")
    if raw.dtype != np.uint8:
        raise DataFormatError(f"{path}: expected 8-bit PNG, got {raw.dtype}")
    if raw.ndim == 3:
        raw = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    else:
        raw = raw[..., None]
    return raw.astype(np.float64) / 255.0


def write_image_png(path, image: np.ndarray) -> None:
    arr = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 3:
        arr = cv2.cvtColor(arr, cv2.COLOR_RGB2BGR)
    elif arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if not cv2.imwrite(str(path), arr):
        raise DataFormatError(f"cannot write image: {path}")


def write_mask_png(path, mask: np.ndarray) -> None:
    arr = np.where(mask, 255, 0).astype(np.uint8)
    if not cv2.imwrite(str(path), arr):
        raise DataFormatError(f"cannot write mask: {path}")


def _warn_envelope(m: EgoMotion) -> None:
    if not m.within_envelope():
        print(
            f"warning: motion outside the documented +-7 m / +-22 deg envelope "
            f"(t_z={m.t[2]:.3f} m, omega_y={np.rad2deg(m.omega[1]):.3f} deg); "
            f"results may degrade",
            file=sys.stderr,
        )


def _dense_depth(depth_img) -> np.ndarray:
    if not depth_img.valid.all():
        if not depth_img.valid.any():
            raise DegeneracyError("depth map has no valid pixels")
        depth_img = densify_depth(depth_img)
    return depth_img.depth


def _warp_one(image, depth_m, m: EgoMotion, k: CameraIntrinsics, backend: str,
              iterations: int):
    """Warp an image to the view reached by egomotion m. Returns
    (warped, hole_mask)."""
    if backend == "forward":
        transform = motion_point_transform(m)
        return forward_warp(image, depth_m, transform, k)

    if (depth_m <= 0).any():
        raise DegeneracyError("grid backend needs strictly positive depth")
    inv = 1.0 / depth_m
    scale = max(1.0, float(inv.max()))
    depth = InverseDepthMap(values=inv / scale)
    h, w = depth_m.shape
    coeffs = analytic_coeffs(m, k, w, h, depth_scale=scale)
    grid = generate_grid(coeffs, depth, iterations=iterations)
    warped = bilinear_sample(image, grid)
    # backward warping has no true holes; flag source coords off the image
    xs = grid.coords[:, 0]
    ys = grid.coords[:, 1]
    hole = ((xs < -1) | (xs > 1) | (ys < -1) | (ys > 1)).reshape(h, w)
    return warped, hole


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_warp(args) -> int:
    cfg = build_config(args)
    k = cfg.intrinsics()
    m = cfg.egomotion()
    _warn_envelope(m)
    image = read_image_png(args.image)
    depth_img = load_depth_png(args.depth)
    if image.shape[:2] != (depth_img.height, depth_img.width):
        raise ConfigError(
            f"depth: size {depth_img.height}x{depth_img.width} does not match "
            f"image {image.shape[0]}x{image.shape[1]}"
        )
    depth_m = _dense_depth(depth_img)
    warped, hole = _warp_one(image, depth_m, m, k, cfg.backend, cfg.iterations)
    write_image_png(args.out, warped)
    if args.mask_out:
        write_mask_png(args.mask_out, hole)
    return EXIT_OK


def cmd_flow(args) -> int:
    cfg = build_config(args)
    k = cfg.intrinsics()
    m = cfg.egomotion()
    _warn_envelope(m)
    depth_img = load_depth_png(args.depth)
    depth_m = _dense_depth(depth_img)
    if args.exact:
        ff = exact_flow_field(depth_m, motion_point_transform(m), k)
    else:
        if (depth_m <= 0).any():
            raise DegeneracyError("flow needs strictly positive depth")
        inv = 1.0 / depth_m
        scale = max(1.0, float(inv.max()))
        # flow is linear in d*t, so rescale depth into [-1,1] and t back up
        depth = InverseDepthMap(values=inv / scale)
        m_scaled = EgoMotion(omega=m.omega, t=m.t * scale)
        ff = flow_field(depth, m_scaled, k)
    write_flo(args.out, ff.u)
    return EXIT_OK


def cmd_fuse(args) -> int:
    cfg = build_config(args)
    k = cfg.intrinsics()
    warped_maps = []
    hole_masks = []
    shape = None
    for image_path, depth_path, motion_text in args.view:
        m = EgoMotion(omega=_parse_motion(motion_text)[:3], t=_parse_motion(motion_text)[3:])
        _warn_envelope(m)
        image = read_image_png(image_path)
        depth_img = load_depth_png(depth_path)
        if image.shape[:2] != (depth_img.height, depth_img.width):
            raise ConfigError(f"{depth_path}: depth size does not match image")
        if shape is None:
            shape = image.shape
        elif image.shape != shape:
            raise ConfigError(f"{image_path}: view sizes differ")
        depth_m = _dense_depth(depth_img)
        warped, hole = _warp_one(image, depth_m, m, k, cfg.backend, cfg.iterations)
        warped_maps.append(warped)
        hole_masks.append(hole)
    fused, winners = max_select(warped_maps)
    write_image_png(args.out, fused)
    # a fused pixel is a hole only when every view left it uncovered
    fused_hole = np.logical_and.reduce(hole_masks)
    if args.mask_out:
        write_mask_png(args.mask_out, fused_hole)
    if args.winners_out:
        np.save(args.winners_out, winners)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = gradcheck.run_all(
        seed=args.seed,
        instances=args.instances,
        max_size=args.max_size,
        corrupt=args.corrupt or "",
    )
    failed = []
    for name in sorted(report):
        tol = gradcheck.tolerance_for(name)
        status = "ok" if report[name] <= tol else "FAIL"
        print(f"{name:<20s} max_rel_err={report[name]:.3e} tol={tol:.0e} {status}")
        if report[name] > tol:
            failed.append(name)
    if failed:
        print("failed components: " + ", ".join(failed))
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_eval(args) -> int:
    gen_dir = Path(args.generated)
    ref_dir = Path(args.reference)
    if not gen_dir.is_dir() or not ref_dir.is_dir():
        raise DataFormatError("eval: both arguments must be directories")
    gen_files = {p.name: p for p in sorted(gen_dir.glob("*.png"))}
    ref_files = {p.name: p for p in sorted(ref_dir.glob("*.png"))}
    unpaired = sorted(set(gen_files) ^ set(ref_files))
    if unpaired:
        for name in unpaired:
            side = "generated" if name in gen_files else "reference"
            print(f"unpaired file ({side} only): {name}", file=sys.stderr)
        return EXIT_CONFIG
    if not gen_files:
        raise ConfigError("eval: no .png pairs found")
    values = []
    for name in sorted(gen_files):
        a = read_image_png(gen_files[name])
        b = read_image_png(ref_files[name])
        if a.shape != b.shape:
            raise DataFormatError(f"eval: {name}: image sizes differ")
        v = mean_pixel_l1(a, b)
        values.append(v)
        print(f"{name}\t{v:.8f}")
    print(f"mean\t{np.mean(values):.8f}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    poses = load_odometry_poses(args.poses)
    for name, idx in (("i", args.i), ("j", args.j)):
        if not 0 <= idx < len(poses):
            raise ConfigError(
                f"index {name}={idx} out of range (file has {len(poses)} poses)"
            )
    m = relative_motion(poses[args.i], poses[args.j])
    _warn_envelope(m)
    print(
        "egomotion omega_x={:.9f} omega_y={:.9f} omega_z={:.9f} "
        "t_x={:.9f} t_y={:.9f} t_z={:.9f}".format(*m.omega, *m.t)
    )
    if args.depth:
        depth_img = load_depth_png(args.depth)
        valid = depth_img.valid
        frac = valid.mean()
        print(f"depth valid fraction: {frac:.4f} ({valid.sum()} of {valid.size})")
        if valid.any():
            values, ok = normalize_inverse_depth(depth_img.depth[valid])
            n_bad = int((~ok).sum())
            if n_bad:
                print(f"depth pixels at or below 1.5 m (flagged invalid): {n_bad}")
            good = values[ok]
            if good.size:
                q = np.percentile(good, [0, 25, 50, 75, 100])
                print(
                    "normalized inverse depth percentiles "
                    f"min={q[0]:.4f} p25={q[1]:.4f} p50={q[2]:.4f} "
                    f"p75={q[3]:.4f} max={q[4]:.4f}"
                )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--focal", type=float)
    p.add_argument("--x0", type=float)
    p.add_argument("--y0", type=float)
    p.add_argument("--motion", help="6 comma/space separated values: wx,wy,wz,tx,ty,tz")
    p.add_argument("--pose-file", dest="pose_file")
    p.add_argument("--pose-i", dest="pose_i", type=int)
    p.add_argument("--pose-j", dest="pose_j", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--backend", choices=["grid", "forward"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viewwarp", description="Differentiable view-synthesis kernels"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("warp", help="warp an image to a new viewpoint")
    _add_common(p)
    p.add_argument("--image", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out", dest="mask_out")
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("flow", help="export a flow field as .flo")
    _add_common(p)
    p.add_argument("--depth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--exact", action="store_true",
                   help="use exact reprojection instead of the first-order model")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("fuse", help="warp multiple views and max-fuse them")
    _add_common(p)
    p.add_argument(
        "--view", nargs=3, action="append", required=True,
        metavar=("IMAGE", "DEPTH", "MOTION"),
        help="one input view: image PNG, depth PNG, 6-value motion",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out", dest="mask_out")
    p.add_argument("--winners-out", dest="winners_out")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--max-size", dest="max_size", type=int, default=16)
    p.add_argument("--corrupt", help=argparse.SUPPRESS)  # negative-control hook
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("eval", help="mean pixel L1 between two directories")
    p.add_argument("--generated", required=True)
    p.add_argument("--reference", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ingest", help="inspect a pose pair and depth map")
    p.add_argument("--poses", required=True)
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--depth")
    p.set_defaults(func=cmd_ingest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DegeneracyError as exc:
        print(f"degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())

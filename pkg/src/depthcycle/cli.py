"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 degenerate geometry.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .cycle import CycleConfig, DegenerateViewError, cycle_consistency, mfl_select, run_cycle
from .depthnorm import apply_affine, lstsq_align
from .estimator import FovEstimateConfig, RecoveryConfig, estimate_fov, recover_affine
from .fileio import FormatError, read_depth, read_image, write_depth, write_image, write_pointcloud
from .geometry import CameraIntrinsics, DepthMap, novel_pose, unproject
from .metrics import absrel, delta1, eval_scale_aligned
from .providers import CommandProvider, DepthProvider, DirectoryProvider, ProviderError
from .renderer import SplatConfig, render
from .scenes import Scene, calibration_scene, oracle_render, make_provider, random_scene

__all__ = ["cli_main", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DEGENERATE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1, not argparse's default 2
        raise _UsageError(message)


def _fov_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise _UsageError(f"bad FOV list: {text!r}")
    if not values:
        raise _UsageError("FOV list is empty")
    return values


def _load_scene(spec: str) -> Scene:
    if spec == "calibration":
        return calibration_scene()
    if spec.startswith("random:"):
        return random_scene(int(spec.split(":", 1)[1]))
    return Scene.load(spec)


def _make_cli_provider(spec: str, cam: CameraIntrinsics) -> DepthProvider:
    if spec.startswith("cmd:"):
        return CommandProvider(spec[4:])
    if spec.startswith("dir:"):
        return DirectoryProvider(spec[4:])
    if spec.startswith("oracle:"):
        return make_provider(_load_scene(spec[7:]), cam)
    raise _UsageError(f"provider must be cmd:<...>, dir:<...> or oracle:<scene>, got {spec!r}")


def _write_report(path: str | None, report: dict) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _splat(args) -> SplatConfig:
    return SplatConfig(footprint=args.splat)


def _camera(args, depth: DepthMap) -> CameraIntrinsics:
    h, w = depth.shape
    return CameraIntrinsics.from_fov(args.fov, w, h)


def build_parser() -> _Parser:
    parser = _Parser(prog="depthcycle", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fov=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--splat", type=int, default=3, help="splat footprint (1, 3 or 5)")
        p.add_argument("--out", help="output path (JSON commands print to stdout if omitted)")
        if fov:
            p.add_argument("--fov", type=float, default=60.0, help="horizontal FOV in degrees")

    p = sub.add_parser("synth", help="emit an analytic scene's image, depth and description")
    p.add_argument("--scene", default="calibration", help="'calibration', 'random:<seed>' or a scene JSON path")
    p.add_argument("--size", type=int, default=128, help="square image size in pixels")
    common(p)

    p = sub.add_parser("reconstruct", help="unproject image + depth to a binary PLY")
    p.add_argument("--image", required=True)
    p.add_argument("--depth", required=True)
    common(p)

    p = sub.add_parser("render", help="render a novel view of image + depth")
    p.add_argument("--image", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--theta", type=float, required=True, help="rotation angle in degrees")
    p.add_argument("--t", type=float, required=True, help="z shift in scene units")
    common(p)

    p = sub.add_parser("cycle", help="run the consistency cycle and report losses")
    p.add_argument("--image", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--provider", required=True)
    p.add_argument("--fov-set", type=_fov_list, help="candidate FOVs; picks the argmin loss")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--theta", type=float, help="override the sampled rotation")
    p.add_argument("--t", type=float, help="override the sampled shift")
    common(p)

    p = sub.add_parser("estimate-fov", help="pick the FOV minimizing mean depth consistency")
    p.add_argument("--image", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--provider", required=True)
    p.add_argument("--candidates", type=_fov_list, default=(40.0, 50.0, 60.0, 70.0, 80.0))
    common(p, fov=False)

    p = sub.add_parser("recover-affine", help="recover domain affine coefficients from a dataset dir")
    p.add_argument("--dataset", required=True, help="directory of paired <name>.png / <name>.pfm files")
    p.add_argument("--provider", required=True)
    p.add_argument("--objective", choices=("depth", "image"), default="depth")
    p.add_argument("--views-per-image", type=int, default=2)
    p.add_argument("--refine-iters", type=int, default=60)
    common(p)

    p = sub.add_parser("eval", help="evaluate predicted depth maps against ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted .pfm files")
    p.add_argument("--gt", required=True, help="directory of ground-truth .pfm files")
    p.add_argument("--align", choices=("scale", "scale-shift"), default="scale")
    p.add_argument("--fov", type=float, help="enable point-cloud RMSE with this FOV")
    p.add_argument("--out")
    return parser


def _cmd_synth(args) -> int:
    scene = _load_scene(args.scene)
    cam = CameraIntrinsics.from_fov(args.fov, args.size, args.size)
    image, depth = oracle_render(scene, cam)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_image(out / "image.png", image)
    write_depth(out / "depth.pfm", depth)
    scene.save(out / "scene.json")
    _write_report(
        str(out / "config.json"),
        {"scene": args.scene, "fov": args.fov, "size": args.size, "seed": args.seed},
    )
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    image = read_image(args.image)
    depth = read_depth(args.depth)
    cloud = unproject(depth, _camera(args, depth), image)
    write_pointcloud(args.out or "cloud.ply", cloud)
    return EXIT_OK


def _cmd_render(args) -> int:
    image = read_image(args.image)
    depth = read_depth(args.depth)
    cam = _camera(args, depth)
    cloud = unproject(depth, cam, image)
    vt = novel_pose(args.theta, args.t, float(cloud.positions[:, 2].min()))
    out_render = render(cloud, vt, cam, _splat(args))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_image(out / "novel_image.png", out_render.image)
    write_depth(out / "novel_depth.pfm", out_render.depth)
    write_image(out / "novel_mask.png", np.repeat(out_render.coverage[:, :, None], 3, axis=2).astype(float))
    return EXIT_OK


def _cmd_cycle(args) -> int:
    image = read_image(args.image)
    depth = read_depth(args.depth)
    cam = _camera(args, depth)
    provider = _make_cli_provider(args.provider, cam)
    cfg = CycleConfig(
        alpha=args.alpha,
        beta=args.beta,
        fov_candidates=args.fov_set or (args.fov,),
        rng_seed=args.seed,
        splat=_splat(args),
    )
    if args.fov_set:
        fov_star, loss, report = mfl_select(image, depth, provider, cfg)
    elif args.theta is not None and args.t is not None:
        report = cycle_consistency(image, depth, cam, provider, args.theta, args.t, cfg)
    else:
        report = run_cycle(image, depth, cam, provider, cfg)
    _write_report(args.out, {"config": _config_dict(args, cfg), "report": report.to_dict()})
    return EXIT_OK


def _cmd_estimate_fov(args) -> int:
    image = read_image(args.image)
    depth = read_depth(args.depth)
    h, w = depth.shape
    # Provider gets the first candidate's camera as its default; the actual
    # camera of each rendered view travels with the render registration.
    provider = _make_cli_provider(
        args.provider, CameraIntrinsics.from_fov(args.candidates[0], w, h)
    )
    cfg = FovEstimateConfig(candidates=args.candidates)
    fov_star, per_candidate = estimate_fov(image, depth, provider, cfg, _splat(args))
    _write_report(
        args.out,
        {
            "config": {"candidates": list(args.candidates), "seed": args.seed, "splat": args.splat},
            "fov": fov_star,
            "per_candidate": [list(p) for p in per_candidate],
        },
    )
    return EXIT_OK


def _cmd_recover_affine(args) -> int:
    root = Path(args.dataset)
    pairs = sorted(root.glob("*.png"))
    dataset = []
    for img_path in pairs:
        depth_path = img_path.with_suffix(".pfm")
        if not depth_path.exists():
            raise FormatError(f"missing depth file for {img_path.name}")
        dataset.append((read_image(img_path), read_depth(depth_path)))
    if not dataset:
        raise FormatError(f"no <name>.png / <name>.pfm pairs under {root}")

    h, w = dataset[0][1].shape
    cam = CameraIntrinsics.from_fov(args.fov, w, h)
    provider = _make_cli_provider(args.provider, cam)
    cfg = RecoveryConfig(
        objective=args.objective,
        views_per_image=args.views_per_image,
        refine_iters=args.refine_iters,
        rng_seed=args.seed,
        splat=_splat(args),
    )
    result = recover_affine(dataset, provider, cam, cfg)
    _write_report(
        args.out,
        {
            "config": _config_dict(args, cfg),
            "a": result.a,
            "b_rel": result.b_rel,
            "objective": result.objective,
            "trace": list(result.trace),
        },
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    names = sorted(p.name for p in pred_dir.glob("*.pfm"))
    if not names:
        raise FormatError(f"no .pfm files under {pred_dir}")
    per_file = {}
    for name in names:
        gt_path = gt_dir / name
        if not gt_path.exists():
            raise FormatError(f"missing ground truth for {name}")
        pred = read_depth(pred_dir / name)
        gt = read_depth(gt_path)
        if args.align == "scale":
            cam = CameraIntrinsics.from_fov(args.fov, pred.shape[1], pred.shape[0]) if args.fov else None
            per_file[name] = eval_scale_aligned(pred, gt, cam).to_dict()
        else:
            coeffs = lstsq_align(pred, gt)
            corrected = apply_affine(pred, coeffs)
            per_file[name] = {
                "absrel": absrel(corrected, gt),
                "delta1": delta1(corrected, gt),
                "align": {"a": coeffs.a, "b": coeffs.b},
            }
    summary = {
        "absrel": float(np.mean([r["absrel"] for r in per_file.values()])),
        "delta1": float(np.mean([r["delta1"] for r in per_file.values()])),
    }
    _write_report(
        args.out,
        {"config": {"align": args.align, "fov": args.fov}, "summary": summary, "per_file": per_file},
    )
    return EXIT_OK


def _config_dict(args, cfg) -> dict:
    d = {k: v for k, v in vars(args).items() if k != "command" and not callable(v)}
    d["resolved"] = {
        k: (list(v) if isinstance(v, tuple) else v)
        for k, v in vars(cfg).items()
        if isinstance(v, (int, float, str, tuple, list, type(None)))
    }
    return d


_COMMANDS = {
    "synth": _cmd_synth,
    "reconstruct": _cmd_reconstruct,
    "render": _cmd_render,
    "cycle": _cmd_cycle,
    "estimate-fov": _cmd_estimate_fov,
    "recover-affine": _cmd_recover_affine,
    "eval": _cmd_eval,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateViewError as err:
        print(f"degenerate geometry: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (FormatError, ProviderError, OSError, ValueError, json.JSONDecodeError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()

"""Command-line entry points: structure, motion, render, gradcheck.

Runs are driven by a flat key=value config file; command-line flags
override file values.  Providers are selected with a single string:
``mock``, ``target:<path>`` (self-supervised recovery against renders of
an existing sketch or animation), or ``remote:<url>`` (HTTP guidance
service).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, Optional

import numpy as np

from . import export, gradcheck, motion, rasterizer, stage1
from .curves import (Sketch3D, init_sketch, load_sketch, save_sketch,
                     sketch_from_dict)
from .errors import ConfigError, ProtocolError, TransportError
from .guidance import (DEFAULT_IMAGE_CFG, DEFAULT_VIDEO_CFG, MockProvider,
                       RemoteProvider, TargetImageProvider, TargetVideoProvider)
from .motion import (MotionModel, Stage2Config, load_animation,
                     optimize_motion, save_animation)
from .projection import CANONICAL_ANGLES, ORTHO_PLANES, view
from .stage1 import Stage1Config, optimize_structure

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_PROVIDER = 3

# Config file keys and their types; everything else is rejected.
CONFIG_KEYS: Dict[str, type] = {
    "prompt": str,
    "motion_prompt": str,
    "provider": str,
    "out": str,
    "seed": int,
    "iters": int,
    "lr": float,
    "lambda_geom": float,
    "top_view_prob": float,
    "sigma": float,
    "samples": int,
    "image_size": int,
    "distance": float,
    "fov": float,
    "cfg_scale": float,
    "t_min": float,
    "t_max_start": float,
    "t_max_end": float,
    "checkpoint_every": int,
    "n_curves": int,
    "init_radius": float,
    "min_step": float,
    "max_step": float,
    "frames": int,
    "lambda_smooth": float,
    "beta": float,
    "extent": float,
}


def parse_config(path) -> Dict[str, object]:
    """Read a flat key=value file; '#' starts a comment."""
    settings: Dict[str, object] = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                key = key.strip()
                value = value.strip()
                if key not in CONFIG_KEYS:
                    raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
                caster = CONFIG_KEYS[key]
                try:
                    settings[key] = caster(value)
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return settings


def _gather_settings(args) -> Dict[str, object]:
    settings: Dict[str, object] = {}
    if getattr(args, "config", None):
        settings.update(parse_config(args.config))
    for key in ("seed", "provider", "out"):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _pick(settings: Dict[str, object], cls, **extra):
    """Build a config dataclass from matching keys plus overrides."""
    names = set(cls.__dataclass_fields__)
    kwargs = {k: v for k, v in settings.items() if k in names}
    kwargs.update(extra)
    return cls(**kwargs)


def _structure_provider(spec: str, cfg: Stage1Config, tags):
    if spec == "mock":
        return MockProvider()
    if spec.startswith("target:"):
        hidden = load_sketch(spec[len("target:"):])
        targets = {}
        for tag in list(tags) + [stage1.TOP_VIEW]:
            vp = view(tag, distance=cfg.distance, fov=cfg.fov, image_size=cfg.image_size)
            image, _ = rasterizer.render_view(hidden, vp, sigma=cfg.sigma,
                                              samples=cfg.samples)
            targets[tag] = image.intensity
        return TargetImageProvider(targets)
    if spec.startswith("remote:"):
        return RemoteProvider(spec[len("remote:"):])
    raise ConfigError(f"provider must be mock, target:<path>, or remote:<url>, got {spec!r}")


def _motion_provider(spec: str, cfg: Stage2Config, base: Sketch3D):
    if spec == "mock":
        return MockProvider()
    if spec.startswith("target:"):
        ref_base, ref_field = load_animation(spec[len("target:"):])
        if ref_field.n_frames != cfg.frames:
            raise ConfigError(
                f"frames={cfg.frames} does not match the target animation's {ref_field.n_frames}")
        frames_pts = ref_field.apply(ref_base.control_points)
        targets = {}
        for plane in ORTHO_PLANES:
            stack = [rasterizer.render_ortho(p, plane, cfg.image_size, sigma=cfg.sigma,
                                             samples=cfg.samples, extent=cfg.extent)[0].intensity
                     for p in frames_pts]
            targets[motion.PLANE_TAGS[plane]] = np.stack(stack)
        return TargetVideoProvider(targets)
    if spec.startswith("remote:"):
        return RemoteProvider(spec[len("remote:"):])
    raise ConfigError(f"provider must be mock, target:<path>, or remote:<url>, got {spec!r}")


def cmd_structure(args) -> int:
    settings = _gather_settings(args)
    out_dir = str(settings.get("out", "run_structure"))
    os.makedirs(out_dir, exist_ok=True)
    cfg = _pick(settings, Stage1Config,
                cfg_scale=float(settings.get("cfg_scale", DEFAULT_IMAGE_CFG)),
                checkpoint_dir=out_dir)
    cfg.validate()
    init = init_sketch(
        n_curves=int(settings.get("n_curves", 16)),
        seed=int(settings.get("seed", 0)),
        radius=float(settings.get("init_radius", 0.2)),
        min_step=float(settings.get("min_step", 0.001)),
        max_step=float(settings.get("max_step", 0.01)),
        prompt=str(settings.get("prompt", "")),
    )
    tags = [t for t in cfg.views if isinstance(t, str)]
    provider = _structure_provider(str(settings.get("provider", "mock")), cfg, tags)

    try:
        final, trace = optimize_structure(init, provider, cfg)
    except TransportError as exc:
        print(f"error: provider failed: {exc} (checkpoint retained in {out_dir})",
              file=sys.stderr)
        return EXIT_PROVIDER

    save_sketch(final, os.path.join(out_dir, "sketch.json"))
    export.write_loss_trace(trace, os.path.join(out_dir, "loss_trace.csv"), "geom")
    preview_tags = tags + [stage1.TOP_VIEW]
    views = [view(t, distance=cfg.distance, fov=cfg.fov, image_size=cfg.image_size)
             for t in preview_tags]
    export.write_view_previews(final, views, preview_tags, out_dir, cfg.sigma, cfg.samples)
    print(os.path.join(out_dir, "sketch.json"))
    return EXIT_OK


def cmd_motion(args) -> int:
    settings = _gather_settings(args)
    out_dir = str(settings.get("out", "run_motion"))
    os.makedirs(out_dir, exist_ok=True)
    base = load_sketch(args.sketch)
    cfg = _pick(settings, Stage2Config,
                cfg_scale=float(settings.get("cfg_scale", DEFAULT_VIDEO_CFG)),
                image_size=int(settings.get("image_size", 256)),
                motion_prompt=settings.get("motion_prompt"),
                checkpoint_dir=out_dir)
    cfg.validate()
    model = MotionModel(n_curves=base.n_curves, seed=cfg.seed)
    provider = _motion_provider(str(settings.get("provider", "mock")), cfg, base)

    try:
        field, trace = optimize_motion(base, model, provider, cfg)
    except TransportError as exc:
        print(f"error: provider failed: {exc} (checkpoint retained in {out_dir})",
              file=sys.stderr)
        return EXIT_PROVIDER

    save_animation(base, field, os.path.join(out_dir, "animation.json"))
    export.write_loss_trace(trace, os.path.join(out_dir, "loss_trace.csv"), "smooth")
    export.write_animation_frames(base, field, out_dir, cfg.image_size,
                                  cfg.sigma, cfg.samples, cfg.extent)
    print(os.path.join(out_dir, "animation.json"))
    return EXIT_OK


def cmd_render(args) -> int:
    with open(args.input) as fh:
        data = json.load(fh)
    is_animation = "displacements" in data

    if is_animation:
        if args.view not in motion.PLANE_TAGS.values():
            print(f"error: animation views are one of "
                  f"{sorted(motion.PLANE_TAGS.values())}, got {args.view!r}",
                  file=sys.stderr)
            return EXIT_USAGE
        base, field = motion.animation_from_dict(data)
        out_dir = args.out or "frames"
        plane = next(p for p, t in motion.PLANE_TAGS.items() if t == args.view)
        if args.format == "svg":
            os.makedirs(out_dir, exist_ok=True)
            for k, pts in enumerate(field.apply(base.control_points)):
                export.save_ortho_svg(pts, plane, args.size,
                                      os.path.join(out_dir, f"{args.view}_frame_{k:03d}.svg"))
        else:
            export.write_animation_frames(base, field, out_dir, args.size,
                                          args.sigma, args.samples, planes=[plane])
        print(out_dir)
        return EXIT_OK

    sketch = sketch_from_dict(data)
    if args.view not in CANONICAL_ANGLES:
        print(f"error: unknown view {args.view!r}; choose from "
              f"{sorted(CANONICAL_ANGLES)}", file=sys.stderr)
        return EXIT_USAGE
    vp = view(args.view, image_size=args.size)
    out_path = args.out or f"render_{args.view}.{args.format}"
    if args.format == "svg":
        export.save_svg(sketch, vp, out_path)
    elif args.depth_color:
        image = rasterizer.render_depth_color(sketch, vp, sigma=args.sigma,
                                              samples=args.samples)
        rasterizer.save_png(image, out_path, depth_color=True)
    else:
        image, _ = rasterizer.render_view(sketch, vp, sigma=args.sigma,
                                          samples=args.samples)
        rasterizer.save_png(image, out_path)
    print(out_path)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = gradcheck.run_all(seed=args.seed or 0, cases=args.cases,
                               tolerance=args.tolerance)
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK if report["passed"] else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketch3d",
        description="Optimize and render animated 3D vector sketches.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--provider",
                       help="mock | target:<path> | remote:<url>")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("structure", help="stage 1: optimize static geometry")
    common(p)
    p.set_defaults(fn=cmd_structure)

    p = sub.add_parser("motion", help="stage 2: learn a displacement animation")
    common(p)
    p.add_argument("sketch", help="sketch.json from a structure run")
    p.set_defaults(fn=cmd_motion)

    p = sub.add_parser("render", help="export a sketch or animation")
    p.add_argument("input", help="sketch.json or animation.json")
    p.add_argument("--view", default="front", help="viewpoint (or plane tag for animations)")
    p.add_argument("--format", choices=("png", "svg"), default="png")
    p.add_argument("--depth-color", action="store_true",
                   help="color strokes by camera depth (PNG only)")
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--sigma", type=float, default=rasterizer.DEFAULT_SIGMA)
    p.add_argument("--samples", type=int, default=rasterizer.DEFAULT_SAMPLES)
    p.add_argument("--out", help="output file (sketch) or directory (animation)")
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=50)
    p.add_argument("--tolerance", type=float, default=None,
                   help="override every suite's tolerance")
    p.set_defaults(fn=cmd_gradcheck)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

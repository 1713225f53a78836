"""Non-differentiable output plumbing: SVG, frame PNGs, loss traces."""

from __future__ import annotations

import csv
import os
from typing import List, Optional, Sequence

import numpy as np

from . import rasterizer
from .curves import Sketch3D
from .motion import PLANE_TAGS, DisplacementField
from .projection import ORTHO_PLANES, Viewpoint, ortho_to_pixels, project_sketch


def svg_document(curves2d: np.ndarray, width: int, height: int,
                 stroke_width: float = 1.5) -> str:
    """SVG 1.1 text with one cubic path element per curve."""
    curves2d = np.asarray(curves2d, dtype=np.float64)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
    ]
    for ctrl in curves2d:
        (x0, y0), (x1, y1), (x2, y2), (x3, y3) = ctrl
        d = (f"M {x0:.4f} {y0:.4f} C {x1:.4f} {y1:.4f}, "
             f"{x2:.4f} {y2:.4f}, {x3:.4f} {y3:.4f}")
        lines.append(f'  <path d="{d}" fill="none" stroke="black" '
                     f'stroke-width="{stroke_width}" stroke-linecap="round"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_svg(sketch: Sketch3D, vp: Viewpoint, path) -> None:
    curves2d = project_sketch(vp, sketch.control_points)
    with open(path, "w") as fh:
        fh.write(svg_document(curves2d, vp.image_size, vp.image_size))


def save_ortho_svg(control_points, plane: str, image_size: int, path,
                   extent: float = 1.0) -> None:
    curves2d = ortho_to_pixels(plane, np.asarray(control_points, dtype=np.float64),
                               image_size, extent)
    with open(path, "w") as fh:
        fh.write(svg_document(curves2d, image_size, image_size))


def write_loss_trace(trace: List[dict], path, loss_key: str) -> None:
    """CSV with columns iter, t, one SDS proxy per view, and the stage loss."""
    if not trace:
        raise ValueError("empty trace")
    view_cols = list(trace[0]["sds"])
    header = ["iter", "t"] + [f"sds_{v}" for v in view_cols] + [loss_key]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in trace:
            writer.writerow([row["iter"], repr(row["t"])]
                            + [repr(row["sds"].get(v, 0.0)) for v in view_cols]
                            + [repr(row[loss_key])])


def write_view_previews(sketch: Sketch3D, views: Sequence[Viewpoint],
                        tags: Sequence[str], out_dir, sigma: float,
                        samples: int) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for tag, vp in zip(tags, views):
        image, _ = rasterizer.render_view(sketch, vp, sigma=sigma, samples=samples)
        path = os.path.join(out_dir, f"view_{tag}.png")
        rasterizer.save_png(image, path)
        written.append(path)
    return written


def write_animation_frames(base: Sketch3D, field: DisplacementField, out_dir,
                           image_size: int, sigma: float, samples: int,
                           extent: float = 1.0,
                           planes: Optional[Sequence[str]] = None) -> List[str]:
    """One PNG per frame per plane: <tag>_frame_NNN.png."""
    os.makedirs(out_dir, exist_ok=True)
    planes = list(planes) if planes is not None else list(ORTHO_PLANES)
    frames_pts = field.apply(base.control_points)
    written = []
    for plane in planes:
        tag = PLANE_TAGS[plane]
        for k, pts in enumerate(frames_pts):
            image, _ = rasterizer.render_ortho(pts, plane, image_size, sigma=sigma,
                                               samples=samples, extent=extent)
            path = os.path.join(out_dir, f"{tag}_frame_{k:03d}.png")
            rasterizer.save_png(image, path)
            written.append(path)
    return written

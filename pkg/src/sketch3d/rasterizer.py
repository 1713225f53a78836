"""Differentiable distance-field rendering of 2D Bezier strokes.

Each projected curve is sampled at S uniform parameters; every sample
splats a radially decaying kernel w(d) = max(0, 1 - d^2/sigma^2)^2 onto
nearby pixel centers.  The accumulated stroke field

    F(x, y) = sum_i (1/S) sum_s w(d((x, y), c_i(t_s)))

is displayed as intensity 1 - min(F, 1): white background, black
strokes.  Rendering records a tape of every (pixel, sample) contribution
so the backward pass can push pixel-space gradients through the kernel,
the Bernstein weights and (for 3D renders) the projection Jacobians down
to the control points, without any autodiff framework.

Gradients flow through the unclamped sum wherever F < 1 and are zero
where the display clamp is active; the distance direction at d = 0 is
defined as zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np

from .curves import bernstein3
from .errors import RenderError
from .projection import (
    ortho_pixel_jacobian,
    ortho_to_pixels,
    camera_frame,
    project_sketch,
    projection_jacobians,
)

DEFAULT_SIGMA = 2.0
DEFAULT_SAMPLES = 32
MIN_SAMPLES = 8


@dataclass
class RasterImage:
    """Grayscale stroke image; ``rgb`` is set by depth-color rendering."""

    intensity: np.ndarray  # (H, W) in [0, 1]
    rgb: Optional[np.ndarray] = None  # (H, W, 3) in [0, 1]

    @property
    def height(self) -> int:
        return self.intensity.shape[0]

    @property
    def width(self) -> int:
        return self.intensity.shape[1]


@dataclass
class RasterTape:
    """Backward-pass cache: one entry per (pixel, curve sample) pair
    with distance <= sigma.

    ``jacobians`` (N, 4, 2, 3) maps 2D control-point gradients back to
    world space and is present when the tape came from a 3D render.
    """

    sigma: float
    samples: int
    n_curves: int
    image_size: int
    field: np.ndarray        # (H, W) unclamped stroke field F
    points: np.ndarray       # (N*S, 2) sample positions in pixel space
    t_values: np.ndarray     # (S,) sample parameters
    rec_sample: np.ndarray   # (R,) flat sample index = curve * S + s
    rec_row: np.ndarray      # (R,) pixel row
    rec_col: np.ndarray      # (R,) pixel col
    rec_dist: np.ndarray     # (R,) center-to-sample distance
    jacobians: Optional[np.ndarray] = None
    _bernstein: np.ndarray = dataclass_field(init=False, repr=False)

    def __post_init__(self):
        self._bernstein = bernstein3(self.t_values)

    def samples_at(self, row: int, col: int):
        """Contributions recorded for one pixel: (curve, t, point, dist)."""
        mask = (self.rec_row == row) & (self.rec_col == col)
        out = []
        for m, d in zip(self.rec_sample[mask], self.rec_dist[mask]):
            curve, s = divmod(int(m), self.samples)
            out.append((curve, float(self.t_values[s]), self.points[m].copy(), float(d)))
        return out


def falloff(d, sigma: float):
    """Kernel w(d) = max(0, 1 - d^2/sigma^2)^2."""
    d = np.asarray(d, dtype=np.float64)
    return np.maximum(0.0, 1.0 - d**2 / sigma**2) ** 2


def falloff_derivative(d, sigma: float):
    """dw/dd; zero beyond the kernel radius."""
    d = np.asarray(d, dtype=np.float64)
    inside = d < sigma
    return np.where(inside, -4.0 * d * (1.0 - d**2 / sigma**2) / sigma**2, 0.0)


def rasterize(curves2d, sigma: float = DEFAULT_SIGMA, samples: int = DEFAULT_SAMPLES,
              image_size: int = 512):
    """Render 2D cubic control polygons to a stroke image.

    ``curves2d`` has shape (N, 4, 2) in pixel coordinates; an empty list
    gives an all-white image.  Returns (RasterImage, RasterTape).
    """
    curves2d = np.asarray(curves2d, dtype=np.float64).reshape(-1, 4, 2)
    if not np.all(np.isfinite(curves2d)):
        raise RenderError("non-finite control points")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples per curve")

    n_curves = curves2d.shape[0]
    t_values = np.linspace(0.0, 1.0, samples)
    basis = bernstein3(t_values)  # (S, 4)
    points = np.einsum("sj,njd->nsd", basis, curves2d).reshape(-1, 2)  # (N*S, 2)

    size = int(image_size)
    fld = np.zeros((size, size))
    if points.shape[0] == 0:
        empty_int = np.empty(0, dtype=np.int64)
        tape = RasterTape(sigma, samples, n_curves, size, fld, points, t_values,
                          empty_int, empty_int.copy(), empty_int.copy(), np.empty(0))
        return RasterImage(1.0 - fld), tape

    # Candidate pixel window per sample: centers (k + 0.5) within sigma.
    win = int(math.floor(2.0 * sigma)) + 2
    offs = np.arange(win)
    col0 = np.ceil(points[:, 0] - sigma - 0.5).astype(np.int64)
    row0 = np.ceil(points[:, 1] - sigma - 0.5).astype(np.int64)
    cols = col0[:, None] + offs  # (M, win)
    rows = row0[:, None] + offs
    dx2 = (cols + 0.5 - points[:, 0:1]) ** 2
    dy2 = (rows + 0.5 - points[:, 1:2]) ** 2
    d2 = dy2[:, :, None] + dx2[:, None, :]  # (M, win_row, win_col)
    valid = d2 <= sigma * sigma
    valid &= ((rows >= 0) & (rows < size))[:, :, None]
    valid &= ((cols >= 0) & (cols < size))[:, None, :]

    m_idx, r_idx, c_idx = np.nonzero(valid)
    rec_row = rows[m_idx, r_idx]
    rec_col = cols[m_idx, c_idx]
    rec_dist = np.sqrt(d2[valid])

    np.add.at(fld, (rec_row, rec_col), falloff(rec_dist, sigma) / samples)
    image = RasterImage(1.0 - np.minimum(fld, 1.0))
    tape = RasterTape(sigma, samples, n_curves, size, fld, points, t_values,
                      m_idx, rec_row, rec_col, rec_dist)
    return image, tape


def backward(tape: RasterTape, grad_image):
    """Chain pixel-intensity gradients back to control points.

    ``grad_image`` is dL/d(intensity), shape (H, W).  Returns (N, 4, 3)
    world-space gradients when the tape carries projection Jacobians,
    otherwise (N, 4, 2) pixel-space control gradients.
    """
    grad_image = np.asarray(grad_image, dtype=np.float64)
    if grad_image.shape != tape.field.shape:
        raise ValueError(
            f"grad_image shape {grad_image.shape} does not match render {tape.field.shape}")

    # Display convention: intensity = 1 - F where unclamped, constant where
    # F >= 1, hence the sign flip and the clamp mask.
    grad_field = np.where(tape.field < 1.0, -grad_image, 0.0)

    grads2d = np.zeros((tape.n_curves, 4, 2))
    if tape.rec_sample.size:
        g_w = grad_field[tape.rec_row, tape.rec_col] / tape.samples
        g_d = g_w * falloff_derivative(tape.rec_dist, tape.sigma)
        centers = np.stack([tape.rec_col + 0.5, tape.rec_row + 0.5], axis=-1)
        delta = tape.points[tape.rec_sample] - centers
        with np.errstate(invalid="ignore", divide="ignore"):
            direction = np.where(tape.rec_dist[:, None] > 0.0,
                                 delta / tape.rec_dist[:, None], 0.0)
        g_point = g_d[:, None] * direction  # (R, 2)

        s_idx = tape.rec_sample % tape.samples
        curve_idx = tape.rec_sample // tape.samples
        weights = tape._bernstein[s_idx]  # (R, 4)
        np.add.at(grads2d, curve_idx, weights[:, :, None] * g_point[:, None, :])

    if tape.jacobians is None:
        return grads2d
    return np.einsum("nja,njak->njk", grads2d, tape.jacobians)


def render_view(sketch, vp, sigma: float = DEFAULT_SIGMA, samples: int = DEFAULT_SAMPLES):
    """Perspective render of a sketch; the tape maps gradients to 3D."""
    curves2d = project_sketch(vp, sketch.control_points)
    image, tape = rasterize(curves2d, sigma, samples, vp.image_size)
    tape.jacobians = projection_jacobians(vp, sketch.control_points)
    return image, tape


def render_ortho(control_points, plane: str, image_size: int,
                 sigma: float = DEFAULT_SIGMA, samples: int = DEFAULT_SAMPLES,
                 extent: float = 1.0):
    """Orthographic plane render used by the motion stage.

    ``control_points`` is (N, 4, 3); the constant plane Jacobian is
    attached so backward() returns world-space gradients.
    """
    control_points = np.asarray(control_points, dtype=np.float64)
    curves2d = ortho_to_pixels(plane, control_points, image_size, extent)
    image, tape = rasterize(curves2d, sigma, samples, image_size)
    jac = ortho_pixel_jacobian(plane, image_size, extent)
    tape.jacobians = np.broadcast_to(jac, control_points.shape[:2] + (2, 3)).copy()
    return image, tape


def render_depth_color(sketch, vp, sigma: float = DEFAULT_SIGMA,
                       samples: int = DEFAULT_SAMPLES) -> RasterImage:
    """Visualization-only render with stroke hue encoding camera depth.

    The nearest contributing sample wins each pixel's hue; warm is near,
    cool is far.  Not differentiable.
    """
    image, tape = render_view(sketch, vp, sigma, samples)
    eye, right, up, forward = camera_frame(vp)
    samples3d = np.einsum(
        "sj,njd->nsd", bernstein3(tape.t_values), sketch.control_points
    ).reshape(-1, 3)
    depths = (samples3d - eye) @ forward

    size = tape.image_size
    near = np.full((size, size), np.inf)
    if tape.rec_sample.size:
        np.minimum.at(near, (tape.rec_row, tape.rec_col), depths[tape.rec_sample])
    hit = np.isfinite(near)
    rgb = np.ones((size, size, 3))
    if np.any(hit):
        lo, hi = depths.min(), depths.max()
        span = hi - lo if hi > lo else 1.0
        frac = (near[hit] - lo) / span
        alpha = np.minimum(tape.field[hit], 1.0)
        rgb[hit] = 1.0 + alpha[:, None] * (_depth_palette(frac) - 1.0)
    image.rgb = rgb
    return image


def _depth_palette(frac):
    """Red (near) through green to blue (far), unit saturation/value."""
    hue = (2.0 / 3.0) * np.asarray(frac, dtype=np.float64)
    h6 = hue * 6.0
    k = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    ramp = {0: (1.0, f, 0.0), 1: (1.0 - f, 1.0, 0.0), 2: (0.0, 1.0, f),
            3: (0.0, 1.0 - f, 1.0), 4: (f, 0.0, 1.0), 5: (1.0, 0.0, 1.0 - f)}
    rgb = np.empty(hue.shape + (3,))
    for bucket, (r, g, b) in ramp.items():
        mask = k == bucket
        rgb[mask, 0] = np.broadcast_to(r, hue.shape)[mask]
        rgb[mask, 1] = np.broadcast_to(g, hue.shape)[mask]
        rgb[mask, 2] = np.broadcast_to(b, hue.shape)[mask]
    return rgb


def save_png(image: RasterImage, path, depth_color: bool = False) -> None:
    """Write an 8-bit PNG; RGB when depth_color and the image has hues."""
    from PIL import Image

    if depth_color:
        if image.rgb is None:
            raise ValueError("image has no depth-color channel")
        data = np.clip(np.rint(image.rgb * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(data, mode="RGB").save(path)
    else:
        data = np.clip(np.rint(image.intensity * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(data, mode="L").save(path)


def quantize(image: RasterImage) -> np.ndarray:
    """The exact uint8 grayscale array save_png() writes."""
    return np.clip(np.rint(image.intensity * 255.0), 0, 255).astype(np.uint8)

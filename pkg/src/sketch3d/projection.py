"""Cameras and projections.

Two kinds of projection are used by the engine:

* Perspective pinhole views for the static-structure stage.  Canonical
  views (front/back/left/right/top) orbit the origin; the camera always
  looks at the origin with +y up.  Projecting the four control points of
  a 3D cubic and treating them as a 2D cubic is exact for affine cameras
  and a close approximation for distant perspective ones, which is what
  the distance >= 4 convention buys.
* Orthographic coordinate drops onto the frontal (x, y) and sagittal
  (y, z) planes for the motion stage.

Pixel conventions: square images, pixel (row r, col c) has center
(c + 0.5, r + 0.5); u grows rightward with world +x in the front view,
v grows downward with world +y pointing up.

Canonical view bases are built from exact 0/+-1 vectors rather than
trigonometry so that e.g. the right view of a sketch equals the front
view of the same sketch rotated -90 degrees about y, bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ProjectionError

CANONICAL_ANGLES = {
    "front": (0.0, 0.0),
    "right": (90.0, 0.0),
    "back": (180.0, 0.0),
    "left": (270.0, 0.0),
    "top": (0.0, 89.0),
}

# Stage-I camera defaults: distant enough for the control-polygon
# projection approximation, matching common practice for guidance runs.
DEFAULT_DISTANCE = 4.0
DEFAULT_FOV = 40.0
DEFAULT_IMAGE_SIZE = 512

# Exact orbit bases for the four cardinal views: rows are (right, up,
# forward) unit vectors of the camera frame.
_EXACT_BASES = {
    "front": ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, -1.0)),
    "right": ((0.0, 0.0, -1.0), (0.0, 1.0, 0.0), (-1.0, 0.0, 0.0)),
    "back": ((-1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
    "left": ((0.0, 0.0, 1.0), (0.0, 1.0, 0.0), (1.0, 0.0, 0.0)),
}


@dataclass(frozen=True)
class Viewpoint:
    """A perspective camera orbiting the origin.

    ``kind`` is one of front/back/left/right/top/custom; canonical kinds
    pin azimuth and elevation.  Azimuth rotates about +y (0 on the +z
    axis, 90 on +x); elevation lifts toward +y.
    """

    kind: str = "custom"
    azimuth: float = 0.0
    elevation: float = 0.0
    distance: float = DEFAULT_DISTANCE
    fov: float = DEFAULT_FOV
    image_size: int = DEFAULT_IMAGE_SIZE

    def __post_init__(self):
        if self.kind not in CANONICAL_ANGLES and self.kind != "custom":
            raise ConfigError(f"unknown viewpoint kind {self.kind!r}")
        if self.kind in CANONICAL_ANGLES:
            az, el = CANONICAL_ANGLES[self.kind]
            object.__setattr__(self, "azimuth", az)
            object.__setattr__(self, "elevation", el)
        if not self.distance > 0:
            raise ConfigError("viewpoint distance must be positive")
        if not 0.0 < self.fov < 120.0:
            raise ConfigError("fov must lie in (0, 120) degrees")
        if self.image_size < 1:
            raise ConfigError("image_size must be >= 1")

    @property
    def focal_px(self) -> float:
        return (self.image_size / 2.0) / math.tan(math.radians(self.fov) / 2.0)


def view(kind: str, distance: float = DEFAULT_DISTANCE, fov: float = DEFAULT_FOV,
         image_size: int = DEFAULT_IMAGE_SIZE) -> Viewpoint:
    """Convenience constructor for a canonical viewpoint."""
    return Viewpoint(kind=kind, distance=distance, fov=fov, image_size=image_size)


def camera_frame(vp: Viewpoint):
    """Return (eye, right, up, forward) for the viewpoint.

    Cardinal views use exact axis-aligned vectors; other views derive the
    frame from azimuth/elevation with a +y up vector.
    """
    if vp.kind in _EXACT_BASES:
        right, up, forward = (np.array(v) for v in _EXACT_BASES[vp.kind])
        eye = -forward * vp.distance
        return eye, right, up, forward
    az = math.radians(vp.azimuth)
    el = math.radians(vp.elevation)
    eye = vp.distance * np.array(
        [math.sin(az) * math.cos(el), math.sin(el), math.cos(az) * math.cos(el)]
    )
    forward = -eye / np.linalg.norm(eye)
    world_up = np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, world_up)
    norm = np.linalg.norm(right)
    if norm < 1e-12:
        raise ConfigError("viewpoint looks straight along the up axis; tilt elevation slightly")
    right /= norm
    up = np.cross(right, forward)
    return eye, right, up, forward


def project_points(vp: Viewpoint, pts) -> np.ndarray:
    """Pinhole-project world points, shape (..., 3) -> (..., 2) pixels.

    Raises ProjectionError if any point lies at or behind the camera
    plane.
    """
    pts = np.asarray(pts, dtype=np.float64)
    eye, right, up, forward = camera_frame(vp)
    rel = pts - eye
    depth = rel @ forward
    if np.any(depth <= 0.0):
        raise ProjectionError("point at or behind the camera plane")
    f = vp.focal_px
    half = vp.image_size / 2.0
    u = half + f * (rel @ right) / depth
    v = half - f * (rel @ up) / depth
    return np.stack([u, v], axis=-1)


def project_point(vp: Viewpoint, p) -> np.ndarray:
    """Single-point convenience wrapper around :func:`project_points`."""
    return project_points(vp, np.asarray(p, dtype=np.float64).reshape(3))


def projection_jacobians(vp: Viewpoint, pts) -> np.ndarray:
    """Analytic d(u, v)/d(world point), shape (..., 2, 3).

    With a = right.rel, b = up.rel, c = forward.rel this is the usual
    quotient-rule Jacobian of (f*a/c, -f*b/c).
    """
    pts = np.asarray(pts, dtype=np.float64)
    eye, right, up, forward = camera_frame(vp)
    rel = pts - eye
    a = rel @ right
    b = rel @ up
    c = rel @ forward
    if np.any(c <= 0.0):
        raise ProjectionError("point at or behind the camera plane")
    f = vp.focal_px
    c = c[..., None]
    du = f * (right - a[..., None] * forward / c) / c
    dv = -f * (up - b[..., None] * forward / c) / c
    return np.stack([du, dv], axis=-2)


def project_curve(vp: Viewpoint, control) -> np.ndarray:
    """Project a curve's four control points, (4, 3) -> (4, 2) pixels.

    The returned 2D control polygon defines the approximating planar
    cubic; the approximation error vanishes as the camera recedes.
    """
    control = np.asarray(control, dtype=np.float64)
    if control.shape != (4, 3):
        raise ValueError(f"expected (4, 3) control points, got {control.shape}")
    return project_points(vp, control)


def project_sketch(vp: Viewpoint, control_points) -> np.ndarray:
    """Project all curves of a sketch, (N, 4, 3) -> (N, 4, 2)."""
    return project_points(vp, np.asarray(control_points, dtype=np.float64))


# ---------------------------------------------------------------------------
# Orthographic coordinate drops (motion stage)
# ---------------------------------------------------------------------------

ORTHO_PLANES = ("frontal", "sagittal")


def ortho_project(plane: str, pts) -> np.ndarray:
    """Drop one coordinate: frontal -> (x, y), sagittal -> (y, z)."""
    pts = np.asarray(pts, dtype=np.float64)
    if plane == "frontal":
        return pts[..., [0, 1]]
    if plane == "sagittal":
        return pts[..., [1, 2]]
    raise ValueError(f"unknown plane {plane!r}")


def ortho_to_pixels(plane: str, pts, image_size: int, extent: float = 1.0) -> np.ndarray:
    """Map world points through an orthographic plane drop to pixels.

    The world square [-extent, extent]^2 fills the image; the first
    dropped coordinate runs rightward, the second upward.
    """
    ab = ortho_project(plane, pts)
    half = image_size / 2.0
    scale = half / extent
    u = half + ab[..., 0] * scale
    v = half - ab[..., 1] * scale
    return np.stack([u, v], axis=-1)


def ortho_pixel_jacobian(plane: str, image_size: int, extent: float = 1.0) -> np.ndarray:
    """Constant d(u, v)/d(world point) of :func:`ortho_to_pixels`, (2, 3)."""
    scale = (image_size / 2.0) / extent
    jac = np.zeros((2, 3))
    if plane == "frontal":
        jac[0, 0] = scale
        jac[1, 1] = -scale
    elif plane == "sagittal":
        jac[0, 1] = scale
        jac[1, 2] = -scale
    else:
        raise ValueError(f"unknown plane {plane!r}")
    return jac

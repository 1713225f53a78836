"""3D cubic Bezier sketch representation.

A sketch is a set of N independent cubic curves, each defined by four 3D
control points.  Control points are stored as a single float64 array of
shape (N, 4, 3); individual points are plain length-3 numpy arrays.  The
scene is nominally contained in the unit ball, with cameras placed far
enough away (distance >= 4) that perspective projection of the control
polygon is a good approximation of the projected curve.

The flat parameter layout used by the optimizers is fixed: curve-major,
then control-point index, then (x, y, z), i.e. component ``(i, j, c)``
lives at flat index ``12*i + 3*j + c``.  The 2D flat layout in
:mod:`sketch3d.motion` relies on the same ordering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SKETCH_FORMAT_VERSION = 1

#: Paper-default stroke count and initialization bounds.
DEFAULT_CURVES = 16
DEFAULT_INIT_RADIUS = 0.2
DEFAULT_MIN_STEP = 0.001
DEFAULT_MAX_STEP = 0.01


@dataclass
class Sketch3D:
    """A set of cubic Bezier curves plus generation metadata.

    Value semantics: treat instances as immutable and create new ones via
    :func:`from_flat_parameters` / :meth:`with_control_points` when the
    optimizer updates geometry.
    """

    control_points: np.ndarray  # (N, 4, 3) float64
    prompt: str = ""
    seed: int = 0

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=np.float64)
        if pts.ndim != 3 or pts.shape[1:] != (4, 3):
            raise ValueError(f"control_points must have shape (N, 4, 3), got {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("a sketch needs at least one curve")
        if not np.all(np.isfinite(pts)):
            raise ValueError("control points must be finite")
        object.__setattr__(self, "control_points", pts)

    @property
    def n_curves(self) -> int:
        return self.control_points.shape[0]

    def with_control_points(self, pts: np.ndarray) -> "Sketch3D":
        """Copy of this sketch with replaced geometry, same metadata."""
        return Sketch3D(np.array(pts, dtype=np.float64), prompt=self.prompt, seed=self.seed)

    def copy(self) -> "Sketch3D":
        return self.with_control_points(self.control_points.copy())


def bernstein3(t):
    """Cubic Bernstein basis values at ``t``.

    ``t`` may be a scalar or an array; the basis axis is appended last,
    so a shape-(S,) input yields shape (S, 4).
    """
    t = np.asarray(t, dtype=np.float64)
    mt = 1.0 - t
    return np.stack([mt**3, 3.0 * mt**2 * t, 3.0 * mt * t**2, t**3], axis=-1)


def evaluate(control, t):
    """Evaluate a cubic Bezier at parameter ``t`` in [0, 1].

    ``control`` is a (4, d) array of control points (any dimension d).
    Scalar ``t`` gives a (d,) point; an array of parameters gives an
    (..., d) array of points.
    """
    control = np.asarray(control, dtype=np.float64)
    if control.shape[0] != 4:
        raise ValueError(f"cubic curve needs 4 control points, got {control.shape[0]}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("curve parameter t must lie in [0, 1]")
    return bernstein3(t) @ control


def init_sketch(
    n_curves: int = DEFAULT_CURVES,
    seed: int = 0,
    radius: float = DEFAULT_INIT_RADIUS,
    min_step: float = DEFAULT_MIN_STEP,
    max_step: float = DEFAULT_MAX_STEP,
    prompt: str = "",
) -> Sketch3D:
    """Randomly initialize a sketch inside a small spherical region.

    Each curve starts from a point drawn uniformly in the ball of the
    given radius; the three remaining control points are built as a
    random walk whose step norms fall in [min_step, max_step].  Step
    directions are uniform on the sphere.  Identical arguments always
    produce a bit-identical sketch.
    """
    if n_curves < 1:
        raise ConfigError("n_curves must be >= 1")
    if min_step <= 0 or min_step > max_step:
        raise ConfigError("require 0 < min_step <= max_step")
    rng = np.random.default_rng(seed)
    pts = np.empty((n_curves, 4, 3))
    for i in range(n_curves):
        # uniform in the ball: direction x radius^(1/3) scaling
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        pts[i, 0] = direction * radius * rng.random() ** (1.0 / 3.0)
        for j in range(1, 4):
            step_dir = rng.normal(size=3)
            step_dir /= np.linalg.norm(step_dir)
            step_len = rng.uniform(min_step, max_step)
            pts[i, j] = pts[i, j - 1] + step_dir * step_len
    return Sketch3D(pts, prompt=prompt, seed=seed)


def as_flat_parameters(sketch: Sketch3D) -> np.ndarray:
    """Flatten control points to the optimizer layout (length N*12)."""
    return sketch.control_points.reshape(-1).copy()


def from_flat_parameters(values, prompt: str = "", seed: int = 0) -> Sketch3D:
    """Rebuild a sketch from a flat parameter vector (length N*12)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size % 12 != 0 or values.size == 0:
        raise ValueError(f"flat parameter vector length must be a positive multiple of 12, got {values.size}")
    return Sketch3D(values.reshape(-1, 4, 3), prompt=prompt, seed=seed)


def flat_index(curve: int, point: int, coord: int = 0) -> int:
    """Flat-layout index of component ``coord`` of control point ``point``."""
    return 12 * curve + 3 * point + coord


# ---------------------------------------------------------------------------
# JSON sketch files
# ---------------------------------------------------------------------------

def sketch_to_dict(sketch: Sketch3D) -> dict:
    return {
        "version": SKETCH_FORMAT_VERSION,
        "prompt": sketch.prompt,
        "seed": int(sketch.seed),
        "curves": sketch.control_points.tolist(),
    }


def sketch_from_dict(data: dict) -> Sketch3D:
    if data.get("version") != SKETCH_FORMAT_VERSION:
        raise ValueError(f"unsupported sketch file version: {data.get('version')!r}")
    return Sketch3D(
        np.asarray(data["curves"], dtype=np.float64),
        prompt=str(data.get("prompt", "")),
        seed=int(data.get("seed", 0)),
    )


def save_sketch(sketch: Sketch3D, path) -> None:
    """Write the JSON sketch file.

    Floats are serialized with shortest round-trip repr, so reloading
    recovers every coordinate bit-exactly.
    """
    with open(path, "w") as fh:
        json.dump(sketch_to_dict(sketch), fh, indent=1)
        fh.write("\n")


def load_sketch(path) -> Sketch3D:
    with open(path) as fh:
        return sketch_from_dict(json.load(fh))

"""Finite-difference verification of every hand-written backward pass.

Each check draws seeded random cases, compares analytic gradients with
central finite differences of the corresponding scalar loss, and reports
a relative error per case.  ``run_all`` aggregates them into the report
the ``gradcheck`` command prints.

The rasterizer check perturbs control points in world units and excludes
pixels near the two clamp boundaries (kernel radius and full-coverage
saturation), where the intensity is not twice differentiable and finite
differences are legitimately noisy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import motion, rasterizer, stage1
from .curves import from_flat_parameters, init_sketch
from .projection import Viewpoint

RASTER_TOL = 1e-3
LOSS_TOL = 1e-4
WORLD_STEP = 1e-3
BOUNDARY_BAND = 0.05


@dataclass
class CheckResult:
    name: str
    rel_err: float
    tol: float

    def __post_init__(self):
        self.rel_err = float(self.rel_err)
        self.tol = float(self.tol)

    @property
    def passed(self) -> bool:
        return self.rel_err < self.tol

    def as_dict(self) -> dict:
        return {"name": self.name, "rel_err": self.rel_err, "tol": self.tol,
                "passed": self.passed}


def relative_error(analytic: np.ndarray, reference: np.ndarray,
                   floor: float = 1e-8) -> float:
    """Max-norm difference over the larger of the two gradient scales."""
    analytic = np.asarray(analytic, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    scale = max(np.max(np.abs(analytic), initial=0.0),
                np.max(np.abs(reference), initial=0.0), floor)
    return float(np.max(np.abs(analytic - reference), initial=0.0) / scale)


def finite_difference(f: Callable[[np.ndarray], float], x: np.ndarray,
                      step: float) -> np.ndarray:
    """Central differences of a scalar function over every component."""
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        fp = f(x)
        x[idx] = orig - step
        fm = f(x)
        x[idx] = orig
        out[idx] = (fp - fm) / (2.0 * step)
    return out


def _boundary_mask(tape) -> np.ndarray:
    """True at pixels safely away from both clamp boundaries."""
    size = tape.image_size
    sigma = tape.sigma
    ok = np.abs(tape.field - 1.0) >= BOUNDARY_BAND
    pts = tape.points.reshape(-1, 2)  # sample positions, (x, y) pixel coords
    centers_x = np.arange(size) + 0.5
    centers_y = np.arange(size) + 0.5
    dx = centers_x[None, :] - pts[:, 0][:, None]   # (M, W)
    dy = centers_y[None, :] - pts[:, 1][:, None]   # (M, H)
    # min over samples of the pixel-to-sample distance, per pixel
    d2 = dy[:, :, None] ** 2 + dx[:, None, :] ** 2  # (M, H, W)
    dmin = np.sqrt(d2.min(axis=0))
    ok &= np.abs(dmin - sigma) >= BOUNDARY_BAND * sigma
    return ok


def check_rasterizer(cases: int = 50, seed: int = 0, tol: float = RASTER_TOL) -> List[CheckResult]:
    """Full chain: world control points -> projection -> strokes -> pixels."""
    results = []
    master = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    for case in range(cases):
        rng = np.random.default_rng(master.integers(2**63))
        n_curves = int(rng.integers(1, 3))
        size = int(rng.integers(30, 43))
        sigma = float(rng.uniform(1.8, 3.5))
        samples = int(rng.integers(10, 18))
        vp = Viewpoint(azimuth=float(rng.uniform(0, 360)),
                       elevation=float(rng.uniform(-45, 45)),
                       distance=float(rng.uniform(3.0, 5.0)),
                       image_size=size)
        sketch = init_sketch(n_curves=n_curves, seed=int(rng.integers(2**31)),
                             radius=0.35, min_step=0.05, max_step=0.25)
        _, tape = rasterizer.render_view(sketch, vp, sigma=sigma, samples=samples)
        grad_image = rng.normal(size=(size, size))
        grad_image[~_boundary_mask(tape)] = 0.0

        analytic = rasterizer.backward(tape, grad_image)

        def loss(flat):
            sk = from_flat_parameters(flat)
            image, _ = rasterizer.render_view(sk, vp, sigma=sigma, samples=samples)
            return float(np.sum(grad_image * image.intensity))

        fd = finite_difference(loss, sketch.control_points.ravel(), WORLD_STEP)
        rel = relative_error(analytic.ravel(), fd)
        results.append(CheckResult(f"rasterizer[{case}]", rel, tol))
    return results


def check_geometric(cases: int = 50, seed: int = 0, tol: float = LOSS_TOL) -> List[CheckResult]:
    results = []
    master = np.random.default_rng(np.random.SeedSequence((seed, 2)))
    for case in range(cases):
        rng = np.random.default_rng(master.integers(2**63))
        n = int(rng.integers(1, 6))
        pts = rng.normal(size=(n, 4, 3)) * rng.uniform(0.1, 1.0)
        _, analytic, _ = stage1.geometric_loss(pts)

        def loss(flat):
            value, _, _ = stage1.geometric_loss(flat.reshape(n, 4, 3))
            return value

        fd = finite_difference(loss, pts.ravel(), 1e-5)
        results.append(CheckResult(f"geometric[{case}]",
                                   relative_error(analytic.ravel(), fd), tol))
    return results


def check_smoothness(cases: int = 50, seed: int = 0, tol: float = LOSS_TOL) -> List[CheckResult]:
    results = []
    master = np.random.default_rng(np.random.SeedSequence((seed, 3)))
    for case in range(cases):
        rng = np.random.default_rng(master.integers(2**63))
        k = int(rng.integers(2, 7))
        n = int(rng.integers(1, 5))
        offsets = rng.normal(size=(k, n, 4, 3))
        offsets[0] = 0.0
        _, analytic = motion.smoothness_loss(offsets)

        def loss(flat):
            value, _ = motion.smoothness_loss(flat.reshape(k, n, 4, 3))
            return value

        fd = finite_difference(loss, offsets.ravel(), 1e-5)
        results.append(CheckResult(f"smoothness[{case}]",
                                   relative_error(analytic.ravel(), fd), tol))
    return results


def check_motion_network(cases: int = 50, seed: int = 0, tol: float = LOSS_TOL,
                         probes_per_param: int = 9) -> List[CheckResult]:
    """Backward through the motion network on a random linear objective.

    Finite differences probe a seeded sample of components from every
    parameter array; the full 70k-parameter sweep would add nothing but
    runtime.
    """
    results = []
    master = np.random.default_rng(np.random.SeedSequence((seed, 4)))
    for case in range(cases):
        rng = np.random.default_rng(master.integers(2**63))
        n_curves = int(rng.integers(1, 3))
        k = int(rng.integers(2, 5))
        model = motion.MotionModel(n_curves=n_curves, seed=int(rng.integers(2**31)))
        # random final layer so gradients reach the early layers
        model.w3 = rng.normal(0, 0.1, size=model.w3.shape)
        model.b3 = rng.normal(0, 0.1, size=model.b3.shape)
        base = init_sketch(n_curves=n_curves, seed=int(rng.integers(2**31)),
                           radius=0.4, min_step=0.05, max_step=0.2)
        static_inputs, plane_ids = motion.build_static_inputs(base.control_points, k)
        cograd = rng.normal(size=(2 * k, model.out_dim))

        out, cache = model.forward(static_inputs, plane_ids)
        analytic = model.backward(cache, cograd)

        worst = 0.0
        step = 1e-5
        for param, grad in zip(model.parameters(), analytic):
            flat_param = param.reshape(-1)
            flat_grad = grad.reshape(-1)
            picks = rng.choice(flat_param.size, size=min(probes_per_param, flat_param.size),
                               replace=False)
            for idx in picks:
                orig = flat_param[idx]
                flat_param[idx] = orig + step
                fp = float(np.sum(cograd * model.forward(static_inputs, plane_ids)[0]))
                flat_param[idx] = orig - step
                fm = float(np.sum(cograd * model.forward(static_inputs, plane_ids)[0]))
                flat_param[idx] = orig
                fd = (fp - fm) / (2.0 * step)
                scale = max(abs(fd), abs(flat_grad[idx]), 1e-6)
                worst = max(worst, abs(flat_grad[idx] - fd) / scale)
        results.append(CheckResult(f"motion_network[{case}]", worst, tol))
    return results


def run_all(seed: int = 0, cases: int = 50, tolerance: float = None) -> dict:
    """Run every suite; a machine-readable report with one entry per case."""
    suites = [
        ("rasterizer", check_rasterizer, RASTER_TOL),
        ("geometric", check_geometric, LOSS_TOL),
        ("smoothness", check_smoothness, LOSS_TOL),
        ("motion_network", check_motion_network, LOSS_TOL),
    ]
    checks: List[CheckResult] = []
    for _, fn, default_tol in suites:
        checks.extend(fn(cases=cases, seed=seed,
                         tol=default_tol if tolerance is None else tolerance))
    return {
        "seed": seed,
        "cases_per_suite": cases,
        "checks": [c.as_dict() for c in checks],
        "max_rel_err": {name: max(c.rel_err for c in checks if c.name.startswith(name))
                        for name, _, _ in suites},
        "passed": all(c.passed for c in checks),
    }

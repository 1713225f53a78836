"""End-to-end checks for the guarantees this package advertises.

Each test covers one headline property, prints a single PASS/FAIL line
with the measured numbers, and asserts it.  Run with ``pytest -s`` to see
the lines on success.
"""

import time

import numpy as np

from sketch3d import cli, curves, gradcheck, motion, projection, rasterizer, stage1
from sketch3d.guidance import (
    TargetImageProvider,
    TargetVideoProvider,
    TimestepSchedule,
    sample_timestep,
)
from sketch3d.motion import (
    DisplacementField,
    MotionModel,
    Stage2Config,
    flat_view_index,
    flatten_view,
    reconstruct_3d,
)
from sketch3d.stage1 import Stage1Config, optimize_structure


def _verdict(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# gradient suite
# ---------------------------------------------------------------------------


def test_gradient_suite(capsys):
    start = time.perf_counter()
    report = gradcheck.run_all(seed=0, cases=50)
    elapsed = time.perf_counter() - start

    errs = report["max_rel_err"]
    raster_ok = errs["rasterizer"] < 1e-3
    loss_keys = ("geometric", "smoothness", "motion_network")
    loss_worst = max(errs[k] for k in loss_keys)
    losses_ok = loss_worst < 1e-4
    time_ok = elapsed < 120.0

    cli_code = cli.main(["gradcheck", "--cases", "10"])
    capsys.readouterr()  # drop the JSON report from the captured stream

    ok = report["passed"] and raster_ok and losses_ok and time_ok and cli_code == 0
    with capsys.disabled():
        _verdict(
            "gradient-suite", ok,
            f"rasterizer {errs['rasterizer']:.2e} (tol 1e-3), "
            f"losses worst {loss_worst:.2e} (tol 1e-4), "
            f"{report['cases_per_suite']} cases/suite, "
            f"{elapsed:.1f}s (< 120s), cli exit {cli_code}")


# ---------------------------------------------------------------------------
# plane-merge reconstruction
# ---------------------------------------------------------------------------


def test_reconstruction_exactness(capsys):
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(2, 17))
        n = int(rng.integers(1, 33))
        offsets = rng.normal(size=(k, n, 4, 3))
        offsets[0] = 0.0
        field = DisplacementField(offsets)
        front = np.stack([flatten_view(f, "frontal") for f in field.offsets])
        side = np.stack([flatten_view(f, "sagittal") for f in field.offsets])
        rebuilt = reconstruct_3d(front, side)
        worst = max(worst, float(np.max(np.abs(rebuilt.offsets - offsets))))

    # index arithmetic, checked for every (curve, point) pair
    layout_ok = True
    n = 32
    sample = rng.normal(size=(2, n, 4, 3))
    sample[0] = 0.0
    front = flatten_view(sample[1], "frontal")
    side = flatten_view(sample[1], "sagittal")
    for i in range(n):
        for j in range(4):
            fi = flat_view_index(i, j, 0)
            layout_ok &= fi == 2 * (4 * i + j)
            layout_ok &= front[fi] == sample[1, i, j, 0]
            layout_ok &= front[fi + 1] == sample[1, i, j, 1]
            layout_ok &= side[fi] == sample[1, i, j, 1]
            layout_ok &= side[fi + 1] == sample[1, i, j, 2]
            for c in range(3):
                layout_ok &= curves.flat_index(i, j, c) == 12 * i + 3 * j + c

    ok = worst < 1e-12 and layout_ok
    with capsys.disabled():
        _verdict("reconstruction-exactness", ok,
                 f"max abs err {worst:.1e} over 100 fields (tol 1e-12), "
                 f"index layout verified for all (i, j)")


# ---------------------------------------------------------------------------
# projected-control-point approximation
# ---------------------------------------------------------------------------


def _stroke_curve(rng):
    """A stroke-scale curve placed anywhere in the unit ball."""
    d = rng.normal(size=3)
    p0 = d / np.linalg.norm(d) * 0.55 * rng.random() ** (1.0 / 3.0)
    pts = [p0]
    for _ in range(3):
        step = rng.normal(size=3)
        step *= rng.uniform(0.05, 0.15) / np.linalg.norm(step)
        pts.append(pts[-1] + step)
    return np.array(pts)


def _bezier_deviation(vp, ctrl, t):
    true = projection.project_points(vp, curves.evaluate(ctrl, t))
    approx = curves.evaluate(projection.project_curve(vp, ctrl), t)
    return float(np.max(np.linalg.norm(true - approx, axis=-1)))


def test_projection_approximation(capsys):
    rng = np.random.default_rng(1)
    near = projection.Viewpoint(distance=4.0, fov=40.0, image_size=512)
    far = projection.Viewpoint(distance=8.0, fov=40.0, image_size=512)
    t = np.linspace(0.0, 1.0, 200)

    worst = 0.0
    decreasing = True
    contained = True
    for _ in range(100):
        ctrl = _stroke_curve(rng)
        contained &= bool(np.all(np.linalg.norm(ctrl, axis=-1) <= 1.0))
        dev_near = _bezier_deviation(near, ctrl, t)
        dev_far = _bezier_deviation(far, ctrl, t)
        worst = max(worst, dev_near)
        decreasing &= dev_far < dev_near

    ok = contained and worst < 1.5 and decreasing
    with capsys.disabled():
        _verdict("projection-approximation", ok,
                 f"100 unit-ball curves, max deviation {worst:.3f} px "
                 f"(tol 1.5 px at 512^2), strictly smaller at doubled "
                 f"distance: {decreasing}")


# ---------------------------------------------------------------------------
# stage 1 recovery
# ---------------------------------------------------------------------------


def _stage1_setup():
    hidden = curves.init_sketch(n_curves=8, seed=77, min_step=0.03,
                                max_step=0.1, prompt="hidden")
    start = curves.init_sketch(n_curves=8, seed=5, min_step=0.03,
                               max_step=0.1, prompt="hidden")
    cfg = Stage1Config(iters=400, lr=3e-3, lambda_geom=0.01, sigma=5.0,
                       samples=16, image_size=64, seed=0)
    tags = list(cfg.views) + [stage1.TOP_VIEW]
    targets = {}
    for tag in tags:
        vp = projection.view(tag, image_size=cfg.image_size)
        img, _ = rasterizer.render_view(hidden, vp, sigma=cfg.sigma,
                                        samples=cfg.samples)
        targets[tag] = img.intensity
    return hidden, start, cfg, targets


def _view_error(sketch, cfg, targets):
    total = 0.0
    for tag in cfg.views:
        vp = projection.view(tag, image_size=cfg.image_size)
        img, _ = rasterizer.render_view(sketch, vp, sigma=cfg.sigma,
                                        samples=cfg.samples)
        total += float(np.linalg.norm(img.intensity - targets[tag]))
    return total / len(cfg.views)


def test_stage1_recovery(capsys):
    hidden, start, cfg, targets = _stage1_setup()
    provider = TargetImageProvider(targets)

    t0 = time.perf_counter()
    final, _ = optimize_structure(start, provider, cfg)
    elapsed = time.perf_counter() - t0

    err0 = _view_error(start, cfg, targets)
    err1 = _view_error(final, cfg, targets)
    ratio = err1 / err0

    rerun, _ = optimize_structure(start, TargetImageProvider(targets), cfg)
    deterministic = bool(np.array_equal(final.control_points,
                                        rerun.control_points))

    ok = ratio < 0.35 and deterministic and elapsed < 300.0
    with capsys.disabled():
        _verdict("stage1-recovery", ok,
                 f"mean per-view L2 {err1:.3f}/{err0:.3f} = {ratio:.1%} "
                 f"(< 35%) after {cfg.iters} iters at 64^2, "
                 f"bitwise deterministic rerun: {deterministic}, "
                 f"{elapsed:.1f}s (< 300s)")


# ---------------------------------------------------------------------------
# stage 2 recovery
# ---------------------------------------------------------------------------


def test_stage2_recovery(capsys):
    base = curves.init_sketch(n_curves=4, seed=9, min_step=0.05,
                              max_step=0.15, prompt="toy")
    k = 8
    cfg = Stage2Config(iters=300, lr=5e-3, frames=k, lambda_smooth=0.01,
                       sigma=5.0, samples=16, image_size=64, seed=0)

    # scripted rigid translation, frame 0 at rest
    delta = np.array([0.25, 0.12, -0.18])
    script = np.linspace(0.0, 1.0, k)[:, None] * delta[None, :]
    truth = base.control_points[None] + script[:, None, None, :]

    targets = {}
    for plane, tag in motion.PLANE_TAGS.items():
        stack = []
        for kk in range(k):
            img, _ = rasterizer.render_ortho(truth[kk], plane,
                                             cfg.image_size, sigma=cfg.sigma,
                                             samples=cfg.samples)
            stack.append(img.intensity)
        targets[tag] = np.stack(stack)

    def frame_error(frames_pts):
        total = 0.0
        for plane, tag in motion.PLANE_TAGS.items():
            for kk in range(k):
                img, _ = rasterizer.render_ortho(frames_pts[kk], plane,
                                                 cfg.image_size,
                                                 sigma=cfg.sigma,
                                                 samples=cfg.samples)
                total += float(np.linalg.norm(img.intensity - targets[tag][kk]))
        return total / (2 * k)

    snapshot = base.control_points.copy()
    model = MotionModel(n_curves=base.n_curves, seed=0)
    provider = TargetVideoProvider(targets)
    field, _ = motion.optimize_motion(base, model, provider, cfg)

    static_frames = np.repeat(base.control_points[None], k, axis=0)
    err0 = frame_error(static_frames)
    err1 = frame_error(field.apply(base.control_points))
    ratio = err1 / err0

    frame0_ok = bool(np.array_equal(field.apply(base.control_points)[0],
                                    base.control_points))
    base_ok = bool(np.array_equal(base.control_points, snapshot))

    ok = ratio < 0.40 and frame0_ok and base_ok
    with capsys.disabled():
        _verdict("stage2-recovery", ok,
                 f"mean per-frame L2 {err1:.3f}/{err0:.3f} = {ratio:.1%} "
                 f"(< 40%) after {cfg.iters} iters, frame 0 bit-identical: "
                 f"{frame0_ok}, base untouched: {base_ok}")


# ---------------------------------------------------------------------------
# timestep curriculum
# ---------------------------------------------------------------------------


def test_timestep_curriculum(capsys):
    total = 4000
    sched = TimestepSchedule(total_iters=total)
    rng = np.random.default_rng(2)

    never_exceeds = True
    for it in (0, 137, 1999, 3998, 3999):
        cap = sched.t_max(it)
        draws = np.array([sample_timestep(sched, it, rng) for _ in range(500)])
        never_exceeds &= bool(np.all(draws <= cap)) and bool(np.all(draws >= 0.02))

    first = np.array([sample_timestep(sched, 0, rng) for _ in range(10000)])
    last = np.array([sample_timestep(sched, total - 1, rng) for _ in range(10000)])
    first_ok = 0.79 < first.max() <= 0.8
    last_ok = 0.59 < last.max() <= 0.6
    floor_ok = first.min() >= 0.02 and last.min() >= 0.02

    ok = never_exceeds and first_ok and last_ok and floor_ok
    with capsys.disabled():
        _verdict("timestep-curriculum", ok,
                 f"10k-sample max at iter 0: {first.max():.4f} in (0.79, 0.8], "
                 f"at iter {total - 1}: {last.max():.4f} in (0.59, 0.6], "
                 f"min {min(first.min(), last.min()):.4f} >= 0.02")


# ---------------------------------------------------------------------------
# shipped defaults
# ---------------------------------------------------------------------------


def test_config_defaults(capsys):
    import inspect

    s1 = Stage1Config()
    s2 = Stage2Config()
    init_sig = inspect.signature(curves.init_sketch)

    checks = {
        "curves": curves.DEFAULT_CURVES == 16
                  and init_sig.parameters["n_curves"].default == 16,
        "init radius": curves.DEFAULT_INIT_RADIUS == 0.2
                       and init_sig.parameters["radius"].default == 0.2,
        "stage1 lr": s1.lr == 1.5e-3,
        "stage1 iters": s1.iters == 4000,
        "stage1 cfg": s1.cfg_scale == 7.5,
        "stage2 lr": s2.lr == 1e-4,
        "stage2 iters": s2.iters == 1000,
        "stage2 cfg": s2.cfg_scale == 30.0,
        "top view prob": s1.top_view_prob == 0.10,
        "timesteps": (s1.t_min, s1.t_max_start, s1.t_max_end) == (0.02, 0.8, 0.6)
                     and (s2.t_min, s2.t_max_start, s2.t_max_end) == (0.02, 0.8, 0.6),
    }
    bad = [k for k, v in checks.items() if not v]
    ok = not bad
    with capsys.disabled():
        _verdict("config-defaults", ok,
                 "all shipped defaults match the documented values"
                 if ok else f"mismatched: {bad}")

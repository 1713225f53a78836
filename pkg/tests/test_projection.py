import math

import numpy as np
import pytest

from sketch3d import curves, projection
from sketch3d.errors import ConfigError, ProjectionError


def test_origin_projects_to_center_any_fov():
    for fov in (20.0, 40.0, 60.0):
        vp = projection.Viewpoint(kind="front", fov=fov, image_size=512)
        u, v = projection.project_point(vp, np.zeros(3))
        assert u == pytest.approx(256.0) and v == pytest.approx(256.0)


def test_pinhole_worked_example():
    vp = projection.Viewpoint(kind="front", distance=4.0, fov=40.0, image_size=512)
    u, v = projection.project_point(vp, np.array([0.5, 0.0, 0.0]))
    expected_u = 256.0 + 256.0 * (0.5 / 4.0) / math.tan(math.radians(20.0))
    assert u == pytest.approx(expected_u, abs=1e-9)
    assert v == pytest.approx(256.0, abs=1e-9)


def test_front_back_mirror_symmetry():
    rng = np.random.default_rng(4)
    front = projection.view("front", image_size=512)
    back = projection.view("back", image_size=512)
    for _ in range(20):
        p = rng.normal(size=3) * 0.5
        p[2] = 0.0  # equal depth from both cameras
        uf, vf = projection.project_point(front, p)
        ub, vb = projection.project_point(back, p)
        assert ub == pytest.approx(512.0 - uf, abs=1e-9)
        assert vb == pytest.approx(vf, abs=1e-9)


def test_point_behind_camera_rejected():
    vp = projection.view("front")
    with pytest.raises(ProjectionError):
        projection.project_point(vp, np.array([0.0, 0.0, 10.0]))


def test_canonical_angles_pinned():
    assert projection.CANONICAL_ANGLES == {
        "front": (0.0, 0.0),
        "right": (90.0, 0.0),
        "back": (180.0, 0.0),
        "left": (270.0, 0.0),
        "top": (0.0, 89.0),
    }
    vp = projection.Viewpoint(kind="right", azimuth=123.0)
    assert vp.azimuth == 90.0 and vp.elevation == 0.0


def test_viewpoint_validation():
    with pytest.raises(ConfigError):
        projection.Viewpoint(kind="front", distance=0.0)
    with pytest.raises(ConfigError):
        projection.Viewpoint(kind="front", fov=130.0)
    with pytest.raises(ConfigError):
        projection.Viewpoint(kind="diagonal")


def test_project_curve_on_axis_degenerates_to_center():
    vp = projection.view("front", image_size=256)
    ctrl = np.array([[0, 0, -0.3], [0, 0, -0.1], [0, 0, 0.1], [0, 0, 0.3]], dtype=float)
    flat = projection.project_curve(vp, ctrl)
    assert np.allclose(flat, 128.0)


def test_projection_approximation_improves_with_distance():
    # fixed curve inside the unit ball; deviation shrinks monotonically
    # as the camera retreats from 4 to 32 world units
    ctrl = np.array([[-0.4, -0.2, 0.3], [-0.1, 0.4, -0.2],
                     [0.2, -0.4, 0.1], [0.4, 0.3, -0.3]])
    t = np.linspace(0, 1, 201)
    prev = None
    for dist in (4.0, 8.0, 16.0, 32.0):
        vp = projection.Viewpoint(kind="front", distance=dist, image_size=512)
        approx = curves.evaluate(projection.project_curve(vp, ctrl), t)
        exact = projection.project_points(vp, curves.evaluate(ctrl, t))
        dev = float(np.max(np.linalg.norm(approx - exact, axis=1)))
        if prev is not None:
            assert dev < prev
        prev = dev


def test_orthographic_projection_is_exact_for_beziers():
    # affine cameras commute with Bezier evaluation
    rng = np.random.default_rng(8)
    ctrl = rng.normal(size=(4, 3))
    t = np.linspace(0, 1, 101)
    for plane in projection.ORTHO_PLANES:
        planar_ctrl = projection.ortho_project(plane, ctrl)
        a = curves.evaluate(planar_ctrl, t)
        b = projection.ortho_project(plane, curves.evaluate(ctrl, t))
        assert np.allclose(a, b, atol=1e-12)


def test_ortho_coordinate_drops():
    p = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(projection.ortho_project("frontal", p), [1.0, 2.0])
    assert np.array_equal(projection.ortho_project("sagittal", p), [2.0, 3.0])


def test_ortho_planes_share_y():
    rng = np.random.default_rng(9)
    pts = rng.normal(size=(10, 3))
    f = projection.ortho_project("frontal", pts)
    s = projection.ortho_project("sagittal", pts)
    assert np.array_equal(f[:, 1], s[:, 0])


def test_ortho_pixel_mapping_and_jacobian():
    size = 100
    px = projection.ortho_to_pixels("frontal", np.array([0.0, 0.0, 0.5]), size)
    assert np.allclose(px, [50.0, 50.0])
    px = projection.ortho_to_pixels("frontal", np.array([1.0, 1.0, 0.0]), size)
    assert np.allclose(px, [100.0, 0.0])  # +y points up in world, up the image

    jac = projection.ortho_pixel_jacobian("frontal", size)
    h = 1e-6
    base = np.array([0.1, -0.2, 0.3])
    for c in range(3):
        d = np.zeros(3)
        d[c] = h
        fd = (projection.ortho_to_pixels("frontal", base + d, size)
              - projection.ortho_to_pixels("frontal", base - d, size)) / (2 * h)
        assert np.allclose(jac[:, c], fd, atol=1e-6)


def test_projection_jacobians_match_finite_differences():
    rng = np.random.default_rng(10)
    vp = projection.Viewpoint(azimuth=33.0, elevation=-20.0, distance=4.0, image_size=512)
    pts = rng.normal(size=(8, 3)) * 0.5
    jac = projection.projection_jacobians(vp, pts)
    h = 1e-6
    for c in range(3):
        d = np.zeros(3)
        d[c] = h
        fd = (projection.project_points(vp, pts + d)
              - projection.project_points(vp, pts - d)) / (2 * h)
        assert np.allclose(jac[:, :, c], fd, atol=1e-5)


def test_top_view_avoids_up_singularity():
    vp = projection.view("top")
    eye, right, up, forward = projection.camera_frame(vp)
    assert np.all(np.isfinite(right)) and np.linalg.norm(right) == pytest.approx(1.0)

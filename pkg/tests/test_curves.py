import json

import numpy as np
import pytest

from sketch3d import curves
from sketch3d.errors import ConfigError


def test_evaluate_endpoints():
    rng = np.random.default_rng(1)
    ctrl = rng.normal(size=(4, 3))
    assert np.allclose(curves.evaluate(ctrl, 0.0), ctrl[0])
    assert np.allclose(curves.evaluate(ctrl, 1.0), ctrl[3])


def test_evaluate_midpoint():
    rng = np.random.default_rng(2)
    ctrl = rng.normal(size=(4, 3))
    expected = (ctrl[0] + 3 * ctrl[1] + 3 * ctrl[2] + ctrl[3]) / 8.0
    assert np.allclose(curves.evaluate(ctrl, 0.5), expected)


def test_evaluate_rejects_out_of_domain():
    ctrl = np.zeros((4, 3))
    with pytest.raises(ValueError):
        curves.evaluate(ctrl, -0.01)
    with pytest.raises(ValueError):
        curves.evaluate(ctrl, 1.01)


def test_evaluate_affine_equivariance():
    rng = np.random.default_rng(3)
    ctrl = rng.normal(size=(4, 3))
    A = rng.normal(size=(3, 3))
    b = rng.normal(size=3)
    t = rng.uniform(0, 1, size=7)
    lhs = curves.evaluate(ctrl @ A.T + b, t)
    rhs = curves.evaluate(ctrl, t) @ A.T + b
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_bernstein_partition_of_unity():
    t = np.linspace(0, 1, 17)
    basis = curves.bernstein3(t)
    assert np.allclose(basis.sum(axis=-1), 1.0, atol=1e-15)


def test_init_sketch_ball_constraint():
    sk = curves.init_sketch(n_curves=16, seed=7)
    starts = sk.control_points[:, 0]
    assert np.all(np.linalg.norm(starts, axis=1) <= 0.2)


def test_init_sketch_step_bounds_many_seeds():
    for seed in range(120):
        sk = curves.init_sketch(n_curves=4, seed=seed)
        steps = np.diff(sk.control_points, axis=1)
        norms = np.linalg.norm(steps, axis=-1)
        assert np.all(norms >= 0.001) and np.all(norms <= 0.01)
        assert np.all(np.linalg.norm(sk.control_points[:, 0], axis=1) <= 0.2)


def test_init_sketch_deterministic():
    a = curves.init_sketch(n_curves=16, seed=42)
    b = curves.init_sketch(n_curves=16, seed=42)
    assert np.array_equal(a.control_points, b.control_points)


def test_init_sketch_rejects_bad_steps():
    with pytest.raises(ConfigError):
        curves.init_sketch(n_curves=2, seed=0, min_step=0.02, max_step=0.01)
    with pytest.raises(ConfigError):
        curves.init_sketch(n_curves=0, seed=0)


def test_flat_roundtrip_and_layout():
    rng = np.random.default_rng(5)
    sk = curves.Sketch3D(rng.normal(size=(3, 4, 3)), prompt="p", seed=9)
    flat = curves.as_flat_parameters(sk)
    assert flat.shape == (36,)
    back = curves.from_flat_parameters(flat, prompt="p", seed=9)
    assert np.array_equal(back.control_points, sk.control_points)

    one = curves.Sketch3D(rng.normal(size=(1, 4, 3)))
    assert curves.as_flat_parameters(one).shape == (12,)

    for i in range(3):
        for j in range(4):
            idx = curves.flat_index(i, j)
            assert idx == 12 * i + 3 * j
            assert flat[idx] == sk.control_points[i, j, 0]
            assert flat[idx + 1] == sk.control_points[i, j, 1]
            assert flat[idx + 2] == sk.control_points[i, j, 2]


def test_from_flat_rejects_bad_length():
    with pytest.raises(ValueError):
        curves.from_flat_parameters(np.zeros(13))


def test_sketch_rejects_nonfinite():
    bad = np.zeros((1, 4, 3))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        curves.Sketch3D(bad)


def test_json_file_format_and_roundtrip(tmp_path):
    sk = curves.init_sketch(n_curves=3, seed=13, prompt="a cat")
    path = tmp_path / "sketch.json"
    curves.save_sketch(sk, path)
    with open(path) as fh:
        data = json.load(fh)
    assert data["version"] == 1
    assert data["prompt"] == "a cat"
    assert data["seed"] == 13
    assert len(data["curves"]) == 3
    assert len(data["curves"][0]) == 4
    assert len(data["curves"][0][0]) == 3

    loaded = curves.load_sketch(path)
    assert np.array_equal(loaded.control_points, sk.control_points)
    assert loaded.prompt == sk.prompt and loaded.seed == sk.seed


def test_load_rejects_unknown_version(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"version": 99, "curves": [[[0, 0, 0]] * 4]}))
    with pytest.raises(ValueError):
        curves.load_sketch(path)

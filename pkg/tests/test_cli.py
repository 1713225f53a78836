import json

import numpy as np
import pytest
from PIL import Image

from sketch3d import cli, curves, motion, rasterizer


def _write_config(path, **keys):
    lines = ["# test configuration"]
    for k, v in keys.items():
        lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def _structure_config(tmp_path, **over):
    keys = dict(prompt="a chair", iters=6, n_curves=3, image_size=24,
                samples=8, sigma=2.0, top_view_prob=0.0, seed=4)
    keys.update(over)
    return _write_config(tmp_path / "structure.cfg", **keys)


def _run_structure(tmp_path, out_name="run", **over):
    cfg = _structure_config(tmp_path, **over)
    out = tmp_path / out_name
    code = cli.main(["structure", "--config", cfg, "--provider", "mock",
                     "--out", str(out)])
    return code, out


# --------------------------------------------------------------- structure


def test_structure_writes_outputs(tmp_path, capsys):
    code, out = _run_structure(tmp_path)
    assert code == 0
    assert (out / "sketch.json").exists()
    assert capsys.readouterr().out.strip().endswith("sketch.json")

    trace_lines = (out / "loss_trace.csv").read_text().strip().splitlines()
    assert len(trace_lines) == 7  # header + 6 iterations
    header = trace_lines[0].split(",")
    assert header[:2] == ["iter", "t"]
    assert header[-1] == "geom"
    assert {"sds_front", "sds_right", "sds_back", "sds_left"} <= set(header)

    for tag in ("front", "right", "back", "left", "top"):
        assert (out / f"view_{tag}.png").exists()

    sk = curves.load_sketch(out / "sketch.json")
    assert sk.n_curves == 3
    assert sk.prompt == "a chair"


def test_structure_deterministic_across_runs(tmp_path):
    _, out_a = _run_structure(tmp_path, out_name="a")
    _, out_b = _run_structure(tmp_path, out_name="b")
    assert (out_a / "sketch.json").read_bytes() == (out_b / "sketch.json").read_bytes()


def test_structure_rejects_bad_lr(tmp_path, capsys):
    cfg = _structure_config(tmp_path, lr=0.0)
    code = cli.main(["structure", "--config", cfg, "--out", str(tmp_path / "x")])
    assert code == 2
    assert "lr" in capsys.readouterr().err


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = _write_config(tmp_path / "bad.cfg", iters=3, warp_speed=9)
    code = cli.main(["structure", "--config", cfg, "--out", str(tmp_path / "x")])
    assert code == 2
    err = capsys.readouterr().err
    assert "warp_speed" in err


def test_config_parse_reports_line(tmp_path, capsys):
    path = tmp_path / "broken.cfg"
    path.write_text("iters = 3\nthis line has no equals sign\n")
    code = cli.main(["structure", "--config", str(path), "--out", str(tmp_path / "x")])
    assert code == 2
    assert ":2:" in capsys.readouterr().err  # file:line prefix


# ------------------------------------------------------------------ motion


def _run_motion(tmp_path, sketch_path, frames=4, **over):
    keys = dict(iters=3, frames=frames, image_size=24, samples=8, sigma=2.0,
                seed=4, motion_prompt="a chair rocking")
    keys.update(over)
    cfg = _write_config(tmp_path / "motion.cfg", **keys)
    out = tmp_path / "motion_out"
    code = cli.main(["motion", str(sketch_path), "--config", cfg,
                     "--provider", "mock", "--out", str(out)])
    return code, out


def test_motion_writes_animation_and_frames(tmp_path):
    _, sdir = _run_structure(tmp_path)
    code, out = _run_motion(tmp_path, sdir / "sketch.json", frames=8)
    assert code == 0
    assert (out / "animation.json").exists()
    pngs = sorted(p.name for p in out.glob("*_frame_*.png"))
    assert len(pngs) == 16  # 8 frames x 2 planes
    assert pngs[0] == "front_frame_000.png"
    assert "right_frame_000.png" in pngs

    base, field = motion.load_animation(out / "animation.json")
    assert field.n_frames == 8
    assert np.all(field.offsets[0] == 0.0)

    # frame 0 must be the untouched static sketch
    image, _ = rasterizer.render_ortho(base.control_points, "frontal",
                                       image_size=24, sigma=2.0, samples=8)
    on_disk = np.asarray(Image.open(out / "front_frame_000.png"))
    assert np.array_equal(on_disk, rasterizer.quantize(image))


def test_motion_missing_sketch_file(tmp_path, capsys):
    code = cli.main(["motion", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "x")])
    assert code == 2
    assert "nope.json" in capsys.readouterr().err


# ------------------------------------------------------------------ render


def test_render_svg_has_one_path_per_curve(tmp_path):
    _, sdir = _run_structure(tmp_path)
    out = tmp_path / "r.svg"
    code = cli.main(["render", str(sdir / "sketch.json"), "--view", "front",
                     "--format", "svg", "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.count("<path ") == 3
    assert "svg" in text


def test_render_png_matches_library_render(tmp_path):
    _, sdir = _run_structure(tmp_path)
    out = tmp_path / "r.png"
    code = cli.main(["render", str(sdir / "sketch.json"), "--view", "left",
                     "--size", "48", "--samples", "8", "--out", str(out)])
    assert code == 0
    sk = curves.load_sketch(sdir / "sketch.json")
    from sketch3d.projection import view

    image, _ = rasterizer.render_view(sk, view("left", image_size=48), samples=8)
    assert np.array_equal(np.asarray(Image.open(out)), rasterizer.quantize(image))
    assert Image.open(out).mode == "L"


def test_render_depth_color_is_rgb(tmp_path):
    _, sdir = _run_structure(tmp_path)
    out = tmp_path / "depth.png"
    code = cli.main(["render", str(sdir / "sketch.json"), "--view", "front",
                     "--size", "48", "--samples", "8", "--depth-color",
                     "--out", str(out)])
    assert code == 0
    assert Image.open(out).mode == "RGB"


def test_render_unknown_view(tmp_path, capsys):
    _, sdir = _run_structure(tmp_path)
    code = cli.main(["render", str(sdir / "sketch.json"), "--view", "sideways",
                     "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "sideways" in capsys.readouterr().err


def test_render_animation_frames(tmp_path):
    _, sdir = _run_structure(tmp_path)
    _, mdir = _run_motion(tmp_path, sdir / "sketch.json", frames=3)
    out = tmp_path / "anim_frames"
    code = cli.main(["render", str(mdir / "animation.json"), "--view", "right",
                     "--size", "24", "--samples", "8", "--out", str(out)])
    assert code == 0
    names = sorted(p.name for p in out.glob("*.png"))
    assert names == ["right_frame_000.png", "right_frame_001.png",
                     "right_frame_002.png"]

    code = cli.main(["render", str(mdir / "animation.json"), "--view", "top",
                     "--out", str(out)])
    assert code == 2


def test_render_animation_svg(tmp_path):
    _, sdir = _run_structure(tmp_path)
    _, mdir = _run_motion(tmp_path, sdir / "sketch.json", frames=3)
    out = tmp_path / "anim_svg"
    code = cli.main(["render", str(mdir / "animation.json"), "--view", "front",
                     "--format", "svg", "--size", "24", "--out", str(out)])
    assert code == 0
    assert len(list(out.glob("front_frame_*.svg"))) == 3


# --------------------------------------------------------------- gradcheck


def test_gradcheck_passes(tmp_path, capsys):
    code = cli.main(["gradcheck", "--cases", "2", "--seed", "1"])
    out = capsys.readouterr().out
    report = json.loads(out)
    assert code == 0
    assert report["passed"] is True
    suites = {c["name"].split("[")[0] for c in report["checks"]}
    assert suites >= {"rasterizer", "geometric", "smoothness", "motion_network"}


def test_gradcheck_detects_broken_gradients(tmp_path, capsys, monkeypatch):
    real_backward = rasterizer.backward

    def flipped(tape, grad_image):
        return -real_backward(tape, grad_image)

    monkeypatch.setattr(rasterizer, "backward", flipped)
    code = cli.main(["gradcheck", "--cases", "2", "--seed", "1"])
    report = json.loads(capsys.readouterr().out)
    assert code == 1
    assert report["passed"] is False

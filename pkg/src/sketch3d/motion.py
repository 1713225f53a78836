"""Stage two: learn per-frame displacement fields for animation.

A small shared network maps (base view projection, frame phase, plane
embedding) to per-frame 2D displacement vectors on two orthogonal planes
(frontal x-y and sagittal y-z).  The two planar predictions are merged
into 3D offsets with the shared y component averaged; the displaced
frames are rendered orthographically and scored by video guidance, with
a temporal smoothness penalty.  Only the network's weights are trained;
the base sketch stays frozen and frame 0 is pinned to zero displacement
so every animation starts at the static result.

All forward and backward passes are hand-written numpy; there is no
autodiff framework underneath.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import rasterizer
from .curves import Sketch3D, sketch_from_dict, sketch_to_dict
from .errors import ConfigError, ProtocolError, TransportError
from .guidance import (GuidanceRequest, PromptContext, TimestepSchedule,
                       sample_timestep, video_guidance)
from .optim import AdamState, adam_update, load_adam_state, save_adam_state
from .projection import ORTHO_PLANES, ortho_project

FRAME_FREQS = 8
HIDDEN_WIDTH = 256
EMBED_DIM = 2

# Plane -> view tag used for request routing and target lookup.
PLANE_TAGS = {"frontal": "front", "sagittal": "right"}

CHECKPOINT_MODEL = "checkpoint_model.npz"
CHECKPOINT_ADAM = "checkpoint_adam.bin"


# ---------------------------------------------------------------------------
# Flattened view vectors and 3D reconstruction
# ---------------------------------------------------------------------------

def flatten_view(sketch_frame, plane: str) -> np.ndarray:
    """Pack one frame's planar projection into a flat vector.

    Entry 2(4i+j) holds the first plane coordinate of curve i, control
    point j; entry 2(4i+j)+1 the second.  Frontal packs (x, y),
    sagittal packs (y, z).
    """
    pts = sketch_frame.control_points if isinstance(sketch_frame, Sketch3D) else np.asarray(sketch_frame, dtype=np.float64)
    return ortho_project(plane, pts).reshape(-1)


def flat_view_index(curve: int, point: int, coord: int = 0) -> int:
    return 2 * (curve * 4 + point) + coord


@dataclass
class DisplacementField:
    """Per-frame additive 3D offsets to the base control points."""

    offsets: np.ndarray  # (K, N, 4, 3)

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        if self.offsets.ndim != 4 or self.offsets.shape[2:] != (4, 3):
            raise ValueError(f"offsets must have shape (K, N, 4, 3), got {self.offsets.shape}")
        if self.offsets.shape[0] < 1:
            raise ValueError("need at least one frame")
        if not np.all(np.isfinite(self.offsets)):
            raise ValueError("offsets must be finite")
        if np.any(self.offsets[0] != 0.0):
            raise ValueError("frame 0 offsets must be zero")

    @property
    def n_frames(self) -> int:
        return self.offsets.shape[0]

    def apply(self, base_points: np.ndarray) -> np.ndarray:
        """Displaced control points per frame, shape (K, N, 4, 3)."""
        return np.asarray(base_points, dtype=np.float64)[None] + self.offsets


def reconstruct_3d(front: np.ndarray, side: np.ndarray) -> DisplacementField:
    """Merge per-frame flat vectors from both planes into 3D offsets.

    x comes from the frontal vector, z from the sagittal one, and the y
    seen by both planes is averaged.
    """
    front = np.asarray(front, dtype=np.float64)
    side = np.asarray(side, dtype=np.float64)
    if front.shape != side.shape or front.ndim != 2 or front.shape[1] % 8:
        raise ValueError(f"need matching (K, 2*N*4) vectors, got {front.shape} and {side.shape}")
    k, flat = front.shape
    n = flat // 8
    f = front.reshape(k, n, 4, 2)
    s = side.reshape(k, n, 4, 2)
    out = np.empty((k, n, 4, 3))
    out[..., 0] = f[..., 0]
    out[..., 1] = 0.5 * (f[..., 1] + s[..., 0])
    out[..., 2] = s[..., 1]
    return DisplacementField(out)


def reconstruct_grads(grad_offsets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Transpose of reconstruct_3d: 3D offset gradients -> per-plane flat
    gradients.  The shared-y average puts a 1/2 on both y paths.
    """
    g = np.asarray(grad_offsets, dtype=np.float64)
    k, n = g.shape[0], g.shape[1]
    gf = np.empty((k, n, 4, 2))
    gs = np.empty((k, n, 4, 2))
    gf[..., 0] = g[..., 0]
    gf[..., 1] = 0.5 * g[..., 1]
    gs[..., 0] = 0.5 * g[..., 1]
    gs[..., 1] = g[..., 2]
    return gf.reshape(k, -1), gs.reshape(k, -1)


def smoothness_loss(field) -> Tuple[float, np.ndarray]:
    """Sum of squared frame-to-frame offset changes, with gradients."""
    offsets = field.offsets if isinstance(field, DisplacementField) else np.asarray(field, dtype=np.float64)
    if offsets.shape[0] < 2:
        raise ValueError("smoothness needs at least two frames")
    diff = offsets[1:] - offsets[:-1]
    value = float(np.sum(diff * diff))
    grads = np.zeros_like(offsets)
    grads[1:] += 2.0 * diff
    grads[:-1] -= 2.0 * diff
    return value, grads


def motion_amplitude(iteration: int, total: int, beta: float = 5.0) -> float:
    """Displacement scale alpha = 1 - exp(-beta * iteration / total).

    Zero at the start so training departs gently from the static sketch;
    ``iteration == total`` is allowed to evaluate the fully ramped scale.
    """
    if total < 1:
        raise ConfigError("total must be >= 1")
    if not 0 <= iteration <= total:
        raise ConfigError(f"iteration {iteration} outside [0, {total}]")
    return 1.0 - float(np.exp(-beta * iteration / total))


# ---------------------------------------------------------------------------
# The motion network
# ---------------------------------------------------------------------------

def frame_encoding(k: int, total_frames: int, freqs: int = FRAME_FREQS) -> np.ndarray:
    """Sinusoidal features of the frame phase k/K (2 per frequency)."""
    u = k / total_frames
    out = np.empty(2 * freqs)
    for m in range(freqs):
        arg = (2.0**m) * np.pi * u
        out[2 * m] = np.sin(arg)
        out[2 * m + 1] = np.cos(arg)
    return out


class MotionModel:
    """Two-hidden-layer tanh network shared across frames and planes.

    Input rows are [base flat view | frame encoding | plane embedding];
    the embedding columns are parameters and get appended inside
    ``forward``.  The final layer starts at zero so the initial field is
    exactly zero everywhere.
    """

    def __init__(self, n_curves: int, seed: int = 0, hidden: int = HIDDEN_WIDTH):
        self.n_curves = n_curves
        self.out_dim = 2 * n_curves * 4
        self.in_dim = self.out_dim + 2 * FRAME_FREQS + EMBED_DIM
        rng = np.random.default_rng(np.random.SeedSequence((seed, 7001)))

        def layer(fan_in, fan_out):
            return rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(fan_in, fan_out))
        self.w1 = layer(self.in_dim, hidden)
        self.b1 = np.zeros(hidden)
        self.w2 = layer(hidden, hidden)
        self.b2 = np.zeros(hidden)
        self.w3 = np.zeros((hidden, self.out_dim))
        self.b3 = np.zeros(self.out_dim)
        self.embed = 0.1 * rng.standard_normal((len(ORTHO_PLANES), EMBED_DIM))

    def parameters(self) -> List[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3, self.embed]

    def forward(self, static_inputs: np.ndarray, plane_ids: np.ndarray):
        """Rows -> displacement vectors.  Returns (outputs, cache)."""
        x = np.concatenate([static_inputs, self.embed[plane_ids]], axis=1)
        a1 = np.tanh(x @ self.w1 + self.b1)
        a2 = np.tanh(a1 @ self.w2 + self.b2)
        out = a2 @ self.w3 + self.b3
        return out, (x, a1, a2, plane_ids)

    def backward(self, cache, grad_out: np.ndarray) -> List[np.ndarray]:
        """Gradients in ``parameters()`` order for a batch cograd."""
        x, a1, a2, plane_ids = cache
        gw3 = a2.T @ grad_out
        gb3 = grad_out.sum(axis=0)
        g2 = (grad_out @ self.w3.T) * (1.0 - a2**2)
        gw2 = a1.T @ g2
        gb2 = g2.sum(axis=0)
        g1 = (g2 @ self.w2.T) * (1.0 - a1**2)
        gw1 = x.T @ g1
        gb1 = g1.sum(axis=0)
        gx = g1 @ self.w1.T
        gembed = np.zeros_like(self.embed)
        np.add.at(gembed, plane_ids, gx[:, -EMBED_DIM:])
        return [gw1, gb1, gw2, gb2, gw3, gb3, gembed]

    def save(self, path) -> None:
        np.savez(path, n_curves=self.n_curves, w1=self.w1, b1=self.b1,
                 w2=self.w2, b2=self.b2, w3=self.w3, b3=self.b3, embed=self.embed)

    @classmethod
    def load(cls, path) -> "MotionModel":
        data = np.load(path)
        model = cls(int(data["n_curves"]))
        for name in ("w1", "b1", "w2", "b2", "w3", "b3", "embed"):
            setattr(model, name, np.asarray(data[name], dtype=np.float64))
        return model


def build_static_inputs(base_points: np.ndarray, n_frames: int) -> Tuple[np.ndarray, np.ndarray]:
    """Constant network input rows for one animation.

    Row layout: frames 0..K-1 for the frontal plane, then 0..K-1 for the
    sagittal plane.  Returns (rows, plane_ids); the model appends its
    embedding columns itself.
    """
    rows = []
    plane_ids = []
    for pid, plane in enumerate(ORTHO_PLANES):
        base_flat = flatten_view(base_points, plane)
        for k in range(n_frames):
            rows.append(np.concatenate([base_flat, frame_encoding(k, n_frames)]))
            plane_ids.append(pid)
    return np.asarray(rows), np.asarray(plane_ids)


def displacement_field(model: MotionModel, base_points: np.ndarray, n_frames: int,
                       alpha: float) -> DisplacementField:
    """Evaluate the model into a frame-0-pinned displacement field."""
    static_inputs, plane_ids = build_static_inputs(base_points, n_frames)
    out, _ = model.forward(static_inputs, plane_ids)
    front = alpha * out[:n_frames]
    side = alpha * out[n_frames:]
    front[0] = 0.0
    side[0] = 0.0
    return reconstruct_3d(front, side)


# ---------------------------------------------------------------------------
# Optimization
# ---------------------------------------------------------------------------

@dataclass
class Stage2Config:
    iters: int = 1000
    lr: float = 1e-4
    frames: int = 16
    lambda_smooth: float = 0.1
    beta: float = 5.0
    cfg_scale: float = 30.0
    image_size: int = 256
    sigma: float = 2.0
    samples: int = 32
    extent: float = 1.0
    motion_prompt: Optional[str] = None
    seed: int = 0
    t_min: float = 0.02
    t_max_start: float = 0.8
    t_max_end: float = 0.6
    checkpoint_dir: Optional[str] = None
    checkpoint_every: int = 500

    def validate(self) -> None:
        if self.iters < 1:
            raise ConfigError("iters must be >= 1")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.frames < 2:
            raise ConfigError("frames must be >= 2")
        if self.lambda_smooth < 0:
            raise ConfigError("lambda_smooth must be >= 0")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if not self.extent > 0:
            raise ConfigError("extent must be positive")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")


def write_checkpoint(directory, model: MotionModel, adam: AdamState) -> None:
    os.makedirs(directory, exist_ok=True)
    model.save(os.path.join(directory, CHECKPOINT_MODEL))
    save_adam_state(adam, os.path.join(directory, CHECKPOINT_ADAM))


def load_checkpoint(directory) -> Tuple[MotionModel, AdamState]:
    model = MotionModel.load(os.path.join(directory, CHECKPOINT_MODEL))
    adam = load_adam_state(os.path.join(directory, CHECKPOINT_ADAM))
    return model, adam


def optimize_motion(base: Sketch3D, model: MotionModel, provider, cfg: Stage2Config,
                    resume: Optional[AdamState] = None,
                    start_iter: int = 0) -> Tuple[DisplacementField, List[dict]]:
    """Train the motion network; returns the final field and a loss trace.

    The base sketch is read-only throughout.  Each iteration runs one
    video-guidance pass per plane (independently seeded, summed in fixed
    plane order) plus the smoothness penalty, then one Adam step on the
    network weights.  The returned field is evaluated at full amplitude.
    """
    cfg.validate()
    k = cfg.frames
    base_points = base.control_points.copy()
    base_points.flags.writeable = False
    static_inputs, plane_ids = build_static_inputs(base_points, k)

    params = model.parameters()
    adam = resume if resume is not None else AdamState.for_parameters(params)
    sched = TimestepSchedule(total_iters=cfg.iters, t_min=cfg.t_min,
                             t_max_start=cfg.t_max_start, t_max_end=cfg.t_max_end)
    trace: List[dict] = []

    for it in range(start_iter, cfg.iters):
        alpha = motion_amplitude(it, cfg.iters, cfg.beta)
        it_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, it)))
        t = sample_timestep(sched, it, it_rng)

        out, cache = model.forward(static_inputs, plane_ids)
        front = alpha * out[:k]
        side = alpha * out[k:]
        front[0] = 0.0
        side[0] = 0.0
        field = reconstruct_3d(front, side)
        frames_pts = field.apply(base_points)

        grad_offsets = np.zeros_like(field.offsets)
        row = {"iter": it, "t": t, "alpha": alpha, "sds": {}}
        try:
            for pid, plane in enumerate(ORTHO_PLANES):
                images = []
                tapes = []
                for frame_pts in frames_pts:
                    image, tape = rasterizer.render_ortho(
                        frame_pts, plane, cfg.image_size, sigma=cfg.sigma,
                        samples=cfg.samples, extent=cfg.extent)
                    images.append(image.intensity)
                    tapes.append(tape)
                req_seed = int(np.random.default_rng(
                    np.random.SeedSequence((cfg.seed, it, pid))).integers(2**63))
                prompt = PromptContext(base_prompt=base.prompt,
                                       view_tag=PLANE_TAGS[plane],
                                       motion_prompt=cfg.motion_prompt,
                                       cfg_scale=cfg.cfg_scale)
                request = GuidanceRequest(frames=np.stack(images), prompt=prompt,
                                          timestep=t, seed=req_seed)
                response = video_guidance(provider, request)
                for fk in range(k):
                    grad_offsets[fk] += rasterizer.backward(tapes[fk], response.grads[fk])
                row["sds"][PLANE_TAGS[plane]] = float(np.mean(np.abs(response.grads)))
        except (TransportError, ProtocolError):
            if cfg.checkpoint_dir:
                write_checkpoint(cfg.checkpoint_dir, model, adam)
            raise

        smooth, sgrad = smoothness_loss(field)
        grad_offsets += cfg.lambda_smooth * sgrad
        row["smooth"] = smooth

        grad_offsets[0] = 0.0   # frame 0 is pinned; no gradient flows to it
        g_front, g_side = reconstruct_grads(grad_offsets)
        grad_out = np.concatenate([g_front, g_side], axis=0) * alpha
        grad_out[0] = 0.0
        grad_out[k] = 0.0
        param_grads = model.backward(cache, grad_out)
        if not all(np.all(np.isfinite(g)) for g in param_grads):
            raise ArithmeticError(f"non-finite gradient at iteration {it}")
        adam_update(adam, params, param_grads, cfg.lr)
        trace.append(row)

        if cfg.checkpoint_dir and (it + 1) % cfg.checkpoint_every == 0:
            write_checkpoint(cfg.checkpoint_dir, model, adam)

    final_alpha = motion_amplitude(cfg.iters, cfg.iters, cfg.beta)
    final = displacement_field(model, base_points, k, final_alpha)
    if cfg.checkpoint_dir:
        write_checkpoint(cfg.checkpoint_dir, model, adam)
    return final, trace


# ---------------------------------------------------------------------------
# Animation file format
# ---------------------------------------------------------------------------

ANIMATION_FORMAT_VERSION = 1


def animation_to_dict(base: Sketch3D, field: DisplacementField) -> dict:
    return {
        "version": ANIMATION_FORMAT_VERSION,
        "base": sketch_to_dict(base),
        "K": field.n_frames,
        "displacements": field.offsets.tolist(),
    }


def animation_from_dict(data: dict) -> Tuple[Sketch3D, DisplacementField]:
    if data.get("version") != ANIMATION_FORMAT_VERSION:
        raise ValueError(f"unsupported animation format version {data.get('version')!r}")
    base = sketch_from_dict(data["base"])
    offsets = np.asarray(data["displacements"], dtype=np.float64)
    if offsets.shape[0] != data.get("K"):
        raise ValueError("frame count does not match K")
    return base, DisplacementField(offsets)


def save_animation(base: Sketch3D, field: DisplacementField, path) -> None:
    with open(path, "w") as fh:
        json.dump(animation_to_dict(base, field), fh)


def load_animation(path) -> Tuple[Sketch3D, DisplacementField]:
    with open(path) as fh:
        return animation_from_dict(json.load(fh))

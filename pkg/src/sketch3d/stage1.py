"""Stage one: optimize static 3D curve geometry under multi-view guidance.

Each iteration renders the sketch from several fixed viewpoints, asks the
guidance provider for a pixel-space gradient per view, pulls those back
through the rasterizer and projection, adds a geometric regularizer that
discourages kinked curves, and takes one Adam step on the control points.

View fan-out is deterministic and order-independent: every request is
seeded from (seed, iteration, view slot) and per-view gradients are
summed in a canonical view order, so permuting the configured view list
changes nothing, bit for bit.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import rasterizer
from .curves import (Sketch3D, as_flat_parameters, from_flat_parameters,
                     sketch_from_dict, sketch_to_dict)
from .errors import ConfigError, ProtocolError, TransportError
from .guidance import (GuidanceRequest, PromptContext, TimestepSchedule,
                       image_guidance, sample_timestep)
from .optim import AdamState, adam_update, load_adam_state, save_adam_state
from .projection import (CANONICAL_ANGLES, DEFAULT_DISTANCE, DEFAULT_FOV,
                         Viewpoint, view)

DEFAULT_VIEWS = ("front", "back", "left", "right")
TOP_VIEW = "top"

CHECKPOINT_SKETCH = "checkpoint_sketch.json"
CHECKPOINT_ADAM = "checkpoint_adam.bin"

_EPS = 1e-12


@dataclass
class Stage1Config:
    iters: int = 4000
    lr: float = 1.5e-3
    lambda_geom: float = 0.05
    views: Sequence[Union[str, Viewpoint]] = DEFAULT_VIEWS
    top_view_prob: float = 0.1
    sigma: float = 2.0
    samples: int = 32
    image_size: int = 512
    distance: float = DEFAULT_DISTANCE
    fov: float = DEFAULT_FOV
    cfg_scale: float = 7.5
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
        if self.lambda_geom < 0:
            raise ConfigError("lambda_geom must be >= 0")
        if not 0.0 <= self.top_view_prob <= 1.0:
            raise ConfigError("top_view_prob must lie in [0, 1]")
        if len(self.views) == 0:
            raise ConfigError("views must not be empty")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")


def geometric_loss(sketch) -> Tuple[float, np.ndarray, int]:
    """Mean squared turn between consecutive unit segment directions.

    For each curve the three control segments define two joints; each
    joint contributes ||u_next - u_prev||^2 where u are unit directions.
    Returns (value, gradient wrt control points (N,4,3), skipped) where
    skipped counts joint terms dropped because a segment was degenerate
    (shorter than 1e-12, which would make the direction undefined).
    """
    pts = sketch.control_points if isinstance(sketch, Sketch3D) else np.asarray(sketch, dtype=np.float64)
    if pts.ndim != 3 or pts.shape[1:] != (4, 3):
        raise ValueError(f"expected control points (N, 4, 3), got {pts.shape}")
    n = pts.shape[0]
    grads = np.zeros_like(pts)
    if n == 0:
        return 0.0, grads, 0

    seg = np.diff(pts, axis=1)                      # (N, 3, 3)
    norms = np.linalg.norm(seg, axis=-1)            # (N, 3)
    ok = norms > _EPS
    safe = np.where(ok, norms, 1.0)
    unit = seg / safe[..., None]

    total = 0.0
    skipped = 0
    gseg = np.zeros_like(seg)
    for j in (1, 2):                                # joints between segments j-1 and j
        valid = ok[:, j - 1] & ok[:, j]
        skipped += int(n - np.count_nonzero(valid))
        diff = unit[:, j] - unit[:, j - 1]          # (N, 3)
        diff = np.where(valid[:, None], diff, 0.0)
        total += float(np.sum(diff * diff))
        for side, sign in ((j, 1.0), (j - 1, -1.0)):
            u = unit[:, side]
            gu = sign * 2.0 * diff / n
            # d(unit)/d(seg) = (I - u u^T) / |seg|
            proj = gu - u * np.sum(u * gu, axis=-1, keepdims=True)
            gseg[:, side] += np.where(valid[:, None], proj / safe[:, side, None], 0.0)

    value = total / n
    grads[:, 1:] += gseg
    grads[:, :-1] -= gseg
    return value, grads, skipped


def _resolve_views(cfg: Stage1Config) -> List[Tuple[Optional[str], Viewpoint, int]]:
    """Canonically ordered (tag, viewpoint, slot) list from the config.

    Tags feed the view-dependent prompt; custom viewpoints get no tag.
    Sorting by canonical rank then angles makes request seeding and
    gradient summation independent of the order views were listed in.
    """
    resolved = []
    for item in cfg.views:
        if isinstance(item, Viewpoint):
            tag = item.kind if item.kind in CANONICAL_ANGLES else None
            resolved.append((tag, item))
        else:
            resolved.append((item, view(item, distance=cfg.distance, fov=cfg.fov,
                                        image_size=cfg.image_size)))
    canonical = list(CANONICAL_ANGLES)

    def key(entry):
        tag, vp = entry
        rank = canonical.index(tag) if tag in canonical else len(canonical)
        return (rank, vp.azimuth, vp.elevation, vp.distance)

    resolved.sort(key=key)
    return [(tag, vp, slot) for slot, (tag, vp) in enumerate(resolved)]


def write_checkpoint(directory, sketch: Sketch3D, adam: AdamState) -> None:
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, CHECKPOINT_SKETCH), "w") as fh:
        json.dump(sketch_to_dict(sketch), fh)
    save_adam_state(adam, os.path.join(directory, CHECKPOINT_ADAM))


def load_checkpoint(directory) -> Tuple[Sketch3D, AdamState]:
    with open(os.path.join(directory, CHECKPOINT_SKETCH)) as fh:
        sketch = sketch_from_dict(json.load(fh))
    adam = load_adam_state(os.path.join(directory, CHECKPOINT_ADAM))
    return sketch, adam


def optimize_structure(sketch: Sketch3D, provider, cfg: Stage1Config,
                       resume: Optional[AdamState] = None,
                       start_iter: int = 0) -> Tuple[Sketch3D, List[dict]]:
    """Run the structure stage; returns the final sketch and a loss trace.

    The trace holds one dict per iteration: iteration index, sampled
    timestep, a per-view gradient magnitude proxy, the geometric loss,
    and the degenerate-joint count.  On provider failure a checkpoint is
    written (if checkpoint_dir is set) before the error propagates.
    """
    cfg.validate()
    views = _resolve_views(cfg)
    top_slot = len(views)
    top_vp = view(TOP_VIEW, distance=cfg.distance, fov=cfg.fov, image_size=cfg.image_size)

    params = as_flat_parameters(sketch)
    adam = resume if resume is not None else AdamState.for_parameters([params])
    sched = TimestepSchedule(total_iters=cfg.iters, t_min=cfg.t_min,
                             t_max_start=cfg.t_max_start, t_max_end=cfg.t_max_end)
    meta = dict(prompt=sketch.prompt, seed=sketch.seed)
    trace: List[dict] = []

    for it in range(start_iter, cfg.iters):
        current = from_flat_parameters(params, **meta)
        it_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, it)))
        t = sample_timestep(sched, it, it_rng)
        use_top = it_rng.random() < cfg.top_view_prob

        active = list(views)
        if use_top:
            active.append((TOP_VIEW, top_vp, top_slot))

        total = np.zeros_like(params)
        row = {"iter": it, "t": t, "top": bool(use_top), "sds": {}}
        try:
            for tag, vp, slot in active:
                image, tape = rasterizer.render_view(current, vp, sigma=cfg.sigma,
                                                     samples=cfg.samples)
                req_seed = int(np.random.default_rng(
                    np.random.SeedSequence((cfg.seed, it, slot))).integers(2**63))
                prompt = PromptContext(base_prompt=current.prompt, view_tag=tag,
                                       cfg_scale=cfg.cfg_scale)
                request = GuidanceRequest(frames=image.intensity[None], prompt=prompt,
                                          timestep=t, seed=req_seed)
                response = image_guidance(provider, request)
                g3 = rasterizer.backward(tape, response.grads[0])
                total += g3.ravel()
                label = tag if tag is not None else f"az{vp.azimuth:g}el{vp.elevation:g}"
                row["sds"][label] = float(np.mean(np.abs(response.grads)))
        except (TransportError, ProtocolError):
            if cfg.checkpoint_dir:
                write_checkpoint(cfg.checkpoint_dir, current, adam)
            raise

        geom, ggrad, skipped = geometric_loss(current)
        total += cfg.lambda_geom * ggrad.ravel()
        row["geom"] = geom
        row["degenerate"] = skipped
        if not np.all(np.isfinite(total)):
            raise ArithmeticError(f"non-finite gradient at iteration {it}")

        adam_update(adam, [params], [total], cfg.lr)
        trace.append(row)

        if cfg.checkpoint_dir and (it + 1) % cfg.checkpoint_every == 0:
            write_checkpoint(cfg.checkpoint_dir,
                             from_flat_parameters(params, **meta), adam)

    final = from_flat_parameters(params, **meta)
    if cfg.checkpoint_dir:
        write_checkpoint(cfg.checkpoint_dir, final, adam)
    return final, trace

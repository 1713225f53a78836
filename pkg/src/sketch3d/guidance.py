"""Provider-agnostic guidance contract and timestep curriculum.

The optimizers never talk to a diffusion model directly.  They render
frames, wrap them in a :class:`GuidanceRequest`, and receive pixel-space
gradients of a score-distillation objective back from whichever provider
is plugged in:

* :class:`MockProvider` - seeded noise, for wiring and determinism tests.
* :class:`TargetImageProvider` / :class:`TargetVideoProvider` - gradients
  of a plain L2 match against reference renders; this turns the engine
  into a self-supervised recovery setup with a known ground truth.
* :class:`RemoteProvider` - HTTP client for a sidecar service that hosts
  real image/video diffusion models (see the wire schema below).

All local providers are deterministic given (request, seed); the remote
client retries idempotently on transport failures.
"""

from __future__ import annotations

import base64
import time
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from .errors import ConfigError, ProtocolError, TransportError

VIEW_TAGS = ("front", "back", "left", "right", "top")

DEFAULT_IMAGE_CFG = 7.5
DEFAULT_VIDEO_CFG = 30.0


@dataclass(frozen=True)
class PromptContext:
    """Prompt plus view/motion context for one guidance request."""

    base_prompt: str
    view_tag: Optional[str] = None
    motion_prompt: Optional[str] = None
    cfg_scale: float = DEFAULT_IMAGE_CFG

    def __post_init__(self):
        if self.view_tag is not None and self.view_tag not in VIEW_TAGS:
            raise ConfigError(f"view_tag must be one of {VIEW_TAGS}, got {self.view_tag!r}")
        if not self.cfg_scale > 0:
            raise ConfigError("cfg_scale must be positive")

    def text(self) -> str:
        """View-dependent prompt: 'A {view} view of {base_prompt}'."""
        if self.view_tag is None:
            return self.base_prompt
        return f"A {self.view_tag} view of {self.base_prompt}"

    def motion_text(self) -> str:
        return self.motion_prompt if self.motion_prompt else self.base_prompt


@dataclass(frozen=True)
class TimestepSchedule:
    """Uniform timestep sampling with a linearly decaying upper bound."""

    total_iters: int
    t_min: float = 0.02
    t_max_start: float = 0.8
    t_max_end: float = 0.6

    def __post_init__(self):
        if self.total_iters < 1:
            raise ConfigError("total_iters must be >= 1")
        if not (0.0 < self.t_min < self.t_max_end <= self.t_max_start < 1.0):
            raise ConfigError("need 0 < t_min < t_max_end <= t_max_start < 1")

    def t_max(self, iteration: int) -> float:
        if not 0 <= iteration < self.total_iters:
            raise ConfigError(f"iteration {iteration} outside [0, {self.total_iters})")
        if self.total_iters == 1:
            return self.t_max_start
        frac = iteration / (self.total_iters - 1)
        return self.t_max_start + frac * (self.t_max_end - self.t_max_start)


def sample_timestep(sched: TimestepSchedule, iteration: int, rng) -> float:
    """Draw t ~ Uniform[t_min, t_max(iteration)]."""
    return float(rng.uniform(sched.t_min, sched.t_max(iteration)))


def sds_weight(t: float, kind: str = "constant") -> float:
    """Time-dependent weighting w(t); the default is the constant 1."""
    if kind == "constant":
        return 1.0
    if kind == "one_minus_t":
        return 1.0 - t
    raise ConfigError(f"unknown weight kind {kind!r}")


@dataclass
class GuidanceRequest:
    """One or K rendered frames plus prompt context and noise level."""

    frames: np.ndarray  # (K, H, W)
    prompt: PromptContext
    timestep: float
    seed: int = 0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.ndim != 3 or frames.shape[0] < 1:
            raise ValueError(f"frames must stack to (K, H, W), got {frames.shape}")
        if not 0.0 < self.timestep < 1.0:
            raise ValueError("timestep must lie in (0, 1)")
        self.frames = frames

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


@dataclass
class GuidanceResponse:
    grads: np.ndarray  # (K, H, W)
    weight: float = 1.0

    def __post_init__(self):
        self.grads = np.asarray(self.grads, dtype=np.float64)
        if self.grads.ndim == 2:
            self.grads = self.grads[None]


def image_guidance(provider, request: GuidanceRequest) -> GuidanceResponse:
    """Single-frame guidance; validates the provider's response shape."""
    if request.n_frames != 1:
        raise ValueError("image guidance takes exactly one frame")
    return _checked(provider.image_guidance(request), request)


def video_guidance(provider, request: GuidanceRequest) -> GuidanceResponse:
    """Frame-sequence guidance (K >= 2 frames, one view per request)."""
    if request.n_frames < 2:
        raise ValueError("video guidance needs at least two frames")
    return _checked(provider.video_guidance(request), request)


def _checked(response: GuidanceResponse, request: GuidanceRequest) -> GuidanceResponse:
    if response.grads.shape != request.frames.shape:
        raise ProtocolError(
            f"gradient shape {response.grads.shape} does not match frames {request.frames.shape}")
    if not np.all(np.isfinite(response.grads)):
        raise ProtocolError("provider returned non-finite gradients")
    return response


# ---------------------------------------------------------------------------
# Local providers
# ---------------------------------------------------------------------------

class MockProvider:
    """Seeded pseudo-random gradients; scale=0 gives exact zero responses."""

    def __init__(self, scale: float = 1.0, weight_kind: str = "constant"):
        self.scale = scale
        self.weight_kind = weight_kind

    def _grads(self, request):
        w = sds_weight(request.timestep, self.weight_kind)
        if self.scale == 0.0:
            return GuidanceResponse(np.zeros_like(request.frames), w)
        rng = np.random.default_rng(request.seed)
        noise = rng.standard_normal(request.frames.shape)
        return GuidanceResponse(w * self.scale * noise, w)

    image_guidance = _grads
    video_guidance = _grads


TargetMap = Union[np.ndarray, Mapping[str, np.ndarray]]


def _lookup(targets: TargetMap, tag: Optional[str]):
    if isinstance(targets, Mapping):
        if tag not in targets:
            raise ValueError(f"no target registered for view tag {tag!r}")
        return np.asarray(targets[tag], dtype=np.float64)
    return np.asarray(targets, dtype=np.float64)


class TargetImageProvider:
    """Gradient of 1/2 ||frame - target||^2, scaled by w(t).

    ``targets`` is a single (H, W) array or a mapping from view tag to
    per-view targets.
    """

    def __init__(self, targets: TargetMap, weight_kind: str = "constant"):
        self.targets = targets
        self.weight_kind = weight_kind

    def image_guidance(self, request: GuidanceRequest) -> GuidanceResponse:
        target = _lookup(self.targets, request.prompt.view_tag)
        w = sds_weight(request.timestep, self.weight_kind)
        return GuidanceResponse(w * (request.frames[0] - target), w)


class TargetVideoProvider:
    """Frame-wise L2 gradients against a reference frame sequence.

    ``targets`` is a (K, H, W) array or a mapping from view tag to one.
    """

    def __init__(self, targets: TargetMap, weight_kind: str = "constant"):
        self.targets = targets
        self.weight_kind = weight_kind

    def video_guidance(self, request: GuidanceRequest) -> GuidanceResponse:
        target = _lookup(self.targets, request.prompt.view_tag)
        if target.shape != request.frames.shape:
            raise ValueError(
                f"target stack {target.shape} does not match frames {request.frames.shape}")
        w = sds_weight(request.timestep, self.weight_kind)
        return GuidanceResponse(w * (request.frames - target), w)


# ---------------------------------------------------------------------------
# Remote provider (HTTP wire protocol)
# ---------------------------------------------------------------------------

def encode_image(arr) -> dict:
    """float32 little-endian row-major payload for the wire schema."""
    arr = np.ascontiguousarray(np.asarray(arr, dtype="<f4"))
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {arr.shape}")
    return {
        "h": int(arr.shape[0]),
        "w": int(arr.shape[1]),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_image(obj) -> np.ndarray:
    try:
        h, w = int(obj["h"]), int(obj["w"])
        raw = base64.b64decode(obj["data"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed image payload: {exc}") from exc
    if len(raw) != h * w * 4:
        raise ProtocolError(f"image payload has {len(raw)} bytes, expected {h * w * 4}")
    return np.frombuffer(raw, dtype="<f4").reshape(h, w).astype(np.float64)


class RemoteProvider:
    """Client for the guidance sidecar's HTTP endpoints.

    Transport failures are retried with exponential backoff (requests are
    idempotent per seed); anything structurally wrong in a response is a
    ProtocolError.
    """

    def __init__(self, base_url: str, timeout: float = 60.0, retries: int = 3,
                 backoff: float = 0.5):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def _post(self, path: str, payload: dict) -> dict:
        import requests

        last_error = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(self.base_url + path, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code >= 500:
                last_error = RuntimeError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code != 200:
                raise ProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"non-JSON response: {exc}") from exc
        raise TransportError(f"guidance service unreachable at {self.base_url}: {last_error}")

    def health(self) -> dict:
        import requests

        try:
            resp = requests.get(self.base_url + "/v1/health", timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"guidance service unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"service unhealthy: HTTP {resp.status_code}")
        return resp.json()

    def image_guidance(self, request: GuidanceRequest) -> GuidanceResponse:
        body = {
            "prompt": request.prompt.text(),
            "cfg": float(request.prompt.cfg_scale),
            "t": float(request.timestep),
            "seed": int(request.seed),
            "image": encode_image(request.frames[0]),
        }
        data = self._post("/v1/image_sds", body)
        if "grad" not in data:
            raise ProtocolError("image_sds response missing 'grad'")
        grad = decode_image(data["grad"])
        return GuidanceResponse(grad[None], float(data.get("weight", 1.0)))

    def video_guidance(self, request: GuidanceRequest) -> GuidanceResponse:
        body = {
            "prompt": request.prompt.motion_text(),
            "cfg": float(request.prompt.cfg_scale),
            "t": float(request.timestep),
            "seed": int(request.seed),
            "frames": [encode_image(f) for f in request.frames],
        }
        data = self._post("/v1/video_sds", body)
        if "grads" not in data or len(data["grads"]) != request.n_frames:
            raise ProtocolError("video_sds response frame count mismatch")
        grads = np.stack([decode_image(g) for g in data["grads"]])
        return GuidanceResponse(grads, float(data.get("weight", 1.0)))

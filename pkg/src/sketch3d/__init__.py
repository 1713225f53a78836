"""Animated 3D vector sketches from differentiable curve rendering.

The pipeline has two stages.  Stage one optimizes a set of 3D cubic
Bezier curves so their multi-view renders satisfy a pluggable guidance
signal plus a geometric smoothness prior.  Stage two freezes that
geometry and trains a small network that displaces the control points
per frame, supervised by video guidance on two orthogonal planar
projections.  Everything differentiable is hand-written numpy; guidance
can come from local targets, seeded noise, or a remote HTTP service.
"""

from .curves import (DEFAULT_CURVES, DEFAULT_INIT_RADIUS, Sketch3D, bernstein3,
                     evaluate, flat_index, init_sketch, load_sketch, save_sketch)
from .errors import (ConfigError, ProjectionError, ProtocolError, RenderError,
                     TransportError)
from .guidance import (GuidanceRequest, GuidanceResponse, MockProvider,
                       PromptContext, RemoteProvider, TargetImageProvider,
                       TargetVideoProvider, TimestepSchedule, image_guidance,
                       sample_timestep, sds_weight, video_guidance)
from .motion import (DisplacementField, MotionModel, Stage2Config,
                     displacement_field, flatten_view, load_animation,
                     motion_amplitude, optimize_motion, reconstruct_3d,
                     save_animation, smoothness_loss)
from .optim import AdamState, adam_update
from .projection import Viewpoint, project_points, project_sketch, view
from .rasterizer import (RasterImage, RasterTape, backward, rasterize,
                         render_depth_color, render_ortho, render_view,
                         save_png)
from .stage1 import Stage1Config, geometric_loss, optimize_structure

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CURVES", "DEFAULT_INIT_RADIUS", "Sketch3D", "bernstein3",
    "evaluate", "flat_index", "init_sketch", "load_sketch", "save_sketch",
    "ConfigError", "ProjectionError", "ProtocolError", "RenderError",
    "TransportError",
    "GuidanceRequest", "GuidanceResponse", "MockProvider", "PromptContext",
    "RemoteProvider", "TargetImageProvider", "TargetVideoProvider",
    "TimestepSchedule", "image_guidance", "sample_timestep", "sds_weight",
    "video_guidance",
    "DisplacementField", "MotionModel", "Stage2Config", "displacement_field",
    "flatten_view", "load_animation", "motion_amplitude", "optimize_motion",
    "reconstruct_3d", "save_animation", "smoothness_loss",
    "AdamState", "adam_update",
    "Viewpoint", "project_points", "project_sketch", "view",
    "RasterImage", "RasterTape", "backward", "rasterize",
    "render_depth_color", "render_ortho", "render_view", "save_png",
    "Stage1Config", "geometric_loss", "optimize_structure",
    "__version__",
]

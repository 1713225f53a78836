"""HTTP sidecar serving score-distillation gradients.

The service accepts rendered sketch images, perturbs their latent
encoding with seeded noise at the requested level, runs a
classifier-free-guided noise prediction, and returns the weighted
residual pulled back to pixel space.  The shipped backend is a
deterministic synthetic score model, so the service runs anywhere and
answers byte-identically for a fixed seed; swapping in a real diffusion
model is a backend change, not a protocol change.
"""

from guidance_service.app import create_app
from guidance_service.backend import SyntheticScoreModel
from guidance_service.config import ServiceConfig

__all__ = ["ServiceConfig", "SyntheticScoreModel", "create_app"]
__version__ = "0.1.0"

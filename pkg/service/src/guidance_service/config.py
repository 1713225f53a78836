from dataclasses import dataclass


@dataclass(frozen=True)
class ServiceConfig:
    """Deployment settings; model ids name the backends loaded at startup."""

    image_model: str = "synthetic-image-score-v1"
    video_model: str = "synthetic-video-score-v1"
    device: str = "cpu"
    port: int = 8711
    model_seed: int = 0
    features: int = 48

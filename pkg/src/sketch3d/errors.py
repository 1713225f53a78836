"""Exception types shared across the engine."""


class ConfigError(ValueError):
    """A configuration value is out of its legal range or inconsistent."""


class ProjectionError(ValueError):
    """A point cannot be projected (at or behind the camera plane)."""


class RenderError(ValueError):
    """Rasterization input is unusable (e.g. non-finite control points)."""


class TransportError(RuntimeError):
    """A remote guidance provider could not be reached."""


class ProtocolError(ValueError):
    """A guidance response violates the wire contract (shape/schema)."""

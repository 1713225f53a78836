"""Wire codec: images travel as base64 float32 little-endian row-major."""

import base64
import binascii

import numpy as np


class PayloadError(ValueError):
    """Image payload that cannot be decoded."""


def encode_image(arr: np.ndarray) -> dict:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise PayloadError(f"expected a 2D image, got shape {arr.shape}")
    data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return {"h": int(arr.shape[0]), "w": int(arr.shape[1]),
            "data": base64.b64encode(data).decode("ascii")}


def decode_image(obj: dict) -> np.ndarray:
    try:
        h = int(obj["h"])
        w = int(obj["w"])
        raw = base64.b64decode(obj["data"], validate=True)
    except (KeyError, TypeError, ValueError, binascii.Error) as exc:
        raise PayloadError(f"malformed image payload: {exc}") from exc
    if h < 1 or w < 1:
        raise PayloadError(f"bad image dimensions {h}x{w}")
    if len(raw) != h * w * 4:
        raise PayloadError(f"image payload has {len(raw)} bytes, expected {h * w * 4}")
    return np.frombuffer(raw, dtype="<f4").reshape(h, w).astype(np.float64)

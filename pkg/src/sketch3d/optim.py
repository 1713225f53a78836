"""Minimal Adam over lists of float64 arrays, with checkpoint support.

Moments serialize to a small binary format (little-endian, float64) so an
interrupted optimization can resume with bit-identical state.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

_MAGIC = b"ADM1"


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_parameters(cls, params: Sequence[np.ndarray], **kwargs) -> "AdamState":
        return cls(
            m=[np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params],
            v=[np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params],
            **kwargs,
        )


def adam_update(state: AdamState, params: Sequence[np.ndarray],
                grads: Sequence[np.ndarray], lr: float) -> None:
    """One in-place Adam step with bias correction."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter/gradient count does not match optimizer state")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def save_adam_state(state: AdamState, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", state.step))
        fh.write(struct.pack("<3d", state.beta1, state.beta2, state.eps))
        fh.write(struct.pack("<I", len(state.m)))
        for arr in state.m:
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        for arr in state.m:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        for arr in state.v:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_adam_state(path) -> AdamState:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not an Adam state file")
        (step,) = struct.unpack("<Q", fh.read(8))
        beta1, beta2, eps = struct.unpack("<3d", fh.read(24))
        (count,) = struct.unpack("<I", fh.read(4))
        shapes = []
        for _ in range(count):
            (ndim,) = struct.unpack("<I", fh.read(4))
            shapes.append(struct.unpack(f"<{ndim}I", fh.read(4 * ndim)))

        def read_arrays():
            out = []
            for shape in shapes:
                n = int(np.prod(shape, dtype=np.int64)) if shape else 1
                buf = fh.read(8 * n)
                if len(buf) != 8 * n:
                    raise ValueError(f"truncated Adam state file {path}")
                out.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
            return out

        m = read_arrays()
        v = read_arrays()
    return AdamState(m=m, v=v, step=step, beta1=beta1, beta2=beta2, eps=eps)

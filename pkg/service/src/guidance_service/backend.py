"""Deterministic synthetic score model.

Follows the standard score-distillation recipe: encode the image to a
latent (2x2 average pooling here), add seeded noise at level t, predict
that noise with and without the prompt, mix the two predictions with
the classifier-free guidance scale, and hand back the weighted residual
pulled through the encoder's adjoint.  The "network" is a bank of
separable random features fixed by the model seed, so identical
requests produce identical gradients on any machine, with no weights to
download.  Real diffusion backends can replace this class as long as
they keep the same four-method surface.
"""

import hashlib
import threading
from typing import Dict, Tuple

import numpy as np

_T_EPS = 1e-4


def alpha_bar(t: float) -> float:
    """Cosine noise schedule; fraction of signal kept at level t."""
    t = min(max(float(t), _T_EPS), 1.0 - _T_EPS)
    return float(np.cos(0.5 * np.pi * t) ** 2)


class SyntheticScoreModel:
    def __init__(self, model_id: str, seed: int = 0, features: int = 48):
        self.model_id = model_id
        self.seed = int(seed)
        self.features = int(features)
        self._shape_cache: Dict[Tuple[int, int], dict] = {}
        self._lock = threading.Lock()

    # ------------------------------------------------------------- encoder

    @staticmethod
    def _pool_counts(h: int, w: int):
        h2, w2 = (h + 1) // 2, (w + 1) // 2
        rows = np.full(h2, 2.0)
        cols = np.full(w2, 2.0)
        if h % 2:
            rows[-1] = 1.0
        if w % 2:
            cols[-1] = 1.0
        return h2, w2, np.outer(rows, cols)

    def encode(self, image: np.ndarray) -> np.ndarray:
        h, w = image.shape
        h2, w2, counts = self._pool_counts(h, w)
        padded = np.zeros((2 * h2, 2 * w2))
        padded[:h, :w] = image
        sums = padded.reshape(h2, 2, w2, 2).sum(axis=(1, 3))
        return sums / counts

    def encode_adjoint(self, grad_latent: np.ndarray, h: int, w: int) -> np.ndarray:
        h2, w2, counts = self._pool_counts(h, w)
        spread = grad_latent / counts
        full = np.repeat(np.repeat(spread, 2, axis=0), 2, axis=1)
        return full[:h, :w]

    # ----------------------------------------------------------- predictor

    def _params(self, h2: int, w2: int) -> dict:
        key = (h2, w2)
        if key not in self._shape_cache:
            rng = np.random.default_rng(
                np.random.SeedSequence((self.seed, h2, w2)))
            f = self.features

            def unit_rows(n):
                m = rng.standard_normal((f, n))
                return m / np.linalg.norm(m, axis=1, keepdims=True)

            self._shape_cache[key] = {
                "u": unit_rows(h2), "v": unit_rows(w2),
                "a": unit_rows(h2), "b": unit_rows(w2),
                "phase": rng.uniform(0.0, 2.0 * np.pi, size=f),
                "t_freq": rng.uniform(0.5, 4.0, size=f),
                "k_freq": rng.uniform(0.5, 4.0, size=f),
            }
        return self._shape_cache[key]

    def _prompt_embedding(self, prompt: str, f: int) -> np.ndarray:
        digest = hashlib.sha256(prompt.encode("utf-8")).digest()
        words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 32, 4)]
        rng = np.random.default_rng(np.random.SeedSequence(words))
        return rng.standard_normal(f)

    def predict_noise(self, z_t: np.ndarray, prompt: str, t: float,
                      frame_phase: float = 0.0) -> np.ndarray:
        h2, w2 = z_t.shape
        p = self._params(h2, w2)
        scores = np.einsum("fh,hw,fw->f", p["u"], z_t, p["v"])
        act = np.tanh(scores + self._prompt_embedding(prompt, self.features)
                      + p["t_freq"] * t + p["k_freq"] * frame_phase + p["phase"])
        pred = np.einsum("f,fh,fw->hw", act, p["a"], p["b"])
        return pred * np.sqrt(h2 * w2 / self.features)

    # ------------------------------------------------------------ gradients

    def _residual(self, image: np.ndarray, prompt: str, cfg: float, t: float,
                  noise_rng, frame_phase: float) -> np.ndarray:
        z = self.encode(image)
        eps = noise_rng.standard_normal(z.shape)
        ab = alpha_bar(t)
        z_t = np.sqrt(ab) * z + np.sqrt(1.0 - ab) * eps
        cond = self.predict_noise(z_t, prompt, t, frame_phase)
        uncond = self.predict_noise(z_t, "", t, frame_phase)
        mixed = uncond + cfg * (cond - uncond)
        grad_latent = (1.0 - ab) * (mixed - eps)
        return self.encode_adjoint(grad_latent, *image.shape)

    def image_grad(self, image: np.ndarray, prompt: str, cfg: float,
                   t: float, seed: int) -> np.ndarray:
        with self._lock:  # one in-flight generation at a time
            rng = np.random.default_rng(np.random.SeedSequence((seed,)))
            return self._residual(image, prompt, cfg, t, rng, 0.0)

    def video_grads(self, frames, prompt: str, cfg: float, t: float,
                    seed: int) -> np.ndarray:
        with self._lock:
            k_total = len(frames)
            grads = []
            for k, frame in enumerate(frames):
                rng = np.random.default_rng(np.random.SeedSequence((seed, k)))
                grads.append(self._residual(frame, prompt, cfg, t, rng,
                                            k / k_total))
            return np.stack(grads)

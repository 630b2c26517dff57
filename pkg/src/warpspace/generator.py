"""Frozen synthetic generator: latent code -> one oriented Gaussian blob.

Five raw factors are read off the code through a fixed matrix with orthonormal
rows and squashed by ``tanh`` into the render parameters below, so every image
has exactly known ground-truth attributes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

ATTRIBUTE_NAMES = ("cx", "cy", "sigma", "theta", "intensity")
NUM_FACTORS = len(ATTRIBUTE_NAMES)

# (midpoint, half-width) per attribute; tanh in (-1, 1) keeps values inside
_RANGES = np.array([
    [0.5, 0.3],
    [0.5, 0.3],
    [0.125, 0.075],
    [0.0, np.pi / 2],
    [0.65, 0.35],
])


def attribute_half_widths() -> np.ndarray:
    """Half-width of each attribute's output interval, in ATTRIBUTE_NAMES order."""
    return _RANGES[:, 1].copy()


@dataclass(frozen=True)
class AttributeVector:
    cx: float
    cy: float
    sigma: float
    theta: float
    intensity: float

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.sigma, self.theta, self.intensity])


def factor_map(dim: int, seed: int) -> np.ndarray:
    """5 x d matrix from a seeded Gaussian QR.

    Rows are orthonormal when d >= 5. Below that, 5 orthonormal rows cannot
    exist and the columns are orthonormal instead (M^T M = I), so the map is
    still an isometry from the latent space into factor space.
    """
    if dim < 1:
        raise ValueError(f"latent dimension must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    if dim < NUM_FACTORS:
        q, r = np.linalg.qr(rng.normal(size=(NUM_FACTORS, dim)))
        return np.ascontiguousarray(q * np.sign(np.diag(r)))
    q, r = np.linalg.qr(rng.normal(size=(dim, NUM_FACTORS)))
    # sign fix makes the factorisation unique
    q = q * np.sign(np.diag(r))
    return np.ascontiguousarray(q.T)


def _orthonormal(m: np.ndarray) -> bool:
    gram = m @ m.T if m.shape[0] <= m.shape[1] else m.T @ m
    return np.allclose(gram, np.eye(len(gram)), atol=1e-10, rtol=0)


def axis_aligned_map(dim: int) -> np.ndarray:
    """Factor j read straight off latent coordinate j."""
    return np.eye(NUM_FACTORS, dim)


class SyntheticGenerator:
    def __init__(self, dim: int, image_size: int = 16, seed: int = 0,
                 gain: float = 0.5, matrix: np.ndarray | None = None):
        m = factor_map(dim, seed) if matrix is None else np.array(matrix, dtype=np.float64)
        if m.shape != (NUM_FACTORS, dim):
            raise ValueError(f"factor map must be {(NUM_FACTORS, dim)}, got {m.shape}")
        if not _orthonormal(m):
            raise ValueError("factor map rows (or columns, when d < 5) must be orthonormal")
        if image_size < 4:
            raise ValueError("image_size must be at least 4")
        m.setflags(write=False)
        self.dim = dim
        self.image_size = image_size
        self.seed = seed
        self.gain = float(gain)
        self.matrix = m
        centers = (np.arange(image_size) + 0.5) / image_size
        self._xs = centers.reshape(1, 1, 1, -1)
        self._ys = centers.reshape(1, 1, -1, 1)

    @property
    def channels(self) -> int:
        return 1

    def _check(self, z: np.ndarray) -> None:
        if z.shape[-1] != self.dim:
            raise ValueError(f"latent code has length {z.shape[-1]}, generator expects {self.dim}")

    def attribute_array(self, z) -> np.ndarray:
        """Attributes of a code (d,) or a batch (B, d) as a (..., 5) array."""
        z = np.asarray(z, dtype=np.float64)
        self._check(z)
        raw = z @ self.matrix.T
        return _RANGES[:, 0] + _RANGES[:, 1] * np.tanh(self.gain * raw)

    def attributes(self, z) -> AttributeVector:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 1:
            raise ValueError("attributes takes a single code; use attribute_array for batches")
        return AttributeVector(*self.attribute_array(z))

    def generate(self, z) -> Tensor:
        """Render (B, 1, H, W) images for codes (B, d); differentiable in ``z``."""
        zt = z if isinstance(z, Tensor) else Tensor(z)
        self._check(zt.data)
        single = zt.ndim == 1
        if single:
            zt = ad.reshape(zt, (1, -1))
        raw = zt @ self.matrix.T
        attrs = _RANGES[:, 0] + _RANGES[:, 1] * ad.tanh(self.gain * raw)  # (B, 5)
        b = attrs.shape[0]

        def col(j):
            return ad.reshape(attrs[:, j], (b, 1, 1, 1))

        cx, cy, sigma, theta, intensity = (col(j) for j in range(NUM_FACTORS))
        ux = self._xs - cx
        uy = self._ys - cy
        c, s = ad.cos(theta), ad.sin(theta)
        along = c * ux + s * uy
        across = c * uy - s * ux
        q = (ad.square(along) + 4.0 * ad.square(across)) / ad.square(sigma)
        img = intensity * ad.exp(-0.5 * q)
        return ad.reshape(img, (1, self.image_size, self.image_size)) if single else img

    def render(self, z) -> np.ndarray:
        """Plain-array images, no gradient bookkeeping."""
        return self.generate(np.asarray(z, dtype=np.float64)).data

    def describe(self) -> dict:
        return {"dim": self.dim, "image_size": self.image_size, "seed": self.seed,
                "gain": self.gain}

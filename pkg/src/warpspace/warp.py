"""RBF warping functions, their gradient fields, and paths along them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEGENERATE_THRESHOLD = 1e-12


class DegenerateGradient(ArithmeticError):
    """The warping gradient vanishes (numerically) at a latent code."""

    def __init__(self, z, norm: float, step: int | None = None, partial=None):
        self.z = np.array(z, dtype=np.float64)
        self.norm = float(norm)
        self.step = step
        self.partial = partial
        where = "" if step is None else f" at step {step}"
        super().__init__(f"gradient norm {self.norm:.3e} <= {DEGENERATE_THRESHOLD:g}{where}")


class UndefinedRatio(ArithmeticError):
    """Path endpoints coincide, so the non-linearity ratio is undefined."""


@dataclass(frozen=True)
class WarpingFunction:
    """``f(z) = sum_i a_i exp(-g_i |z - s_i|^2)`` with ``g_i = exp(log_scales_i)``."""

    centers: np.ndarray
    weights: np.ndarray
    log_scales: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        ls = np.asarray(self.log_scales, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError(f"centers must be (N, d) with N >= 1, got {c.shape}")
        if w.shape != (c.shape[0],) or ls.shape != (c.shape[0],):
            raise ValueError(
                f"weights {w.shape} and log_scales {ls.shape} must match N={c.shape[0]}"
            )
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "log_scales", ls)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    @classmethod
    def bipolar(cls, centers, weights, log_scales) -> "WarpingFunction":
        """Build from pairs: entry 2j takes ``weights[j]``, entry 2j+1 its negation.

        ``centers`` holds all 2M centers; ``weights`` and ``log_scales`` hold M free values.
        """
        w = np.asarray(weights, dtype=np.float64)
        ls = np.asarray(log_scales, dtype=np.float64)
        return cls(centers, np.stack([w, -w], axis=-1).ravel(), np.repeat(ls, 2))

    def is_bipolar(self) -> bool:
        if self.size % 2:
            return False
        w = self.weights.reshape(-1, 2)
        ls = self.log_scales.reshape(-1, 2)
        return bool(np.all(w[:, 0] == -w[:, 1]) and np.all(ls[:, 0] == ls[:, 1]))


def _check_dim(warp: WarpingFunction, z: np.ndarray) -> None:
    if z.shape[-1] != warp.dim:
        raise ValueError(f"latent code has length {z.shape[-1]}, warping expects {warp.dim}")


def eval_warp(warp: WarpingFunction, z) -> float:
    z = np.asarray(z, dtype=np.float64)
    _check_dim(warp, z)
    sq = np.sum((z - warp.centers) ** 2, axis=1)
    return float(np.sum(warp.weights * np.exp(-warp.scales * sq)))


def grad_warp(warp: WarpingFunction, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    _check_dim(warp, z)
    return grad_warp_batch(warp, z[None])[0]


def grad_warp_batch(warp: WarpingFunction, z: np.ndarray) -> np.ndarray:
    """Gradients at each row of a (B, d) array of codes."""
    z = np.asarray(z, dtype=np.float64)
    _check_dim(warp, z)
    diff = z[:, None, :] - warp.centers[None]  # (B, N, d)
    sq = np.sum(diff * diff, axis=2)
    gam = warp.scales
    coef = warp.weights * gam * np.exp(-gam * sq)  # (B, N)
    return -2.0 * np.einsum("bn,bnd->bd", coef, diff)


def shift(warp: WarpingFunction, z, eps: float) -> np.ndarray:
    """Latent displacement of length ``|eps|`` along the normalized gradient."""
    if eps == 0:
        raise ValueError("shift magnitude must be nonzero")
    g = grad_warp(warp, z)
    norm = float(np.linalg.norm(g))
    if not norm > DEGENERATE_THRESHOLD:
        raise DegenerateGradient(z, norm)
    return eps * (g / norm)


def shift_batch(warp: WarpingFunction, z: np.ndarray, eps) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`shift`; returns (shifts, ok-mask). Degenerate rows get zero shift."""
    g = grad_warp_batch(warp, z)
    norm = np.linalg.norm(g, axis=1)
    ok = norm > DEGENERATE_THRESHOLD
    safe = np.where(ok, norm, 1.0)
    out = np.asarray(eps, dtype=np.float64).reshape(-1, 1) * g / safe[:, None]
    out[~ok] = 0.0
    return out, ok


@dataclass(frozen=True)
class LatentPath:
    points: np.ndarray
    step_magnitude: float
    direction_sign: int = 1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or len(pts) < 1:
            raise ValueError(f"a path needs at least one point, got array of shape {pts.shape}")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def n_steps(self) -> int:
        return len(self.points) - 1


def traverse(warp: WarpingFunction, z0, eps: float, n_steps: int, sign: int = 1) -> LatentPath:
    """Explicit Euler walk of ``n_steps`` fixed-length steps along the gradient field."""
    if eps <= 0:
        raise ValueError("eps must be positive; use sign for direction")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    z = np.asarray(z0, dtype=np.float64)
    _check_dim(warp, z)
    points = [z]
    for t in range(n_steps):
        try:
            z = z + shift(warp, z, sign * eps)
        except DegenerateGradient as err:
            partial = LatentPath(np.array(points), eps, sign)
            raise DegenerateGradient(err.z, err.norm, step=t, partial=partial) from None
        points.append(z)
    return LatentPath(np.array(points), eps, sign)


def path_length(points: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def nonlinearity_coefficient(path) -> float:
    """Arc length over endpoint distance; 1 for a straight path."""
    points = path.points if isinstance(path, LatentPath) else np.asarray(path, dtype=np.float64)
    if len(points) < 2:
        raise UndefinedRatio("need at least two points")
    chord = float(np.linalg.norm(points[-1] - points[0]))
    if chord == 0.0:
        raise UndefinedRatio("path endpoints coincide")
    return path_length(points) / chord

"""The K trainable warpings held as support, weight and log-scale tensors.

In bipolar mode only half of the weights and log-scales are stored; pair
``(2j, 2j+1)`` reads ``(a_j, -a_j)`` and ``(log g_j, log g_j)``. The tie is
therefore exact under any optimizer, with nothing to re-project after a step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .warp import DEGENERATE_THRESHOLD, DegenerateGradient, WarpingFunction, grad_warp

LINEAR_GAMMA = 1e-8


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class InitConfig:
    sigma_support: float = 2.0
    weight_low: float = 0.5
    weight_high: float = 1.5
    gamma_init: float = 0.01
    bipolar: bool = True


class WarpingNetwork:
    def __init__(self, supports, weights, log_scales, bipolar: bool = True,
                 freeze_supports: bool = False, freeze_weights: bool = False,
                 freeze_scales: bool = False):
        supports = np.array(supports, dtype=np.float64)
        weights = np.array(weights, dtype=np.float64)
        log_scales = np.array(log_scales, dtype=np.float64)
        if supports.ndim != 3:
            raise ConfigurationError(f"support tensor must be K x N x d, got {supports.shape}")
        k, n, _ = supports.shape
        if k < 2:
            raise ConfigurationError("need at least two warpings")
        free = n // 2 if bipolar else n
        if bipolar and n % 2:
            raise ConfigurationError(f"bipolar mode needs an even number of supports, got {n}")
        if weights.shape != (k, free) or log_scales.shape != (k, free):
            raise ConfigurationError(
                f"free weights {weights.shape} / log-scales {log_scales.shape} should be {(k, free)}"
            )
        self.bipolar = bipolar
        self.freeze_supports = freeze_supports
        self.freeze_weights = freeze_weights
        self.freeze_scales = freeze_scales
        self.supports = Tensor(supports, requires_grad=not freeze_supports, name="supports")
        self.weights = Tensor(weights, requires_grad=not freeze_weights, name="weights")
        self.log_scales = Tensor(log_scales, requires_grad=not freeze_scales, name="log_scales")

    # shape ------------------------------------------------------------------

    @property
    def num_warpings(self) -> int:
        return self.supports.shape[0]

    @property
    def supports_per_warping(self) -> int:
        return self.supports.shape[1]

    @property
    def dim(self) -> int:
        return self.supports.shape[2]

    def parameter_count(self) -> int:
        return self.supports.data.size + self.weights.data.size + self.log_scales.data.size

    def parameters(self) -> list[Tensor]:
        return [self.supports, self.weights, self.log_scales]

    def trainable_parameters(self) -> list[Tensor]:
        return [p for p in self.parameters() if p.requires_grad]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    # expanded (mirrored) views ------------------------------------------------

    def _expand(self, free: np.ndarray, negate: bool) -> np.ndarray:
        if not self.bipolar:
            return free.copy()
        return np.stack([free, -free if negate else free], axis=-1).reshape(free.shape[0], -1)

    @property
    def support_tensor(self) -> np.ndarray:
        return self.supports.data

    @property
    def weight_matrix(self) -> np.ndarray:
        return self._expand(self.weights.data, negate=True)

    @property
    def log_scale_matrix(self) -> np.ndarray:
        return self._expand(self.log_scales.data, negate=False)

    def expanded(self) -> tuple[Tensor, Tensor, Tensor]:
        """Differentiable full-size (S, A, log G) built from the free parameters."""
        if not self.bipolar:
            return self.supports, self.weights, self.log_scales
        k = self.num_warpings
        a = ad.reshape(ad.stack([self.weights, -self.weights], axis=-1), (k, -1))
        g = ad.reshape(ad.stack([self.log_scales, self.log_scales], axis=-1), (k, -1))
        return self.supports, a, g

    # warpings ---------------------------------------------------------------

    def warping(self, k: int) -> WarpingFunction:
        if not 0 <= k < self.num_warpings:
            raise IndexError(f"warping index {k} out of range for K={self.num_warpings}")
        return WarpingFunction(self.supports.data[k], self.weight_matrix[k], self.log_scale_matrix[k])

    def direction(self, k: int, z) -> np.ndarray:
        g = grad_warp(self.warping(k), z)
        norm = float(np.linalg.norm(g))
        if not norm > DEGENERATE_THRESHOLD:
            raise DegenerateGradient(z, norm)
        return g / norm

    def gradient_norms(self, k: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Plain-array gradient norms at codes ``z`` (B, d) for warping indices ``k`` (B,)."""
        s = self.supports.data[k]
        a = self.weight_matrix[k]
        gam = np.exp(self.log_scale_matrix[k])
        diff = z[:, None, :] - s
        coef = a * gam * np.exp(-gam * np.sum(diff * diff, axis=2))
        return np.linalg.norm(-2.0 * np.einsum("bn,bnd->bd", coef, diff), axis=1)

    def shift(self, z, k, eps) -> Tensor:
        """Differentiable batch shift ``eps_b * grad f^{k_b}(z_b) / |grad f^{k_b}(z_b)|``.

        ``z`` is (B, d), ``k`` integer (B,), ``eps`` (B,). Callers are responsible
        for screening degenerate codes first (see :meth:`gradient_norms`).
        """
        s_all, a_all, g_all = self.expanded()
        k = np.asarray(k, dtype=np.intp)
        s = ad.take(s_all, k, axis=0)  # (B, N, d)
        a = ad.take(a_all, k, axis=0)  # (B, N)
        gam = ad.exp(ad.take(g_all, k, axis=0))
        zt = z if isinstance(z, Tensor) else Tensor(z)
        diff = ad.reshape(zt, (zt.shape[0], 1, zt.shape[1])) - s
        sq = ad.reduce_sum(ad.square(diff), axis=2)
        coef = a * gam * ad.exp(-(gam * sq))
        coef = ad.reshape(coef, (coef.shape[0], coef.shape[1], 1))
        grad = -2.0 * ad.reduce_sum(coef * diff, axis=1)  # (B, d)
        norm = ad.sqrt(ad.reduce_sum(ad.square(grad), axis=1, keepdims=True))
        eps = np.asarray(eps, dtype=np.float64).reshape(-1, 1)
        return grad * eps / norm

    def copy(self) -> "WarpingNetwork":
        return WarpingNetwork(
            self.supports.data, self.weights.data, self.log_scales.data, self.bipolar,
            self.freeze_supports, self.freeze_weights, self.freeze_scales,
        )


def init(K: int, N: int, d: int, seed: int, config: InitConfig | None = None) -> WarpingNetwork:
    config = config or InitConfig()
    if K < 2:
        raise ConfigurationError(f"K must be >= 2, got {K}")
    if N < (2 if config.bipolar else 1):
        raise ConfigurationError(f"N too small: {N}")
    if config.bipolar and N % 2:
        raise ConfigurationError(f"bipolar mode needs even N, got {N}")
    if d < 1:
        raise ConfigurationError(f"d must be >= 1, got {d}")
    if config.gamma_init <= 0:
        raise ConfigurationError("gamma_init must be positive")
    rng = np.random.default_rng(seed)
    free = N // 2 if config.bipolar else N
    supports = rng.normal(0.0, config.sigma_support, (K, N, d))
    weights = rng.uniform(config.weight_low, config.weight_high, (K, free))
    log_scales = np.full((K, free), np.log(config.gamma_init))
    return WarpingNetwork(supports, weights, log_scales, bipolar=config.bipolar)


def linear_directions_mode(K: int, d: int, seed: int,
                           config: InitConfig | None = None) -> WarpingNetwork:
    """One bipolar pair per warping with a vanishing, frozen scale: straight paths."""
    base = config or InitConfig()
    cfg = InitConfig(base.sigma_support, base.weight_low, base.weight_high, LINEAR_GAMMA, True)
    net = init(K, 2, d, seed, cfg)
    return WarpingNetwork(net.supports.data, net.weights.data, net.log_scales.data,
                          bipolar=True, freeze_weights=True, freeze_scales=True)


def fixed_linear_network(directions: np.ndarray) -> WarpingNetwork:
    """Frozen linear-mode network whose k-th path runs along ``directions[k]``."""
    u = np.asarray(directions, dtype=np.float64)
    k, d = u.shape
    supports = np.stack([u, -u], axis=1)
    return WarpingNetwork(supports, np.ones((k, 1)), np.full((k, 1), np.log(LINEAR_GAMMA)),
                          bipolar=True, freeze_supports=True, freeze_weights=True,
                          freeze_scales=True)

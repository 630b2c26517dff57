"""Reconstructor network and Adam optimizer on top of :mod:`warpspace.autodiff`."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

CHANNELS = (8, 16, 32)
LEAK = 0.1


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "AdamState":
        return cls(0, [np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def adam_step(params: list[Tensor], grads: list[np.ndarray | None], state: AdamState,
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps_adam: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place. ``None`` grads count as zero."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ad.ShapeError("adam_step: params, grads and state differ in length")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape or m.shape != p.shape:
            raise ad.ShapeError(f"adam_step: grad {g.shape} vs param {p.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps_adam)


class Reconstructor:
    """Two-headed conv net mapping a channel-stacked image pair to (logits, eps)."""

    def __init__(self, num_classes: int, in_channels: int = 2, seed: int = 0):
        if num_classes < 2:
            raise ValueError("Reconstructor needs at least two classes")
        rng = np.random.default_rng(seed)
        self.num_classes = num_classes
        self.in_channels = in_channels
        self.params: dict[str, Tensor] = {}
        prev = in_channels
        for i, width in enumerate(CHANNELS):
            fan_in = prev * 9
            # He init for leaky units
            std = np.sqrt(2.0 / ((1 + LEAK**2) * fan_in))
            self._add(f"conv{i}.weight", rng.normal(0.0, std, (width, prev, 3, 3)))
            self._add(f"conv{i}.bias", np.zeros(width))
            prev = width
        self._add("cls.weight", rng.normal(0.0, 1.0 / np.sqrt(prev), (prev, num_classes)))
        self._add("cls.bias", np.zeros(num_classes))
        self._add("reg.weight", rng.normal(0.0, 1.0 / np.sqrt(prev), (prev, 1)))
        self._add("reg.bias", np.zeros(1))

    def _add(self, name: str, value: np.ndarray) -> None:
        self.params[name] = Tensor(value, requires_grad=True, name=name)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self.params.items())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def __call__(self, pair) -> tuple[Tensor, Tensor]:
        """``pair`` is (B, 2C, H, W); returns logits (B, K) and eps (B,)."""
        if pair.shape[1] != self.in_channels:
            raise ad.ShapeError(
                f"Reconstructor: expected {self.in_channels} input channels, got {pair.shape[1]}"
            )
        h = pair
        for i in range(len(CHANNELS)):
            h = ad.conv2d(h, self.params[f"conv{i}.weight"], self.params[f"conv{i}.bias"],
                          stride=2, padding=1)
            h = ad.leaky_relu(h, LEAK)
        feat = ad.global_avg_pool(h)
        logits = feat @ self.params["cls.weight"] + self.params["cls.bias"]
        eps = feat @ self.params["reg.weight"] + self.params["reg.bias"]
        return logits, ad.reshape(eps, (-1,))

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(name, p.data) for name, p in self.params.items()]

    def load_arrays(self, arrays: list[tuple[str, np.ndarray]]) -> None:
        names = [n for n, _ in arrays]
        if names != list(self.params):
            raise ValueError(f"parameter names {names} do not match {list(self.params)}")
        for name, value in arrays:
            if value.shape != self.params[name].shape:
                raise ValueError(f"{name}: shape {value.shape} != {self.params[name].shape}")
            self.params[name].data = np.array(value, dtype=np.float64)

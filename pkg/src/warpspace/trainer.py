"""Joint training of the warping network and the reconstructor."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .generator import SyntheticGenerator, axis_aligned_map
from .network import InitConfig, WarpingNetwork, init, linear_directions_mode
from .nn import AdamState, Reconstructor, adam_step
from .warp import DEGENERATE_THRESHOLD

log = logging.getLogger(__name__)

MODES = ("nonlinear", "linear-baseline")
GENERATOR_MAPS = ("random", "axis")
MAX_RESAMPLES = 8
MAX_DEGENERATE_FRACTION = 0.1
MIN_EPS = 0.05


class ConfigError(ValueError):
    """One or more configuration fields are invalid; ``problems`` lists them all."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class TrainingAborted(RuntimeError):
    """Too many degenerate warping gradients in a batch (collapsed warping)."""


@dataclass
class TrainConfig:
    num_warpings: int = 5
    num_supports: int = 2
    dim: int = 16
    image_size: int = 16
    batch_size: int = 32
    iterations: int = 10000
    lambda_reg: float = 0.25
    eps_min: float = 0.25
    eps_max: float = 2.0
    lr_warp: float = 1e-3
    lr_reconstructor: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0
    mode: str = "nonlinear"
    freeze_weights: bool = False
    freeze_scales: bool = False
    sigma_support: float = 2.0
    gamma_init: float = 0.01
    generator_seed: int = 0
    generator_gain: float = 0.5
    generator_map: str = "random"
    log_every: int = 100

    def problems(self) -> list[str]:
        out = []
        if self.num_warpings < 2:
            out.append(f"num_warpings must be >= 2 (got {self.num_warpings})")
        if self.num_supports < 2 or self.num_supports % 2:
            out.append(f"num_supports must be even and >= 2 (got {self.num_supports})")
        if self.dim < 1:
            out.append(f"dim must be >= 1 (got {self.dim})")
        if self.image_size < 4:
            out.append(f"image_size must be >= 4 (got {self.image_size})")
        if self.batch_size < 1:
            out.append(f"batch_size must be >= 1 (got {self.batch_size})")
        if self.iterations < 0:
            out.append(f"iterations must be >= 0 (got {self.iterations})")
        if self.lambda_reg < 0:
            out.append(f"lambda_reg must be >= 0 (got {self.lambda_reg})")
        if not self.eps_min >= MIN_EPS:
            out.append(f"eps_min must be >= {MIN_EPS} (got {self.eps_min})")
        if not self.eps_max > self.eps_min:
            out.append(f"eps_max must exceed eps_min (got {self.eps_max} <= {self.eps_min})")
        for name in ("lr_warp", "lr_reconstructor", "eps_adam", "sigma_support", "gamma_init"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be positive (got {getattr(self, name)})")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                out.append(f"{name} must lie in [0, 1) (got {getattr(self, name)})")
        if self.mode not in MODES:
            out.append(f"mode must be one of {', '.join(MODES)} (got {self.mode!r})")
        if self.generator_map not in GENERATOR_MAPS:
            out.append(f"generator_map must be one of {', '.join(GENERATOR_MAPS)} "
                       f"(got {self.generator_map!r})")
        if self.log_every < 1:
            out.append(f"log_every must be >= 1 (got {self.log_every})")
        return out

    def validate(self) -> "TrainConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class TrainSample:
    z: np.ndarray
    k: int
    eps_signed: float


@dataclass
class TrainBatch:
    z: np.ndarray  # (B, d)
    k: np.ndarray  # (B,)
    eps: np.ndarray  # (B,) signed

    def __len__(self) -> int:
        return len(self.k)


@dataclass
class StepReport:
    loss: float
    cls_accuracy: float
    reg_error: float
    resampled: int = 0


@dataclass
class Optimizers:
    warp: AdamState
    recon: AdamState

    @classmethod
    def create(cls, net: WarpingNetwork, recon: Reconstructor) -> "Optimizers":
        return cls(AdamState.for_params(net.trainable_parameters()),
                   AdamState.for_params(recon.parameters()))


@dataclass
class TrainingLog:
    rows: list[tuple[int, float, float, float]] = field(default_factory=list)

    HEADER = ("iteration", "loss", "cls_accuracy", "reg_mae")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.HEADER)
        for it, loss, acc, mae in self.rows:
            writer.writerow([it, repr(loss), repr(acc), repr(mae)])
        return buf.getvalue()


# sampling -------------------------------------------------------------------


def sample(rng: np.random.Generator, config: TrainConfig) -> TrainSample:
    b = sample_batch(rng, config, 1)
    return TrainSample(b.z[0], int(b.k[0]), float(b.eps[0]))


def sample_batch(rng: np.random.Generator, config: TrainConfig, size: int) -> TrainBatch:
    """z ~ N(0, I), k uniform, eps uniform on [-max, -min] u [min, max]."""
    z = rng.standard_normal((size, config.dim))
    k = rng.integers(0, config.num_warpings, size)
    magnitude = rng.uniform(config.eps_min, config.eps_max, size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return TrainBatch(z, k, sign * magnitude)


def screen_degenerate(net: WarpingNetwork, batch: TrainBatch, rng: np.random.Generator) -> int:
    """Redraw z (keeping k and eps) wherever the warping gradient vanishes.

    Returns the number of rows that needed redrawing.
    """
    bad = ~(net.gradient_norms(batch.k, batch.z) > DEGENERATE_THRESHOLD)
    count = int(bad.sum())
    if count == 0:
        return 0
    if count > MAX_DEGENERATE_FRACTION * len(batch):
        raise TrainingAborted(
            f"{count}/{len(batch)} samples hit a vanishing warping gradient "
            f"(warpings {sorted(set(batch.k[bad].tolist()))}); the warping has collapsed"
        )
    for _ in range(MAX_RESAMPLES):
        idx = np.flatnonzero(bad)
        batch.z[idx] = rng.standard_normal((len(idx), batch.z.shape[1]))
        bad[idx] = ~(net.gradient_norms(batch.k[idx], batch.z[idx]) > DEGENERATE_THRESHOLD)
        if not bad.any():
            return count
    raise TrainingAborted(f"gradient still degenerate after {MAX_RESAMPLES} redraws")


# loss -------------------------------------------------------------------------


def composite_loss(k, logits, eps_signed, eps_pred, lam: float) -> Tensor:
    """Batch mean of cross-entropy(k) + lam * |eps_pred - eps_signed|."""
    cls = ad.cross_entropy(logits, k)
    reg = ad.mean_absolute_error(eps_pred, eps_signed)
    return ad.mean(cls + lam * reg)


def forward_loss(net: WarpingNetwork, recon: Reconstructor, gen: SyntheticGenerator,
                 batch: TrainBatch, lam: float) -> tuple[Tensor, Tensor, Tensor]:
    """Image pair -> reconstructor -> composite loss. Records on the active tape."""
    z0 = Tensor(batch.z)
    z1 = z0 + net.shift(z0, batch.k, batch.eps)
    pair = ad.concat_channels(gen.generate(z0), gen.generate(z1))
    logits, eps_pred = recon(pair)
    return composite_loss(batch.k, logits, batch.eps, eps_pred, lam), logits, eps_pred


def train_step(net: WarpingNetwork, recon: Reconstructor, gen: SyntheticGenerator,
               batch: TrainBatch, config: TrainConfig, optim: Optimizers,
               rng: np.random.Generator) -> StepReport:
    resampled = screen_degenerate(net, batch, rng)
    net.zero_grad()
    recon.zero_grad()
    with ad.Tape() as tape:
        loss, logits, eps_pred = forward_loss(net, recon, gen, batch, config.lambda_reg)
    tape.backward(loss)

    recon_params = recon.parameters()
    adam_step(recon_params, [p.grad for p in recon_params], optim.recon,
              config.lr_reconstructor, config.beta1, config.beta2, config.eps_adam)
    warp_params = net.trainable_parameters()
    if warp_params:
        adam_step(warp_params, [p.grad for p in warp_params], optim.warp,
                  config.lr_warp, config.beta1, config.beta2, config.eps_adam)

    acc = float(np.mean(np.argmax(logits.data, axis=1) == batch.k))
    mae = float(np.mean(np.abs(eps_pred.data - batch.eps)))
    return StepReport(loss.item(), acc, mae, resampled)


# full run -------------------------------------------------------------------


def build_generator(config: TrainConfig) -> SyntheticGenerator:
    matrix = axis_aligned_map(config.dim) if config.generator_map == "axis" else None
    return SyntheticGenerator(config.dim, config.image_size, config.generator_seed,
                              config.generator_gain, matrix)


def _seeds(seed: int) -> tuple[int, int, int]:
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(int(c.generate_state(1)[0]) for c in children)


def build_network(config: TrainConfig) -> WarpingNetwork:
    net_seed, _, _ = _seeds(config.seed)
    icfg = InitConfig(sigma_support=config.sigma_support, gamma_init=config.gamma_init)
    if config.mode == "linear-baseline":
        return linear_directions_mode(config.num_warpings, config.dim, net_seed, icfg)
    net = init(config.num_warpings, config.num_supports, config.dim, net_seed, icfg)
    if config.freeze_weights or config.freeze_scales:
        net = WarpingNetwork(net.supports.data, net.weights.data, net.log_scales.data,
                             bipolar=True, freeze_weights=config.freeze_weights,
                             freeze_scales=config.freeze_scales)
    return net


def build_reconstructor(config: TrainConfig) -> Reconstructor:
    _, recon_seed, _ = _seeds(config.seed)
    return Reconstructor(config.num_warpings, in_channels=2, seed=recon_seed)


def train(config: TrainConfig, net: WarpingNetwork | None = None,
          recon: Reconstructor | None = None,
          callback: Callable[[int, StepReport], None] | None = None,
          ) -> tuple[WarpingNetwork, Reconstructor, TrainingLog]:
    """Run ``config.iterations`` joint steps. Passing ``net`` trains a prebuilt
    (e.g. frozen baseline) warping network instead of a fresh one."""
    config.validate()
    _, _, sample_seed = _seeds(config.seed)
    net = net if net is not None else build_network(config)
    recon = recon if recon is not None else build_reconstructor(config)
    gen = build_generator(config)
    optim = Optimizers.create(net, recon)
    rng = np.random.default_rng(sample_seed)
    history = TrainingLog()
    window: list[StepReport] = []
    for it in range(1, config.iterations + 1):
        batch = sample_batch(rng, config, config.batch_size)
        report = train_step(net, recon, gen, batch, config, optim, rng)
        window.append(report)
        if callback is not None:
            callback(it, report)
        if it % config.log_every == 0 or it == config.iterations:
            row = (it,
                   float(np.mean([r.loss for r in window])),
                   float(np.mean([r.cls_accuracy for r in window])),
                   float(np.mean([r.reg_error for r in window])))
            history.rows.append(row)
            log.info("iter %d loss %.4f acc %.3f mae %.3f", *row)
            window = []
    return net, recon, history

"""Quantitative evaluation: reconstructor accuracy, attribute correlation, path non-linearity."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .generator import ATTRIBUTE_NAMES, SyntheticGenerator, attribute_half_widths
from .network import WarpingNetwork, fixed_linear_network
from .nn import Reconstructor
from . import autodiff as ad
from .trainer import TrainBatch, TrainConfig, sample_batch, screen_degenerate
from .warp import DegenerateGradient, LatentPath, shift_batch, traverse

__all__ = [
    "AttributeTrace",
    "CorrelationReport",
    "PhiReport",
    "reconstructor_accuracy",
    "random_baseline",
    "coord_baseline",
    "walk_and_trace",
    "walk_batch",
    "pearson_with_steps",
    "correlation_report",
    "phi_report",
    "diagonal_dominance",
]


def _fmt(x: float) -> str:
    return repr(float(x))


# accuracy ---------------------------------------------------------------------


def predict(net: WarpingNetwork, recon: Reconstructor, gen: SyntheticGenerator,
            batch: TrainBatch) -> tuple[np.ndarray, np.ndarray]:
    """Reconstructor outputs (logits, eps) for a batch, without recording gradients."""
    shifted = batch.z + net.shift(batch.z, batch.k, batch.eps).data
    pair = ad.concat_channels(gen.generate(batch.z), gen.generate(shifted))
    logits, eps = recon(pair)
    return logits.data, eps.data


def reconstructor_accuracy(net: WarpingNetwork, recon: Reconstructor, gen: SyntheticGenerator,
                           n_samples: int, rng: np.random.Generator, eps_min: float = 0.25,
                           eps_max: float = 2.0, batch_size: int = 500) -> float:
    """Percentage of fresh (z, k, eps) samples whose warping index is recovered."""
    cfg = TrainConfig(num_warpings=net.num_warpings, dim=net.dim, eps_min=eps_min,
                      eps_max=eps_max)
    correct = 0
    done = 0
    while done < n_samples:
        size = min(batch_size, n_samples - done)
        batch = sample_batch(rng, cfg, size)
        screen_degenerate(net, batch, rng)
        logits, _ = predict(net, recon, gen, batch)
        correct += int(np.sum(np.argmax(logits, axis=1) == batch.k))
        done += size
    return 100.0 * correct / n_samples


# baselines ------------------------------------------------------------------


def random_baseline(K: int, d: int, seed: int) -> WarpingNetwork:
    """Frozen straight paths along random unit directions."""
    u = np.random.default_rng(seed).standard_normal((K, d))
    return fixed_linear_network(u / np.linalg.norm(u, axis=1, keepdims=True))


def coord_baseline(K: int, d: int) -> WarpingNetwork:
    """Frozen straight paths along the first K coordinate axes."""
    if K > d:
        raise ValueError(f"coord baseline needs K <= d (got K={K}, d={d})")
    return fixed_linear_network(np.eye(K, d))


# walks ------------------------------------------------------------------------


@dataclass
class AttributeTrace:
    path_index: int
    steps: np.ndarray  # -T..T
    values: np.ndarray  # (2T+1, A)

    @property
    def center(self) -> np.ndarray:
        return self.values[len(self.steps) // 2]


def walk_and_trace(net: WarpingNetwork, gen: SyntheticGenerator, k: int, z0, eps: float,
                   T: int) -> tuple[LatentPath, AttributeTrace]:
    """Two-sided walk: reversed negative walk, ``z0``, positive walk."""
    warp = net.warping(k)
    pos = traverse(warp, z0, eps, T, +1)
    try:
        neg = traverse(warp, z0, eps, T, -1)
    except DegenerateGradient as err:
        err.step = -(err.step + 1)
        raise
    points = np.concatenate([neg.points[::-1], pos.points[1:]], axis=0)
    path = LatentPath(points, eps, 1)
    trace = AttributeTrace(k, np.arange(-T, T + 1), gen.attribute_array(points))
    return path, trace


def walk_batch(net: WarpingNetwork, k: int, z0: np.ndarray, eps: float,
               T: int) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided walks from every row of ``z0`` at once.

    Returns points (n, 2T+1, d) and a mask of walks that never hit a
    degenerate gradient.
    """
    warp = net.warping(k)
    n, d = z0.shape
    points = np.empty((n, 2 * T + 1, d))
    points[:, T] = z0
    ok = np.ones(n, dtype=bool)
    for sign in (1, -1):
        z = z0.copy()
        for t in range(1, T + 1):
            dz, good = shift_batch(warp, z, np.full(n, sign * eps))
            ok &= good
            z = z + dz
            points[:, T + sign * t] = z
    return points, ok


def pearson_with_steps(values: np.ndarray, tol: float = 1e-12, span_tol=0.0) -> np.ndarray:
    """Pearson correlation of each attribute column with the step index.

    ``values`` is (..., S, A). Columns that are constant (within ``tol``
    relative to their magnitude, or whose max-min span is at most
    ``span_tol``, broadcast over A) get correlation 0.
    """
    s = values.shape[-2]
    t = np.arange(s, dtype=np.float64) - (s - 1) / 2.0
    centered = values - values.mean(axis=-2, keepdims=True)
    cov = np.einsum("s,...sa->...a", t, centered)
    norm_v = np.sqrt(np.sum(centered * centered, axis=-2))
    norm_t = np.sqrt(np.sum(t * t))
    scale = np.maximum(np.abs(values).max(axis=-2), 1.0)
    span = values.max(axis=-2) - values.min(axis=-2)
    flat = (norm_v <= tol * scale * np.sqrt(s)) | (span <= span_tol)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = cov / (norm_v * norm_t)
    r = np.where(flat | (norm_t == 0), 0.0, r)
    return np.clip(r, -1.0, 1.0)


# correlation --------------------------------------------------------------------


@dataclass
class CorrelationReport:
    raw: np.ndarray  # (K, A) mean signed correlation
    l1_normalized: np.ndarray  # (K, A) |raw| / row L1 norm
    assignment: np.ndarray  # (A,) warping with max |raw| per attribute
    ranges: np.ndarray  # (A,) mean attribute span along its assigned warping
    skipped: int = 0
    attribute_names: tuple[str, ...] = ATTRIBUTE_NAMES

    def matrix_csv(self, which: str = "l1_normalized") -> str:
        m = getattr(self, which)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["warping"] + [f"attr_{a}" for a in self.attribute_names])
        for k, row in enumerate(m):
            w.writerow([k] + [_fmt(v) for v in row])
        return buf.getvalue()

    def ranges_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["attribute", "warping", "range"])
        for a, name in enumerate(self.attribute_names):
            w.writerow([name, int(self.assignment[a]), _fmt(self.ranges[a])])
        return buf.getvalue()

    def assignment_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["attribute", "warping", "abs_correlation", "l1_normalized"])
        for a, name in enumerate(self.attribute_names):
            k = int(self.assignment[a])
            w.writerow([name, k, _fmt(abs(self.raw[k, a])), _fmt(self.l1_normalized[k, a])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "attributes": list(self.attribute_names),
            "raw": self.raw.tolist(),
            "l1_normalized": self.l1_normalized.tolist(),
            "assignment": {n: int(k) for n, k in zip(self.attribute_names, self.assignment)},
            "ranges": {n: float(r) for n, r in zip(self.attribute_names, self.ranges)},
            "diagonal_dominance": diagonal_dominance(self),
            "skipped": self.skipped,
        }


FLAT_FRACTION = 1e-6


def correlation_report(net: WarpingNetwork, gen: SyntheticGenerator, n_codes: int, T: int,
                       eps: float, rng: np.random.Generator) -> CorrelationReport:
    """Step-index/attribute Pearson correlations per warping, averaged over codes.

    Attributes that move by less than ``FLAT_FRACTION`` of their range along a
    walk count as constant: the residual curvature of a linear-regime pair
    (gamma ~ 1e-8) is otherwise enough to give a spurious nonzero correlation.
    """
    span_tol = FLAT_FRACTION * 2 * attribute_half_widths()
    K = net.num_warpings
    A = len(ATTRIBUTE_NAMES)
    z0 = rng.standard_normal((n_codes, net.dim))
    raw = np.zeros((K, A))
    spans = np.zeros((K, A))
    skipped = 0
    for k in range(K):
        points, ok = walk_batch(net, k, z0, eps, T)
        skipped += int((~ok).sum())
        if not ok.any():
            continue
        values = gen.attribute_array(points[ok])  # (n, 2T+1, A)
        raw[k] = pearson_with_steps(values, span_tol=span_tol).mean(axis=0)
        spans[k] = (values.max(axis=1) - values.min(axis=1)).mean(axis=0)
    mag = np.abs(raw)
    l1 = mag.sum(axis=1, keepdims=True)
    normalized = np.divide(mag, l1, out=np.zeros_like(mag), where=l1 > 0)
    assignment = np.argmax(mag, axis=0)
    ranges = spans[assignment, np.arange(A)]
    return CorrelationReport(raw, normalized, assignment, ranges, skipped)


def diagonal_dominance(report: CorrelationReport) -> float:
    """Mean assigned-cell minus mean off-assignment L1-normalized correlation.

    Assigned cells are ``(assignment[a], a)``; every other cell of the matrix
    counts as off-assignment (leakage).
    """
    m = report.l1_normalized
    mask = np.zeros_like(m, dtype=bool)
    mask[report.assignment, np.arange(m.shape[1])] = True
    off = m[~mask]
    return float(m[mask].mean()) - (float(off.mean()) if off.size else 0.0)


# non-linearity ----------------------------------------------------------------


@dataclass
class PhiReport:
    per_warping: np.ndarray  # (K,) mean phi, warping order
    skipped: int = 0

    @property
    def sorted_values(self) -> list[float]:
        return sorted(self.per_warping.tolist(), reverse=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "warping", "phi"])
        order = np.argsort(-self.per_warping, kind="stable")
        for rank, k in enumerate(order):
            w.writerow([rank, int(k), _fmt(self.per_warping[k])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"sorted": self.sorted_values, "per_warping": self.per_warping.tolist(),
                "skipped": self.skipped}


def _phi_rows(points: np.ndarray) -> np.ndarray:
    arc = np.linalg.norm(np.diff(points, axis=1), axis=2).sum(axis=1)
    chord = np.linalg.norm(points[:, -1] - points[:, 0], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return arc / chord


def phi_report(net: WarpingNetwork, gen: SyntheticGenerator | None, n_codes: int, T: int,
               eps: float, rng: np.random.Generator) -> PhiReport:
    """Mean arc/chord ratio of two-sided walks per warping; degenerate walks skipped."""
    if T < 1:
        raise ValueError("phi needs at least one step each way")
    z0 = rng.standard_normal((n_codes, net.dim))
    values = np.full(net.num_warpings, np.nan)
    skipped = 0
    for k in range(net.num_warpings):
        points, ok = walk_batch(net, k, z0, eps, T)
        phi = _phi_rows(points)
        good = ok & np.isfinite(phi)
        skipped += int((~good).sum())
        if good.any():
            values[k] = phi[good].mean()
    return PhiReport(values, skipped)

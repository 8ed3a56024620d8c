"""Pre-training: masked forecasting + masked reconstruction + hidden alignment.

The objective sums three terms per batch:

* forecast loss — squared error over the target span, masked by the
  observation mask (missing points carry zero weight);
* reconstruction loss — squared error of the masked-input encoder's output
  against the unmasked truth, restricted to entries that were masked out,
  observed, and in the latter half of the history;
* alignment loss — plain MSE between the reconstruction encoder's hidden
  states and the forecasting decoder's hidden states on the shared span
  [t - I/2, t - 1], which the shared projection makes comparable.

Optimization is AdamW (decoupled weight decay) with a warm-up then
exponential-decay schedule.  Every random draw (shuffling, entry masks)
comes from generators seeded by the training config, so repeated runs
produce bit-identical parameter trajectories and loss traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from cellwhatif.forecaster import nn
from cellwhatif.forecaster.model import (
    ClusterModel,
    ForecastModel,
    forward_forecast,
    forward_reconstruct,
    sample_entry_mask,
)
from cellwhatif.forecaster.windows import WindowSample

__all__ = [
    "MaskedLoss",
    "masked_mse",
    "TrainConfig",
    "AdamW",
    "LossRecord",
    "pretrain",
    "pretrain_cluster",
    "batch_loss",
    "grad_check",
]


class MaskedLoss(NamedTuple):
    value: float
    observed: int

    @property
    def no_observed_points(self) -> bool:
        return self.observed == 0


def masked_mse(truth, prediction, mask) -> MaskedLoss:
    """Mean squared error over observed points: sum((x - x~)^2 w) / sum(w).

    With no observed points the loss is defined as 0.0 and flagged via
    ``no_observed_points``.
    """
    truth = np.asarray(truth, dtype=float)
    prediction = np.asarray(prediction, dtype=float)
    mask = np.asarray(mask, dtype=float)
    if truth.shape != prediction.shape or truth.shape != mask.shape:
        raise ValueError(
            f"shape mismatch: truth {truth.shape}, prediction {prediction.shape}, "
            f"mask {mask.shape}"
        )
    total = float(mask.sum())
    if total == 0:
        return MaskedLoss(0.0, 0)
    value = float((((truth - prediction) ** 2) * mask).sum() / total)
    return MaskedLoss(value, int(round(total)))


def _masked_mse_t(pred: nn.Tensor, truth: np.ndarray, weights: np.ndarray) -> nn.Tensor:
    """Differentiable Eq.-style masked MSE; 0 (constant) when nothing observed."""
    total = float(weights.sum())
    if total == 0:
        return nn.constant(0.0)
    diff = nn.sub(pred, nn.constant(truth))
    sq = nn.mul(nn.mul(diff, diff), nn.constant(weights))
    return nn.scale(nn.sum_all(sq), 1.0 / total)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2
    batch_size: int = 32
    lr: float = 1e-4
    warmup_fraction: float = 0.04  # leading fraction of steps at warmup_scale * lr
    warmup_scale: float = 0.1
    decay_start_fraction: float = 0.4
    decay_per_epoch: float = 0.97
    weight_decay: float = 0.01
    mask_ratio: float = 0.7
    seed: int = 0
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)  # forecast, recon, align

    def lr_at(self, step: int, steps_per_epoch: int, total_steps: int) -> float:
        if total_steps <= 0:
            return self.lr
        if step < self.warmup_fraction * total_steps:
            return self.lr * self.warmup_scale
        start = self.decay_start_fraction * total_steps
        if step > start and steps_per_epoch > 0:
            epochs_past = (step - start) / steps_per_epoch
            return self.lr * self.decay_per_epoch**epochs_past
        return self.lr


class AdamW:
    """Adam with decoupled weight decay over a named parameter dict."""

    def __init__(self, params: dict[str, nn.Tensor], weight_decay: float = 0.01,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / (1 - b1**self.t)
            vhat = self.v[k] / (1 - b2**self.t)
            p.data = p.data - lr * (
                mhat / (np.sqrt(vhat) + self.eps) + self.weight_decay * p.data
            )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


@dataclass
class LossRecord:
    cluster: str
    epoch: int
    step: int
    lr: float
    forecast: float
    recon: float
    align: float
    total: float


def _stack(windows: Sequence[WindowSample], attr: str) -> np.ndarray:
    return np.stack([getattr(w, attr) for w in windows], axis=0)


def batch_loss(
    model: ClusterModel,
    windows: Sequence[WindowSample],
    entry_masks: np.ndarray,
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> tuple[nn.Tensor, tuple[float, float, float]]:
    """Differentiable total loss for a batch and its three raw components.

    ``entry_masks``: boolean (B, I, d), True where an input entry is masked
    out for the reconstruction task.
    """
    cfg = model.config
    x_src = _stack(windows, "x_src")
    w_src = _stack(windows, "w_src")
    pa_src = _stack(windows, "pa_src")
    pa_tgt = _stack(windows, "pa_tgt")
    y = _stack(windows, "y")
    w_y = _stack(windows, "w_y")

    y_hat, dec_overlap = forward_forecast(model, x_src, pa_src, pa_tgt)
    l_forecast = _masked_mse_t(y_hat, y, w_y)

    x_masked = np.where(entry_masks, 0.0, x_src)
    recon, enc_overlap = forward_reconstruct(model, x_masked, pa_src)
    half = cfg.input_len // 2
    recon_w = (entry_masks & (w_src == 1.0)).astype(float)
    recon_w[:, :half, :] = 0.0  # latter half only
    l_recon = _masked_mse_t(recon, x_src, recon_w)

    diff = nn.sub(enc_overlap, dec_overlap)
    l_align = nn.mean_all(nn.mul(diff, diff))

    wf, wr, wa = loss_weights
    total = nn.add(
        nn.add(nn.scale(l_forecast, wf), nn.scale(l_recon, wr)), nn.scale(l_align, wa)
    )
    return total, (float(l_forecast.data), float(l_recon.data), float(l_align.data))


def pretrain_cluster(
    model: ClusterModel,
    windows: Sequence[WindowSample],
    config: TrainConfig,
    stream: int = 0,
) -> list[LossRecord]:
    """Train one cluster model in place; returns its loss trace."""
    if not windows:
        raise ValueError(f"{model.config.cluster}: no training windows")
    rng = np.random.default_rng([config.seed, stream])
    n = len(windows)
    batches_per_epoch = math.ceil(n / config.batch_size)
    total_steps = batches_per_epoch * config.epochs
    opt = AdamW(model.params, weight_decay=config.weight_decay)
    trace: list[LossRecord] = []
    step = 0
    d_own = len(model.config.own_metrics)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for b in range(batches_per_epoch):
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            batch = [windows[i] for i in idx]
            masks = np.stack(
                [
                    sample_entry_mask(rng, model.config.input_len, d_own, config.mask_ratio)
                    for _ in batch
                ],
                axis=0,
            )
            opt.zero_grad()
            total, (lf, lr_, la) = batch_loss(model, batch, masks, config.loss_weights)
            if not math.isfinite(float(total.data)):
                raise FloatingPointError(
                    f"{model.config.cluster}: non-finite loss at step {step} "
                    f"(forecast={lf}, recon={lr_}, align={la})"
                )
            nn.backward(total)
            lr_now = config.lr_at(step, batches_per_epoch, total_steps)
            opt.step(lr_now)
            trace.append(
                LossRecord(
                    cluster=model.config.cluster,
                    epoch=epoch,
                    step=step,
                    lr=lr_now,
                    forecast=lf,
                    recon=lr_,
                    align=la,
                    total=float(total.data),
                )
            )
            step += 1
    return trace


def pretrain(
    bundle: ForecastModel,
    windows_by_cluster: dict[str, Sequence[WindowSample]],
    config: TrainConfig,
) -> list[LossRecord]:
    """Pre-train every cluster model in place (adjustment-free windows only).

    Window sets come from the caller so that train/eval splits stay explicit;
    see ``pipeline.pretrain_on_dataset`` for the end-to-end assembly.
    """
    trace: list[LossRecord] = []
    for stream, cluster in enumerate(bundle.clusters()):
        trace.extend(
            pretrain_cluster(
                bundle.models[cluster], windows_by_cluster[cluster], config, stream=stream
            )
        )
    return trace


def grad_check(
    model: ClusterModel,
    window: WindowSample,
    epsilon: float = 1e-4,
    mask_seed: int = 0,
) -> float:
    """Max relative error of analytic vs central finite-difference gradients.

    Runs the full three-part training loss on one window with a fixed entry
    mask, so every parameter of every block is exercised.  Intended for
    small models (a few thousand parameters).
    """
    rng = np.random.default_rng(mask_seed)
    masks = sample_entry_mask(
        rng, model.config.input_len, len(model.config.own_metrics), model.config.mask_ratio
    )[None]

    def loss_value() -> float:
        total, _ = batch_loss(model, [window], masks)
        return float(total.data)

    for p in model.params.values():
        p.grad = None
    total, _ = batch_loss(model, [window], masks)
    nn.backward(total)

    worst = 0.0
    for name, p in model.params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.ravel()
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + epsilon
            up = loss_value()
            flat[i] = keep - epsilon
            down = loss_value()
            flat[i] = keep
            numeric = (up - down) / (2.0 * epsilon)
            a = float(analytic.ravel()[i])
            # the 1e-6 floor sits above the central-difference roundoff noise
            # (~|loss| * 2^-52 / epsilon), so exactly-zero gradients (e.g. key
            # biases, which softmax shift-invariance kills) do not read as
            # spurious relative error
            denom = max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, abs(a - numeric) / denom)
    return worst

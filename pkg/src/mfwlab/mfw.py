"""Major-feature-weakening training.

Each batch mixes every sample's intermediate feature with a permuted
partner's, z~_n = (1-lam_n) z_n + lam_n z_perm(n), where lam_n is a
Beta(alpha, alpha) draw scaled by a class-size weight s(N_c) in
[0, 0.5].  Labels are never touched in MFW mode.  The same loop also
runs plain ERM and a label-mixing (mixup-style) ablation, plus the
deferred re-weighting schedule and a warmup + cosine learning rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import metrics as metrics_mod
from .autodiff import Tape
from .imbalance import Dataset
from .model import ModelConfig, ModelParams, TapedModel, init_params
from .rng import RngState, beta_sample, permutation, seeded_rng

__all__ = ["ClassWeights", "MixPlan", "TrainConfig", "DrwWeights", "class_weights_s",
           "make_mix_plan", "mixed_batch_loss", "drw_weights", "lr_at", "train",
           "TrainResult"]

MODE_ERM = "ERM"
MODE_MFW = "MFW"
MODE_MIXUP = "MIXUP"


@dataclass
class ClassWeights:
    """Per-class mixing strengths s_c = 0.5*sigmoid((N_c - mu)/(beta*gamma))."""
    s: np.ndarray
    mu: float
    gamma: float
    beta_softness: float


@dataclass
class MixPlan:
    perm: np.ndarray      # partner index per batch position
    lambdas: np.ndarray   # per-sample mixing coefficient, each in [0, 0.5]


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def class_weights_s(counts: np.ndarray, beta_softness: float) -> ClassWeights:
    """Map class sizes to mixing strengths in [0, 0.5].

    mu is the geometric mean and gamma the (arithmetic, population)
    standard deviation of the counts; beta_softness controls how
    sharply s saturates.  All-equal counts give the flat s = 0.25.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 1):
        raise ValueError(f"counts must be >= 1: {counts.tolist()}")
    if beta_softness <= 0:
        raise ValueError(f"beta_softness must be positive, got {beta_softness}")
    mu = float(np.exp(np.mean(np.log(counts))))
    gamma = float(np.std(counts))
    if gamma == 0.0:
        s = np.full(len(counts), 0.25)
    else:
        s = 0.5 * _sigmoid((counts - mu) / (beta_softness * gamma))
    return ClassWeights(s=s, mu=mu, gamma=gamma, beta_softness=beta_softness)


def make_mix_plan(batch_labels: np.ndarray, weights: ClassWeights, alpha: float,
                  rng: RngState) -> MixPlan:
    """Draw one partner permutation, then one Beta draw per sample (in
    batch order), scaled by the sample's class weight."""
    batch_labels = np.asarray(batch_labels)
    B = len(batch_labels)
    perm = permutation(rng, B)
    lambdas = np.empty(B)
    for n in range(B):
        lambdas[n] = weights.s[batch_labels[n]] * beta_sample(rng, alpha)
    return MixPlan(perm=perm, lambdas=lambdas)


@dataclass
class DrwWeights:
    """Per-class loss weights, normalized to mean 1."""
    weights: np.ndarray

    @classmethod
    def unit(cls, C: int) -> "DrwWeights":
        return cls(np.ones(C))


def drw_weights(counts: np.ndarray, beta_en: float) -> DrwWeights:
    """Effective-number class weights (1-b)/(1-b^N_c), mean-normalized."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 1):
        raise ValueError(f"counts must be >= 1: {counts.tolist()}")
    if not 0 <= beta_en < 1:
        raise ValueError(f"beta_en must be in [0, 1), got {beta_en}")
    if beta_en == 0.0:
        raw = np.ones(len(counts))
    else:
        raw = (1.0 - beta_en) / (1.0 - beta_en ** counts)
    return DrwWeights(raw / raw.mean())


def mixed_batch_loss(params: ModelParams, x_batch: np.ndarray, y_batch: np.ndarray,
                     plan: MixPlan, drw: DrwWeights, mode: str, tape: Tape,
                     model: TapedModel | None = None):
    """Loss of one (possibly mixed) batch, recorded on the tape.

    Returns (loss Var, TapedModel) so callers can reach parameter leaves.
    ERM and MFW keep the labels untouched; MIXUP additionally charges
    each sample lam_n of its partner's label loss.
    """
    y_batch = np.asarray(y_batch)
    B = len(y_batch)
    if len(plan.perm) != B or len(plan.lambdas) != B:
        raise ValueError(f"plan size {len(plan.perm)} does not match batch size {B}")
    if model is None:
        model = TapedModel(params, tape)
    z = model.features_g(np.asarray(x_batch, dtype=np.float64))
    z_partner = tape.gather_rows(z, plan.perm)
    z_mixed = tape.convex_mix(z, z_partner, plan.lambdas)
    scores = model.logits(model.head_h(z_mixed))
    w = drw.weights[y_batch]
    if mode in (MODE_ERM, MODE_MFW):
        loss = tape.softmax_xent(scores, y_batch, w)
    elif mode == MODE_MIXUP:
        own = tape.softmax_xent(scores, y_batch, w * (1.0 - plan.lambdas))
        partner_labels = y_batch[plan.perm]
        partner_w = w * plan.lambdas
        if partner_w.sum() == 0.0:
            # no label mass moved: degenerate to the plain loss
            loss = tape.scale(own, float((w * (1.0 - plan.lambdas)).sum() / w.sum()))
        else:
            other = tape.softmax_xent(scores, partner_labels, partner_w)
            a = float((w * (1.0 - plan.lambdas)).sum() / w.sum())
            b = float(partner_w.sum() / w.sum())
            loss = tape.add(tape.scale(own, a), tape.scale(other, b))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return loss, model


def lr_at(config: "TrainConfig", epoch: int, step_in_epoch: int, steps_per_epoch: int) -> float:
    """Linear warmup to base_lr, then cosine decay hitting 0 at the last step."""
    t = epoch + step_in_epoch / steps_per_epoch
    if config.warmup_epochs > 0 and t < config.warmup_epochs:
        return config.base_lr * t / config.warmup_epochs
    done = (epoch - config.warmup_epochs) * steps_per_epoch + step_in_epoch
    total = (config.epochs - config.warmup_epochs) * steps_per_epoch
    progress = done / (total - 1) if total > 1 else 0.0
    return config.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class TrainConfig:
    epochs: int = 80
    batch_size: int = 128
    base_lr: float = 0.1
    warmup_epochs: int = 5
    momentum: float = 0.9
    alpha: float = 1.0             # Beta coefficient for mixing draws
    beta_softness: float = 0.01    # scale inside the class-size weight
    drw_enabled: bool = False
    drw_fraction: float = 0.8
    drw_beta_en: float = 0.9999
    mode: str = MODE_MFW
    seed: int = 0
    eval_R: int = 200              # feature-deviation subsampling rounds
    eval_every: int = 1            # epochs between metric snapshots
    s_override: float | None = None  # force every class weight to this value

    def __post_init__(self):
        if self.mode not in (MODE_ERM, MODE_MFW, MODE_MIXUP):
            raise ValueError(f"mode must be ERM, MFW or MIXUP, got {self.mode!r}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if not 0 < self.drw_fraction <= 1:
            raise ValueError(f"drw_fraction must be in (0, 1], got {self.drw_fraction}")


@dataclass
class TrainResult:
    params: ModelParams
    history: list
    data_order_hash: str
    step_log: list = field(default_factory=list)


def train(config: TrainConfig, model_config: ModelConfig, train_set: Dataset,
          test_set: Dataset,
          epoch_callback: Callable | None = None,
          log_steps: bool = False) -> TrainResult:
    """SGD-with-momentum loop over shuffled batches with per-batch mixing.

    ERM consumes the same RNG draws as MFW and then zeroes the lambdas,
    so ERM-vs-MFW runs see identical data order.  DRW weights switch on
    at epoch floor(drw_fraction * epochs).  Metrics are collected after
    every epoch with mixing disabled.
    """
    import hashlib

    weights = class_weights_s(train_set.counts, config.beta_softness)
    if config.s_override is not None:
        weights.s = np.full(train_set.num_classes, float(config.s_override))
    drw_on = drw_weights(train_set.counts, config.drw_beta_en) if config.drw_enabled else None
    drw_start = math.floor(config.drw_fraction * config.epochs)

    params = init_params(model_config, seeded_rng(config.seed, stream=1))
    rng = seeded_rng(config.seed, stream=2)
    eval_seed = config.seed

    velocity = np.zeros(params.flatten().size)
    order_hash = hashlib.sha256()
    history = []
    step_log = []
    N = train_set.size
    steps_per_epoch = (N + config.batch_size - 1) // config.batch_size

    for epoch in range(config.epochs):
        drw = drw_on if (drw_on is not None and epoch >= drw_start) else DrwWeights.unit(train_set.num_classes)
        order = permutation(rng, N)
        order_hash.update(order.astype(np.int64).tobytes())
        for step in range(steps_per_epoch):
            idx = order[step * config.batch_size:(step + 1) * config.batch_size]
            xb, yb = train_set.features[idx], train_set.labels[idx]
            plan = make_mix_plan(yb, weights, config.alpha, rng)
            if config.mode == MODE_ERM:
                plan.lambdas[:] = 0.0
            tape = Tape()
            try:
                loss, model = mixed_batch_loss(params, xb, yb, plan, drw, config.mode, tape)
            except FloatingPointError as e:
                raise FloatingPointError(f"{e} at epoch {epoch}, step {step}") from e
            loss_val = float(loss.value)
            if not np.isfinite(loss_val):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, step {step}")
            adjoints = tape.backward(loss)
            grad = np.concatenate([g.ravel() for g in model.param_grads(adjoints)])
            lr = lr_at(config, epoch, step, steps_per_epoch)
            velocity = config.momentum * velocity + grad
            theta = params.flatten() - lr * velocity
            params.unflatten_into(theta)
            if log_steps:
                step_log.append({"epoch": epoch, "step": step, "loss": loss_val,
                                 "lr": lr, "drw_active": drw is drw_on,
                                 "class_loss_weights": drw.weights.tolist()})
        if epoch % config.eval_every == 0 or epoch == config.epochs - 1:
            snap = metrics_mod.snapshot(params, train_set, test_set, epoch=epoch,
                                        R=config.eval_R,
                                        rng=seeded_rng(eval_seed, stream=1000 + epoch))
            history.append(snap)
            if epoch_callback is not None:
                epoch_callback(epoch, params, snap)

    return TrainResult(params=params, history=history,
                       data_order_hash=order_hash.hexdigest(), step_log=step_log)

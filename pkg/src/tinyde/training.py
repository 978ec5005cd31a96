"""Losses, optimizers, and the two training regimes.

Two-phase (sequential) training: train the full model once with member-0
normalization active, freeze the shared weights, then fit each member's
re-initialized normalization parameters separately.  Single-shot
(parallel) training tiles each minibatch M times and trains all members
jointly; shared weights receive the average of the member gradients by
construction of the tiled mean loss.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .ensemble import TinyDEModel
from .errors import ConfigError, ModeError, StateError


# ---------------------------------------------------------------------------
# Losses (scalar + exact gradients)


def loss_mse(pred: np.ndarray, target: np.ndarray):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ConfigError(f"mse shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    dpred = 2.0 * diff / diff.size
    return loss, dpred


def loss_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch, via log-sum-exp."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    B, K = logits.shape
    if labels.shape != (B,):
        raise ConfigError(f"labels shape {labels.shape} != ({B},)")
    labels = labels.astype(np.int64)
    if np.any(labels < 0) or np.any(labels >= K):
        raise ValueError(f"labels out of range [0,{K})")
    zmax = logits.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
    loss = float(np.mean(lse - logits[np.arange(B), labels]))
    probs = np.exp(logits - zmax)
    probs /= probs.sum(axis=1, keepdims=True)
    dlogits = probs
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B
    return loss, dlogits


def loss_gaussian_nll(mean: np.ndarray, log_var: np.ndarray, target: np.ndarray):
    """Mean Gaussian NLL: 0.5*(log 2pi + log_var + (t-mu)^2 / exp(log_var))."""
    mean = np.asarray(mean, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if not (mean.shape == log_var.shape == target.shape):
        raise ConfigError("gaussian nll shapes differ")
    inv_var = np.exp(-log_var)
    sq = (target - mean) ** 2
    n = mean.size
    loss = float(np.mean(0.5 * (np.log(2.0 * np.pi) + log_var + sq * inv_var)))
    dmean = (mean - target) * inv_var / n
    dlog_var = 0.5 * (1.0 - sq * inv_var) / n
    return loss, (dmean, dlog_var)


# ---------------------------------------------------------------------------
# Optimizer


class Optimizer:
    """SGD or Adam over a flat name -> array parameter view."""

    def __init__(self, kind: str = "adam", lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if kind not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {kind!r}")
        self.kind = kind
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Apply one update in place to every parameter that has a gradient."""
        self.t += 1
        for key, g in grads.items():
            p = params[key]
            if p.shape != g.shape:
                raise StateError(f"grad shape {g.shape} != param {p.shape} for {key}")
            if self.kind == "sgd":
                p -= self.lr * g
                continue
            m = self._m.setdefault(key, np.zeros_like(p))
            v = self._v.setdefault(key, np.zeros_like(p))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            mhat = m / (1.0 - self.beta1 ** self.t)
            vhat = v / (1.0 - self.beta2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


# ---------------------------------------------------------------------------
# Configuration and logging


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    loss: str = "mse"  # "mse" | "cross_entropy"
    optimizer: str = "adam"
    bootstrap: bool = False
    member_seeds: list[int] = field(default_factory=list)

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 for batch statistics")
        if self.loss not in ("mse", "cross_entropy"):
            raise ConfigError(f"unknown loss {self.loss!r}")


@dataclass
class TrainLog:
    entries: list[tuple[int, float, float]] = field(default_factory=list)

    def append(self, epoch: int, train_loss: float, eval_metric: float = float("nan")):
        self.entries.append((int(epoch), float(train_loss), float(eval_metric)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "eval_metric"])
            for epoch, loss, metric in self.entries:
                writer.writerow([epoch, repr(loss), repr(metric)])


def _loss_fn(cfg: TrainConfig):
    return loss_mse if cfg.loss == "mse" else loss_cross_entropy


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    """Seeded shuffled minibatch index blocks; a trailing singleton is dropped
    (batch statistics would be degenerate)."""
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start:start + batch_size]
        if idx.size < 2:
            continue
        yield idx


def _epoch_loss(batch_losses: list[float]) -> float:
    return float(np.mean(batch_losses)) if batch_losses else float("nan")


# ---------------------------------------------------------------------------
# Training regimes


def train_full(model: TinyDEModel, X: np.ndarray, y: np.ndarray,
               cfg: TrainConfig) -> TrainLog:
    """Phase 1: update every parameter, member-0 normalization active."""
    cfg.validate()
    if model.mode != "sequential":
        raise ModeError("train_full runs in sequential mode")
    if any(lin.frozen for lin in model.linears):
        raise StateError("train_full requires unfrozen shared layers")
    loss_fn = _loss_fn(cfg)
    opt = Optimizer(cfg.optimizer, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    model.reset_counters()
    log = TrainLog()
    for epoch in range(cfg.epochs):
        losses = []
        for idx in _batches(len(X), cfg.batch_size, rng):
            out, cache = model._forward_member_cached(X[idx], train=True)
            loss, dout = loss_fn(out, y[idx])
            _, grads, c = model.backward_member(cache, dout)
            params = {}
            for i, lin in enumerate(model.linears):
                params[f"linear{i}.W"] = lin.W
                params[f"linear{i}.b"] = lin.b
            for i, bank in enumerate(model.banks):
                member = bank.member(c)
                params[f"bank{i}.gamma"] = member.gamma
                params[f"bank{i}.beta"] = member.beta
            opt.step(params, grads)
            losses.append(loss)
        log.append(epoch, _epoch_loss(losses))
    return log


def train_member_norms(model: TinyDEModel, m: int, X: np.ndarray, y: np.ndarray,
                       cfg: TrainConfig) -> TrainLog:
    """Phase 2: fit member m's normalization parameters on a frozen trunk."""
    cfg.validate()
    if model.mode != "sequential":
        raise ModeError("train_member_norms runs in sequential mode")
    if not all(lin.frozen for lin in model.linears):
        raise StateError("shared layers must be frozen before member training")
    if m < 0 or m >= model.M:
        raise IndexError(f"member index {m} out of range for M={model.M}")
    if cfg.bootstrap:
        if len(cfg.member_seeds) <= m:
            raise ConfigError("bootstrap requires member_seeds[m]")
        boot_rng = np.random.default_rng(cfg.member_seeds[m])
        sample = boot_rng.integers(0, len(X), size=len(X))
        X, y = X[sample], y[sample]
    loss_fn = _loss_fn(cfg)
    opt = Optimizer(cfg.optimizer, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    for bank in model.banks:
        bank.counter = m
    log = TrainLog()
    try:
        for epoch in range(cfg.epochs):
            losses = []
            for idx in _batches(len(X), cfg.batch_size, rng):
                out, cache = model._forward_member_cached(X[idx], train=True)
                loss, dout = loss_fn(out, y[idx])
                _, grads, c = model.backward_member(cache, dout)
                params = {}
                norm_grads = {}
                for i, bank in enumerate(model.banks):
                    member = bank.member(c)
                    params[f"bank{i}.gamma"] = member.gamma
                    params[f"bank{i}.beta"] = member.beta
                    norm_grads[f"bank{i}.gamma"] = grads[f"bank{i}.gamma"]
                    norm_grads[f"bank{i}.beta"] = grads[f"bank{i}.beta"]
                opt.step(params, norm_grads)
                losses.append(loss)
            log.append(epoch, _epoch_loss(losses))
    finally:
        model.reset_counters()
    return log


def train_single_shot(model: TinyDEModel, X: np.ndarray, y: np.ndarray,
                      cfg: TrainConfig) -> TrainLog:
    """Joint training of all members in parallel mode.

    Each minibatch is tiled M times; the loss is the mean over the tiled
    batch, so shared weights receive exactly the average of the M
    member-wise gradients while each member's gamma/beta sees only its
    own block.
    """
    cfg.validate()
    if model.mode != "parallel":
        raise ModeError("train_single_shot requires parallel mode")
    if any(lin.frozen for lin in model.linears):
        raise StateError("train_single_shot requires unfrozen shared layers")
    loss_fn = _loss_fn(cfg)
    opt = Optimizer(cfg.optimizer, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    M = model.M
    log = TrainLog()
    for epoch in range(cfg.epochs):
        losses = []
        for idx in _batches(len(X), cfg.batch_size, rng):
            out, cache = model._forward_parallel_cached(X[idx], train=True)
            if cfg.loss == "cross_entropy":
                target = np.tile(y[idx], M)
            else:
                target = np.tile(y[idx], (M, 1))
            loss, dout = loss_fn(out, target)
            _, grads = model.backward_parallel(cache, dout)
            params = {}
            for i, lin in enumerate(model.linears):
                params[f"linear{i}.W"] = lin.W
                params[f"linear{i}.b"] = lin.b
            for i, bank in enumerate(model.banks):
                params[f"bank{i}.gamma"] = bank.stacked.gamma
                params[f"bank{i}.beta"] = bank.stacked.beta
            opt.step(params, grads)
            losses.append(loss)
        log.append(epoch, _epoch_loss(losses))
    return log


def train_two_phase(model: TinyDEModel, X: np.ndarray, y: np.ndarray,
                    cfg: TrainConfig, retune_member0: bool = False) -> dict[int, TrainLog]:
    """Full two-phase recipe: phase-1 full training, freeze, then per-member
    normalization fitting on re-initialized members 1..M-1 (optionally
    re-tuning member 0 as well)."""
    logs = {-1: train_full(model, X, y, cfg)}
    model.freeze_shared()
    first = 0 if retune_member0 else 1
    for m in range(first, model.M):
        model.reinit_norm_member(m)
        member_cfg = TrainConfig(
            epochs=cfg.epochs, batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            seed=cfg.seed + 1 + m,
            loss=cfg.loss, optimizer=cfg.optimizer,
            bootstrap=cfg.bootstrap, member_seeds=cfg.member_seeds,
        )
        logs[m] = train_member_norms(model, m, X, y, member_cfg)
    return logs

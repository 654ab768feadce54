"""Objectives, gradients, finite-difference verification and the fit loop."""

from __future__ import annotations

import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from .core import Episode
from .hazard_model import (
    ModelDims,
    ModelParams,
    backward,
    cumulative_failure,
    empirical_base_rates,
    init_params,
    run_network,
)
from .labeling import SmoothingConfig, SurvivalTargets, hazard_targets, survtls_targets

log = logging.getLogger(__name__)

OBJECTIVES = ("eep", "dsa_full", "dsa_trunc", "survtls")

# below this gradient magnitude the difference quotient is mostly rounding noise
FD_FLOOR = 1e-6


class DivergenceError(RuntimeError):
    def __init__(self, epoch, batch, value):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class TrainConfig:
    """Optimisation settings.

    ``horizon`` is the prediction horizon h. ``max_horizon`` is the number of
    hazard outputs K (ignored for ``eep``, which always has one output).
    ``loss_horizon`` is where the likelihood is cut: h for ``dsa_trunc`` and
    ``survtls``, K for ``dsa_full`` unless set explicitly.
    """

    objective: str = "dsa_trunc"
    horizon: int = 24
    max_horizon: Optional[int] = None
    loss_horizon: Optional[int] = None
    batch_size: int = 64
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l1_strength: float = 0.0
    patience: int = 10
    max_epochs: int = 100
    seed: int = 0
    embed_dim: int = 16
    hidden_dim: int = 32
    smoothing: Optional[SmoothingConfig] = None

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.l1_strength < 0:
            raise ValueError("l1_strength must be >= 0")
        if self.max_horizon is None:
            self.max_horizon = self.horizon
        if self.max_horizon < self.horizon:
            raise ValueError("max_horizon must be >= horizon")
        if self.loss_horizon is None:
            self.loss_horizon = self.max_horizon if self.objective == "dsa_full" else self.horizon
        if not 1 <= self.loss_horizon <= self.max_horizon:
            raise ValueError("loss_horizon must lie in [1, max_horizon]")
        if self.objective == "survtls" and self.smoothing is None:
            raise ValueError("survtls needs a SmoothingConfig")

    @property
    def n_outputs(self) -> int:
        return 1 if self.objective == "eep" else self.max_horizon


@dataclass
class LossReport:
    total: float
    data_term: float
    l1_term: float
    weighted_term_count: int


@dataclass
class SequenceBatch:
    """Padded stays with per-step targets; padding and unlabeled steps have w = 0."""

    X: np.ndarray
    y: np.ndarray
    w: np.ndarray
    lengths: np.ndarray
    stay_ids: list = field(default_factory=list)

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx) -> "SequenceBatch":
        idx = np.asarray(idx)
        T = int(self.lengths[idx].max())
        return SequenceBatch(
            X=self.X[idx, :T],
            y=self.y[idx, :T],
            w=self.w[idx, :T],
            lengths=self.lengths[idx],
            stay_ids=[self.stay_ids[i] for i in idx],
        )


def episode_targets(episode: Episode, config: TrainConfig) -> SurvivalTargets:
    """Targets of one episode under ``config.objective``."""
    if config.objective == "eep":
        steps = np.arange(episode.label_start, episode.label_end + 1)
        if episode.censored:
            y = np.zeros((len(steps), 1))
        else:
            y = (episode.time_to_event() <= config.horizon).astype(np.float64)[:, None]
        return SurvivalTargets(steps=steps, y=y, w=np.ones_like(y), kind="hard")
    if config.objective == "survtls":
        sm = SmoothingConfig(lengthscale=config.smoothing.lengthscale, truncation=config.max_horizon)
        tg = survtls_targets(episode, sm)
        w = tg.w.copy()
        w[:, config.loss_horizon:] = 0.0
        return SurvivalTargets(steps=tg.steps, y=tg.y, w=w, kind=tg.kind)
    return hazard_targets(episode, config.max_horizon, config.loss_horizon)


def build_batch(episodes, config: TrainConfig) -> SequenceBatch:
    """Merge each stay's episodes onto its longest history.

    Label ranges of one stay's episodes are disjoint and histories are
    prefixes of each other, so one recurrent pass per stay serves them all.
    """
    groups = defaultdict(list)
    order = []
    for ep in episodes:
        if ep.stay_id not in groups:
            order.append(ep.stay_id)
        groups[ep.stay_id].append(ep)
    K = config.n_outputs
    hist = []
    targets = []
    for sid in order:
        eps = groups[sid]
        longest = max(eps, key=lambda e: e.history.shape[0])
        T = longest.history.shape[0]
        y = np.zeros((T, K))
        w = np.zeros((T, K))
        for ep in eps:
            n = ep.history.shape[0]
            if not np.array_equal(ep.history, longest.history[:n], equal_nan=True):
                raise ValueError(f"stay {sid}: episode histories are not prefixes of each other")
            tg = episode_targets(ep, config)
            y[tg.steps] = tg.y
            w[tg.steps] = tg.w
        hist.append(longest.history)
        targets.append((y, w))
    if not hist:
        raise ValueError("no episodes")
    lengths = np.array([h.shape[0] for h in hist])
    T = int(lengths.max())
    d = hist[0].shape[1]
    X = np.zeros((len(hist), T, d))
    Y = np.zeros((len(hist), T, K))
    W = np.zeros((len(hist), T, K))
    for i, (h, (y, w)) in enumerate(zip(hist, targets)):
        X[i, : len(h)] = h
        Y[i, : len(h)] = y
        W[i, : len(h)] = w
    return SequenceBatch(X=X, y=Y, w=W, lengths=lengths, stay_ids=order)


def weighted_bce_sums(logits, y, w):
    """``(sum of w * BCE, d sum / d logits, number of terms with w > 0)``."""
    active = w > 0
    bce = np.logaddexp(0.0, logits) - y * logits
    total = float(np.sum(np.where(active, w * bce, 0.0)))
    grad = np.where(active, w * (expit(logits) - y), 0.0)
    return total, grad, int(np.count_nonzero(active))


def compute_loss(params: ModelParams, batch: SequenceBatch, config: TrainConfig, need_grad: bool = True):
    """Mean weighted BCE over active terms plus the L1 penalty on embedding weights.

    Returns ``(LossReport, grads)``; ``grads`` is None when the batch has no
    active term or ``need_grad`` is False.
    """
    logits, cache = run_network(params, batch.X)
    s, g, count = weighted_bce_sums(logits, batch.y, batch.w)
    l1 = config.l1_strength * float(np.sum(np.abs(params["W_emb"])))
    if count == 0:
        log.warning("batch has no weighted terms; skipped")
        return LossReport(total=l1, data_term=0.0, l1_term=l1, weighted_term_count=0), None
    data = s / count
    report = LossReport(total=data + l1, data_term=data, l1_term=l1, weighted_term_count=count)
    if not need_grad:
        return report, None
    grads = backward(params, cache, g / count)
    grads["W_emb"] = grads["W_emb"] + config.l1_strength * np.sign(params["W_emb"])
    return report, grads


def _loss_value(params, batch, config) -> float:
    report, _ = compute_loss(params, batch, config, need_grad=False)
    return report.total


def finite_difference_check(params, batch, config, n_probes: int = 20, step: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Error per probe is ``|g - fd| / max(|g|, |fd|, FD_FLOOR)``.
    """
    if not 1e-6 <= step <= 1e-3:
        raise ValueError("step must lie in [1e-6, 1e-3]")
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    _, grads = compute_loss(params, batch, config)
    if grads is None:
        grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        grads["W_emb"] = config.l1_strength * np.sign(params["W_emb"])
    names = list(params.tensors)
    sizes = np.array([params[k].size for k in names])
    rng = np.random.Generator(np.random.PCG64(seed))
    probes = rng.choice(sizes.sum(), size=min(n_probes, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    work = params.copy()
    for flat in probes:
        i = int(np.searchsorted(offsets, flat, side="right") - 1)
        name, j = names[i], int(flat - offsets[i])
        arr = work.tensors[name].reshape(-1)
        orig = arr[j]
        arr[j] = orig + step
        up = _loss_value(work, batch, config)
        arr[j] = orig - step
        down = _loss_value(work, batch, config)
        arr[j] = orig
        fd = (up - down) / (2 * step)
        analytic = grads[name].reshape(-1)[j]
        worst = max(worst, abs(analytic - fd) / max(abs(analytic), abs(fd), FD_FLOOR))
    return worst


# --------------------------------------------------------------------------
# optimisation
# --------------------------------------------------------------------------


class Adam:
    def __init__(self, params: ModelParams, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.t = 0

    def step(self, params: ModelParams, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params.tensors[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def batch_loss(params, batch: SequenceBatch, config, chunk: int = 256) -> float:
    """Loss of a whole split, aggregated exactly across chunks."""
    total = 0.0
    count = 0
    for start in range(0, len(batch), chunk):
        sub = batch.subset(np.arange(start, min(start + chunk, len(batch))))
        logits, _ = run_network(params, sub.X)
        s, _, c = weighted_bce_sums(logits, sub.y, sub.w)
        total += s
        count += c
    l1 = config.l1_strength * float(np.sum(np.abs(params["W_emb"])))
    return (total / count if count else 0.0) + l1


def failure_at_horizon(params: ModelParams, X: np.ndarray, config: TrainConfig) -> np.ndarray:
    """``F(h | X_t)`` for a padded batch, shape ``(B, T)``."""
    logits, _ = run_network(params, X)
    out = expit(logits)
    if config.objective == "eep":
        return out[..., 0]
    B, T, K = out.shape
    risk = cumulative_failure(out.reshape(B * T, K), config.horizon)
    return risk.F[:, -1].reshape(B, T)


def timestep_scores(params, batch: SequenceBatch, eep_batch: SequenceBatch, config, chunk: int = 256):
    """Flattened ``(scores, labels)`` over labeled steps, for timestep AuPRC."""
    scores, labels = [], []
    for start in range(0, len(batch), chunk):
        idx = np.arange(start, min(start + chunk, len(batch)))
        sub = batch.subset(idx)
        lab = eep_batch.subset(idx)
        F = failure_at_horizon(params, sub.X, config)
        mask = lab.w[..., 0] > 0
        scores.append(F[mask])
        labels.append(lab.y[..., 0][mask])
    return np.concatenate(scores), np.concatenate(labels).astype(np.int64)


def initial_params(train: SequenceBatch, config: TrainConfig, d: int) -> ModelParams:
    K = config.n_outputs
    tg = SurvivalTargets(steps=np.arange(0), y=train.y.reshape(-1, K), w=train.w.reshape(-1, K), kind="hard")
    rates, _ = empirical_base_rates([tg], K)
    dims = ModelDims(d=d, m=config.embed_dim, n=config.hidden_dim, K=K)
    return init_params(dims, rates, config.seed)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_timestep_auprc: float
    elapsed_s: float


def fit(train_episodes, val_episodes, config: TrainConfig, progress=None):
    """Mini-batch Adam with early stopping on validation loss.

    Returns ``(best_params, records)``.
    """
    from .event_metrics import timestep_auprc

    if not train_episodes or not val_episodes:
        raise ValueError("train and validation splits must be non-empty")
    train = build_batch(train_episodes, config)
    val = build_batch(val_episodes, config)
    eep_cfg = TrainConfig(objective="eep", horizon=config.horizon)
    val_eep = val if config.objective == "eep" else build_batch(val_episodes, eep_cfg)

    params = initial_params(train, config, train.X.shape[2])
    opt = Adam(params, config.learning_rate, config.beta1, config.beta2, config.eps)
    rng = np.random.Generator(np.random.PCG64(config.seed + 1))
    best = params.copy()
    best_val = math.inf
    since_best = 0
    records = []
    t0 = time.perf_counter()
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train))
        losses = []
        for b, start in enumerate(range(0, len(train), config.batch_size)):
            sub = train.subset(order[start: start + config.batch_size])
            report, grads = compute_loss(params, sub, config)
            if not math.isfinite(report.total):
                raise DivergenceError(epoch, b, report.total)
            if grads is None:
                continue
            losses.append(report.total)
            opt.step(params, grads)
        val_loss = batch_loss(params, val, config)
        if not math.isfinite(val_loss):
            raise DivergenceError(epoch, -1, val_loss)
        scores, labels = timestep_scores(params, val, val_eep, config)
        try:
            auprc = timestep_auprc(scores, labels)
        except ValueError:
            auprc = float("nan")
        rec = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)) if losses else float("nan"),
            val_loss=val_loss,
            val_timestep_auprc=auprc,
            elapsed_s=time.perf_counter() - t0,
        )
        records.append(rec)
        if progress is not None:
            progress(rec)
        log.info("epoch %d train %.5f val %.5f auprc %.4f", epoch, rec.train_loss, val_loss, auprc)
        if val_loss < best_val:
            best_val = val_loss
            best = params.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    return best, records

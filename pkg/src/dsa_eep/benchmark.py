"""Seeded synthetic benchmark: horizon ablation and policy comparison.

Shared by the ``ablate-horizon`` command and the acceptance suite. A cohort is
generated from ``GenConfig`` defaults, split by stay into train / validation /
test, and models are scored on the test stays only. Priority-policy settings
are picked on the validation stays.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .alarm_policy import PolicyConfig
from .core import split_episodes
from .event_metrics import CohortRisk, at_precision, event_pr_curve, timestep_auprc
from .hazard_model import cumulative_failure, predict
from .labeling import eep_labels
from .synthgen import GenConfig, generate_cohort
from .training import TrainConfig, fit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchmarkConfig:
    # 360 train / 80 validation / 360 test stays; a large test split keeps
    # event AuPRC noise well under the effect sizes being compared
    n_stays: int = 800
    horizon: int = 24
    fractions: tuple = (0.45, 0.1, 0.45)
    learning_rate: float = 3e-3
    batch_size: int = 64
    max_epochs: int = 40
    patience: int = 5
    embed_dim: int = 16
    hidden_dim: int = 32
    # picked on EEP validation AuPRC over (0, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2), shared by all objectives
    l1_strength: float = 3e-4
    gammas: tuple = (0.01, 0.05, 0.1, 0.5, 2.0)
    h_max_fractions: tuple = (0.5, 1.0, 2.0, 4.0)
    gen: dict = field(default_factory=dict)

    def gen_config(self, seed: int) -> GenConfig:
        return GenConfig(n_stays=self.n_stays, seed=seed, **self.gen)

    def train_config(self, objective: str, seed: int, max_horizon=None) -> TrainConfig:
        K = max_horizon or self.horizon
        return TrainConfig(
            objective=objective,
            horizon=self.horizon,
            max_horizon=K,
            loss_horizon=K if objective != "eep" else None,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            patience=self.patience,
            max_epochs=self.max_epochs,
            seed=seed,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            l1_strength=self.l1_strength,
        )

    def policy_grid(self):
        h = self.horizon
        for frac in self.h_max_fractions:
            for g in self.gammas:
                yield PolicyConfig(mode="prioritized", sigma=1, gamma=g, h_max=max(1, int(round(frac * h))))


@dataclass
class Split:
    train: list
    val: list
    test: list


def split_stays(stays, fractions=(0.7, 0.1, 0.2)) -> Split:
    """Contiguous split; generated stays are exchangeable so no shuffle is needed."""
    n = len(stays)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    if n_train < 1 or n_val < 1 or n - n_train - n_val < 1:
        raise ValueError(f"cannot split {n} stays into {fractions}")
    return Split(stays[:n_train], stays[n_train:n_train + n_val], stays[n_train + n_val:])


def episodes_of(stays):
    return [e for s in stays for e in split_episodes(s).episodes]


def risk_rows(params, config: TrainConfig, stays):
    """Per-stay risk: ``(T, 1)`` F(h) for eep, ``(T, h)`` F(1..h) otherwise."""
    out = []
    for s in stays:
        hz = predict(params, s.features)
        out.append(hz if config.objective == "eep" else cumulative_failure(hz, config.horizon).F)
    return out


def timestep_auprc_of(risks, stays, h: int) -> float:
    scores, labels = [], []
    for r, s in zip(risks, stays):
        y = eep_labels(s, h).y
        keep = y >= 0
        scores.append(np.asarray(r)[keep, -1])
        labels.append(y[keep])
    return timestep_auprc(np.concatenate(scores), np.concatenate(labels))


@dataclass
class TrainedModel:
    name: str
    config: TrainConfig
    params: object
    epochs: int
    seconds: float
    val_risks: list
    test_risks: list

    @property
    def max_horizon(self) -> int:
        return self.config.n_outputs if self.config.objective != "eep" else self.config.horizon


class BenchmarkRun:
    """One seeded cohort; trained models are cached by name."""

    def __init__(self, seed: int, bench: BenchmarkConfig = BenchmarkConfig()):
        self.seed = seed
        self.bench = bench
        stays, _ = generate_cohort(bench.gen_config(seed))
        self.split = split_stays(stays, bench.fractions)
        self._train_eps = episodes_of(self.split.train)
        self._val_eps = episodes_of(self.split.val)
        self.models = {}

    def model(self, objective: str, max_horizon=None) -> TrainedModel:
        cfg = self.bench.train_config(objective, self.seed, max_horizon)
        name = objective if objective == "eep" else f"{objective}_K{cfg.max_horizon}"
        if name not in self.models:
            t0 = time.perf_counter()
            params, records = fit(self._train_eps, self._val_eps, cfg)
            secs = time.perf_counter() - t0
            log.info("seed %d %s: %d epochs in %.1fs", self.seed, name, len(records), secs)
            self.models[name] = TrainedModel(
                name=name,
                config=cfg,
                params=params,
                epochs=len(records),
                seconds=secs,
                val_risks=risk_rows(params, cfg, self.split.val),
                test_risks=risk_rows(params, cfg, self.split.test),
            )
        return self.models[name]

    def cohort(self, risks, which: str) -> CohortRisk:
        stays = getattr(self.split, which)
        return CohortRisk.from_stays(risks, [s.events for s in stays], self.bench.horizon)

    def test_timestep_auprc(self, m: TrainedModel) -> float:
        return timestep_auprc_of(m.test_risks, self.split.test, self.bench.horizon)


def _event_result(points, auprc, policy):
    op = at_precision(points, 0.7)
    return {
        "event_auprc": auprc,
        "policy": policy,
        "recall_at_70": None if op is None else op.event_recall,
        "distance_at_70": None if op is None else op.mean_first_alarm_distance,
    }


def horizon_ablation(run: BenchmarkRun, factors=(1, 2, 4)) -> list:
    """Timestep AuPRC at h of truncated-likelihood models with K = factor * h."""
    rows = []
    for f in factors:
        m = run.model("dsa_trunc", max_horizon=f * run.bench.horizon)
        rows.append({
            "seed": run.seed,
            "K": m.config.max_horizon,
            "timestep_auprc": run.test_timestep_auprc(m),
            "epochs": m.epochs,
        })
    return rows


def tune_priority(run: BenchmarkRun, m: TrainedModel) -> PolicyConfig:
    """Grid search of (gamma, h_max) on validation event AuPRC."""
    cohort = run.cohort(m.val_risks, "val")
    best, best_au = None, -1.0
    for pol in run.bench.policy_grid():
        _, au = event_pr_curve(cohort, pol)
        if au > best_au:
            best, best_au = pol, au
    return best


def policy_comparison(run: BenchmarkRun) -> dict:
    """EEP + fixed threshold against truncated DSA + prioritized policy, on test stays."""
    eep = run.model("eep")
    dsa = run.model("dsa_trunc")
    fixed = PolicyConfig(mode="fixed", sigma=1)
    out = {"seed": run.seed}
    pts, au = event_pr_curve(run.cohort(eep.test_risks, "test"), fixed)
    out["eep_fixed"] = _event_result(pts, au, "fixed")
    pts, au = event_pr_curve(run.cohort(dsa.test_risks, "test"), fixed)
    out["dsa_fixed"] = _event_result(pts, au, "fixed")
    pol = tune_priority(run, dsa)
    pts, au = event_pr_curve(run.cohort(dsa.test_risks, "test"), pol)
    out["dsa_prioritized"] = _event_result(pts, au, f"prioritized gamma={pol.gamma} h_max={pol.h_max}")
    return out


"""Synthetic cohort with a known onset process.

A latent AR(1) risk drives per-step event onsets; observed covariates carry a
noisy, exponentially discounted preview of the *future* latent path, so the
nearer an onset is, the stronger its footprint in the features.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .core import Stay, validate_stay


@dataclass(frozen=True)
class GenConfig:
    """Cohort generator settings.

    ``onset_logit`` is the log-odds of an onset when the latent risk is zero;
    the per-step onset probability is ``sigmoid(onset_logit + hazard_scale * z_t)``.
    Set ``onset_logit=-inf`` to switch events off.
    """

    n_stays: int = 500
    min_len: int = 100
    max_len: int = 300
    n_features: int = 12
    latent_ar_coeff: float = 0.9
    hazard_scale: float = 3.0
    onset_logit: float = -8.0
    signal_decay: float = 6.0
    noise_std: float = 1.0
    event_duration: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.n_stays < 1:
            raise ValueError("n_stays must be positive")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if self.n_features < 1:
            raise ValueError("n_features must be positive")
        if not 0.0 < self.latent_ar_coeff < 1.0:
            raise ValueError("latent_ar_coeff must lie in (0, 1)")
        for name in ("hazard_scale", "signal_decay", "noise_std"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.event_duration < 1:
            raise ValueError("event_duration must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def lookahead(self) -> int:
        # exp(-5) ~ 0.7% residual weight
        return int(math.ceil(5.0 * self.signal_decay))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GroundTruth:
    """True per-step onset probability; zero on steps inside an event."""

    onset_prob: dict = field(default_factory=dict)


def _projection(config: GenConfig, rng: np.random.Generator):
    """Cohort-level lead loadings ``(n_features, lookahead + 1)`` and offsets.

    Each signal feature mixes the discounted lead terms with its own random
    weights, so together they resolve *when* the latent will be high, not just
    whether. Rows are scaled to unit norm; the last third of features is null.
    """
    lead = np.exp(-np.arange(config.lookahead + 1) / config.signal_decay)
    loadings = rng.normal(size=(config.n_features, config.lookahead + 1)) * lead[None, :]
    loadings /= np.linalg.norm(loadings, axis=1, keepdims=True)
    n_null = config.n_features // 3
    loadings[config.n_features - n_null:] = 0.0
    offsets = rng.normal(0.0, 0.5, size=config.n_features)
    return loadings, offsets


def _simulate_stay(config: GenConfig, index: int, seq: np.random.SeedSequence, loadings, offsets):
    rng = np.random.Generator(np.random.PCG64(seq))
    T = int(rng.integers(config.min_len, config.max_len + 1))
    a = config.latent_ar_coeff
    total = T + config.lookahead
    innov = rng.normal(0.0, math.sqrt(1.0 - a * a), size=total)
    z = np.empty(total)
    z[0] = rng.normal()
    for t in range(1, total):
        z[t] = a * z[t - 1] + innov[t]

    p = expit(config.onset_logit + config.hazard_scale * z[:T])
    u = rng.random(T)
    events = np.zeros(T, dtype=np.int64)
    truth = np.zeros(T)
    t = 0
    while t < T:
        truth[t] = p[t]
        if u[t] < p[t]:
            stop = min(T, t + config.event_duration)
            events[t:stop] = 1
            # one quiet step after each event keeps back-to-back onsets distinguishable
            t = stop + 1
        else:
            t += 1

    # leads[t, delta] = z[t + delta]
    leads = np.lib.stride_tricks.sliding_window_view(z, config.lookahead + 1)[:T]
    noise = rng.normal(0.0, config.noise_std, size=(T, config.n_features))
    features = leads @ loadings.T + offsets[None, :] + noise
    stay = Stay(id=f"s{index:05d}", features=features, events=events)
    return validate_stay(stay), truth


def generate_cohort(config: GenConfig, threads: int = 1):
    """Return ``(stays, ground_truth)``; output depends only on ``config``."""
    root = np.random.SeedSequence(config.seed)
    children = root.spawn(config.n_stays + 1)
    loadings, offsets = _projection(config, np.random.Generator(np.random.PCG64(children[0])))

    def work(i):
        return _simulate_stay(config, i, children[i + 1], loadings, offsets)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(config.n_stays)))
    else:
        results = [work(i) for i in range(config.n_stays)]
    stays = [r[0] for r in results]
    gt = GroundTruth(onset_prob={s.id: r[1] for s, r in zip(stays, results)})
    return stays, gt


def write_ground_truth_csv(path, stays, truth: GroundTruth) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stay_id", "step", "onset_prob"])
        for s in stays:
            for t, p in enumerate(truth.onset_prob[s.id]):
                w.writerow([s.id, t, repr(float(p))])

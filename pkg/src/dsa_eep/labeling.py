"""Training targets: fixed-horizon EEP labels, hard hazard targets and survTLS."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .core import Episode, Stay

MASKED = -1
SURVIVAL_FLOOR = 1e-12


@dataclass(frozen=True)
class EepLabels:
    """Per-step binary labels; ``MASKED`` on steps inside an event."""

    y: np.ndarray
    horizon: int

    @property
    def valid(self) -> np.ndarray:
        return self.y != MASKED


@dataclass(frozen=True)
class SurvivalTargets:
    """Hazard labels ``y`` and weights ``w``, both ``(n_steps, K)``.

    Row ``i`` belongs to step ``steps[i]``; column ``k - 1`` to horizon ``k``.
    """

    steps: np.ndarray
    y: np.ndarray
    w: np.ndarray
    kind: str

    @property
    def K(self) -> int:
        return int(self.y.shape[1])


@dataclass(frozen=True)
class SmoothingConfig:
    lengthscale: float
    truncation: int

    def __post_init__(self):
        if not self.lengthscale > 0:
            raise ValueError("lengthscale must be positive")
        if self.truncation < 1:
            raise ValueError("truncation must be >= 1")


def eep_labels(stay: Stay, h: int) -> EepLabels:
    if h < 1:
        raise ValueError("horizon must be >= 1")
    events = np.asarray(stay.events)
    T = len(events)
    y = np.zeros(T, dtype=np.int64)
    next_onset = None
    # walk backwards remembering the closest onset strictly ahead
    for t in range(T - 1, -1, -1):
        if events[t] == 1:
            y[t] = MASKED
            next_onset = t
            continue
        if next_onset is not None and next_onset - t <= h:
            y[t] = 1
    return EepLabels(y=y, horizon=h)


def hazard_targets(episode: Episode, K: int, truncate_to: Optional[int] = None) -> SurvivalTargets:
    """Hard discrete-time targets; horizons above ``truncate_to`` get zero weight."""
    if truncate_to is None:
        truncate_to = K
    if not 1 <= truncate_to <= K:
        raise ValueError("need 1 <= truncate_to <= K")
    steps = np.arange(episode.label_start, episode.label_end + 1)
    k = np.arange(1, K + 1)[None, :]
    if episode.censored:
        span = episode.observed_span()[:, None]
        y = np.zeros((len(steps), K))
        w = (k <= np.minimum(span, truncate_to)).astype(np.float64)
    else:
        delta = episode.time_to_event()[:, None]
        y = ((k == delta) & (k <= truncate_to)).astype(np.float64)
        w = (k <= np.minimum(delta, truncate_to)).astype(np.float64)
    return SurvivalTargets(steps=steps, y=y, w=w, kind="hard")


def smoothed_survival(delta, lengthscale: float, K: int) -> np.ndarray:
    """Smooth survival ``S_S(0..K)`` for each time-to-event in ``delta``.

    The Gaussian centred at ``delta`` with std ``delta / lengthscale`` is
    binned at half-integers; bin 1 absorbs everything below 1.5 and the last
    bin ``max(K, delta)`` absorbs the upper tail, so the PMF sums to one.
    Returns an ``(n, K + 1)`` array.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=np.float64))
    std = delta / lengthscale
    j = np.arange(1, K + 1)[None, :]
    S = np.ones((len(delta), K + 1))
    S[:, 1:] = norm.sf((j + 0.5 - delta[:, None]) / std[:, None])
    closed = delta <= K
    S[closed, K] = 0.0
    return S


def smoothed_pmf(delta, lengthscale: float, K: int) -> np.ndarray:
    S = smoothed_survival(delta, lengthscale, K)
    return S[:, :-1] - S[:, 1:]


def survtls_targets(episode: Episode, config: SmoothingConfig) -> SurvivalTargets:
    K = config.truncation
    steps = np.arange(episode.label_start, episode.label_end + 1)
    kk = np.arange(1, K + 1)[None, :]
    if episode.censored:
        span = episode.observed_span()[:, None]
        y = np.zeros((len(steps), K))
        w = (kk <= np.minimum(span, K)).astype(np.float64)
        return SurvivalTargets(steps=steps, y=y, w=w, kind="smoothed")

    S = smoothed_survival(episode.time_to_event(), config.lengthscale, K)
    f = S[:, :-1] - S[:, 1:]
    prev = S[:, :-1]
    dead = np.maximum.accumulate(prev < SURVIVAL_FLOOR, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(dead, 1.0, f / np.where(dead, 1.0, prev))
    w = np.where(dead, 0.0, prev)
    # rounding can push f marginally above S
    y = np.clip(y, 0.0, 1.0)
    return SurvivalTargets(steps=steps, y=y, w=w, kind="smoothed")


def write_targets_csv(path, tagged_targets) -> None:
    """Dump ``[(episode_id, SurvivalTargets), ...]`` as ``episode_id,t,k,y,w``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["episode_id", "t", "k", "y", "w"])
        for eid, tg in tagged_targets:
            for i, t in enumerate(tg.steps):
                for k in range(tg.K):
                    out.writerow([eid, int(t), k + 1, repr(float(tg.y[i, k])), repr(float(tg.w[i, k]))])

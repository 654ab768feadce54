"""Turning per-step risk into alarms: fixed threshold, silencing, imminence priority."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class PolicyConfig:
    """Alarm policy.

    ``fixed`` thresholds F(h); ``prioritized`` thresholds the per-horizon
    scores ``q_exp(k) * F(k)`` (``priority_shape="convex"``) or ``F(k)``
    (``"identity"``). Both use ``>=`` against ``tau``. ``h_max`` defaults to
    h; a larger value keeps the decay positive up to h, so it prioritizes less.
    """

    mode: str = "fixed"
    tau: float = 0.5
    sigma: int = 1
    gamma: float = 0.1
    h_max: Optional[int] = None
    priority_shape: str = "convex"

    def __post_init__(self):
        if self.mode not in ("fixed", "prioritized"):
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if self.priority_shape not in ("convex", "identity"):
            raise ValueError(f"unknown priority shape {self.priority_shape!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.sigma < 1:
            raise ValueError("sigma must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.h_max is not None and self.h_max < 1:
            raise ValueError("h_max must be >= 1")

    def with_tau(self, tau: float) -> "PolicyConfig":
        return PolicyConfig(**{**asdict(self), "tau": float(tau)})


@dataclass
class AlarmTrace:
    alarms: np.ndarray
    time_to_event: np.ndarray
    config: PolicyConfig


def q_exp(k, gamma: float, h_max: int):
    """Exponential priority weight: 1 at k = 0, 0 at k = h_max, 0 beyond."""
    if not gamma > 0 or h_max < 1:
        raise ValueError("need gamma > 0 and h_max >= 1")
    tail = math.exp(-gamma * h_max)
    if tail >= 1.0:
        raise ValueError("decay underflow; increase gamma")
    # e^{-g(k-d)} + A with d = -ln(1 - e^{-g h_max}) / g and A = -e^{-g(h_max-d)}
    # simplify to (e^{-g k} - e^{-g h_max}) / (1 - e^{-g h_max})
    k = np.asarray(k, dtype=np.float64)
    q = (np.exp(-gamma * k) - tail) / (-math.expm1(-gamma * h_max))
    q = np.where(k > h_max, 0.0, q)
    q = np.where(k == h_max, 0.0, q)
    return q if q.ndim else float(q)


def priority_weights(h: int, config: PolicyConfig) -> np.ndarray:
    if config.priority_shape == "identity":
        return np.ones(h)
    h_max = h if config.h_max is None else config.h_max
    return q_exp(np.arange(1, h + 1), config.gamma, h_max)


def prioritized_scores(risk_row, config: PolicyConfig) -> np.ndarray:
    """Score vector ``s_k = p(F(k), k)`` for one or many rows of F(1..h)."""
    F = np.asarray(risk_row, dtype=np.float64)
    return F * priority_weights(F.shape[-1], config)


def _candidates(risk: np.ndarray, config: PolicyConfig):
    """Boolean candidates and, for prioritized mode, the min-k estimate."""
    F = np.atleast_2d(np.asarray(risk, dtype=np.float64))
    if config.mode == "fixed":
        return F[:, -1] >= config.tau, None
    s = prioritized_scores(F, config)
    above = s >= config.tau
    cand = above.any(axis=1)
    d = np.where(cand, np.argmax(above, axis=1) + 1, 0)
    return cand, d


def raise_alarms(risk, mask, config: PolicyConfig) -> AlarmTrace:
    """Scan one stay left to right.

    ``risk`` is ``(T, h)`` with rows F(1..h) (only the last column is read
    in fixed mode); ``mask`` is True on steps inside an event, where no alarm
    may fire. An alarm at ``t`` silences steps ``t+1 .. t+sigma-1``.
    """
    cand, d = _candidates(risk, config)
    mask = np.asarray(mask, dtype=bool)
    T = len(cand)
    alarms = np.zeros(T, dtype=np.int64)
    tte = np.zeros(T, dtype=np.int64)
    last = -math.inf
    for t in range(T):
        if cand[t] and not mask[t] and t - last >= config.sigma:
            alarms[t] = 1
            last = t
            if d is not None:
                tte[t] = d[t]
    return AlarmTrace(alarms=alarms, time_to_event=tte, config=config)


def silence(candidates: np.ndarray, sigma: int) -> np.ndarray:
    """Apply silencing to a ``(..., T)`` candidate array, vectorised over leading axes."""
    cand = np.asarray(candidates, dtype=bool)
    if sigma == 1:
        return cand.copy()
    out = np.zeros_like(cand)
    last = np.full(cand.shape[:-1], -sigma, dtype=np.int64)
    for t in range(cand.shape[-1]):
        fire = cand[..., t] & (t - last >= sigma)
        out[..., t] = fire
        last = np.where(fire, t, last)
    return out


def write_alarms_csv(path, stay_ids, traces) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stay_id", "step", "alarm", "d_t"])
        for sid, tr in zip(stay_ids, traces):
            for t in range(len(tr.alarms)):
                a = int(tr.alarms[t])
                dt = int(tr.time_to_event[t]) if a and tr.config.mode == "prioritized" else ""
                w.writerow([sid, t, a, dt])

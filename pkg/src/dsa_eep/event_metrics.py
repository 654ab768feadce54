"""Timestep AuPRC and event-level alarm metrics.

An event with onset ``t_E`` is caught by any alarm in ``[t_E - h, t_E - 1]``
(clipped at 0). Events starting at step 0 cannot be caught and are left out
of the recall denominator.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass

import numpy as np

from .alarm_policy import PolicyConfig, silence

log = logging.getLogger(__name__)

PRECISION_LEVELS = (0.6, 0.7, 0.8)


def timestep_auprc(scores, labels) -> float:
    """Step-wise area under the PR curve; tied scores enter together."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        raise ValueError("AuPRC undefined: labels need at least one positive and one negative")
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    tp = np.cumsum(labels[order])
    # last index of each tie group
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = tp[ends]
    pp = ends + 1
    precision = tp / pp
    recall = tp / n_pos
    dr = np.diff(np.r_[0.0, recall])
    return float(np.sum(dr * precision))


@dataclass(frozen=True)
class EventWindow:
    stay_index: int
    onset: int
    lo: int
    hi: int

    @property
    def detectable(self) -> bool:
        return self.hi >= self.lo


def event_windows(events_list, h: int):
    """All event windows of a cohort; ``events_list`` holds one binary vector per stay."""
    out = []
    for i, ev in enumerate(events_list):
        ev = np.asarray(ev, dtype=np.int64)
        prev = np.r_[0, ev[:-1]]
        for tE in np.flatnonzero((ev == 1) & (prev == 0)):
            out.append(EventWindow(stay_index=i, onset=int(tE), lo=max(0, int(tE) - h), hi=int(tE) - 1))
    return out


def _per_stay(alarms, events):
    if isinstance(alarms, np.ndarray) and alarms.ndim == 1:
        return [alarms], [events]
    return list(alarms), list(events)


def event_recall(alarms, events, h: int) -> float:
    alarms, events = _per_stay(alarms, events)
    windows = [w for w in event_windows(events, h) if w.detectable]
    if not windows:
        raise ValueError("event recall undefined: no detectable events")
    hit = sum(1 for w in windows if np.any(np.asarray(alarms[w.stay_index])[w.lo: w.hi + 1]))
    return hit / len(windows)


def in_window_mask(events, h: int) -> np.ndarray:
    """True on steps lying in the pre-onset window of some event."""
    ev = np.asarray(events, dtype=np.int64)
    mask = np.zeros(len(ev), dtype=bool)
    for w in event_windows([ev], h):
        if w.detectable:
            mask[w.lo: w.hi + 1] = True
    return mask


def alarm_precision(alarms, events, h: int) -> float:
    alarms, events = _per_stay(alarms, events)
    total = sum(int(np.sum(a)) for a in alarms)
    if total == 0:
        raise ValueError("alarm precision undefined: no alarms")
    good = sum(int(np.sum(np.asarray(a, dtype=bool) & in_window_mask(e, h))) for a, e in zip(alarms, events))
    return good / total


def first_alarm_distance(alarms, window: EventWindow):
    """Steps between the earliest in-window alarm and onset; None if missed."""
    a = np.asarray(alarms)
    hits = np.flatnonzero(a[window.lo: window.hi + 1])
    if len(hits) == 0:
        return None
    return window.onset - (window.lo + int(hits[0]))


# --------------------------------------------------------------------------
# threshold sweeps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    tau: float
    event_recall: float
    alarm_precision: float
    mean_first_alarm_distance: float


@dataclass
class CohortRisk:
    """Per-stay risk rows F(1..h) (or just F(h)) padded to a common length."""

    risk: np.ndarray
    masked: np.ndarray
    events: list
    h: int

    @classmethod
    def from_stays(cls, risks, events_list, h: int) -> "CohortRisk":
        S = len(risks)
        T = max(len(r) for r in risks)
        width = np.atleast_2d(risks[0]).shape[1] if np.ndim(risks[0]) == 2 else 1
        R = np.zeros((S, T, width))
        M = np.ones((S, T), dtype=bool)
        for i, (r, ev) in enumerate(zip(risks, events_list)):
            r = np.asarray(r, dtype=np.float64).reshape(len(r), -1)
            R[i, : len(r)] = r
            M[i, : len(r)] = np.asarray(ev, dtype=bool)
        return cls(risk=R, masked=M, events=[np.asarray(e) for e in events_list], h=h)


class _WindowIndex:
    def __init__(self, cohort: CohortRisk):
        S, T = cohort.masked.shape
        windows = [w for w in event_windows(cohort.events, cohort.h) if w.detectable]
        self.n_undetectable = len(event_windows(cohort.events, cohort.h)) - len(windows)
        self.stay = np.array([w.stay_index for w in windows], dtype=np.int64)
        self.lo = np.array([w.lo for w in windows], dtype=np.int64)
        self.hi = np.array([w.hi for w in windows], dtype=np.int64)
        self.onset = np.array([w.onset for w in windows], dtype=np.int64)
        self.inside = np.zeros((S, T), dtype=bool)
        for s, lo, hi in zip(self.stay, self.lo, self.hi):
            self.inside[s, lo: hi + 1] = True


def _point(alarms: np.ndarray, idx: _WindowIndex, tau: float):
    total = int(alarms.sum())
    if total == 0:
        return None
    precision = int((alarms & idx.inside).sum()) / total
    S, T = alarms.shape
    if len(idx.stay) == 0:
        return CurvePoint(tau, float("nan"), precision, float("nan"))
    # next alarm at or after each step (T if none)
    pos = np.where(alarms, np.arange(T)[None, :], T)
    nxt = np.minimum.accumulate(pos[:, ::-1], axis=1)[:, ::-1]
    first = nxt[idx.stay, idx.lo]
    hit = first <= idx.hi
    recall = float(hit.mean())
    dist = float(np.mean(idx.onset[hit] - first[hit])) if hit.any() else float("nan")
    return CurvePoint(float(tau), recall, precision, dist)


def cohort_step_scores(cohort: CohortRisk, policy: PolicyConfig) -> np.ndarray:
    """Scalar score per step, ``(S, T)``: F(h) or max_k of the priority scores.

    Thresholding it with ``>=`` gives exactly the policy's candidates.
    """
    from .alarm_policy import prioritized_scores

    if policy.mode == "fixed":
        return cohort.risk[..., -1]
    return prioritized_scores(cohort.risk, policy).max(axis=-1)


def cohort_alarms(cohort: CohortRisk, policy: PolicyConfig, step_scores=None) -> np.ndarray:
    """Alarm matrix ``(S, T)`` of a whole cohort at ``policy.tau``."""
    if step_scores is None:
        step_scores = cohort_step_scores(cohort, policy)
    cand = (step_scores >= policy.tau) & ~cohort.masked
    return silence(cand, policy.sigma)


def default_tau_grid(scores=None) -> np.ndarray:
    grid = np.linspace(0.0, 1.0, 1000)
    if scores is not None:
        distinct = np.unique(np.asarray(scores, dtype=np.float64))
        if len(distinct) <= 5000:
            grid = np.union1d(grid, distinct)
    return np.unique(grid)


def curve_auprc(points) -> float:
    """Rectangle rule over recall with the (0, 1) anchor; max precision per recall."""
    best = {0.0: 1.0}
    for p in points:
        if np.isnan(p.event_recall):
            continue
        best[p.event_recall] = max(best.get(p.event_recall, 0.0), p.alarm_precision)
    r = np.array(sorted(best))
    prec = np.array([best[x] for x in r])
    return float(np.sum(np.diff(r) * prec[1:]))


def event_pr_curve(cohort: CohortRisk, policy: PolicyConfig, taus=None):
    """Sweep ``tau``; returns ``(points, auprc)``. Thresholds with no alarm are skipped."""
    step_scores = cohort_step_scores(cohort, policy)
    if taus is None:
        taus = default_tau_grid(step_scores[~cohort.masked])
    taus = np.asarray(taus, dtype=np.float64)
    idx = _WindowIndex(cohort)
    if idx.n_undetectable:
        log.info("%d events at step 0 excluded from recall", idx.n_undetectable)
    points = []
    skipped = 0
    for tau in taus:
        alarms = cohort_alarms(cohort, policy.with_tau(tau), step_scores)
        pt = _point(alarms, idx, tau)
        if pt is None:
            skipped += 1
            continue
        points.append(pt)
    if skipped:
        log.info("%d thresholds raised no alarm and were skipped", skipped)
    _log_non_monotone(points)
    return points, curve_auprc(points)


def _log_non_monotone(points):
    by_tau = sorted(points, key=lambda p: -p.tau)
    bad = sum(1 for a, b in zip(by_tau, by_tau[1:]) if b.event_recall < a.event_recall)
    if bad:
        log.info("event recall decreased %d times along the descending tau grid", bad)


def at_precision(points, level: float):
    """The highest-recall point whose alarm precision is at least ``level``."""
    ok = [p for p in points if p.alarm_precision >= level and not np.isnan(p.event_recall)]
    if not ok:
        return None
    return max(ok, key=lambda p: (p.event_recall, p.alarm_precision, -p.tau))


def summarize(points, auprc: float) -> dict:
    out = {"event_auprc": auprc, "operating_points": {}}
    for level in PRECISION_LEVELS:
        p = at_precision(points, level)
        out["operating_points"][f"{level:.1f}"] = None if p is None else {
            "tau": p.tau,
            "event_recall": p.event_recall,
            "alarm_precision": p.alarm_precision,
            "mean_first_alarm_distance_steps": p.mean_first_alarm_distance,
        }
    return out


def write_curve_csv(path, points) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "event_recall", "alarm_precision", "mean_first_alarm_distance_steps"])
        for p in points:
            w.writerow([repr(p.tau), repr(p.event_recall), repr(p.alarm_precision), repr(p.mean_first_alarm_distance)])


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

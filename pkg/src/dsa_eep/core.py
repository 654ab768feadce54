"""Stays, episodes and task configuration shared by every other module."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np


class StayError(ValueError):
    """Raised when a stay violates one of its invariants."""


@dataclass(frozen=True)
class Stay:
    """One monitored trajectory.

    Attributes:
        id: stay identifier.
        features: ``(T, d)`` float matrix of covariates.
        events: length ``T`` binary vector, 1 while an event is ongoing.
    """

    id: str
    features: np.ndarray
    events: np.ndarray

    @property
    def length(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def onsets(self) -> np.ndarray:
        """Steps at which an event starts."""
        e = np.asarray(self.events, dtype=np.int64)
        prev = np.concatenate([[0], e[:-1]])
        return np.flatnonzero((e == 1) & (prev == 0))


@dataclass(frozen=True)
class Episode:
    """A DSA sample cut from a stay: at most one terminal event, at its end.

    ``history`` holds rows ``0..label_end`` of the stay. When ``censored`` is
    False the event starts at ``event_step == label_end + 1``.
    """

    stay_id: str
    history: np.ndarray
    label_start: int
    label_end: int
    censored: bool
    event_step: Optional[int] = None

    @property
    def n_labels(self) -> int:
        return self.label_end - self.label_start + 1

    def time_to_event(self) -> np.ndarray:
        """Steps until onset for each label step (uncensored episodes only)."""
        if self.censored:
            raise ValueError("censored episode has no time-to-event")
        t = np.arange(self.label_start, self.label_end + 1)
        return self.event_step - t

    def observed_span(self) -> np.ndarray:
        """Steps of observed survival after each label step."""
        t = np.arange(self.label_start, self.label_end + 1)
        return self.label_end - t


@dataclass(frozen=True)
class TaskConfig:
    horizon: int
    resolution: str = "1 step"
    max_train_horizon: Optional[int] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.max_train_horizon is None:
            object.__setattr__(self, "max_train_horizon", self.horizon)
        if self.max_train_horizon < self.horizon:
            raise ValueError("max_train_horizon must be >= horizon")


TASK_PRESETS = {
    "circ": TaskConfig(horizon=144, resolution="5 min"),
    "vent": TaskConfig(horizon=144, resolution="5 min"),
    "decomp": TaskConfig(horizon=24, resolution="1 h"),
    "synthetic": TaskConfig(horizon=24, resolution="1 step"),
    "smoke": TaskConfig(horizon=12, resolution="1 step"),
}


def validate_stay(stay: Stay) -> Stay:
    feats = np.asarray(stay.features)
    events = np.asarray(stay.events)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise StayError(f"stay {stay.id}: empty series")
    if feats.shape[1] < 1:
        raise StayError(f"stay {stay.id}: no feature columns")
    if events.shape != (feats.shape[0],):
        raise StayError(f"stay {stay.id}: events length {events.shape} does not match {feats.shape[0]} steps")
    if not np.all(np.isfinite(feats)):
        raise StayError(f"stay {stay.id}: non-finite feature")
    if not np.all((events == 0) | (events == 1)):
        raise StayError(f"stay {stay.id}: non-binary event indicator")
    return stay


@dataclass
class EpisodeSplit:
    episodes: list = field(default_factory=list)
    dropped: int = 0


def split_episodes(stay: Stay) -> EpisodeSplit:
    """Cut a stay with non-terminal events into DSA episodes.

    Episode ``k`` ends right before the ``k``-th onset; its labels start one
    step after the previous event ends. A censored tail episode follows the
    last event if any out-of-event step remains. Label ranges that come out
    empty (onset at step 0, back-to-back events) are dropped and counted.
    """
    events = np.asarray(stay.events, dtype=np.int64)
    T = len(events)
    out = EpisodeSplit()
    start = 0
    t = 0
    while t < T:
        if events[t] == 1:
            onset = t
            while t < T and events[t] == 1:
                t += 1
            if onset - 1 >= start:
                out.episodes.append(
                    Episode(
                        stay_id=stay.id,
                        history=stay.features[:onset],
                        label_start=start,
                        label_end=onset - 1,
                        censored=False,
                        event_step=onset,
                    )
                )
            else:
                out.dropped += 1
            # t is now the first step after the event
            start = t
        else:
            t += 1
    if start <= T - 1:
        out.episodes.append(
            Episode(
                stay_id=stay.id,
                history=stay.features[:T],
                label_start=start,
                label_end=T - 1,
                censored=True,
            )
        )
    return out


# --------------------------------------------------------------------------
# CSV I/O
# --------------------------------------------------------------------------


def write_stays_csv(path, stays: Iterable[Stay]) -> None:
    stays = list(stays)
    d = stays[0].n_features if stays else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stay_id", "step"] + [f"feat_{j}" for j in range(d)] + ["event"])
        for s in stays:
            for t in range(s.length):
                w.writerow([s.id, t] + [repr(float(v)) for v in s.features[t]] + [int(s.events[t])])


def read_stays_csv(path) -> list:
    """Parse the stay CSV; rejects step gaps, duplicates and unsorted rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise StayError(f"{path}: empty file") from None
        feat_cols = header[2:-1]
        if header[:2] != ["stay_id", "step"] or header[-1] != "event" or not feat_cols:
            raise StayError(f"{path}: bad header {header}")
        for j, name in enumerate(feat_cols):
            if name != f"feat_{j}":
                raise StayError(f"{path}: bad feature column {name!r}")
        rows_by_stay: dict = {}
        order = []
        last_id = None
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise StayError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            sid = row[0]
            if sid != last_id:
                if sid in rows_by_stay:
                    raise StayError(f"{path}:{lineno}: rows of stay {sid} are not contiguous")
                rows_by_stay[sid] = []
                order.append(sid)
                last_id = sid
            step = int(row[1])
            expected = len(rows_by_stay[sid])
            if step != expected:
                kind = "duplicate" if step < expected else "gap"
                raise StayError(f"{path}:{lineno}: step {kind} in stay {sid} (got {step}, expected {expected})")
            try:
                ev = int(row[-1])
            except ValueError:
                raise StayError(f"{path}:{lineno}: non-binary event indicator") from None
            rows_by_stay[sid].append(([float(v) for v in row[2:-1]], ev))
    stays = []
    for sid in order:
        rows = rows_by_stay[sid]
        feats = np.array([r[0] for r in rows], dtype=np.float64)
        events = np.array([r[1] for r in rows], dtype=np.int64)
        stays.append(validate_stay(Stay(id=sid, features=feats, events=events)))
    return stays

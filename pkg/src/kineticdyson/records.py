"""Trajectory records shared by the simulation modules.

A :class:`PathRecord` holds a time grid plus named observable arrays whose
leading axis runs over that grid.  Single-path records store arrays of shape
``(n_times, ...)``; ensemble records add a path axis right after time,
``(n_times, n_paths, ...)``.  Events (gap-floor stops, boundary clamps) are
kept as ``(time, kind, path_index)`` tuples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["PathRecord", "EnsembleSummary"]


@dataclass
class PathRecord:
    """Time grid, per-time observable snapshots, and discrete events.

    ``stats`` holds whole-path reductions (for instance the running maximum
    of a residual) that are tracked every step even when frames are only
    snapshotted on a stride.
    """

    times: np.ndarray
    frames: dict
    events: list = field(default_factory=list)
    config: object = None
    n_paths: int = 1
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, arr in self.frames.items():
            if np.shape(arr)[0] != self.times.size:
                raise ValueError(
                    f"frame {name!r} has {np.shape(arr)[0]} rows for "
                    f"{self.times.size} times"
                )

    def frame_at(self, name, t, atol=1e-12):
        """Observable array at grid time t (exact match within atol)."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol:
            raise KeyError(f"time {t} not on the record grid")
        return self.frames[name][i]

    def event_count(self, kind=None):
        if kind is None:
            return len(self.events)
        return sum(1 for e in self.events if e[1] == kind)


@dataclass
class EnsembleSummary:
    """Merged per-time marginals of selected observables plus event counts.

    Deterministic given (config, master_seed): building it only reads a
    PathRecord whose contents are already schedule-independent.
    """

    n_paths: int
    times: np.ndarray
    marginals: dict
    event_counts: dict = field(default_factory=dict)

    @classmethod
    def from_record(cls, record, observables):
        """Collect (n_times, n_paths) marginal samples for named observables.

        ``observables`` maps output names to callables taking the record's
        frames dict and returning an array of shape (n_times, n_paths).
        """
        marginals = {
            name: np.asarray(fn(record.frames))
            for name, fn in observables.items()
        }
        counts = {}
        for _, kind, _ in record.events:
            counts[kind] = counts.get(kind, 0) + 1
        return cls(n_paths=record.n_paths, times=record.times,
                   marginals=marginals, event_counts=counts)

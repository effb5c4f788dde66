"""Extrema detection, extrema correspondence and recoherence periods."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import groupby

import numpy as np
from scipy.signal import find_peaks

from .quantum import TimeSeries

DEFAULT_PROMINENCE = 0.05
DEFAULT_WINDOW = 0.25

MAX, MIN = "max", "min"


class InsufficientExtremaError(ValueError):
    pass


@dataclass(frozen=True)
class ExtremaList:
    times: np.ndarray
    kinds: tuple[str, ...]
    values: np.ndarray

    def __len__(self):
        return len(self.times)

    def of_kind(self, kind: str) -> "ExtremaList":
        sel = np.array([k == kind for k in self.kinds], dtype=bool)
        return ExtremaList(self.times[sel], tuple(k for k in self.kinds if k == kind), self.values[sel])

    def first(self, n: int) -> "ExtremaList":
        return ExtremaList(self.times[:n], self.kinds[:n], self.values[:n])

    def within(self, t0: float, t1: float) -> "ExtremaList":
        sel = (self.times >= t0) & (self.times <= t1)
        return ExtremaList(self.times[sel], tuple(k for k, s in zip(self.kinds, sel) if s), self.values[sel])

    @property
    def maxima(self) -> "ExtremaList":
        return self.of_kind(MAX)

    @property
    def minima(self) -> "ExtremaList":
        return self.of_kind(MIN)


@dataclass(frozen=True)
class Pair:
    t_a: float
    t_b: float
    kind: str

    @property
    def dt(self) -> float:
        return abs(self.t_a - self.t_b)


@dataclass(frozen=True)
class CorrespondenceReport:
    pairs: list[Pair]
    unmatched_a: int
    unmatched_b: int
    window: float
    matched_a: tuple[int, ...] = field(default=(), repr=False)
    matched_b: tuple[int, ...] = field(default=(), repr=False)

    @property
    def max_dt(self) -> float:
        return max((p.dt for p in self.pairs), default=0.0)

    def pair_set(self) -> set[tuple[float, float, str]]:
        return {(p.t_a, p.t_b, p.kind) for p in self.pairs}


def detect_extrema(series: TimeSeries, prominence: float = DEFAULT_PROMINENCE) -> ExtremaList:
    """Interior local extrema whose prominence is at least ``prominence`` x range.

    Consecutive extrema of the same kind (which prominence filtering can
    leave behind) are merged, keeping the more extreme one, so kinds
    alternate.
    """
    x = np.asarray(series.values, dtype=float)
    if len(x) < 5:
        raise ValueError("need at least 5 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains NaN or inf")
    span = float(np.ptp(x))
    if span == 0.0:
        return ExtremaList(np.array([]), (), np.array([]))
    thr = prominence * span
    imax, _ = find_peaks(x, prominence=thr)
    imin, _ = find_peaks(-x, prominence=thr)
    events = sorted([(i, MAX) for i in imax] + [(i, MIN) for i in imin])
    merged: list[tuple[int, str]] = []
    for i, kind in events:
        if merged and merged[-1][1] == kind:
            j = merged[-1][0]
            better = x[i] > x[j] if kind == MAX else x[i] < x[j]
            if better:
                merged[-1] = (i, kind)
            continue
        merged.append((i, kind))
    idx = np.array([i for i, _ in merged], dtype=int)
    return ExtremaList(series.t[idx], tuple(k for _, k in merged), x[idx])


def match_extrema(a: ExtremaList, b: ExtremaList, window: float = DEFAULT_WINDOW) -> CorrespondenceReport:
    """One-to-one, order-preserving pairing of same-kind extrema within ``window``.

    Candidate pairs are accepted greedily from the smallest time offset
    upward; ties are broken on the sorted pair of times and the kind so
    that swapping ``a`` and ``b`` yields the same pairs.
    """
    cands = []
    for i, (ta, ka) in enumerate(zip(a.times, a.kinds)):
        for j, (tb, kb) in enumerate(zip(b.times, b.kinds)):
            d = abs(ta - tb)
            if ka == kb and d <= window + 1e-12:
                cands.append(((d, min(ta, tb), max(ta, tb), ka), i, j))
    cands.sort()
    used_a: dict[int, int] = {}
    used_b: set[int] = set()

    def feasible(i, j):
        if i in used_a or j in used_b:
            return False
        return not any((i - i2) * (j - j2) <= 0 for i2, j2 in used_a.items())

    for _, group in groupby(cands, key=lambda c: c[0]):
        # exact ties are mirror images under a <-> b; accept only the members
        # that do not conflict with each other
        group = [(i, j) for _, i, j in group if feasible(i, j)]
        for i, j in group:
            if all((i - i2) * (j - j2) > 0 for i2, j2 in group if (i2, j2) != (i, j)):
                used_a[i] = j
                used_b.add(j)
    order = sorted(used_a.items())
    pairs = [Pair(float(a.times[i]), float(b.times[j]), a.kinds[i]) for i, j in order]
    return CorrespondenceReport(
        pairs=pairs,
        unmatched_a=len(a) - len(order),
        unmatched_b=len(b) - len(order),
        window=window,
        matched_a=tuple(i for i, _ in order),
        matched_b=tuple(j for _, j in order),
    )


def oscillation_period(
    series: TimeSeries,
    t_window: tuple[float, float] | None = None,
    prominence: float = DEFAULT_PROMINENCE,
    min_count: int = 3,
) -> float:
    """Mean spacing of consecutive maxima inside ``t_window``."""
    part = series if t_window is None else series.window(*t_window)
    if len(part) < 5:
        raise InsufficientExtremaError("window holds fewer than 5 samples")
    maxima = detect_extrema(part, prominence).maxima
    if len(maxima) < min_count:
        raise InsufficientExtremaError(
            f"{len(maxima)} maxima above prominence {prominence} in window; need {min_count}"
        )
    return float(np.mean(np.diff(maxima.times)))


def plateau_onset(delta: TimeSeries, fraction: float = 0.95) -> float:
    """First time delta reaches ``fraction`` of its maximum over the whole record."""
    hit = np.flatnonzero(delta.values >= fraction * np.max(delta.values))
    return float(delta.t[hit[0]])


def time_to_reach(series: TimeSeries, level: float) -> float:
    """First time the series reaches ``level`` (linear interpolation); inf if never."""
    v = series.values
    hit = np.flatnonzero(v >= level)
    if hit.size == 0:
        return float("inf")
    k = hit[0]
    if k == 0:
        return float(series.t[0])
    t0, t1, v0, v1 = series.t[k - 1], series.t[k], v[k - 1], v[k]
    return float(t0 + (level - v0) * (t1 - t0) / (v1 - v0))

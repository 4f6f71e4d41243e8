"""Preprocessing of raw observation series.

Raw series are resampled onto a uniform grid with linear interpolation,
then smoothed with a trailing moving-average filter whose window can be
picked by grid search.  The trailing (causal) window never consumes future
samples, so the same code path serves both replay and online operation.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from datetime import timedelta

HOUR = timedelta(hours=1)

MA_WINDOW_MIN_HOURS = 1
MA_WINDOW_MAX_HOURS = 168


class PipelineError(Exception):
    pass


class EmptySeries(PipelineError):
    pass


class BadWindow(PipelineError):
    pass


class GridMismatch(PipelineError):
    """Two series that must share a grid do not."""


class AllCandidatesFailed(PipelineError):
    pass


@dataclass(frozen=True)
class UniformSeries:
    """Evenly spaced values; ``None`` marks a grid point the gap policy voided."""

    start: object  # datetime of the first grid point
    step: timedelta
    values: tuple

    def __post_init__(self):
        if self.step <= timedelta(0):
            raise PipelineError("step must be positive")
        if len(self.values) < 1:
            raise PipelineError("a uniform series holds at least one value")

    def __len__(self):
        return len(self.values)

    @property
    def step_hours(self):
        return self.step / HOUR

    @property
    def end(self):
        return self.start + (len(self.values) - 1) * self.step

    def timestamps(self):
        return [self.start + k * self.step for k in range(len(self.values))]

    def same_grid(self, other):
        return (
            self.start == other.start
            and self.step == other.step
            and len(self.values) == len(other.values)
        )


def require_same_grid(*series):
    first = series[0]
    for other in series[1:]:
        if not first.same_grid(other):
            raise GridMismatch(
                f"grids differ: {first.start}/{first.step}/{len(first)} vs "
                f"{other.start}/{other.step}/{len(other)}"
            )


def _as_points(series):
    points = list(getattr(series, "points", series))
    return points


def _interpolate_at(stamps, values, t, max_gap):
    """Value at time t, or None when outside the span or across a long gap."""
    if t < stamps[0] or t > stamps[-1]:
        return None
    idx = bisect_left(stamps, t)
    if idx < len(stamps) and stamps[idx] == t:
        return values[idx]
    lo, hi = idx - 1, idx
    if stamps[hi] - stamps[lo] > max_gap:
        return None
    span = (stamps[hi] - stamps[lo]).total_seconds()
    frac = (t - stamps[lo]).total_seconds() / span
    return values[lo] + frac * (values[hi] - values[lo])


def resample(series, step, max_gap=timedelta(hours=6)):
    """Resample onto a grid anchored at the first observation.

    Grid points sit at ``start + k*step`` over the observed span.  Each value
    is linearly interpolated between its bracketing observations; when those
    are more than ``max_gap`` apart the grid point is marked missing.  The
    grid never extends beyond the first or last observation.
    """
    points = _as_points(series)
    if not points:
        raise EmptySeries("cannot resample an empty series")
    if step <= timedelta(0):
        raise PipelineError("step must be positive")
    stamps = [p[0] for p in points]
    values = [p[1] for p in points]
    start = stamps[0]
    count = (stamps[-1] - start) // step + 1
    grid = tuple(
        _interpolate_at(stamps, values, start + k * step, max_gap) for k in range(count)
    )
    return UniformSeries(start=start, step=step, values=grid)


def resample_onto(series, start, count, step, max_gap=timedelta(hours=6)):
    """Resample onto an explicit grid so several variables can be aligned.

    Grid points outside the observed span are missing (no extrapolation).
    """
    points = _as_points(series)
    if not points:
        raise EmptySeries("cannot resample an empty series")
    stamps = [p[0] for p in points]
    values = [p[1] for p in points]
    grid = tuple(
        _interpolate_at(stamps, values, start + k * step, max_gap) for k in range(count)
    )
    return UniformSeries(start=start, step=step, values=grid)


def _window_steps(window, step):
    if isinstance(window, (int, float)):
        window = timedelta(hours=window)
    hours = window / HOUR
    if hours < MA_WINDOW_MIN_HOURS or hours > MA_WINDOW_MAX_HOURS:
        raise BadWindow(f"moving-average window {hours} h outside [1, 168] h")
    # whole-hour window over a finer grid: ceil to a step count
    return max(1, -((-window) // step))


def moving_average(series, window):
    """Trailing moving average; window given in hours (1..168).

    Each output is the mean of the up-to-``ceil(window/step)`` most recent
    non-missing values ending at that point; it is missing only when every
    value in the window is missing.  Length is unchanged.
    """
    w = _window_steps(window, series.step)
    values = series.values
    out = []
    running_sum = 0.0
    running_count = 0
    for i, value in enumerate(values):
        if value is not None:
            running_sum += value
            running_count += 1
        if i >= w:
            dropped = values[i - w]
            if dropped is not None:
                running_sum -= dropped
                running_count -= 1
        out.append(running_sum / running_count if running_count else None)
    return UniformSeries(start=series.start, step=series.step, values=tuple(out))


@dataclass(frozen=True)
class GridSearchResult:
    best_window: int
    best_score: float
    table: tuple  # (window_hours, score-or-None) per evaluated candidate
    failures: tuple  # (window_hours, reason) for skipped candidates


def grid_search_window(objective, candidates=None):
    """Pick the smoothing window minimizing ``objective``.

    Candidates default to every whole hour in 1..168.  A candidate whose
    objective raises is skipped and recorded; ties break toward the smaller
    window.  The full score table is returned for reporting.
    """
    if candidates is None:
        candidates = range(MA_WINDOW_MIN_HOURS, MA_WINDOW_MAX_HOURS + 1)
    windows = sorted(set(int(c) for c in candidates))
    if not windows:
        raise BadWindow("no candidate windows")
    for w in windows:
        if w < MA_WINDOW_MIN_HOURS or w > MA_WINDOW_MAX_HOURS:
            raise BadWindow(f"candidate window {w} h outside [1, 168] h")
    table = []
    failures = []
    best_window = None
    best_score = math.inf
    for w in windows:
        try:
            score = float(objective(w))
        except Exception as exc:  # objective failures are data, not fatal
            failures.append((w, f"{type(exc).__name__}: {exc}"))
            table.append((w, None))
            continue
        table.append((w, score))
        if score < best_score:  # strict: earlier (smaller) window wins ties
            best_score = score
            best_window = w
    if best_window is None:
        raise AllCandidatesFailed(f"all {len(windows)} candidate windows failed")
    return GridSearchResult(
        best_window=best_window,
        best_score=best_score,
        table=tuple(table),
        failures=tuple(failures),
    )


def score_table_csv(result):
    """Score table as ``window_hours,score`` CSV (blank score = failed)."""
    lines = ["window_hours,score"]
    for window, score in result.table:
        lines.append(f"{window},{'' if score is None else repr(score)}")
    return "\n".join(lines) + "\n"

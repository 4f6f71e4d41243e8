"""Corrosion risk scoring and ISO 9223 corrosivity classification.

The score is a documented parameterized surrogate combining three hazards
(near-condensation, high humidity, recent freeze-thaw) scaled by pollutant
load; its constants live in a flat key/value model file so a data-driven
replacement can be dropped in without code changes.  The corrosivity lookup
``(tow class, SO2 class, salinity class) -> category`` ships as a versioned
CSV data file for the same reason.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields
from datetime import timedelta
from importlib import resources

from .pipeline import UniformSeries, require_same_grid

HOURS_PER_YEAR = 8760.0

CATEGORY_LABELS = {1: "very low", 2: "low", 3: "medium", 4: "high", 5: "very high"}

# upper-inclusive annual time-of-wetness bounds (hours) for classes 1..4
TOW_CLASS_BOUNDS = ((10.0, 1), (250.0, 2), (2500.0, 3), (5500.0, 4))
# upper-inclusive annual-mean SO2 bounds (ug/m3) for classes 0..3
SO2_CLASS_BOUNDS = ((12.0, 0), (40.0, 1), (90.0, 2), (250.0, 3))


class RiskError(Exception):
    pass


class BadModel(RiskError):
    """Risk-model field values violate their invariants."""


class BadModelFile(RiskError):
    """A model file is unreadable, has unknown fields, or invalid values."""


class OutOfClassification(RiskError):
    """SO2 above 250 ug/m3 is outside the classification."""


class BadLookupTable(RiskError):
    """Category lookup data is incomplete, out of range, or not monotone."""


@dataclass(frozen=True)
class RiskModel:
    """Constants of the surrogate corrosion-risk scorer."""

    w_condensation: float = 0.5
    w_humidity: float = 0.3
    w_freeze_thaw: float = 0.2
    pollution_gain: float = 0.3  # fraction of the score modulated by SO2
    so2_reference: float = 50.0  # ug/m3 at which pollution saturates
    rh_knee: float = 70.0  # % where the humidity hazard starts rising
    condensation_span: float = 2.0  # K of dew-point margin treated as hazardous
    version: str = "builtin-1"

    def validate(self):
        weights = (self.w_condensation, self.w_humidity, self.w_freeze_thaw)
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise BadModel("weights must be finite and >= 0")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise BadModel(f"weights must sum to 1, got {sum(weights)!r}")
        if not 0.0 <= self.pollution_gain <= 1.0:
            raise BadModel("pollution_gain must lie in [0, 1]")
        if self.so2_reference <= 0:
            raise BadModel("so2_reference must be positive")
        if not 0.0 <= self.rh_knee < 100.0:
            raise BadModel("rh_knee must lie in [0, 100)")
        if self.condensation_span <= 0:
            raise BadModel("condensation_span must be positive")


def _clamp01(x):
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def risk_score(temperature, dew_point, humidity, so2_indoor, thawed_within_24h, model=None):
    """Surrogate corrosion risk in [0, 1] for one instant.

    Hazards: closeness of T to the dew point within ``condensation_span``,
    relative humidity above ``rh_knee``, and a recent freeze-thaw flag; the
    weighted sum is scaled by ``(1 - g) + g * min(SO2/SO2_ref, 1)``.
    """
    model = model or RiskModel()
    model.validate()
    for name, value in (("temperature", temperature), ("dew_point", dew_point),
                        ("humidity", humidity), ("so2", so2_indoor)):
        if not math.isfinite(value):
            raise ValueError(f"non-finite {name} input")
    if not 0.0 <= humidity <= 100.0:
        raise ValueError(f"humidity {humidity} outside [0, 100]")
    span = model.condensation_span
    h_condensation = _clamp01((span - (temperature - dew_point)) / span)
    h_humidity = _clamp01((humidity - model.rh_knee) / (100.0 - model.rh_knee))
    h_freeze_thaw = 1.0 if thawed_within_24h else 0.0
    base = (
        model.w_condensation * h_condensation
        + model.w_humidity * h_humidity
        + model.w_freeze_thaw * h_freeze_thaw
    )
    gain = model.pollution_gain
    pollution = min(max(so2_indoor, 0.0) / model.so2_reference, 1.0)
    return _clamp01(base * ((1.0 - gain) + gain * pollution))


def thaw_flags(temperature, memory=timedelta(hours=24)):
    """Per-grid-point flags: an upward 0 degC crossing happened within ``memory``.

    A crossing at index j flags every point in [t_j, t_j + memory).
    """
    steps = max(1, math.ceil(memory / temperature.step))
    values = temperature.values
    flags = [False] * len(values)
    for i in range(1, len(values)):
        prev, cur = values[i - 1], values[i]
        if prev is None or cur is None:
            continue
        if prev <= 0.0 and cur > 0.0:
            for k in range(i, min(i + steps, len(values))):
                flags[k] = True
    return flags


def score_series(temperature, dew_point, humidity, so2_indoor, model=None, flags=None,
                 memory=timedelta(hours=24)):
    """Pointwise :func:`risk_score` over aligned series.

    ``flags`` defaults to thaw flags derived from ``temperature`` itself;
    the caller passes flags computed on the unsmoothed series when scoring
    smoothed inputs.  Missing inputs yield missing scores.
    """
    model = model or RiskModel()
    require_same_grid(temperature, dew_point, humidity, so2_indoor)
    if flags is None:
        flags = thaw_flags(temperature, memory)
    out = []
    for t, dp, rh, so2, flag in zip(
        temperature.values, dew_point.values, humidity.values, so2_indoor.values, flags
    ):
        if t is None or dp is None or rh is None or so2 is None:
            out.append(None)
        else:
            out.append(risk_score(t, dp, min(max(rh, 0.0), 100.0), so2, flag, model))
    return UniformSeries(start=temperature.start, step=temperature.step, values=tuple(out))


@dataclass(frozen=True)
class CorrosivityResult:
    tow_class: int  # 1..5
    so2_class: int  # 0..3
    salinity_class: int  # 0..3
    category: int  # 1..5
    label: str


def annualize_tow(tow_hours, period_hours):
    """Scale a partial-period time of wetness to a per-year figure."""
    if period_hours <= 0:
        raise ValueError("period must be positive")
    return tow_hours * HOURS_PER_YEAR / period_hours


def tow_class(annual_hours):
    if annual_hours < 0:
        raise ValueError("time of wetness cannot be negative")
    for bound, cls in TOW_CLASS_BOUNDS:
        if annual_hours <= bound:
            return cls
    return 5


def so2_class(annual_mean):
    if annual_mean < 0:
        raise ValueError("SO2 concentration cannot be negative")
    for bound, cls in SO2_CLASS_BOUNDS:
        if annual_mean <= bound:
            return cls
    raise OutOfClassification(f"annual SO2 {annual_mean} ug/m3 above 250")


def _parse_table_rows(lines):
    table = {}
    for lineno, line in enumerate(lines, start=1):
        row = line.strip()
        if not row or row.startswith("#"):
            continue
        if row == "tau,p,s,category":
            continue
        parts = row.split(",")
        if len(parts) != 4:
            raise BadLookupTable(f"line {lineno}: expected tau,p,s,category")
        try:
            t, p, s, c = (int(x) for x in parts)
        except ValueError as exc:
            raise BadLookupTable(f"line {lineno}: {exc}") from exc
        table[(t, p, s)] = c
    return table


def validate_category_table(table):
    cells = [(t, p, s) for t in range(1, 6) for p in range(4) for s in range(4)]
    for cell in cells:
        if cell not in table:
            raise BadLookupTable(f"missing cell tau={cell[0]} p={cell[1]} s={cell[2]}")
        if table[cell] not in CATEGORY_LABELS:
            raise BadLookupTable(f"category {table[cell]!r} at {cell} outside 1..5")
    for (t, p, s), category in table.items():
        for neighbor in ((t + 1, p, s), (t, p + 1, s), (t, p, s + 1)):
            if neighbor in table and table[neighbor] < category:
                raise BadLookupTable(f"category not monotone between {(t, p, s)} and {neighbor}")
    return table


def load_category_table(path=None):
    """Load the (tau, P, S) -> category lookup; defaults to the shipped file."""
    if path is None:
        text = resources.files("smarthangar.data").joinpath("iso9223_categories.csv").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return validate_category_table(_parse_table_rows(text.splitlines()))


_DEFAULT_TABLE = None


def _default_table():
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_category_table()
    return _DEFAULT_TABLE


def iso9223_category(tow_annual_hours, so2_annual_mean, salinity_class=None,
                     near_sea=False, table=None):
    """Classify corrosivity from annual TOW, annual-mean SO2, and salinity.

    Class boundaries are inclusive on the upper edge.  Without a measured
    chloride class, proximity to the sea maps to S1, otherwise S0.
    """
    t = tow_class(tow_annual_hours)
    p = so2_class(so2_annual_mean)
    if salinity_class is None:
        s = 1 if near_sea else 0
    else:
        s = int(salinity_class)
        if not 0 <= s <= 3:
            raise ValueError(f"salinity class {salinity_class!r} outside 0..3")
    table = table if table is not None else _default_table()
    category = table[(t, p, s)]
    return CorrosivityResult(
        tow_class=t, so2_class=p, salinity_class=s,
        category=category, label=CATEGORY_LABELS[category],
    )


_MODEL_FIELDS = {f.name: f.type for f in fields(RiskModel)}


def save_risk_model(model, path):
    """Write the model as flat ``key = value`` text."""
    model.validate()
    lines = [f"version = {model.version}"]
    for name in _MODEL_FIELDS:
        if name == "version":
            continue
        lines.append(f"{name} = {getattr(model, name)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_risk_model(path=None):
    """Read a model file; an absent path falls back to the built-in model.

    Unknown fields are rejected by name; invalid values raise
    :class:`BadModelFile`.
    """
    if path is None or not os.path.exists(path):
        return RiskModel()
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            row = line.split("#", 1)[0].strip()
            if not row:
                continue
            if "=" not in row:
                raise BadModelFile(f"line {lineno}: expected 'key = value'")
            name, _, raw = (part.strip() for part in row.partition("="))
            if name not in _MODEL_FIELDS:
                raise BadModelFile(f"line {lineno}: unknown field {name!r}")
            if name in values:
                raise BadModelFile(f"line {lineno}: duplicate field {name!r}")
            if name == "version":
                values[name] = raw
            else:
                try:
                    values[name] = float(raw)
                except ValueError as exc:
                    raise BadModelFile(f"line {lineno}: bad number for {name!r}") from exc
    model = RiskModel(**values)
    try:
        model.validate()
    except BadModel as exc:
        raise BadModelFile(str(exc)) from exc
    return model

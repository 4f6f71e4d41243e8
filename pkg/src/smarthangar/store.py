"""Durable persistence of observation series, hangar profiles, and documents.

The store is the only stateful rendezvous between ingestion and evaluation.
Two backends share one contract: :class:`MemoryStore` for tests and
:class:`FileStore` for operation.  Series are exchanged with the outside
world in a flat CSV schema (``variable,placement,timestamp_utc,value``).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import threading
from dataclasses import dataclass, fields
from datetime import datetime, timezone


class StoreError(Exception):
    """Base class for persistence failures."""


class InvariantViolation(StoreError):
    """A point or profile breaks a documented data invariant."""

    def __init__(self, message, field_name=None):
        super().__init__(message)
        self.field_name = field_name


class StorageUnavailable(StoreError):
    """The backing medium cannot be read or written."""


class UnknownSeries(StoreError):
    """No samples were ever stored under the requested key."""


class NoProfile(StoreError):
    """No hangar profile has been stored yet."""


POLLUTANT_SPECIES = ("SO2", "NO2", "CO", "O3", "PM10", "PM2.5")

MATERIALS = ("wood", "steel", "concrete")

# variable -> measurement unit (fixed; a SeriesKey never carries its own unit)
VARIABLE_UNITS = {
    "temperature": "degC",
    "relative_humidity": "%",
    "dew_point": "degC",
    "wind_speed": "m/s",
    "air_exchange_rate": "1/h",
    **{species: "ug/m3" for species in POLLUTANT_SPECIES},
}

# Ambient variables exist indoor and outdoor; wind only outdoors, the air
# exchange rate only for the hangar itself.  Pollutants are kept on both
# sides so computed indoor concentrations can be persisted next to feeds.
_ALLOWED_PLACEMENTS = {
    "temperature": ("indoor", "outdoor"),
    "relative_humidity": ("indoor", "outdoor"),
    "dew_point": ("indoor", "outdoor"),
    "wind_speed": ("outdoor",),
    "air_exchange_rate": ("indoor",),
    **{species: ("indoor", "outdoor") for species in POLLUTANT_SPECIES},
}

SERIES_CSV_HEADER = ("variable", "placement", "timestamp_utc", "value")


def parse_rfc3339(text):
    """Parse an RFC 3339 timestamp into an aware UTC datetime."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValueError(f"bad RFC 3339 timestamp {text!r}") from exc
    if stamp.tzinfo is None:
        raise ValueError(f"timestamp {text!r} lacks a UTC offset")
    return stamp.astimezone(timezone.utc)


def format_rfc3339(stamp):
    """Render an aware datetime as a second-resolution UTC RFC 3339 string."""
    return stamp.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class SeriesKey:
    """Identity of one ambient variable at one placement."""

    variable: str
    placement: str

    def __post_init__(self):
        if self.variable not in VARIABLE_UNITS:
            raise InvariantViolation(f"unknown variable {self.variable!r}", "variable")
        if self.placement not in _ALLOWED_PLACEMENTS[self.variable]:
            raise InvariantViolation(
                f"variable {self.variable!r} cannot be placed {self.placement!r}",
                "placement",
            )

    @property
    def unit(self):
        return VARIABLE_UNITS[self.variable]

    def slug(self):
        return f"{self.variable}_{self.placement}".replace(".", "_")


@dataclass(frozen=True)
class ObservationPoint:
    """One timestamped measurement of one variable at one placement."""

    variable: str
    placement: str
    timestamp: datetime
    value: float

    def key(self):
        return SeriesKey(self.variable, self.placement)


@dataclass(frozen=True)
class ObservationSeries:
    """Time-ordered samples for one series key."""

    key: SeriesKey
    points: tuple

    def __post_init__(self):
        last = None
        for stamp, value in self.points:
            if last is not None and stamp <= last:
                raise InvariantViolation(
                    f"timestamps must strictly increase (at {format_rfc3339(stamp)})"
                )
            last = stamp
            _check_value(self.key, stamp, value)

    def __len__(self):
        return len(self.points)


def _check_value(key, stamp, value):
    if stamp.tzinfo is None:
        raise InvariantViolation(f"naive timestamp for {key.variable}")
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise InvariantViolation(f"non-finite value {value!r} for {key.variable}")
    if key.variable == "relative_humidity" and not 0.0 <= value <= 100.0:
        raise InvariantViolation(
            f"relative humidity {value} outside [0, 100] at {format_rfc3339(stamp)}"
        )
    if key.variable in POLLUTANT_SPECIES and value < 0.0:
        raise InvariantViolation(
            f"negative concentration {value} for {key.variable} at {format_rfc3339(stamp)}"
        )
    if key.variable in ("wind_speed", "air_exchange_rate") and value < 0.0:
        raise InvariantViolation(f"negative {key.variable} at {format_rfc3339(stamp)}")


@dataclass(frozen=True)
class HangarProfile:
    """Static description of the building envelope and installed equipment."""

    near_sea: bool
    ac_installed: bool
    heating_installed: bool
    filters_installed: bool
    insulation_installed: bool
    barriers_installed: bool
    carpets_installed: bool
    walls_material: str
    roof_material: str
    floor_material: str
    walls_area: float
    roof_area: float
    floor_area: float
    exhibition_area: float
    volume: float

    _FLAGS = (
        "near_sea",
        "ac_installed",
        "heating_installed",
        "filters_installed",
        "insulation_installed",
        "barriers_installed",
        "carpets_installed",
    )
    _MATERIAL_FIELDS = ("walls_material", "roof_material", "floor_material")
    _AREA_FIELDS = ("walls_area", "roof_area", "floor_area", "exhibition_area", "volume")

    def validate(self):
        for name in self._FLAGS:
            if not isinstance(getattr(self, name), bool):
                raise InvariantViolation(f"{name} must be a boolean", name)
        for name in self._MATERIAL_FIELDS:
            if getattr(self, name) not in MATERIALS:
                raise InvariantViolation(
                    f"{name} must be one of {MATERIALS}", name
                )
        for name in self._AREA_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise InvariantViolation(f"{name} must be a positive number", name)
        if self.exhibition_area > self.floor_area:
            raise InvariantViolation(
                "exhibition_area cannot exceed floor_area", "exhibition_area"
            )

    def envelope_area(self):
        """Total interior deposition surface: walls + roof + floor."""
        return self.walls_area + self.roof_area + self.floor_area

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise InvariantViolation(f"unknown profile field {unknown[0]!r}", unknown[0])
        missing = sorted(known - set(doc))
        if missing:
            raise InvariantViolation(f"missing profile field {missing[0]!r}", missing[0])
        profile = cls(**doc)
        profile.validate()
        return profile


class _BaseStore:
    """Shared logic of the in-memory and file-backed stores.

    Concrete stores provide ``_flush_series``, ``_flush_profile``, and
    ``_flush_document`` hooks; reads are served from the in-memory index so
    both backends behave identically under the contract tests.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self._series = {}
        self._profile = None
        self._profile_version = 0
        self._documents = {}
        self._audit = []

    # -- series ------------------------------------------------------------

    def put_samples(self, key, points):
        """Upsert points for ``key``; returns how many changed the series.

        Re-putting an identical point stores nothing.  A duplicate timestamp
        with a different value wins (last writer) and leaves an audit entry.
        """
        if not isinstance(key, SeriesKey):
            key = SeriesKey(*key)
        prepared = []
        for stamp, value in points:
            _check_value(key, stamp, value)
            prepared.append((stamp.astimezone(timezone.utc), float(value)))
        with self._lock:
            bucket = self._series.setdefault(key, {})
            changed = 0
            for stamp, value in prepared:
                old = bucket.get(stamp)
                if old is None:
                    bucket[stamp] = value
                    changed += 1
                elif old != value:
                    self._audit.append(
                        f"{key.variable}/{key.placement} {format_rfc3339(stamp)} "
                        f"overwritten {old!r} -> {value!r}"
                    )
                    bucket[stamp] = value
                    changed += 1
            if changed:
                self._flush_series(key, bucket)
            return changed

    def get_series(self, key, start, end):
        """Return stored points with ``start <= t <= end``, ordered."""
        if not isinstance(key, SeriesKey):
            key = SeriesKey(*key)
        if start > end:
            raise ValueError("range start is after range end")
        with self._lock:
            if key not in self._series:
                raise UnknownSeries(f"{key.variable}/{key.placement}")
            bucket = self._series[key]
            selected = tuple(
                (stamp, bucket[stamp])
                for stamp in sorted(bucket)
                if start <= stamp <= end
            )
        return ObservationSeries(key=key, points=selected)

    def list_keys(self):
        with self._lock:
            return sorted(self._series, key=lambda k: (k.variable, k.placement))

    def has_series(self, key):
        with self._lock:
            return key in self._series and bool(self._series[key])

    # -- profile -----------------------------------------------------------

    def upsert_profile(self, profile):
        """Store the profile; returns a monotonically increasing version id."""
        profile.validate()
        with self._lock:
            self._profile = profile
            self._profile_version += 1
            self._flush_profile()
            return self._profile_version

    def get_profile(self):
        with self._lock:
            if self._profile is None:
                raise NoProfile("no hangar profile stored")
            return self._profile

    def profile_version(self):
        with self._lock:
            return self._profile_version

    # -- documents (snapshots, trained models) ------------------------------

    def put_document(self, name, text):
        with self._lock:
            self._documents[name] = text
            self._flush_document(name, text)

    def get_document(self, name):
        with self._lock:
            return self._documents.get(name)

    def audit_entries(self):
        with self._lock:
            return list(self._audit)

    # -- backend hooks -------------------------------------------------------

    def _flush_series(self, key, bucket):
        pass

    def _flush_profile(self):
        pass

    def _flush_document(self, name, text):
        pass


class MemoryStore(_BaseStore):
    """Volatile store for tests and dry runs."""


class FileStore(_BaseStore):
    """Embedded file-backed store rooted at a directory.

    Layout: ``series/<variable>_<placement>.csv`` in the interchange schema,
    ``profile.json`` with its version, ``documents/<name>``, ``audit.log``.
    """

    def __init__(self, root):
        super().__init__()
        self._root = str(root)
        try:
            os.makedirs(os.path.join(self._root, "series"), exist_ok=True)
            os.makedirs(os.path.join(self._root, "documents"), exist_ok=True)
        except OSError as exc:
            raise StorageUnavailable(f"cannot create store at {self._root}: {exc}") from exc
        self._load()

    def _load(self):
        series_dir = os.path.join(self._root, "series")
        try:
            names = sorted(os.listdir(series_dir))
        except OSError as exc:
            raise StorageUnavailable(str(exc)) from exc
        for name in names:
            if not name.endswith(".csv"):
                continue
            with open(os.path.join(series_dir, name), newline="", encoding="utf-8") as fh:
                for key, stamp, value in _read_series_rows(fh):
                    self._series.setdefault(key, {})[stamp] = value
        profile_path = os.path.join(self._root, "profile.json")
        if os.path.exists(profile_path):
            with open(profile_path, encoding="utf-8") as fh:
                doc = json.load(fh)
            self._profile = HangarProfile.from_dict(doc["profile"])
            self._profile_version = int(doc["version"])
        docs_dir = os.path.join(self._root, "documents")
        for name in sorted(os.listdir(docs_dir)):
            with open(os.path.join(docs_dir, name), encoding="utf-8") as fh:
                self._documents[name] = fh.read()
        audit_path = os.path.join(self._root, "audit.log")
        if os.path.exists(audit_path):
            with open(audit_path, encoding="utf-8") as fh:
                self._audit = [line.rstrip("\n") for line in fh if line.strip()]

    def _flush_series(self, key, bucket):
        path = os.path.join(self._root, "series", key.slug() + ".csv")
        try:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(SERIES_CSV_HEADER)
                for stamp in sorted(bucket):
                    writer.writerow(
                        (key.variable, key.placement, format_rfc3339(stamp), repr(bucket[stamp]))
                    )
            self._flush_audit()
        except OSError as exc:
            raise StorageUnavailable(str(exc)) from exc

    def _flush_profile(self):
        path = os.path.join(self._root, "profile.json")
        doc = {"version": self._profile_version, "profile": self._profile.to_dict()}
        try:
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=1, sort_keys=True)
        except OSError as exc:
            raise StorageUnavailable(str(exc)) from exc

    def _flush_document(self, name, text):
        path = os.path.join(self._root, "documents", name)
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise StorageUnavailable(str(exc)) from exc

    def _flush_audit(self):
        path = os.path.join(self._root, "audit.log")
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self._audit:
                fh.write(entry + "\n")


def _read_series_rows(stream):
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return
    if tuple(header) != SERIES_CSV_HEADER:
        raise InvariantViolation(f"bad series CSV header {header!r}")
    for row in reader:
        if not row:
            continue
        variable, placement, stamp, value = row
        yield SeriesKey(variable, placement), parse_rfc3339(stamp), float(value)


def export_series_csv(store, keys=None):
    """Dump stored series in the interchange schema, sorted for stable diffs."""
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(SERIES_CSV_HEADER)
    for key in keys if keys is not None else store.list_keys():
        series = store.get_series(key, datetime.min.replace(tzinfo=timezone.utc),
                                  datetime.max.replace(tzinfo=timezone.utc))
        for stamp, value in series.points:
            writer.writerow((key.variable, key.placement, format_rfc3339(stamp), repr(value)))
    return out.getvalue()


def import_series_csv(store, text):
    """Load interchange-schema CSV into the store; returns points stored."""
    grouped = {}
    for key, stamp, value in _read_series_rows(io.StringIO(text)):
        grouped.setdefault(key, []).append((stamp, value))
    stored = 0
    for key, points in grouped.items():
        stored += store.put_samples(key, points)
    return stored

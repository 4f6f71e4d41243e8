"""Decode METAR weather reports and pollutant feeds into observation points.

Only the report groups the evaluation pipeline consumes are decoded:
station, day-hour-minute time, wind (including VRB and gusts), temperature
and dew point, QNH pressure, and present-weather tokens.  Everything else,
remarks included, stays in ``raw`` untouched.
"""

from __future__ import annotations

import csv
import io
import math
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from datetime import datetime, timezone

from .store import ObservationPoint, POLLUTANT_SPECIES, parse_rfc3339


class IngestError(Exception):
    """Base class for feed decoding failures."""


class MalformedReport(IngestError):
    """A mandatory METAR group is missing or cannot be decoded."""

    def __init__(self, group, message=None):
        super().__init__(message or f"undecodable {group} group")
        self.group = group


class UnknownUnit(IngestError):
    """Wind group uses a unit other than KT or MPS."""


class BadHeader(IngestError):
    """Pollutant CSV header does not match the interchange schema."""


class BadRow(IngestError):
    """One pollutant CSV row is invalid; carries its 1-based data row index."""

    def __init__(self, index, reason):
        super().__init__(f"row {index}: {reason}")
        self.index = index
        self.reason = reason


class Unreachable(IngestError):
    """A configured feed endpoint cannot be contacted."""


class DecodeError(IngestError):
    """A feed payload was fetched but could not be parsed."""


KNOT_TO_MS = 0.514444
VARIABLE_WIND = "variable"

_STATION_RE = re.compile(r"^[A-Z][A-Z0-9]{3}$")
_TIME_RE = re.compile(r"^(\d{2})(\d{2})(\d{2})Z$")
_WIND_RE = re.compile(r"^(VRB|\d{3})(\d{2,3})(?:G(\d{2,3}))?([A-Z]{2,3})$")
_TEMP_RE = re.compile(r"^(M?\d{2})/(M?\d{2})$")
_PRESSURE_RE = re.compile(r"^Q(\d{4})$")
# present-weather: optional intensity/vicinity, optional descriptor(s), at
# least one phenomenon code
_WEATHER_RE = re.compile(
    r"^[+-]?(?:VC)?(?:MI|PR|BC|DR|BL|SH|TS|FZ)*"
    r"(?:DZ|RA|SN|SG|IC|PL|GR|GS|UP|BR|FG|FU|VA|DU|SA|HZ|PO|SQ|FC|SS|DS)+$"
)


@dataclass(frozen=True)
class MetarReport:
    """Decoded subset of one METAR report."""

    station: str
    observed_at: datetime
    wind_direction: object  # degrees true in [0, 360), or "variable"
    wind_speed: float  # m/s
    wind_gust: object  # m/s or None
    temperature: float  # degC
    dew_point: float  # degC
    pressure: object  # hPa or None
    weather_codes: tuple
    raw: str


@dataclass(frozen=True)
class PollutantRecord:
    station_id: str
    observed_at: datetime
    species: str
    concentration: float  # ug/m3

    def to_point(self):
        return ObservationPoint(self.species, "outdoor", self.observed_at, self.concentration)


@dataclass
class PollutionParse:
    """Outcome of a lenient pollutant CSV parse."""

    records: list
    errors: list


@dataclass(frozen=True)
class FeedSource:
    """Named external feed; ``location`` is a URL or a local file path."""

    name: str
    kind: str  # "metar" | "pollution"
    location: str


def _decode_temp(token):
    return -float(token[1:]) if token.startswith("M") else float(token)


def _decode_wind(token):
    match = _WIND_RE.match(token)
    if match is None:
        raise MalformedReport("wind", f"undecodable wind group {token!r}")
    direction_raw, speed_raw, gust_raw, unit = match.groups()
    if unit == "KT":
        factor = KNOT_TO_MS
    elif unit == "MPS":
        factor = 1.0
    else:
        raise UnknownUnit(f"unsupported wind unit {unit!r}")
    if direction_raw == "VRB":
        direction = VARIABLE_WIND
    else:
        degrees = int(direction_raw)
        if degrees > 360:
            raise MalformedReport("wind", f"wind direction {degrees} out of range")
        direction = float(degrees % 360)
    speed = int(speed_raw) * factor
    gust = int(gust_raw) * factor if gust_raw else None
    return direction, speed, gust


def parse_metar(text, reference=None):
    """Parse a single METAR report line.

    ``reference`` supplies the month the day-of-month group resolves
    against: an aware datetime or ``(year, month)``; defaults to the current
    UTC month.  Wind speeds are converted to m/s (1 kt = 0.514444 m/s).
    """
    raw = text.strip()
    tokens = raw.split()
    if tokens and tokens[0] == "METAR":
        tokens = tokens[1:]
    if not tokens or not _STATION_RE.match(tokens[0]):
        raise MalformedReport("station", f"missing or invalid station in {raw!r}")
    station = tokens[0]

    if len(tokens) < 2 or not (match := _TIME_RE.match(tokens[1])):
        raise MalformedReport("time", "missing day-hour-minute group")
    day, hour, minute = (int(g) for g in match.groups())
    if reference is None:
        reference = datetime.now(timezone.utc)
    year, month = (reference.year, reference.month) if isinstance(reference, datetime) else reference
    try:
        observed_at = datetime(year, month, day, hour, minute, tzinfo=timezone.utc)
    except ValueError as exc:
        raise MalformedReport("time", str(exc)) from exc

    if len(tokens) < 3:
        raise MalformedReport("wind", "missing wind group")
    direction, speed, gust = _decode_wind(tokens[2])

    temperature = dew_point = None
    pressure = None
    weather = []
    for token in tokens[3:]:
        if token == "RMK":  # remarks stay raw, never decoded
            break
        if temperature is None and (match := _TEMP_RE.match(token)):
            temperature = _decode_temp(match.group(1))
            dew_point = _decode_temp(match.group(2))
            continue
        if pressure is None and (match := _PRESSURE_RE.match(token)):
            pressure = float(match.group(1))
            continue
        if temperature is None and _WEATHER_RE.match(token):
            weather.append(token)
    if temperature is None:
        raise MalformedReport("temperature/dew-point", "missing temperature/dew-point group")
    if dew_point > temperature + 0.5:  # sensor rounding slack
        raise MalformedReport(
            "temperature/dew-point",
            f"dew point {dew_point} above temperature {temperature}",
        )

    return MetarReport(
        station=station,
        observed_at=observed_at,
        wind_direction=direction,
        wind_speed=speed,
        wind_gust=gust,
        temperature=temperature,
        dew_point=dew_point,
        pressure=pressure,
        weather_codes=tuple(weather),
        raw=raw,
    )


def points_from_metar(report):
    """Observation points a report contributes: outdoor T, DP, wind speed."""
    stamp = report.observed_at
    return [
        ObservationPoint("temperature", "outdoor", stamp, report.temperature),
        ObservationPoint("dew_point", "outdoor", stamp, report.dew_point),
        ObservationPoint("wind_speed", "outdoor", stamp, report.wind_speed),
    ]


POLLUTION_CSV_HEADER = ("station_id", "timestamp_utc", "species", "concentration_ug_m3")


def parse_pollution_csv(text, strict=False):
    """Parse pollutant interchange CSV.

    Row errors are collected per 1-based data row index without aborting the
    stream; ``strict=True`` raises on the first bad row instead.  The header
    must match :data:`POLLUTION_CSV_HEADER` exactly.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != POLLUTION_CSV_HEADER:
        raise BadHeader(f"expected header {','.join(POLLUTION_CSV_HEADER)!r}")
    records = []
    errors = []
    for index, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            records.append(_decode_pollution_row(index, row))
        except BadRow as exc:
            if strict:
                raise
            errors.append(exc)
    return PollutionParse(records=records, errors=errors)


def _decode_pollution_row(index, row):
    if len(row) != 4:
        raise BadRow(index, f"expected 4 fields, got {len(row)}")
    station_id, stamp_raw, species, conc_raw = (cell.strip() for cell in row)
    if not station_id:
        raise BadRow(index, "empty station_id")
    try:
        stamp = parse_rfc3339(stamp_raw)
    except ValueError as exc:
        raise BadRow(index, str(exc)) from exc
    if species not in POLLUTANT_SPECIES:
        raise BadRow(index, f"unknown species {species!r}")
    try:
        concentration = float(conc_raw)
    except ValueError as exc:
        raise BadRow(index, f"bad concentration {conc_raw!r}") from exc
    if not math.isfinite(concentration) or concentration < 0:
        raise BadRow(index, f"negative concentration {concentration}")
    return PollutantRecord(station_id, stamp, species, concentration)


def _default_opener(source):
    if "://" in source.location:
        with urllib.request.urlopen(source.location, timeout=30) as response:
            return response.read().decode("utf-8")
    with open(source.location, encoding="utf-8") as fh:
        return fh.read()


def fetch_feed(source, window, opener=None):
    """Fetch and parse one feed, returning points inside ``window``.

    ``opener`` maps a :class:`FeedSource` to its raw text payload; tests
    substitute a canned transcript here.  METAR day-of-month stamps resolve
    against the month of the window start.
    """
    opener = opener or _default_opener
    start, end = window
    try:
        payload = opener(source)
    except (OSError, urllib.error.URLError) as exc:
        raise Unreachable(f"{source.name}: {exc}") from exc

    points = []
    try:
        if source.kind == "metar":
            for line in payload.splitlines():
                if not line.strip():
                    continue
                report = parse_metar(line, reference=(start.year, start.month))
                points.extend(points_from_metar(report))
        elif source.kind == "pollution":
            parsed = parse_pollution_csv(payload, strict=True)
            points.extend(record.to_point() for record in parsed.records)
        else:
            raise DecodeError(f"unknown feed kind {source.kind!r}")
    except (MalformedReport, UnknownUnit, BadHeader, BadRow) as exc:
        raise DecodeError(f"{source.name}: {exc}") from exc

    selected = [p for p in points if start <= p.timestamp <= end]
    selected.sort(key=lambda p: (p.timestamp, p.variable))
    return selected

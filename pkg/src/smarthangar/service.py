"""HTTP service and the shared evaluation core behind it and the CLI.

Every mutating flow is push-driven and deterministic: identical stored data
and configuration produce byte-identical evaluation snapshots, so the same
``run_evaluation`` path backs golden tests, the CLI, and the API.  Feed
polling is optional and never required for operation.
"""

from __future__ import annotations

import collections
import csv
import json
import os
import threading
from dataclasses import dataclass, field, fields
from datetime import datetime, timedelta, timezone
from socketserver import ThreadingMixIn
from urllib.parse import parse_qs
from wsgiref.simple_server import WSGIServer, make_server

from . import decision, features, ingest, pipeline, risk, store as store_mod
from .store import (
    HangarProfile,
    InvariantViolation,
    NoProfile,
    POLLUTANT_SPECIES,
    SeriesKey,
    StorageUnavailable,
    format_rfc3339,
    parse_rfc3339,
)

SNAPSHOT_DOCUMENT = "evaluation_snapshot.json"
TREE_DOCUMENT = "tree.json"

# effective deposition velocities in m/h per species and envelope material;
# order-of-magnitude defaults, overridable in the configuration file
DEFAULT_DEPOSITION = {
    "SO2": {"wood": 1.8, "concrete": 1.4, "steel": 0.4},
    "PM10": {"wood": 0.7, "concrete": 0.7, "steel": 0.7},
    "PM2.5": {"wood": 0.2, "concrete": 0.2, "steel": 0.2},
}


class ServiceError(Exception):
    pass


class ConfigError(ServiceError):
    pass


class MissingProfile(ServiceError):
    """Evaluation requires a stored hangar profile."""


class InsufficientData(ServiceError):
    def __init__(self, missing_series):
        super().__init__(f"missing series: {', '.join(missing_series)}")
        self.missing_series = list(missing_series)


class NoEvaluation(ServiceError):
    """No evaluation snapshot exists yet."""


@dataclass(frozen=True)
class ServiceConfig:
    """Wiring of the whole system; loaded from one JSON file."""

    storage_path: str = "smarthangar_data"
    listen_address: str = "127.0.0.1:8421"
    step_hours: float = 1.0
    max_gap_hours: float = 6.0
    ma_window: object = 24  # whole hours, or "search"
    ma_validation_path: object = None  # labeled condensation fixture for the search
    metar_station: str = "LKKB"
    poll_cadence_minutes: float = 30.0
    feeds: tuple = ()
    air_exchange_rate: float = 0.5  # 1/h, used when no measured series exists
    air_exchange_min: float = 0.2
    air_exchange_max: float = 1.0
    deposition_velocity: dict = field(default_factory=lambda: {
        species: dict(table) for species, table in DEFAULT_DEPOSITION.items()
    })
    artifact_equivalent_area: float = 0.0  # m2 added to the deposition surface
    salinity_class: object = None  # measured chloride class 0..3, if any
    occupancy: object = None  # persons, if tracked
    risk_model_path: object = None
    rules_path: object = None
    iso_table_path: object = None

    def validate(self, check_paths=True):
        if self.step_hours <= 0:
            raise ConfigError("step_hours must be positive")
        if self.max_gap_hours <= 0:
            raise ConfigError("max_gap_hours must be positive")
        if self.poll_cadence_minutes <= 0:
            raise ConfigError("poll_cadence_minutes must be positive")
        if self.ma_window != "search":
            if not isinstance(self.ma_window, int) or not 1 <= self.ma_window <= 168:
                raise ConfigError("ma_window must be 1..168 hours or 'search'")
        if not 0 <= self.air_exchange_min <= self.air_exchange_max:
            raise ConfigError("need 0 <= air_exchange_min <= air_exchange_max")
        if self.air_exchange_rate < 0:
            raise ConfigError("air_exchange_rate must be >= 0")
        if self.artifact_equivalent_area < 0:
            raise ConfigError("artifact_equivalent_area must be >= 0")
        if check_paths:
            for name in ("ma_validation_path", "risk_model_path", "rules_path", "iso_table_path"):
                path = getattr(self, name)
                if path is not None and not os.path.exists(path):
                    raise ConfigError(f"{name} points to a missing file: {path}")

    def to_dict(self):
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["feeds"] = [
            {"name": f.name, "kind": f.kind, "location": f.location} for f in self.feeds
        ]
        return doc


def config_from_dict(doc, check_paths=True):
    known = {f.name for f in fields(ServiceConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown configuration key {unknown[0]!r}")
    payload = dict(doc)
    if "feeds" in payload:
        payload["feeds"] = tuple(
            ingest.FeedSource(name=f["name"], kind=f["kind"], location=f["location"])
            for f in payload["feeds"]
        )
    config = ServiceConfig(**payload)
    config.validate(check_paths=check_paths)
    return config


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"unparseable configuration: {exc}") from exc
    return config_from_dict(doc)


@dataclass
class IngestCounts:
    parsed: int
    stored: int
    failed: list  # {"line"/"row": index, "error": message}

    def to_dict(self):
        return {"parsed": self.parsed, "stored": self.stored, "failed": self.failed}


def _mean(values):
    present = [v for v in values if v is not None]
    return sum(present) / len(present) if present else 0.0


def _daily_averages(series):
    """Collapse a uniform series to per-UTC-date means for reporting."""
    buckets = {}
    for stamp, value in zip(series.timestamps(), series.values):
        if value is None:
            continue
        day = stamp.date().isoformat()
        acc = buckets.setdefault(day, [0.0, 0])
        acc[0] += value
        acc[1] += 1
    return [[day, buckets[day][0] / buckets[day][1]] for day in sorted(buckets)]


def load_ma_validation(path):
    """Read the labeled condensation fixture used by the window search.

    CSV columns: timestamp_utc, temperature, relative_humidity, so2, label.
    Rows must sit on a uniform grid.
    """
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["timestamp_utc", "temperature", "relative_humidity", "so2", "label"]:
            raise ConfigError(f"bad validation fixture header: {header!r}")
        stamps, temps, rhs, so2s, labels = [], [], [], [], []
        for row in reader:
            if not row:
                continue
            stamps.append(parse_rfc3339(row[0]))
            temps.append(float(row[1]))
            rhs.append(float(row[2]))
            so2s.append(float(row[3]))
            labels.append(int(row[4]))
    if len(stamps) < 2:
        raise ConfigError("validation fixture needs at least two rows")
    step = stamps[1] - stamps[0]
    for a, b in zip(stamps, stamps[1:]):
        if b - a != step:
            raise ConfigError("validation fixture rows are not uniformly spaced")
    make = lambda vals: pipeline.UniformSeries(start=stamps[0], step=step, values=tuple(vals))
    return {
        "temperature": make(temps),
        "relative_humidity": make(rhs),
        "so2": make(so2s),
        "labels": labels,
    }


def ma_search_objective(fixture, model):
    """Disagreement between thresholded risk on smoothed inputs and the
    fixture's condensation labels, as a function of the window length."""
    raw_t = fixture["temperature"]
    flags = risk.thaw_flags(raw_t)

    def objective(window_hours):
        t_s = pipeline.moving_average(raw_t, window_hours)
        rh_s = pipeline.moving_average(fixture["relative_humidity"], window_hours)
        so2_s = pipeline.moving_average(fixture["so2"], window_hours)
        dp_s = _dew_point_series(t_s, rh_s)
        scores = risk.score_series(t_s, dp_s, rh_s, so2_s, model, flags=flags)
        wrong = 0
        for score, label in zip(scores.values, fixture["labels"]):
            predicted = 1 if (score is not None and score >= 0.5) else 0
            wrong += predicted != label
        return wrong / len(fixture["labels"])

    return objective


def _dew_point_series(temperature, humidity):
    values = []
    for t, rh in zip(temperature.values, humidity.values):
        if t is None or rh is None or rh <= 0.0:
            values.append(None)
            continue
        try:
            values.append(features.dew_point(t, min(rh, 100.0)))
        except features.OutOfRange:  # beyond the Magnus validity band
            values.append(None)
    return pipeline.UniformSeries(
        start=temperature.start, step=temperature.step, values=tuple(values)
    )


class Service:
    """Owns the store, configuration, models, and the served decision tree."""

    def __init__(self, store, config=None):
        self.store = store
        self.config = config or ServiceConfig()
        self.config.validate(check_paths=False)
        self.risk_model = risk.load_risk_model(self.config.risk_model_path)
        self.category_table = risk.load_category_table(self.config.iso_table_path)
        self.rules = decision.load_rules(self.config.rules_path)
        self.poll_errors = collections.deque(maxlen=50)
        self._tree_lock = threading.Lock()
        self._corpus = None
        self._tree = None
        self._ensure_tree()

    # -- model lifecycle -----------------------------------------------------

    def _ensure_tree(self):
        saved = self.store.get_document(TREE_DOCUMENT)
        build = decision.default_corpus(self.rules)
        self._corpus = build.corpus
        self.rule_coverage = build.coverage
        if saved is not None:
            self._tree = decision.import_tree(saved)
            return
        tree = decision.train_tree(self._corpus)
        self._swap_tree(tree)

    def _swap_tree(self, tree):
        with self._tree_lock:
            self._tree = tree
            self.store.put_document(TREE_DOCUMENT, decision.export_tree(tree))

    @property
    def tree(self):
        with self._tree_lock:
            return self._tree

    def retrain(self, examples=None, rules_path=None):
        """Retrain from scratch; the served tree swaps atomically on success."""
        if rules_path is not None:
            rules = decision.load_rules(rules_path)
            build = decision.default_corpus(rules)
            corpus, coverage = build.corpus, build.coverage
        else:
            rules, coverage = self.rules, self.rule_coverage
            corpus = self._corpus
        new_examples = []
        for record in examples or ():
            inp = decision.DecisionInput.from_dict(record["input"])
            actions = decision.ActionVector.from_dict(record["actions"])
            new_examples.append((inp, actions))
        tree = decision.retrain(corpus, new_examples, self.tree.params)
        self.rules = rules
        self._corpus = corpus + new_examples
        self.rule_coverage = coverage
        self._swap_tree(tree)
        return tree.fingerprint

    # -- ingestion -----------------------------------------------------------

    def ingest_metar_text(self, text, reference=None):
        """Parse and store METAR lines; partial failures never abort the batch."""
        parsed = 0
        stored = 0
        failed = []
        for index, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                report = ingest.parse_metar(line, reference=reference)
            except ingest.IngestError as exc:
                failed.append({"line": index, "error": str(exc)})
                continue
            parsed += 1
            new_points = 0
            for point in ingest.points_from_metar(report):
                new_points += self.store.put_samples(
                    point.key(), [(point.timestamp, point.value)]
                )
            stored += 1 if new_points else 0
        return IngestCounts(parsed=parsed, stored=stored, failed=failed)

    def ingest_pollution_csv(self, text):
        result = ingest.parse_pollution_csv(text)
        failed = [{"row": err.index, "error": err.reason} for err in result.errors]
        grouped = {}
        for record in result.records:
            point = record.to_point()
            grouped.setdefault(point.key(), []).append((point.timestamp, point.value))
        stored = sum(self.store.put_samples(key, points) for key, points in grouped.items())
        return IngestCounts(parsed=len(result.records), stored=stored, failed=failed)

    def ingest_series_csv(self, text):
        stored = store_mod.import_series_csv(self.store, text)
        return IngestCounts(parsed=stored, stored=stored, failed=[])

    def poll_feeds_once(self, window=None, opener=None):
        """Fetch every configured feed and store its observations.

        Polling is optional sugar over the push endpoints; the default
        window is the last 24 hours.  Returns points stored per feed.
        """
        if window is None:
            now = datetime.now(timezone.utc)
            window = (now - timedelta(hours=24), now)
        stored = {}
        for source in self.config.feeds:
            try:
                points = ingest.fetch_feed(source, window, opener=opener)
            except ingest.IngestError as exc:
                self.poll_errors.append(f"{source.name}: {exc}")
                continue
            grouped = {}
            for point in points:
                grouped.setdefault(point.key(), []).append((point.timestamp, point.value))
            stored[source.name] = sum(
                self.store.put_samples(key, pts) for key, pts in grouped.items()
            )
        return stored

    def start_feed_polling(self, opener=None):
        """Poll configured feeds at the configured cadence until stopped.

        Returns a threading.Event; set it to stop the daemon loop.
        """
        stop = threading.Event()
        interval = self.config.poll_cadence_minutes * 60.0

        def loop():
            while not stop.wait(interval):
                self.poll_feeds_once(opener=opener)

        threading.Thread(target=loop, name="feed-poller", daemon=True).start()
        return stop

    # -- profile ---------------------------------------------------------------

    def put_profile(self, doc):
        return self.store.upsert_profile(HangarProfile.from_dict(doc))

    def profile_document(self):
        profile = self.store.get_profile()
        return {"version": self.store.profile_version(), "profile": profile.to_dict()}

    # -- evaluation -------------------------------------------------------------

    def _grab(self, variable, placement, start, end, count, step, max_gap):
        key = SeriesKey(variable, placement)
        if not self.store.has_series(key):
            return None
        series = self.store.get_series(key, start, end)
        if not series.points:
            return None
        return pipeline.resample_onto(series.points, start, count, step, max_gap)

    def _air_exchange(self, start, end, count, step, max_gap):
        measured = self._grab("air_exchange_rate", "indoor", start, end, count, step, max_gap)
        if measured is None:
            return self.config.air_exchange_rate
        rates = []
        held = self.config.air_exchange_rate
        for value in measured.values:
            if value is not None:
                held = value
            rates.append(held)
        return rates

    def _window_setting(self, overrides):
        setting = overrides.get("ma_window", self.config.ma_window)
        if setting == "search":
            if self.config.ma_validation_path is None:
                raise ConfigError("ma_window search needs ma_validation_path")
            fixture = load_ma_validation(self.config.ma_validation_path)
            result = pipeline.grid_search_window(
                ma_search_objective(fixture, self.risk_model)
            )
            return result.best_window, [[w, s] for w, s in result.table]
        window = int(setting)
        if not 1 <= window <= 168:
            raise ConfigError("ma_window must be 1..168 hours or 'search'")
        return window, None

    def evaluate(self, start, end, overrides=None, dry_run=False):
        """Run the full pipeline over [start, end] and persist the snapshot.

        Resample -> smooth -> derived features -> risk series -> corrosivity
        category -> tree recommendation, all deterministic for fixed inputs.
        """
        overrides = overrides or {}
        try:
            profile = self.store.get_profile()
        except NoProfile as exc:
            raise MissingProfile(str(exc)) from exc
        if overrides.get("profile"):
            merged = profile.to_dict()
            merged.update(overrides["profile"])
            profile = HangarProfile.from_dict(merged)
        if end < start:
            raise ServiceError("window end precedes start")

        step = timedelta(hours=self.config.step_hours)
        max_gap = timedelta(hours=self.config.max_gap_hours)
        count = (end - start) // step + 1
        period_hours = count * self.config.step_hours
        annual_factor = risk.HOURS_PER_YEAR / period_hours

        indoor_t = self._grab("temperature", "indoor", start, end, count, step, max_gap)
        indoor_rh = self._grab("relative_humidity", "indoor", start, end, count, step, max_gap)
        missing = [
            name
            for name, series in (
                ("temperature/indoor", indoor_t),
                ("relative_humidity/indoor", indoor_rh),
            )
            if series is None
        ]
        if missing:
            raise InsufficientData(missing)

        window_hours, score_table = self._window_setting(overrides)
        t_smooth = pipeline.moving_average(indoor_t, window_hours)
        rh_smooth = pipeline.moving_average(indoor_rh, window_hours)
        dp_smooth = _dew_point_series(t_smooth, rh_smooth)

        # wetness and freeze-thaw stay on the unsmoothed grid: both count
        # raw exceedances, and smoothing would erase the crossings
        tow = features.time_of_wetness(indoor_t, indoor_rh)
        tow_annual = risk.annualize_tow(tow, period_hours)
        ft_count = features.freeze_thaw_events(indoor_t)
        flags = risk.thaw_flags(indoor_t)

        rates = self._air_exchange(start, end, count, step, max_gap)
        surface_area = profile.envelope_area() + self.config.artifact_equivalent_area
        indoor_pollutants = {}
        bands = {}
        annual_means = {}
        for species in POLLUTANT_SPECIES:
            outdoor = self._grab(species, "outdoor", start, end, count, step, max_gap)
            if outdoor is None:
                continue
            velocity = features.effective_deposition_velocity(
                profile, self.config.deposition_velocity, species
            )
            computed = self._integrate_species(outdoor, rates, velocity, surface_area,
                                               profile.volume)
            if computed is None:
                continue
            indoor_series, band = computed
            indoor_pollutants[species] = indoor_series
            bands[species] = band
            annual_means[species] = _mean(indoor_series.values)

        summary = features.FeatureSummary(
            time_of_wetness=tow,
            period_hours=period_hours,
            indoor_pollutants=indoor_pollutants,
            indoor_pollutant_band=bands,
            freeze_thaw_events=ft_count,
        )
        summary.validate()

        so2_indoor = indoor_pollutants.get("SO2")
        if so2_indoor is None:
            so2_smooth = pipeline.UniformSeries(start=start, step=step, values=(0.0,) * count)
        else:
            so2_smooth = pipeline.moving_average(so2_indoor, window_hours)
        scores = risk.score_series(
            t_smooth, dp_smooth, rh_smooth, so2_smooth, self.risk_model, flags=flags
        )
        mean_risk = _mean(scores.values)
        max_risk = max((v for v in scores.values if v is not None), default=0.0)

        outdoor_rh = self._grab("relative_humidity", "outdoor", start, end, count, step, max_gap)
        if outdoor_rh is None:
            outdoor_rh = self._derived_outdoor_rh(start, end, count, step, max_gap)
        if outdoor_rh is None:
            rh_delta = 0.0
        else:
            rh_delta = _mean(indoor_rh.values) - _mean(outdoor_rh.values)

        corrosivity = risk.iso9223_category(
            tow_annual,
            annual_means.get("SO2", 0.0),
            salinity_class=self.config.salinity_class,
            near_sea=profile.near_sea,
            table=self.category_table,
        )

        dec_input = decision.DecisionInput.from_profile(
            profile,
            time_of_wetness=tow_annual,
            iso_category=corrosivity.category,
            mean_risk=mean_risk,
            max_risk=max_risk,
            freeze_thaw_events=ft_count * annual_factor,
            indoor_so2_annual=annual_means.get("SO2", 0.0),
            indoor_pm10_annual=annual_means.get("PM10", 0.0),
            indoor_pm25_annual=annual_means.get("PM2.5", 0.0),
            rh_indoor_minus_outdoor=rh_delta,
            occupancy=self.config.occupancy,
        )
        actions, coercions = decision.predict_detailed(self.tree, dec_input)
        explanations = self._explanations(dec_input, actions)

        snapshot = {
            "format": "smarthangar-snapshot/1",
            "window": {
                "from": format_rfc3339(start),
                "to": format_rfc3339(end),
                "step_hours": self.config.step_hours,
                "grid_points": count,
                "period_hours": period_hours,
            },
            "ma_window_hours": window_hours,
            "ma_score_table": score_table,
            "profile": profile.to_dict(),
            "features": {
                "time_of_wetness_hours": tow,
                "time_of_wetness_annual_hours": tow_annual,
                "freeze_thaw_events": ft_count,
                "freeze_thaw_events_annual": ft_count * annual_factor,
                "indoor_annual_means_ug_m3": {k: annual_means[k] for k in sorted(annual_means)},
                "rh_indoor_minus_outdoor": rh_delta,
            },
            "iso9223": {
                "tow_class": corrosivity.tow_class,
                "so2_class": corrosivity.so2_class,
                "salinity_class": corrosivity.salinity_class,
                "category": corrosivity.category,
                "label": corrosivity.label,
            },
            "risk": {
                "mean": mean_risk,
                "max": max_risk,
                "timeline": [
                    [format_rfc3339(stamp), value]
                    for stamp, value in zip(scores.timestamps(), scores.values)
                ],
            },
            "pollution": {
                "indoor_daily": {
                    species: _daily_averages(series)
                    for species, series in sorted(indoor_pollutants.items())
                },
                "band_daily": {
                    species: {
                        "low": _daily_averages(band[0]),
                        "high": _daily_averages(band[1]),
                    }
                    for species, band in sorted(bands.items())
                },
            },
            "decision_input": dec_input.to_dict(),
            "actions": actions.to_dict(),
            "coercions": coercions,
            "explanations": explanations,
            "tree_fingerprint": self.tree.fingerprint,
            "generated_at": format_rfc3339(end),
        }
        if not dry_run:
            self.store.put_document(SNAPSHOT_DOCUMENT, snapshot_text(snapshot))
        return snapshot

    def _integrate_species(self, outdoor, rates, velocity, surface_area, volume):
        values = outdoor.values
        first = next((i for i, v in enumerate(values) if v is not None), None)
        if first is None:
            return None
        sub = pipeline.UniformSeries(
            start=outdoor.start + first * outdoor.step,
            step=outdoor.step,
            values=values[first:],
        )
        sub_rates = rates[first:] if isinstance(rates, list) else rates
        params = features.InfiltrationParams(
            air_exchange_rate=sub_rates,
            deposition_velocity=velocity,
            surface_area=surface_area,
            volume=volume,
        )
        n0 = sub_rates[0] if isinstance(sub_rates, list) else sub_rates
        lam0 = n0 + params.sink_rate
        initial = n0 * values[first] / lam0 if lam0 > 0 else 0.0
        indoor_series = features.indoor_concentration(sub, params, initial)
        low, high = features.indoor_band(
            sub, params, self.config.air_exchange_min, self.config.air_exchange_max, initial
        )
        pad = (None,) * first

        def padded(series):
            return pipeline.UniformSeries(
                start=outdoor.start, step=outdoor.step, values=pad + series.values
            )

        return padded(indoor_series), (padded(low), padded(high))

    def _derived_outdoor_rh(self, start, end, count, step, max_gap):
        t_out = self._grab("temperature", "outdoor", start, end, count, step, max_gap)
        dp_out = self._grab("dew_point", "outdoor", start, end, count, step, max_gap)
        if t_out is None or dp_out is None:
            return None
        values = []
        for t, dp in zip(t_out.values, dp_out.values):
            if t is None or dp is None:
                values.append(None)
                continue
            try:
                values.append(features.relative_humidity(t, dp))
            except features.OutOfRange:
                values.append(None)
        return pipeline.UniformSeries(start=start, step=step, values=tuple(values))

    def _explanations(self, dec_input, actions):
        """Rule citations backing every recommended action.

        The tree predicts; the serving layer re-checks which rules fire and
        reports their citations.  After ad-hoc retraining the two can
        disagree, which is flagged rather than hidden.
        """
        firing = [rule for rule in self.rules if rule.fires(dec_input)]
        out = {}
        for name in decision.ACTION_NAMES:
            value = getattr(actions, name)
            if value == decision.NO_ACTION:
                continue
            citations = [
                rule.citation for rule in firing if rule.consequent.get(name) == value
            ]
            out[name] = citations or ["model-derived, no matching rule"]
        return out

    # -- read models -----------------------------------------------------------

    def latest_snapshot(self):
        text = self.store.get_document(SNAPSHOT_DOCUMENT)
        if text is None:
            raise NoEvaluation("no evaluation snapshot")
        return json.loads(text)

    def risk_timeline(self, start=None, end=None):
        snapshot = self.latest_snapshot()
        points = snapshot["risk"]["timeline"]
        if start is not None:
            points = [p for p in points if parse_rfc3339(p[0]) >= start]
        if end is not None:
            points = [p for p in points if parse_rfc3339(p[0]) <= end]
        return points

    def recommendation(self):
        snapshot = self.latest_snapshot()
        return recommendation_from_snapshot(snapshot)

    def health(self):
        return {
            "status": "ok",
            "series": len(self.store.list_keys()),
            "profile_stored": self._has_profile(),
            "tree_fingerprint": self.tree.fingerprint,
            "version": 1,
        }

    def _has_profile(self):
        try:
            self.store.get_profile()
            return True
        except NoProfile:
            return False


def snapshot_text(snapshot):
    """Canonical snapshot serialization; byte-stable for golden comparisons."""
    return json.dumps(snapshot, sort_keys=True, indent=1) + "\n"


def recommendation_from_snapshot(snapshot):
    """Recommendation view: actions in fixed presentation order with the
    citations backing every non-trivial output."""
    actions = snapshot["actions"]
    explanations = snapshot["explanations"]
    rows = []
    for name in decision.ACTION_NAMES:
        value = actions[name]
        rows.append(
            {
                "action": name,
                "title": decision.ACTION_TITLES[name],
                "output": value,
                "highlight": value != decision.NO_ACTION,
                "explanations": explanations.get(name, []),
            }
        )
    return {
        "generated_at": snapshot["generated_at"],
        "input": snapshot["decision_input"],
        "actions": actions,
        "risk": {
            "mean": snapshot["risk"]["mean"],
            "max": snapshot["risk"]["max"],
            "iso9223": snapshot["iso9223"],
        },
        "explanations": explanations,
        "coercions": snapshot["coercions"],
        "rows": rows,
        "tree_fingerprint": snapshot["tree_fingerprint"],
    }


# -- HTTP layer ---------------------------------------------------------------

_REASONS = {
    200: "OK",
    400: "Bad Request",
    404: "Not Found",
    405: "Method Not Allowed",
    409: "Conflict",
    422: "Unprocessable Entity",
    500: "Internal Server Error",
    503: "Service Unavailable",
}


class _HttpError(Exception):
    def __init__(self, status, kind, message, **extra):
        super().__init__(message)
        self.status = status
        self.payload = {"error": {"kind": kind, "message": message, **extra}}


def _json_body(body):
    if not body.strip():
        raise _HttpError(400, "EmptyBody", "request body is empty")
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        raise _HttpError(400, "BadJson", str(exc)) from exc


def _parse_stamp(raw, name):
    try:
        return parse_rfc3339(raw)
    except (ValueError, TypeError) as exc:
        raise _HttpError(422, "BadTimestamp", f"{name}: {exc}") from exc


def _month_reference(query):
    month = query.get("month", [None])[0]
    if month is None:
        return None
    try:
        year_s, month_s = month.split("-")
        return (int(year_s), int(month_s))
    except ValueError as exc:
        raise _HttpError(400, "BadMonth", f"month must be YYYY-MM, got {month!r}") from exc


def _dispatch(service, method, path, query, body):
    if path == "/health" and method == "GET":
        return 200, service.health()

    if path == "/ingest/metar" and method == "POST":
        if not body.strip():
            raise _HttpError(400, "EmptyBody", "request body is empty")
        counts = service.ingest_metar_text(body, reference=_month_reference(query))
        return 200, counts.to_dict()

    if path == "/ingest/pollution" and method == "POST":
        if not body.strip():
            raise _HttpError(400, "EmptyBody", "request body is empty")
        try:
            counts = service.ingest_pollution_csv(body)
        except ingest.BadHeader as exc:
            raise _HttpError(400, "BadHeader", str(exc)) from exc
        return 200, counts.to_dict()

    if path == "/ingest/series" and method == "POST":
        if not body.strip():
            raise _HttpError(400, "EmptyBody", "request body is empty")
        try:
            counts = service.ingest_series_csv(body)
        except InvariantViolation as exc:
            raise _HttpError(422, "InvariantViolation", str(exc)) from exc
        return 200, counts.to_dict()

    if path == "/hangar/profile" and method == "PUT":
        doc = _json_body(body)
        try:
            version = service.put_profile(doc)
        except InvariantViolation as exc:
            raise _HttpError(
                422, "InvariantViolation", str(exc), field=exc.field_name
            ) from exc
        return 200, {"version": version}

    if path == "/hangar/profile" and method == "GET":
        try:
            return 200, service.profile_document()
        except NoProfile as exc:
            raise _HttpError(404, "NoProfile", str(exc)) from exc

    if path == "/evaluate" and method == "POST":
        doc = _json_body(body)
        start = _parse_stamp(doc.get("from"), "from")
        end = _parse_stamp(doc.get("to"), "to")
        try:
            snapshot = service.evaluate(
                start, end,
                overrides=doc.get("overrides"),
                dry_run=bool(doc.get("dry_run", False)),
            )
        except MissingProfile as exc:
            raise _HttpError(409, "MissingProfile", str(exc)) from exc
        except InsufficientData as exc:
            raise _HttpError(
                422, "InsufficientData", str(exc), missing=exc.missing_series
            ) from exc
        except InvariantViolation as exc:
            raise _HttpError(422, "InvariantViolation", str(exc), field=exc.field_name) from exc
        except (risk.RiskError, features.FeatureError, decision.DecisionError) as exc:
            raise _HttpError(422, type(exc).__name__, str(exc)) from exc
        return 200, snapshot

    if path == "/risk/timeline" and method == "GET":
        start = query.get("from", [None])[0]
        end = query.get("to", [None])[0]
        try:
            points = service.risk_timeline(
                _parse_stamp(start, "from") if start else None,
                _parse_stamp(end, "to") if end else None,
            )
        except NoEvaluation as exc:
            raise _HttpError(404, "NoEvaluation", str(exc)) from exc
        return 200, {"points": points}

    if path == "/recommendations" and method == "GET":
        try:
            return 200, service.recommendation()
        except NoEvaluation as exc:
            raise _HttpError(404, "NoEvaluation", str(exc)) from exc

    if path == "/model/retrain" and method == "POST":
        doc = _json_body(body)
        try:
            fingerprint = service.retrain(
                examples=doc.get("examples"), rules_path=doc.get("rules_path")
            )
        except decision.InconsistentLabels as exc:
            raise _HttpError(422, "InconsistentLabels", str(exc)) from exc
        except decision.DecisionError as exc:
            raise _HttpError(422, type(exc).__name__, str(exc)) from exc
        return 200, {"fingerprint": fingerprint}

    raise _HttpError(404, "NoRoute", f"no route for {method} {path}")


def make_wsgi_app(service):
    """JSON-over-HTTP facade; every 2xx body is a documented schema."""

    # permissive CORS so the browser client can be served from anywhere
    cors = [
        ("Access-Control-Allow-Origin", "*"),
        ("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"),
        ("Access-Control-Allow-Headers", "Content-Type"),
    ]

    def app(environ, start_response):
        method = environ.get("REQUEST_METHOD", "GET")
        path = environ.get("PATH_INFO", "/")
        query = parse_qs(environ.get("QUERY_STRING", ""))
        if method == "OPTIONS":
            start_response("204 No Content", [("Content-Length", "0"), *cors])
            return [b""]
        try:
            length = int(environ.get("CONTENT_LENGTH") or 0)
        except ValueError:
            length = 0
        body = environ["wsgi.input"].read(length).decode("utf-8") if length else ""
        try:
            status, payload = _dispatch(service, method, path, query, body)
        except _HttpError as exc:
            status, payload = exc.status, exc.payload
        except StorageUnavailable as exc:
            status, payload = 503, {"error": {"kind": "StorageUnavailable", "message": str(exc)}}
        except ServiceError as exc:
            status, payload = 422, {"error": {"kind": type(exc).__name__, "message": str(exc)}}
        data = (json.dumps(payload, sort_keys=True) + "\n").encode("utf-8")
        start_response(
            f"{status} {_REASONS.get(status, 'Unknown')}",
            [("Content-Type", "application/json"), ("Content-Length", str(len(data))), *cors],
        )
        return [data]

    return app


class _ThreadingWSGIServer(ThreadingMixIn, WSGIServer):
    daemon_threads = True


def create_server(config, store=None):
    """Bind the HTTP server without starting it; returns (server, service)."""
    store = store or store_mod.FileStore(config.storage_path)
    service = Service(store, config)
    host, _, port = config.listen_address.partition(":")
    server = make_server(
        host or "127.0.0.1",
        int(port or 0),
        make_wsgi_app(service),
        server_class=_ThreadingWSGIServer,
    )
    return server, service


def serve(config, store=None, ready=None):
    """Run the HTTP service until interrupted.

    ``ready`` (if given) receives the bound (host, port) once listening, so
    callers can start against an ephemeral port.  When feeds are
    configured, a background poller runs at the configured cadence.
    """
    server, service = create_server(config, store)
    stop_polling = service.start_feed_polling() if config.feeds else None
    if ready is not None:
        ready(server.server_address)
    try:
        server.serve_forever()
    finally:
        if stop_polling is not None:
            stop_polling.set()
        server.server_close()

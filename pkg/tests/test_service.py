import json
from datetime import timedelta

import pytest

from smarthangar import decision
from smarthangar.service import (
    ConfigError,
    Service,
    ServiceConfig,
    config_from_dict,
    make_wsgi_app,
    snapshot_text,
)
from smarthangar.store import MemoryStore

from tests.conftest import (
    KBELY_END,
    KBELY_START,
    TARGET_ACTIONS,
    call_app,
    fixture_text,
    kbely_config,
)

METAR_3 = (
    "LKKB 121430Z 27008KT 9999 15/08 Q1018\n"
    "LKKB 121500Z 26006KT 14/08 Q1018\n"
    "LKKB 121530Z 25007KT 14/07 Q1019\n"
)

POLLUTION_3 = (
    "station_id,timestamp_utc,species,concentration_ug_m3\n"
    "AHOL,2023-01-05T12:00:00Z,SO2,7.1\n"
    "AHOL,2023-01-05T18:00:00Z,SO2,6.2\n"
    "AHOL,2023-01-06T00:00:00Z,PM10,15.0\n"
)


@pytest.fixture
def app():
    service = Service(MemoryStore(), kbely_config())
    return make_wsgi_app(service), service


class TestIngestEndpoints:
    def test_metar_counts(self, app):
        wsgi, _ = app
        status, body = call_app(wsgi, "POST", "/ingest/metar", METAR_3, query="month=2023-01")
        assert status == 200
        assert body == {"parsed": 3, "stored": 3, "failed": []}

    def test_partial_failure_reports_line(self, app):
        wsgi, _ = app
        text = METAR_3 + "LKKB 121600Z 27008KT 15/\n"
        status, body = call_app(wsgi, "POST", "/ingest/metar", text, query="month=2023-01")
        assert status == 200
        assert body["parsed"] == 3 and body["stored"] == 3
        assert body["failed"][0]["line"] == 4

    def test_duplicate_resubmission_stores_nothing(self, app):
        wsgi, _ = app
        call_app(wsgi, "POST", "/ingest/metar", METAR_3, query="month=2023-01")
        status, body = call_app(wsgi, "POST", "/ingest/metar", METAR_3, query="month=2023-01")
        assert status == 200
        assert body["parsed"] == 3 and body["stored"] == 0

    def test_empty_body_rejected(self, app):
        wsgi, _ = app
        status, body = call_app(wsgi, "POST", "/ingest/metar", "")
        assert status == 400

    def test_pollution_counts_and_duplicates(self, app):
        wsgi, _ = app
        status, body = call_app(wsgi, "POST", "/ingest/pollution", POLLUTION_3)
        assert status == 200
        assert body == {"parsed": 3, "stored": 3, "failed": []}
        status, body = call_app(wsgi, "POST", "/ingest/pollution", POLLUTION_3)
        assert body["stored"] == 0

    def test_pollution_bad_header(self, app):
        wsgi, _ = app
        status, body = call_app(wsgi, "POST", "/ingest/pollution", "a,b,c,d\n1,2,3,4\n")
        assert status == 400
        assert body["error"]["kind"] == "BadHeader"

    def test_pollution_bad_rows_reported(self, app):
        wsgi, _ = app
        text = POLLUTION_3 + "AHOL,2023-01-06T06:00:00Z,SO2,-4\n"
        status, body = call_app(wsgi, "POST", "/ingest/pollution", text)
        assert status == 200
        assert body["failed"] == [{"row": 4, "error": "negative concentration -4.0"}]


class TestProfileEndpoints:
    def test_round_trip(self, app):
        wsgi, _ = app
        doc = json.loads(fixture_text("profile.json"))
        status, body = call_app(wsgi, "PUT", "/hangar/profile", json.dumps(doc))
        assert status == 200 and body == {"version": 1}
        status, body = call_app(wsgi, "GET", "/hangar/profile")
        assert status == 200
        assert body["profile"] == doc and body["version"] == 1

    def test_invariant_violation_names_field(self, app):
        wsgi, _ = app
        doc = json.loads(fixture_text("profile.json"))
        doc["exhibition_area"] = doc["floor_area"] + 1
        status, body = call_app(wsgi, "PUT", "/hangar/profile", json.dumps(doc))
        assert status == 422
        assert body["error"]["field"] == "exhibition_area"

    def test_get_before_put_is_404(self, app):
        wsgi, _ = app
        status, _ = call_app(wsgi, "GET", "/hangar/profile")
        assert status == 404

    def test_versions_increment(self, app):
        wsgi, _ = app
        doc = json.loads(fixture_text("profile.json"))
        call_app(wsgi, "PUT", "/hangar/profile", json.dumps(doc))
        doc["carpets_installed"] = False
        status, body = call_app(wsgi, "PUT", "/hangar/profile", json.dumps(doc))
        assert body == {"version": 2}


class TestEvaluateEndpoint:
    WINDOW = json.dumps({"from": "2023-01-01T00:00:00Z", "to": "2023-12-31T23:24:00Z"})

    def test_missing_profile_is_409(self, app):
        wsgi, _ = app
        status, body = call_app(wsgi, "POST", "/evaluate", self.WINDOW)
        assert status == 409
        assert body["error"]["kind"] == "MissingProfile"

    def test_insufficient_data_names_series(self, app):
        wsgi, _ = app
        doc = fixture_text("profile.json")
        call_app(wsgi, "PUT", "/hangar/profile", doc)
        status, body = call_app(wsgi, "POST", "/evaluate", self.WINDOW)
        assert status == 422
        assert body["error"]["kind"] == "InsufficientData"
        assert set(body["error"]["missing"]) == {
            "temperature/indoor",
            "relative_humidity/indoor",
        }

    def test_full_fixture_evaluation(self, kbely_evaluated):
        _, snapshot = kbely_evaluated
        assert snapshot["iso9223"]["category"] == 2
        assert snapshot["iso9223"]["label"] == "low"
        assert abs(snapshot["features"]["time_of_wetness_hours"] - 60.6) < 1e-9
        assert snapshot["actions"] == TARGET_ACTIONS
        assert snapshot["coercions"] == []
        for name, value in snapshot["actions"].items():
            if value != "no_action":
                assert snapshot["explanations"][name], name

    def test_evaluation_is_deterministic(self, kbely_evaluated):
        service, snapshot = kbely_evaluated
        again = service.evaluate(KBELY_START, KBELY_END)
        assert snapshot_text(again) == snapshot_text(snapshot)

    def test_dry_run_profile_override_changes_actions_without_persisting(self, kbely_evaluated):
        service, snapshot = kbely_evaluated
        saved = service.store.get_document("evaluation_snapshot.json")
        what_if = service.evaluate(
            KBELY_START,
            KBELY_END,
            overrides={"profile": {"insulation_installed": True, "heating_installed": True}},
            dry_run=True,
        )
        assert what_if["actions"]["install_insulation"] == "no_action"
        assert what_if["actions"]["install_heating"] == "no_action"
        assert what_if["actions"]["uninstall_carpets"] == "yes"
        assert service.store.get_document("evaluation_snapshot.json") == saved

    def test_temperatures_beyond_psychrometric_band_degrade_gracefully(self):
        # identity smoothing so the spike reaches the dew-point computation
        service = Service(MemoryStore(), kbely_config(step_hours=1.0, ma_window=1))
        from datetime import datetime, timezone

        t0 = datetime(2023, 7, 1, tzinfo=timezone.utc)
        rows = ["variable,placement,timestamp_utc,value"]
        for k in range(48):
            stamp = (t0 + timedelta(hours=k)).strftime("%Y-%m-%dT%H:%M:%SZ")
            temp = 80.0 if 10 <= k < 14 else 22.0  # furnace-test spike, valid to store
            rows.append(f"temperature,indoor,{stamp},{temp}")
            rows.append(f"relative_humidity,indoor,{stamp},55.0")
        service.ingest_series_csv("\n".join(rows) + "\n")
        profile = json.loads(fixture_text("profile.json"))
        service.put_profile(profile)
        snapshot = service.evaluate(t0, t0 + timedelta(hours=47))
        timeline = dict(snapshot["risk"]["timeline"])
        assert None in timeline.values()  # spike hours carry no score
        assert any(v is not None for v in timeline.values())

    def test_so2_beyond_classification_is_422(self):
        service = Service(MemoryStore(), kbely_config(step_hours=1.0))
        from datetime import datetime, timezone

        t0 = datetime(2023, 7, 1, tzinfo=timezone.utc)
        rows = ["variable,placement,timestamp_utc,value"]
        pollution = ["station_id,timestamp_utc,species,concentration_ug_m3"]
        for k in range(48):
            stamp = (t0 + timedelta(hours=k)).strftime("%Y-%m-%dT%H:%M:%SZ")
            rows.append(f"temperature,indoor,{stamp},20.0")
            rows.append(f"relative_humidity,indoor,{stamp},50.0")
            pollution.append(f"AHOL,{stamp},SO2,900.0")
        service.ingest_series_csv("\n".join(rows) + "\n")
        service.ingest_pollution_csv("\n".join(pollution) + "\n")
        service.put_profile(json.loads(fixture_text("profile.json")))
        wsgi = make_wsgi_app(service)
        body = json.dumps({
            "from": "2023-07-01T00:00:00Z", "to": "2023-07-02T23:00:00Z",
        })
        status, payload = call_app(wsgi, "POST", "/evaluate", body)
        assert status == 422
        assert payload["error"]["kind"] == "OutOfClassification"

    def test_benign_year_scores_zero_and_c1(self):
        service = Service(MemoryStore(), kbely_config(step_hours=1.0))
        rows = ["variable,placement,timestamp_utc,value"]
        from datetime import datetime, timezone

        t0 = datetime(2023, 1, 1, tzinfo=timezone.utc)
        for k in range(0, 8760, 3):
            stamp = (t0 + timedelta(hours=k)).strftime("%Y-%m-%dT%H:%M:%SZ")
            rows.append(f"temperature,indoor,{stamp},18.0")
            rows.append(f"relative_humidity,indoor,{stamp},45.0")
        service.ingest_series_csv("\n".join(rows) + "\n")
        profile = json.loads(fixture_text("profile.json"))
        profile["carpets_installed"] = False
        service.put_profile(profile)
        snapshot = service.evaluate(t0, t0 + timedelta(hours=8757))
        assert snapshot["features"]["time_of_wetness_hours"] == 0.0
        assert snapshot["iso9223"]["category"] == 1
        assert snapshot["risk"]["max"] == 0.0
        assert all(v == 0.0 for _, v in snapshot["risk"]["timeline"])
        assert snapshot["actions"] == {name: "no_action" for name in decision.ACTION_NAMES}


class TestReadEndpoints:
    def test_timeline_and_recommendations(self, kbely_evaluated):
        service, snapshot = kbely_evaluated
        wsgi = make_wsgi_app(service)
        status, body = call_app(wsgi, "GET", "/risk/timeline")
        assert status == 200
        assert body["points"] == snapshot["risk"]["timeline"]

        status, body = call_app(
            wsgi, "GET", "/risk/timeline",
            query="from=2023-06-01T00:00:00Z&to=2023-06-02T00:00:00Z",
        )
        assert status == 200
        assert 0 < len(body["points"]) < len(snapshot["risk"]["timeline"])

        status, body = call_app(wsgi, "GET", "/recommendations")
        assert status == 200
        assert body["actions"] == TARGET_ACTIONS
        rows = body["rows"]
        assert [r["action"] for r in rows] == list(decision.ACTION_NAMES)
        highlighted = [r["action"] for r in rows if r["highlight"]]
        assert highlighted == ["install_heating", "install_insulation", "uninstall_carpets"]
        for row in rows:
            if row["highlight"]:
                assert row["explanations"]

    def test_reads_404_before_any_evaluation(self, app):
        wsgi, _ = app
        for path in ("/risk/timeline", "/recommendations"):
            status, body = call_app(wsgi, "GET", path)
            assert status == 404
            assert body["error"]["kind"] == "NoEvaluation"

    def test_health(self, app):
        wsgi, service = app
        status, body = call_app(wsgi, "GET", "/health")
        assert status == 200
        assert body["status"] == "ok"
        assert body["tree_fingerprint"] == service.tree.fingerprint

    def test_unknown_route(self, app):
        wsgi, _ = app
        status, _ = call_app(wsgi, "GET", "/nope")
        assert status == 404


class TestRetrainEndpoint:
    def test_empty_delta_keeps_fingerprint(self, app):
        wsgi, service = app
        before = service.tree.fingerprint
        status, body = call_app(wsgi, "POST", "/model/retrain", json.dumps({"examples": []}))
        assert status == 200
        assert body["fingerprint"] == before

    def test_new_examples_change_fingerprint(self, app):
        wsgi, service = app
        before = service.tree.fingerprint
        example = {
            "input": {**json.loads(fixture_text("profile.json")),
                      "time_of_wetness": 9999.0, "iso_category": 5,
                      "mean_risk": 0.9, "max_risk": 1.0,
                      "freeze_thaw_events": 50.0, "indoor_so2_annual": 200.0,
                      "indoor_pm10_annual": 70.0, "indoor_pm25_annual": 40.0},
            "actions": {"exhibition_ratio_op": "change"},
        }
        # two in-region members so the leaf satisfies the minimum size
        example2 = json.loads(json.dumps(example))
        example2["input"]["time_of_wetness"] = 9998.0
        status, body = call_app(
            wsgi, "POST", "/model/retrain", json.dumps({"examples": [example, example2]})
        )
        assert status == 200
        assert body["fingerprint"] != before
        assert service.tree.fingerprint == body["fingerprint"]

    def test_inconsistent_examples_rejected(self, app):
        wsgi, service = app
        inp, labels = service._corpus[0]
        flipped = "change" if labels.exhibition_ratio_op == "no_action" else "no_action"
        record = {"input": inp.to_dict(), "actions": {"exhibition_ratio_op": flipped}}
        status, body = call_app(
            wsgi, "POST", "/model/retrain", json.dumps({"examples": [record]})
        )
        assert status == 422
        assert body["error"]["kind"] == "InconsistentLabels"


class TestFeedPolling:
    METAR_FEED = (
        "LKKB 121430Z 27008KT 9999 15/08 Q1018\n"
        "LKKB 121500Z 26006KT 14/08 Q1018\n"
        "LKKB 121530Z 25007KT 14/07 Q1019\n"
    )

    def _service(self):
        from datetime import datetime, timezone

        from smarthangar.ingest import FeedSource

        config = kbely_config(
            feeds=(FeedSource(name="wx", kind="metar", location="unused"),),
            poll_cadence_minutes=0.0005,  # ~30 ms for the loop test
        )
        window = (
            datetime(2023, 1, 1, tzinfo=timezone.utc),
            datetime(2023, 1, 31, tzinfo=timezone.utc),
        )
        return Service(MemoryStore(), config), window

    def test_poll_once_stores_feed_points(self):
        service, window = self._service()
        stored = service.poll_feeds_once(window=window, opener=lambda s: self.METAR_FEED)
        assert stored == {"wx": 9}
        again = service.poll_feeds_once(window=window, opener=lambda s: self.METAR_FEED)
        assert again == {"wx": 0}

    def test_poll_errors_recorded_not_raised(self):
        service, window = self._service()

        def opener(source):
            raise OSError("socket down")

        assert service.poll_feeds_once(window=window, opener=opener) == {}
        assert any("wx" in entry for entry in service.poll_errors)

    def test_polling_loop_runs_until_stopped(self):
        import time
        from datetime import datetime, timezone

        from smarthangar.store import SeriesKey

        service, _ = self._service()
        # the default poll window is the trailing 24 h, so the canned
        # report must carry a current day-hour-minute stamp
        line = f"LKKB {datetime.now(timezone.utc):%d%H%M}Z 27008KT 15/08 Q1018\n"
        stop = service.start_feed_polling(opener=lambda s: line)
        try:
            deadline = time.time() + 5.0
            key = SeriesKey("temperature", "outdoor")
            while time.time() < deadline and not service.store.has_series(key):
                time.sleep(0.01)
            assert service.store.has_series(key)
        finally:
            stop.set()


class TestSharedCore:
    def test_cli_and_http_paths_produce_identical_snapshot_bytes(self, tmp_path, capsys):
        from smarthangar.cli import main
        from smarthangar.store import FileStore
        from tests.conftest import fixture_path

        # CLI path against a file store
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({
            "storage_path": str(tmp_path / "cli_data"),
            "step_hours": 0.6,
            "ma_window": 24,
            "air_exchange_rate": 0.5,
            "air_exchange_min": 0.2,
            "air_exchange_max": 1.0,
        }))
        args = ["--config", str(config_path)]
        assert main(["ingest", "--kind", "series", "--file", fixture_path("series.csv"), *args]) == 0
        assert main(["ingest", "--kind", "pollution", "--file", fixture_path("pollution.csv"), *args]) == 0
        assert main(["ingest", "--kind", "metar", "--file", fixture_path("metar.txt"),
                     "--month", "2023-01", *args]) == 0
        cli_store = FileStore(str(tmp_path / "cli_data"))
        Service(cli_store, kbely_config()).put_profile(json.loads(fixture_text("profile.json")))
        assert main(["evaluate", "--from", "2023-01-01T00:00:00Z",
                     "--to", "2023-12-31T23:24:00Z", *args]) == 0
        capsys.readouterr()
        cli_snapshot = (tmp_path / "cli_data" / "documents" / "evaluation_snapshot.json").read_text()

        # HTTP path against a memory store
        service = Service(MemoryStore(), kbely_config())
        wsgi = make_wsgi_app(service)
        call_app(wsgi, "POST", "/ingest/series", fixture_text("series.csv"))
        call_app(wsgi, "POST", "/ingest/pollution", fixture_text("pollution.csv"))
        call_app(wsgi, "POST", "/ingest/metar", fixture_text("metar.txt"), query="month=2023-01")
        call_app(wsgi, "PUT", "/hangar/profile", fixture_text("profile.json"))
        status, _ = call_app(wsgi, "POST", "/evaluate", self_window())
        assert status == 200
        http_snapshot = service.store.get_document("evaluation_snapshot.json")

        assert cli_snapshot == http_snapshot


def self_window():
    return json.dumps({"from": "2023-01-01T00:00:00Z", "to": "2023-12-31T23:24:00Z"})


class TestModelSwap:
    def test_tree_swaps_atomically_under_concurrent_readers(self):
        import threading

        service = Service(MemoryStore(), kbely_config())
        fingerprints = {service.tree.fingerprint}
        stop = threading.Event()
        seen = []
        failures = []

        def reader():
            while not stop.is_set():
                tree = service.tree
                if tree is None or tree.root is None:
                    failures.append("reader saw a missing tree")
                    return
                seen.append(tree.fingerprint)

        threads = [threading.Thread(target=reader) for _ in range(4)]
        for thread in threads:
            thread.start()
        try:
            profile = json.loads(fixture_text("profile.json"))
            for tow in (9001.0, 9002.0, 9003.0):
                examples = [
                    {"input": {**profile, "time_of_wetness": tow + d, "iso_category": 5,
                               "mean_risk": 0.9, "max_risk": 1.0, "freeze_thaw_events": 50.0,
                               "indoor_so2_annual": 200.0, "indoor_pm10_annual": 70.0,
                               "indoor_pm25_annual": 40.0},
                     "actions": {"exhibition_ratio_op": "change"}}
                    for d in (0.0, 0.25)
                ]
                fingerprints.add(service.retrain(examples=examples))
        finally:
            stop.set()
            for thread in threads:
                thread.join(timeout=10)
        assert not failures
        assert set(seen) <= fingerprints  # readers only ever saw complete trees


class TestHttpServer:
    def test_real_server_round_trip(self, tmp_path):
        import threading
        import urllib.request

        from smarthangar.service import create_server

        config = kbely_config(
            storage_path=str(tmp_path / "data"), listen_address="127.0.0.1:0"
        )
        server, service = create_server(config)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            host, port = server.server_address
            with urllib.request.urlopen(f"http://{host}:{port}/health", timeout=10) as resp:
                body = json.loads(resp.read().decode())
            assert body["status"] == "ok"
            assert body["tree_fingerprint"] == service.tree.fingerprint
        finally:
            server.shutdown()
            server.server_close()
            thread.join(timeout=5)


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"window_cleaning": True})

    def test_bad_values_rejected(self):
        with pytest.raises(ConfigError):
            ServiceConfig(step_hours=0).validate()
        with pytest.raises(ConfigError):
            ServiceConfig(ma_window=500).validate()
        with pytest.raises(ConfigError):
            ServiceConfig(air_exchange_min=2.0, air_exchange_max=1.0).validate()

    def test_referenced_files_checked(self, tmp_path):
        config = ServiceConfig(rules_path=str(tmp_path / "missing.json"))
        with pytest.raises(ConfigError):
            config.validate()
        config.validate(check_paths=False)

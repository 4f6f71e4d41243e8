import io
import json
from datetime import datetime, timedelta, timezone
from importlib import resources

import pytest

from smarthangar import decision
from smarthangar.service import Service, ServiceConfig
from smarthangar.store import MemoryStore

KBELY_START = datetime(2023, 1, 1, tzinfo=timezone.utc)
KBELY_STEP = timedelta(seconds=2160)  # 0.6 h
KBELY_POINTS = 14600
KBELY_END = KBELY_START + (KBELY_POINTS - 1) * KBELY_STEP

TARGET_ACTIONS = {name: "no_action" for name in decision.ACTION_NAMES}
TARGET_ACTIONS.update(
    install_heating="yes", install_insulation="yes", uninstall_carpets="yes"
)


def fixture_text(name):
    return (
        resources.files("smarthangar.data")
        .joinpath("fixtures", "kbely", name)
        .read_text(encoding="utf-8")
    )


def fixture_path(name):
    return str(resources.files("smarthangar.data").joinpath("fixtures", "kbely", name))


def kbely_config(**overrides):
    base = dict(
        step_hours=0.6,
        max_gap_hours=6.0,
        ma_window=24,
        air_exchange_rate=0.5,
        air_exchange_min=0.2,
        air_exchange_max=1.0,
    )
    base.update(overrides)
    return ServiceConfig(**base)


def ingest_kbely(service):
    service.ingest_series_csv(fixture_text("series.csv"))
    service.ingest_pollution_csv(fixture_text("pollution.csv"))
    service.ingest_metar_text(fixture_text("metar.txt"), reference=(2023, 1))
    service.put_profile(json.loads(fixture_text("profile.json")))


@pytest.fixture(scope="session")
def default_rules():
    return decision.load_rules()


@pytest.fixture(scope="session")
def default_build(default_rules):
    return decision.build_training_corpus(
        default_rules, decision.default_training_inputs(default_rules)
    )


@pytest.fixture(scope="session")
def default_tree(default_build):
    return decision.train_tree(default_build.corpus)


@pytest.fixture(scope="session")
def kbely_evaluated():
    """One fully ingested and evaluated museum-hangar service, shared by
    read-only assertions."""
    service = Service(MemoryStore(), kbely_config())
    ingest_kbely(service)
    snapshot = service.evaluate(KBELY_START, KBELY_END)
    return service, snapshot


def call_app(app, method, path, body=b"", query=""):
    if isinstance(body, str):
        body = body.encode("utf-8")
    environ = {
        "REQUEST_METHOD": method,
        "PATH_INFO": path,
        "QUERY_STRING": query,
        "CONTENT_LENGTH": str(len(body)),
        "wsgi.input": io.BytesIO(body),
    }
    captured = {}

    def start_response(status, headers):
        captured["status"] = int(status.split()[0])
        captured["headers"] = dict(headers)

    payload = b"".join(app(environ, start_response))
    return captured["status"], json.loads(payload.decode("utf-8"))

"""End-to-end acceptance gate.

One test per release criterion; each prints a PASS line so a plain pytest
run doubles as the acceptance checklist (`pytest -s tests/test_acceptance.py`).
"""

import json
import math
import random
from datetime import datetime, timedelta, timezone

import pytest

from smarthangar import decision
from smarthangar.cli import main, recommendation_table
from smarthangar.features import InfiltrationParams, dew_point, indoor_concentration, time_of_wetness
from smarthangar.ingest import KNOT_TO_MS, parse_metar
from smarthangar.pipeline import UniformSeries, grid_search_window, moving_average, resample
from smarthangar.risk import iso9223_category, load_category_table, so2_class, tow_class
from tests.conftest import TARGET_ACTIONS, fixture_path, fixture_text

T0 = datetime(2023, 1, 1, tzinfo=timezone.utc)
HOUR = timedelta(hours=1)


def ok(name, detail=""):
    print(f"PASS {name}" + (f" ({detail})" if detail else ""))


def test_museum_use_case_reproduction(kbely_evaluated):
    """Fixture year evaluates to category C2/low and exactly the expected
    three refurbishment actions; zero tolerance, categorical."""
    _, snapshot = kbely_evaluated
    assert snapshot["iso9223"]["category"] == 2
    assert snapshot["iso9223"]["label"] == "low"
    assert snapshot["actions"] == TARGET_ACTIONS
    highlighted = [k for k, v in snapshot["actions"].items() if v != "no_action"]
    assert sorted(highlighted) == ["install_heating", "install_insulation", "uninstall_carpets"]
    ok("use-case reproduction", "C2/low with exactly 3 yes-actions")


def test_time_of_wetness_oracle_equivalence():
    """100 randomized year-long series match the brute-force count exactly."""
    rng = random.Random(1234)
    for trial in range(100):
        n = 8760
        temps = [rng.uniform(-15, 35) for _ in range(n)]
        hums = [rng.uniform(30, 100) for _ in range(n)]
        t = UniformSeries(start=T0, step=HOUR, values=tuple(temps))
        rh = UniformSeries(start=T0, step=HOUR, values=tuple(hums))
        brute = sum(1 for a, b in zip(hums, temps) if a > 80.0 and b > 0.0)
        assert time_of_wetness(t, rh) == brute * 1.0
    ok("wetness oracle equivalence", "100 randomized years, exact")


def test_infiltration_analytics():
    """Exponential update matches the closed-form mass balance within 1e-6
    relative error; the steady state equals n*C_out/(n + v_d*A/V) to 1e-9."""
    cases = [
        (0.8, 1.2, 2500.0, 8000.0, 20.0, 2.0),
        (0.3, 0.4, 1000.0, 5000.0, 7.0, 0.0),
        (2.0, 0.0, 900.0, 3000.0, 12.0, 30.0),
    ]
    for n, vd, area, volume, c_out, c0 in cases:
        params = InfiltrationParams(
            air_exchange_rate=n, deposition_velocity=vd, surface_area=area, volume=volume
        )
        outdoor = UniformSeries(start=T0, step=HOUR, values=(c_out,) * 400)
        computed = indoor_concentration(outdoor, params, initial=c0)
        lam = n + params.sink_rate
        steady = n * c_out / lam
        for k, value in enumerate(computed.values):
            exact = steady + (c0 - steady) * math.exp(-lam * k)
            assert abs(value - exact) <= 1e-6 * max(abs(exact), 1e-12)
        assert abs(computed.values[-1] - steady) <= 1e-9 + steady * 1e-9
    ok("infiltration analytics", "closed form within 1e-6, steady state 1e-9")


def test_dew_point_against_inversion_oracle():
    """Magnus output within 0.05 degC of a bisection inversion of the
    saturation curve over T in [-20, 40], RH in [5, 100]; identity at 100 %."""

    def saturation(t):
        return 6.1094 * math.exp(17.625 * t / (243.04 + t))

    def invert(target):
        lo, hi = -80.0, 80.0
        for _ in range(200):
            mid = (lo + hi) / 2.0
            if saturation(mid) < target:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2.0

    worst = 0.0
    for t in range(-20, 41, 2):
        for rh in range(5, 101, 5):
            dp = dew_point(float(t), float(rh))
            worst = max(worst, abs(dp - invert(rh / 100.0 * saturation(t))))
    assert worst < 0.05
    for t in (-20.0, 0.0, 17.5, 40.0):
        assert abs(dew_point(t, 100.0) - t) < 1e-9
    ok("dew point", f"worst inversion gap {worst:.2e} degC")


def test_decision_tree_criteria(default_build, default_tree):
    """Deterministic fingerprints, zero training error on the shipped corpus,
    and no invariant violations after repair on 10,000 random inputs."""
    retrained = decision.train_tree(default_build.corpus)
    assert retrained.fingerprint == default_tree.fingerprint
    assert decision.export_tree(retrained) == decision.export_tree(default_tree)
    assert decision.training_error(default_tree, default_build.corpus) == 0.0

    rng = random.Random(2024)
    flags = ("near_sea", "ac_installed", "heating_installed", "filters_installed",
             "insulation_installed", "barriers_installed", "carpets_installed")
    materials = ("wood", "steel", "concrete")
    for _ in range(10_000):
        inp = decision.DecisionInput(
            **{name: rng.random() < 0.5 for name in flags},
            walls_material=rng.choice(materials),
            roof_material=rng.choice(materials),
            floor_material=rng.choice(materials),
            walls_area=rng.uniform(10, 5000),
            roof_area=rng.uniform(10, 5000),
            floor_area=rng.uniform(10, 5000),
            exhibition_area=rng.uniform(1, 10),
            volume=rng.uniform(100, 50000),
            time_of_wetness=rng.uniform(0, 8760),
            iso_category=rng.randint(1, 5),
            mean_risk=rng.uniform(0, 1),
            max_risk=rng.uniform(0, 1),
            freeze_thaw_events=float(rng.randint(0, 60)),
            indoor_so2_annual=rng.uniform(0, 120),
            indoor_pm10_annual=rng.uniform(0, 150),
            indoor_pm25_annual=rng.uniform(0, 80),
            rh_indoor_minus_outdoor=rng.uniform(-15, 15),
            occupancy=None if rng.random() < 0.5 else rng.uniform(0, 300),
        )
        actions, _ = decision.predict_detailed(default_tree, inp)
        assert actions.violations(inp) == []
    ok("decision tree", "deterministic, memorizing, invariant-safe on 10k inputs")


def test_pipeline_criteria():
    """Window 1 is the identity, the synthetic convex search lands on its
    minimizer, and the resample midpoint example is exact."""
    series = UniformSeries(start=T0, step=HOUR, values=(3.0, 7.0, None, 2.0, 8.0))
    assert moving_average(series, 1).values == series.values

    result = grid_search_window(lambda w: (w - 24) ** 2)
    assert result.best_window == 24

    out = resample([(T0, 0.0), (T0 + 2 * HOUR, 10.0)], HOUR)
    assert out.values == (0.0, 5.0, 10.0)
    ok("pipeline", "identity window, convex minimizer 24, exact midpoint")


def test_metar_corpus_criteria():
    """Every bundled report parses; malformed entries raise the documented
    error kinds; knot conversion is exact to 1e-9."""
    from smarthangar.ingest import MalformedReport, UnknownUnit

    lines = [l for l in fixture_text("metar.txt").splitlines() if l.strip()]
    assert len(lines) >= 20
    for line in lines:
        report = parse_metar(line, reference=(2023, 1))
        assert parse_metar(report.raw, reference=(2023, 1)) == report
        tokens = report.raw.split()
        wind_group = tokens[3] if tokens[0] == "METAR" else tokens[2]
        if wind_group.endswith("KT"):
            knots = round(report.wind_speed / KNOT_TO_MS)
            assert abs(report.wind_speed - knots * KNOT_TO_MS) < 1e-9

    kinds = []
    for line in fixture_text("metar_malformed.txt").splitlines():
        if not line.strip():
            continue
        with pytest.raises((MalformedReport, UnknownUnit)) as err:
            parse_metar(line, reference=(2023, 1))
        kinds.append(type(err.value).__name__)
    assert "MalformedReport" in kinds and "UnknownUnit" in kinds
    ok("weather-report corpus", f"{len(lines)} reports parsed, errors typed")


def test_iso_classifier_criteria():
    """Boundary values classify inclusively; the category is monotone over an
    exhaustive scan of every (tau, P, S) cell."""
    assert [tow_class(v) for v in (10.0, 250.0, 2500.0, 5500.0)] == [1, 2, 3, 4]
    assert [so2_class(v) for v in (12.0, 40.0, 90.0, 250.0)] == [0, 1, 2, 3]
    table = load_category_table()
    for (t, p, s), category in table.items():
        for bumped in ((t + 1, p, s), (t, p + 1, s), (t, p, s + 1)):
            if bumped in table:
                assert table[bumped] >= category
    assert iso9223_category(60.6, 3.0).category == 2
    ok("corrosivity classifier", "inclusive bounds, monotone over all 80 cells")


def test_end_to_end_determinism(tmp_path, capsys):
    """Two full ingest -> evaluate -> recommend runs produce byte-identical
    snapshots and recommendation tables, through the CLI and the core."""
    snapshots = []
    tables = []
    for run in ("one", "two"):
        config_path = tmp_path / f"config_{run}.json"
        config_path.write_text(json.dumps({
            "storage_path": str(tmp_path / f"data_{run}"),
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
        from smarthangar.service import Service as Svc, load_config
        from smarthangar.store import FileStore

        cfg = load_config(config_path)
        Svc(FileStore(cfg.storage_path), cfg).put_profile(json.loads(fixture_text("profile.json")))
        assert main(["evaluate", "--from", "2023-01-01T00:00:00Z",
                     "--to", "2023-12-31T23:24:00Z", *args]) == 0
        assert main(["recommend", *args]) == 0
        capsys.readouterr()

        snapshot_file = tmp_path / f"data_{run}" / "documents" / "evaluation_snapshot.json"
        snapshots.append(snapshot_file.read_bytes())

        from smarthangar.service import recommendation_from_snapshot

        snapshot = json.loads(snapshots[-1].decode())
        tables.append(recommendation_table(recommendation_from_snapshot(snapshot)))

    assert snapshots[0] == snapshots[1]
    assert tables[0] == tables[1]
    assert json.loads(snapshots[0].decode())["actions"] == TARGET_ACTIONS
    ok("end-to-end determinism", f"{len(snapshots[0])} snapshot bytes identical")

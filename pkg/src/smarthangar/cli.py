"""Operator command line mirroring the HTTP API for offline and batch use.

Both paths share one evaluation core, so a CLI run and an API run over the
same stored data produce byte-identical snapshots.  Errors print a single
machine-parsable ``error: <Kind>: message`` line and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from . import decision, service as service_mod, store as store_mod
from .features import FeatureError
from .ingest import IngestError
from .pipeline import PipelineError
from .risk import RiskError
from .service import (
    NoEvaluation,
    Service,
    ServiceConfig,
    ServiceError,
    load_config,
    recommendation_from_snapshot,
)
from .store import StoreError, parse_rfc3339

DEFAULT_CONFIG = "smarthangar.json"

_OUTPUT_DISPLAY = {
    decision.NO_ACTION: "No action",
    "yes": "Yes",
    "start": "Start",
    "stop": "Stop",
    "increase": "Increase",
    "decrease": "Decrease",
    "change": "Change",
}


class CliError(Exception):
    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


def _fmt(value):
    text = f"{value:.4f}".rstrip("0").rstrip(".")
    return text or "0"


def _load_cli_config(path):
    if path is None:
        path = DEFAULT_CONFIG
        if not os.path.exists(path):
            return ServiceConfig()
    if not os.path.exists(path):
        raise CliError("MissingConfig", f"configuration file not found: {path}")
    return load_config(path)


def _open_service(args, config_override=None):
    config = config_override or _load_cli_config(args.config)
    store = store_mod.FileStore(config.storage_path)
    return Service(store, config), config


def _read_file(path):
    if not os.path.exists(path):
        raise CliError("MissingFile", f"file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _parse_month(raw):
    if raw is None:
        return None
    try:
        year_s, month_s = raw.split("-")
        return (int(year_s), int(month_s))
    except ValueError as exc:
        raise CliError("BadMonth", f"--month must be YYYY-MM, got {raw!r}") from exc


def cmd_ingest(args):
    svc, _ = _open_service(args)
    text = _read_file(args.file)
    if args.kind == "metar":
        counts = svc.ingest_metar_text(text, reference=_parse_month(args.month))
    elif args.kind == "pollution":
        counts = svc.ingest_pollution_csv(text)
    else:
        counts = svc.ingest_series_csv(text)
    print(f"parsed: {counts.parsed}")
    print(f"stored: {counts.stored}")
    print(f"failed: {len(counts.failed)}")
    for failure in counts.failed:
        where = failure.get("line", failure.get("row"))
        print(f"  {where}: {failure['error']}")
    return 0


def cmd_evaluate(args):
    svc, _ = _open_service(args)
    start = parse_rfc3339(args.start)
    end = parse_rfc3339(args.end)
    overrides = {}
    if args.ma_window is not None:
        overrides["ma_window"] = (
            "search" if args.ma_window == "search" else int(args.ma_window)
        )
    snapshot = svc.evaluate(start, end, overrides=overrides)
    feats = snapshot["features"]
    iso = snapshot["iso9223"]
    print(f"window: {snapshot['window']['from']} .. {snapshot['window']['to']}")
    print(f"time_of_wetness_hours: {_fmt(feats['time_of_wetness_hours'])}")
    print(f"time_of_wetness_annual_hours: {_fmt(feats['time_of_wetness_annual_hours'])}")
    print(f"freeze_thaw_events: {feats['freeze_thaw_events']}")
    print(f"iso9223_category: C{iso['category']} ({iso['label']})")
    print(f"mean_risk: {_fmt(snapshot['risk']['mean'])}")
    print(f"max_risk: {_fmt(snapshot['risk']['max'])}")
    print(f"ma_window_hours: {snapshot['ma_window_hours']}")
    for species, mean in feats["indoor_annual_means_ug_m3"].items():
        print(f"indoor_annual_mean {species}: {_fmt(mean)} ug/m3")
    print("snapshot: stored")
    return 0


def recommendation_table(recommendation):
    lines = []
    header = f"{'Action':<58} {'Output':<10}"
    lines.append(header)
    lines.append("-" * len(header))
    for row in recommendation["rows"]:
        display = _OUTPUT_DISPLAY.get(row["output"], row["output"])
        marker = " *" if row["highlight"] else ""
        lines.append(f"{row['title']:<58} {display}{marker}")
        if row["highlight"]:
            for citation in row["explanations"]:
                lines.append(f"{'':<4}because: {citation}")
    return "\n".join(lines) + "\n"


def cmd_recommend(args):
    svc, _ = _open_service(args)
    try:
        recommendation = svc.recommendation()
    except NoEvaluation as exc:
        raise CliError("NoEvaluation", str(exc)) from exc
    sys.stdout.write(recommendation_table(recommendation))
    iso = recommendation["risk"]["iso9223"]
    print(f"\ncorrosivity: C{iso['category']} ({iso['label']})")
    print(f"mean_risk: {_fmt(recommendation['risk']['mean'])}")
    print(f"max_risk: {_fmt(recommendation['risk']['max'])}")
    return 0


def cmd_train(args):
    config = _load_cli_config(args.config)
    if args.rules is not None and not os.path.exists(args.rules):
        raise CliError("MissingFile", f"rules file not found: {args.rules}")
    svc, _ = _open_service(args, config_override=config)
    examples = None
    if args.corpus is not None:
        examples = json.loads(_read_file(args.corpus))
    fingerprint = svc.retrain(examples=examples, rules_path=args.rules)
    print(f"fingerprint: {fingerprint}")
    return 0


@dataclass
class ReportBundle:
    time_of_wetness_hours: float
    category: str
    score_csv: str
    band_csv: str
    recommendation_txt: str
    ma_table_csv: str
    summary_txt: str


def write_report(snapshot, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    score_csv = os.path.join(out_dir, "risk_scores.csv")
    with open(score_csv, "w", encoding="utf-8") as fh:
        fh.write("timestamp_utc,score\n")
        for stamp, value in snapshot["risk"]["timeline"]:
            fh.write(f"{stamp},{'' if value is None else repr(value)}\n")

    band_csv = os.path.join(out_dir, "pollution_band.csv")
    with open(band_csv, "w", encoding="utf-8") as fh:
        fh.write("species,date,low,high\n")
        band = snapshot["pollution"]["band_daily"]
        for species in sorted(band):
            low = dict(band[species]["low"])
            high = dict(band[species]["high"])
            for day in sorted(low):
                fh.write(f"{species},{day},{repr(low[day])},{repr(high.get(day, ''))}\n")

    recommendation = recommendation_from_snapshot(snapshot)
    recommendation_txt = os.path.join(out_dir, "recommendation.txt")
    with open(recommendation_txt, "w", encoding="utf-8") as fh:
        fh.write(recommendation_table(recommendation))

    ma_table_csv = os.path.join(out_dir, "ma_scores.csv")
    with open(ma_table_csv, "w", encoding="utf-8") as fh:
        fh.write("window_hours,score\n")
        for window, score in snapshot["ma_score_table"] or ():
            fh.write(f"{window},{'' if score is None else repr(score)}\n")

    iso = snapshot["iso9223"]
    category = f"C{iso['category']} ({iso['label']})"
    summary_txt = os.path.join(out_dir, "summary.txt")
    with open(summary_txt, "w", encoding="utf-8") as fh:
        fh.write(f"window: {snapshot['window']['from']} .. {snapshot['window']['to']}\n")
        fh.write(
            "time_of_wetness_hours: "
            f"{_fmt(snapshot['features']['time_of_wetness_hours'])}\n"
        )
        fh.write(f"iso9223_category: {category}\n")
        fh.write(f"ma_window_hours: {snapshot['ma_window_hours']}\n")
        fh.write(f"tree_fingerprint: {snapshot['tree_fingerprint']}\n")

    return ReportBundle(
        time_of_wetness_hours=snapshot["features"]["time_of_wetness_hours"],
        category=category,
        score_csv=score_csv,
        band_csv=band_csv,
        recommendation_txt=recommendation_txt,
        ma_table_csv=ma_table_csv,
        summary_txt=summary_txt,
    )


def cmd_report(args):
    svc, _ = _open_service(args)
    try:
        snapshot = svc.latest_snapshot()
    except NoEvaluation as exc:
        raise CliError("NoEvaluation", "no evaluation snapshot") from exc
    bundle = write_report(snapshot, args.out)
    print(f"time_of_wetness_hours: {_fmt(bundle.time_of_wetness_hours)}")
    print(f"category: {bundle.category}")
    for label, path in (
        ("scores", bundle.score_csv),
        ("band", bundle.band_csv),
        ("recommendation", bundle.recommendation_txt),
        ("ma_table", bundle.ma_table_csv),
        ("summary", bundle.summary_txt),
    ):
        print(f"{label}: {path}")
    return 0


def cmd_serve(args):
    if args.config is None:
        raise CliError("MissingConfig", "serve requires --config")
    config = _load_cli_config(args.config)

    def announce(address):
        host, port = address
        print(f"listening on {host}:{port}", flush=True)

    service_mod.serve(config, ready=announce)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smarthangar",
        description="Corrosion-prevention decision support for aircraft hangars",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="load observations from a file")
    p_ingest.add_argument("--kind", required=True, choices=("metar", "pollution", "series"))
    p_ingest.add_argument("--file", required=True)
    p_ingest.add_argument("--month", help="YYYY-MM reference month for METAR day stamps")
    p_ingest.add_argument("--config")
    p_ingest.set_defaults(func=cmd_ingest)

    p_eval = sub.add_parser("evaluate", help="run the evaluation pipeline")
    p_eval.add_argument("--from", dest="start", required=True, help="RFC 3339 window start")
    p_eval.add_argument("--to", dest="end", required=True, help="RFC 3339 window end")
    p_eval.add_argument("--ma-window", dest="ma_window",
                        help="smoothing window in hours, or 'search'")
    p_eval.add_argument("--config")
    p_eval.set_defaults(func=cmd_evaluate)

    p_rec = sub.add_parser("recommend", help="print the latest action table")
    p_rec.add_argument("--config")
    p_rec.set_defaults(func=cmd_recommend)

    p_train = sub.add_parser("train", help="retrain the decision tree")
    p_train.add_argument("--rules", help="rules file (defaults to the shipped set)")
    p_train.add_argument("--corpus", help="JSON file with extra labeled examples")
    p_train.add_argument("--config")
    p_train.set_defaults(func=cmd_train)

    p_report = sub.add_parser("report", help="write the plot-ready report bundle")
    p_report.add_argument("--out", required=True)
    p_report.add_argument("--config")
    p_report.set_defaults(func=cmd_report)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--config")
    p_serve.set_defaults(func=cmd_serve)

    return parser


_OPERATION_ERRORS = (
    ServiceError,
    StoreError,
    IngestError,
    PipelineError,
    FeatureError,
    RiskError,
    decision.DecisionError,
    ValueError,
)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 2
    except _OPERATION_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

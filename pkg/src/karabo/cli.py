"""Command-line entry points for every pipeline.

    karabo segment          corpus JSONL -> turn-instance JSONL
    karabo adapt            run the 5-stage adaptation over instances
    karabo export-finetune  training file + job manifest from instances
    karabo evaluate         score a conversation or transcript
    karabo replay-cases     drive the bundled case studies end to end
    karabo report           aggregate table + figures from report JSONs
    karabo serve            HTTP API

Errors exit nonzero with a machine-readable JSON summary on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import adaptation, corpus, report as report_mod
from .cases import load_case_fixtures
from .config import load_config
from .dialogue import (
    ConversationEngine,
    FineTuneJobSpec,
    PersonaPrompt,
    export_finetune_spec,
)
from .errors import KaraboError
from .evaluation import aggregate, evaluate_conversation, load_conversation_for_eval
from .gateway import Gateway, parse_mock_spec
from .replay import deterministic_clock, replay_cases
from .service import create_app, serve


def _build_gateway(args, seed: int = 0) -> Gateway:
    backend = parse_mock_spec(args.mock) if args.mock else load_config(
        getattr(args, "config", None)
    ).build_backend()
    return Gateway(backend, seed=seed)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_segment(args) -> int:
    parse = corpus.load_corpus(args.input, skip_invalid=args.skip_invalid)
    if parse.errors:
        print(f"skipped {len(parse.errors)} invalid lines", file=sys.stderr)
    filtered = corpus.filter_by_technique(parse.records)
    instances = corpus.segment_corpus(filtered.records)
    corpus.write_instances(instances, args.output)
    balance = corpus.balance_report(instances, slack=args.slack)
    print(
        f"parsed {len(parse.records)} records; kept {len(filtered.records)} "
        f"(dropped {filtered.dropped}); wrote {len(instances)} instances to {args.output}"
    )
    print(json.dumps(balance.to_json_obj()))
    return 0


def cmd_adapt(args) -> int:
    instances = corpus.load_instances(args.input)
    toggles = {s: True for s in adaptation.STAGES}
    if args.stages:
        enabled = {s.strip() for s in args.stages.split(",") if s.strip()}
        unknown = enabled - set(adaptation.STAGES)
        if unknown:
            raise KaraboError(f"unknown stages: {sorted(unknown)}")
        toggles = {s: s in enabled for s in adaptation.STAGES}
    config = adaptation.AdaptationConfig(
        faith_threshold=args.faith_threshold,
        proverb_threshold=args.proverb_threshold,
        max_proverb_attempts=args.max_attempts,
        rng_seed=args.seed,
        stage_toggles=toggles,
    )
    registry = (
        adaptation.ProverbRegistry.load(args.registry)
        if args.registry
        else adaptation.ProverbRegistry.default()
    )
    gateway = _build_gateway(args, seed=args.seed)
    result = adaptation.run_pipeline(
        instances, config, gateway, registry, workers=args.workers
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "adapted.jsonl").write_text(
        corpus.serialize_instances(result.instances), encoding="utf-8"
    )
    (out / "traces.jsonl").write_text(
        adaptation.serialize_traces(result.traces), encoding="utf-8"
    )
    _write_json(out / "stats.json", result.stats.to_json_obj())
    print(
        f"adapted {len(result.instances)} instances -> {out}/adapted.jsonl "
        f"(traces.jsonl, stats.json alongside)"
    )
    return 0


def cmd_export_finetune(args) -> int:
    instances = corpus.load_instances(args.input)
    spec = FineTuneJobSpec(
        base_model=args.base_model,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr_multiplier=args.lr_multiplier,
        seed=args.seed,
    )
    manifest = export_finetune_spec(instances, PersonaPrompt(), spec, args.out_dir)
    print(json.dumps(manifest, indent=2))
    return 0


def cmd_evaluate(args) -> int:
    conversation = load_conversation_for_eval(args.input)
    gateway = _build_gateway(args, seed=args.seed)
    report = evaluate_conversation(
        conversation, gateway=gateway, exclude_first_turn=args.exclude_first_turn
    )
    out = Path(args.out) if args.out else Path(args.input).with_suffix(".report.json")
    _write_json(out, report.to_json_obj())
    means = ", ".join(f"{d}={report.means.get(d, float('nan')):.4f}" for d in report.means)
    print(f"wrote {out} ({len(report.turn_scores)} turns; {means})")
    return int(report.incomplete)


def cmd_replay_cases(args) -> int:
    fixtures = load_case_fixtures()
    gateway = _build_gateway(args, seed=args.seed)
    engine = ConversationEngine(
        gateway,
        clock=deterministic_clock(),
        id_factory=iter(f"case-{n}" for n in range(1, len(fixtures) + 1)).__next__,
    )
    result = replay_cases(fixtures, engine, gateway)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = [c.report for c in result.cases if c.report is not None]
    written = report_mod.write_report_bundle(
        reports, result.table, out, fmt="csv", figures=not args.no_figures
    )
    for case in result.cases:
        _write_json(out / f"case_{case.case_id}.json", case.to_json_obj())
    failures = [c.case_id for c in result.cases if c.error]
    print(f"replayed {len(result.cases)} cases -> {written['table']}")
    if failures:
        print(f"failed cases: {failures}", file=sys.stderr)
    return 1 if failures else 0


def cmd_report(args) -> int:
    reports = report_mod.load_reports_dir(args.reports_dir)
    if not reports:
        raise KaraboError(f"no report JSON files found in {args.reports_dir}")
    rows = aggregate(reports)
    out_dir = args.out or args.reports_dir
    report_mod.write_report_bundle(
        reports, rows, out_dir, fmt=args.format, figures=not args.no_figures
    )
    if args.format == "csv":
        sys.stdout.write(report_mod.aggregate_csv(rows))
    else:
        print(json.dumps([r.to_json_obj() for r in rows], indent=2))
    return 0


def cmd_serve(args) -> int:
    config = load_config(args.config)
    if args.data_dir:
        config.data_dir = args.data_dir
    if args.mock:
        config.backend_spec = args.mock
    app = create_app(config)
    serve(app, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_mock_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mock",
        metavar="PROFILE",
        help="offline backend: echo | hash[:SEED] | constant:P_YES,P_NO | script:R1|R2",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="karabo", description="Culturally adaptive CBT dialogue platform"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="corpus JSONL -> turn-instance JSONL")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--skip-invalid", action="store_true")
    p.add_argument("--slack", type=int, default=0, help="balance tolerance")
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("adapt", help="run the 5-stage cultural adaptation")
    p.add_argument("input", help="turn-instance JSONL")
    p.add_argument("out_dir")
    _add_mock_flag(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--faith-threshold", type=float, default=0.7)
    p.add_argument("--proverb-threshold", type=float, default=0.8)
    p.add_argument("--max-attempts", type=int, default=3)
    p.add_argument("--stages", help="comma list of stages to enable (default all)")
    p.add_argument("--registry", help="proverb registry file (JSON array or numbered text)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config")
    p.set_defaults(fn=cmd_adapt)

    p = sub.add_parser("export-finetune", help="training file + job manifest")
    p.add_argument("input", help="adapted turn-instance JSONL")
    p.add_argument("out_dir")
    p.add_argument("--base-model", default=FineTuneJobSpec.base_model)
    p.add_argument("--epochs", type=int, default=FineTuneJobSpec.epochs)
    p.add_argument("--batch-size", type=int, default=FineTuneJobSpec.batch_size)
    p.add_argument("--lr-multiplier", type=float, default=FineTuneJobSpec.lr_multiplier)
    p.add_argument("--seed", type=int, default=FineTuneJobSpec.seed)
    p.set_defaults(fn=cmd_export_finetune)

    p = sub.add_parser("evaluate", help="score a conversation or transcript")
    p.add_argument("input", help="conversation JSON or transcript JSONL")
    _add_mock_flag(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--exclude-first-turn", action="store_true")
    p.add_argument("--config")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("replay-cases", help="drive the bundled case studies")
    _add_mock_flag(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="replay_out")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--config")
    p.set_defaults(fn=cmd_replay_cases)

    p = sub.add_parser("report", help="aggregate table + figures from report JSONs")
    p.add_argument("reports_dir")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output directory (default: reports dir)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--config")
    p.add_argument("--data-dir")
    _add_mock_flag(p)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except KaraboError as exc:
        print(json.dumps({"error": exc.summary()}), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(
            json.dumps({"error": {"code": "E_IO", "message": str(exc)}}), file=sys.stderr
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: fetch, scan, groom, suggest, evaluate, serve.

Every subcommand is scriptable: machine-readable output (JSON unless
--format csv) on stdout, human diagnostics on stderr, and exit codes
0 (success), 2 (configuration/usage error), 3 (gateway/provider error).

Interactive pair review deliberately has no terminal flow; `serve` plus
the web UI is the interactive surface. `groom` exists for unattended
runs where every flagged pair is treated as accepted.
"""
from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

from .config import Settings
from .dedup import (
    DraftingFailedError,
    EngineConfig,
    SurvivorRule,
    cluster_accepted,
    detect_duplicates,
    propose_resolution,
)
from .embedding import EmbeddingClient, EmbeddingConfig
from .errors import ConfigError, GroomerError
from .evaluation import (
    expand_clusters,
    load_ground_truth,
    load_pairs,
    metrics,
    render_confusion_matrix,
    report_row,
    rows_to_csv,
    rows_to_json,
    score,
    write_pairs,
)
from .gateway import GatewayConfig, make_gateway, snapshot_to_dict
from .suggest import (
    ChatConfig,
    SuggestionRequest,
    make_chat_provider,
    make_merge_drafter,
    suggest_new_issues,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groomer",
        description="Semantic duplicate detection and confirmed grooming for Agile backlogs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="sectioned key=value config file")
        p.add_argument("--fixture", help="path to a JSON backlog fixture")
        p.add_argument("--project", help="project key on a REST tracker")
        p.add_argument("--base-url", help="REST tracker base URL")
        p.add_argument(
            "--embed-provider",
            choices=["localhash", "remote"],
            help="embedding provider (default localhash)",
        )
        p.add_argument("--embed-dim", type=int, help="embedding dimension (default 256)")
        p.add_argument("--cache-file", help="embedding cache file path")

    p_fetch = sub.add_parser("fetch", help="fetch the backlog and write it as JSON")
    add_common(p_fetch)
    p_fetch.add_argument("--out", help="also write the snapshot JSON to this file")

    p_scan = sub.add_parser("scan", help="flag duplicate candidates above a threshold")
    add_common(p_scan)
    p_scan.add_argument("--threshold", type=float, help="similarity cut in (0, 1]")
    p_scan.add_argument("--out", help="also write the candidate JSON to this file")

    p_groom = sub.add_parser("groom", help="run the full unattended pipeline and apply")
    add_common(p_groom)
    p_groom.add_argument("--auto", action="store_true", help="accept every flagged pair")
    p_groom.add_argument("--threshold", type=float, help="similarity cut in (0, 1]")
    p_groom.add_argument(
        "--pairs-out", help="write the predicted duplicate pairs as CSV to this file"
    )
    p_groom.add_argument(
        "--drafter",
        choices=["fallback", "chat"],
        default="fallback",
        help="merged-text drafter (default fallback)",
    )

    p_suggest = sub.add_parser("suggest", help="propose new, non-redundant backlog items")
    add_common(p_suggest)
    p_suggest.add_argument("--prompt", default="", help="optional guidance for the model")
    p_suggest.add_argument("--max", type=int, default=5, help="max suggestions to request")
    p_suggest.add_argument(
        "--chat-provider", choices=["mock", "remote"], help="chat provider (default mock)"
    )

    p_eval = sub.add_parser("evaluate", help="score predicted pairs against ground truth")
    p_eval.add_argument("--config", help="sectioned key=value config file")
    p_eval.add_argument("--predictions", required=True, help="predicted pair CSV")
    p_eval.add_argument("--truth", required=True, help="ground-truth pair CSV")
    p_eval.add_argument("--time-seconds", type=float, default=0.0)
    p_eval.add_argument("--participant", default="run", help="label for the result row")
    p_eval.add_argument("--format", choices=["json", "csv"], default="json")
    p_eval.add_argument(
        "--matrix", action="store_true", help="also print the 2x2 confusion table to stderr"
    )

    p_serve = sub.add_parser("serve", help="run the review HTTP service")
    add_common(p_serve)
    p_serve.add_argument("--port", type=int, help="listen port (default 8350)")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--truth", help="ground-truth CSV for session metric rows")
    p_serve.add_argument("--static-dir", help="serve this directory as the web UI")
    p_serve.add_argument("--threshold", type=float, help="similarity cut in (0, 1]")

    return parser


def _settings(args: argparse.Namespace) -> Settings:
    return Settings(getattr(args, "config", None))


def _threshold(settings: Settings, flag: float | None) -> float:
    value = settings.get_float("engine", "duplicate_threshold", flag, 0.80)
    assert value is not None
    if not 0.0 < value <= 1.0:
        raise ConfigError(f"threshold must be in (0, 1], got {value}")
    return value


def _engine_config(settings: Settings, threshold: float | None) -> EngineConfig:
    rule_name = settings.get("engine", "survivor_rule", None, "EarliestCreated")
    try:
        rule = SurvivorRule(rule_name)
    except ValueError as exc:
        raise ConfigError(f"unknown survivor_rule: {rule_name!r}") from exc
    redundancy = settings.get_float("engine", "new_issue_redundancy_threshold", None, 0.80)
    return EngineConfig(
        duplicate_threshold=_threshold(settings, threshold),
        new_issue_redundancy_threshold=redundancy,  # type: ignore[arg-type]
        survivor_rule=rule,
    )


def _gateway_config(settings: Settings, args: argparse.Namespace) -> GatewayConfig:
    fixture = settings.get("gateway", "fixture_path", getattr(args, "fixture", None))
    project = settings.get("gateway", "project_key", getattr(args, "project", None))
    base_url = settings.get("gateway", "base_url", getattr(args, "base_url", None))
    if fixture and project:
        raise ConfigError("--fixture and --project are mutually exclusive")
    if fixture:
        return GatewayConfig(mode="fixture", fixture_path=str(fixture))
    if project:
        if not base_url:
            raise ConfigError("--project needs --base-url (or [gateway] base_url)")
        token = settings.get("gateway", "token")
        page_size = settings.get_int("gateway", "page_size", None, 50)
        return GatewayConfig(
            mode="rest",
            base_url=str(base_url),
            project_key=str(project),
            token=str(token) if token else None,
            page_size=page_size,  # type: ignore[arg-type]
        )
    raise ConfigError("pick a backlog source: --fixture PATH or --project KEY")


def _embedder(settings: Settings, args: argparse.Namespace) -> EmbeddingClient:
    provider = settings.get(
        "embedding", "provider", getattr(args, "embed_provider", None), "localhash"
    )
    dim = settings.get_int("embedding", "dim", getattr(args, "embed_dim", None), 256)
    model = settings.get("embedding", "model_name", None, "local-trigram-v1")
    cache = settings.get("embedding", "cache_path", getattr(args, "cache_file", None))
    api_url = settings.get("embedding", "api_url")
    api_key = settings.get("embedding", "api_key")
    config = EmbeddingConfig(
        provider=str(provider),
        model_name=str(model),
        dim=dim,  # type: ignore[arg-type]
        cache_path=str(cache) if cache else None,
        api_url=str(api_url) if api_url else None,
        api_key=str(api_key) if api_key else None,
    )
    return EmbeddingClient(config)


def _chat_config(settings: Settings, args: argparse.Namespace) -> ChatConfig:
    provider = settings.get(
        "chat", "provider", getattr(args, "chat_provider", None), "mock"
    )
    model = settings.get("chat", "model_name", None, "mock-chat")
    api_url = settings.get("chat", "api_url")
    api_key = settings.get("chat", "api_key")
    return ChatConfig(
        provider=str(provider),
        model_name=str(model),
        api_url=str(api_url) if api_url else None,
        api_key=str(api_key) if api_key else None,
    )


def _emit(payload: object, out: str | None = None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    sys.stdout.write(text)
    if out:
        Path(out).write_text(text, encoding="utf-8")


def cmd_fetch(args: argparse.Namespace) -> int:
    settings = _settings(args)
    gateway = make_gateway(_gateway_config(settings, args))
    snapshot = gateway.fetch_backlog()
    _emit(snapshot_to_dict(snapshot), args.out)
    return EXIT_OK


def cmd_scan(args: argparse.Namespace) -> int:
    settings = _settings(args)
    gateway = make_gateway(_gateway_config(settings, args))
    engine = _engine_config(settings, args.threshold)
    embedder = _embedder(settings, args)
    snapshot = gateway.fetch_backlog()
    candidates = detect_duplicates(snapshot, engine, embedder)
    payload = {
        "project_key": snapshot.project_key,
        "threshold": engine.duplicate_threshold,
        "candidates": [
            {
                "pair": {"a": c.pair.a, "b": c.pair.b},
                "score": c.score,
                "status": c.status.value,
                "proposed_action": c.proposed_action.to_dict() if c.proposed_action else None,
            }
            for c in candidates
        ],
    }
    _emit(payload, args.out)
    return EXIT_OK


def cmd_groom(args: argparse.Namespace) -> int:
    if not args.auto:
        raise ConfigError(
            "interactive grooming lives in the web UI; run `groomer serve` "
            "or pass --auto for an unattended run"
        )
    settings = _settings(args)
    gateway = make_gateway(_gateway_config(settings, args))
    engine = _engine_config(settings, args.threshold)
    embedder = _embedder(settings, args)

    snapshot = gateway.fetch_backlog()
    candidates = detect_duplicates(snapshot, engine, embedder)
    # auto mode: every flagged pair is treated as accepted
    clusters = cluster_accepted(candidates, snapshot, engine)

    drafter = None
    if args.drafter == "chat":
        chat_config = _chat_config(settings, args)
        drafter = make_merge_drafter(chat_config, make_chat_provider(chat_config))

    receipts = []
    for cluster in clusters:
        try:
            action = propose_resolution(cluster, snapshot, drafter)
        except DraftingFailedError:
            action = propose_resolution(cluster, snapshot, None)
        receipts.append(gateway.apply_action(action).to_dict())

    predicted = sorted(expand_clusters([cluster.members for cluster in clusters]))
    if args.pairs_out:
        write_pairs(predicted, args.pairs_out, n=len(snapshot))
    _emit(
        {
            "threshold": engine.duplicate_threshold,
            "candidate_count": len(candidates),
            "cluster_count": len(clusters),
            "predicted_pairs": [[pair.a, pair.b] for pair in predicted],
            "receipts": receipts,
        }
    )
    return EXIT_OK


def cmd_suggest(args: argparse.Namespace) -> int:
    settings = _settings(args)
    gateway = make_gateway(_gateway_config(settings, args))
    engine = _engine_config(settings, None)
    embedder = _embedder(settings, args)
    chat_config = _chat_config(settings, args)
    if args.max < 1:
        raise ConfigError("--max must be >= 1")

    snapshot = gateway.fetch_backlog()
    request = SuggestionRequest(
        project_description=f"Backlog of project {snapshot.project_key}",
        issue_digest=tuple((issue.key, issue.summary) for issue in snapshot.issues),
        user_prompt=args.prompt,
        max_suggestions=args.max,
    )
    suggestions = suggest_new_issues(request, snapshot, embedder, engine, chat_config)
    _emit(
        [
            {
                "summary": s.summary,
                "description": s.description,
                "rationale": s.rationale,
                "redundancy_score": s.redundancy_score,
            }
            for s in suggestions
        ]
    )
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    truth = load_ground_truth(args.truth)
    predicted = load_pairs(args.predictions)
    cm = score(predicted, truth)
    report = metrics(cm, args.time_seconds)
    row = report_row(args.participant, cm, report)
    if args.matrix:
        sys.stderr.write(render_confusion_matrix(cm) + "\n")
    if args.format == "csv":
        sys.stdout.write(rows_to_csv([row]))
    else:
        sys.stdout.write(rows_to_json([row]))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ReviewService, create_app

    settings = _settings(args)
    gateway = make_gateway(_gateway_config(settings, args))
    engine = _engine_config(settings, args.threshold)
    embedder = _embedder(settings, args)
    chat_config = _chat_config(settings, args)
    truth_path = settings.get("service", "truth_path", args.truth)
    truth = load_ground_truth(str(truth_path)) if truth_path else None
    static_dir = settings.get("service", "static_dir", args.static_dir)
    dump_dir = settings.get("service", "session_dump_dir")
    port = settings.get_int("service", "port", args.port, 8350)
    assert port is not None

    service = ReviewService(
        gateway=gateway,
        embedder=embedder,
        engine_config=engine,
        chat_config=chat_config,
        truth=truth,
        session_dump_dir=str(dump_dir) if dump_dir else None,
    )
    app = create_app(service, static_dir=str(static_dir) if static_dir else None)

    # surface bind failures as a clean runtime error instead of a stack trace
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, port))
    except OSError as exc:
        raise GroomerError(f"cannot bind {args.host}:{port}: {exc}") from exc
    finally:
        probe.close()

    sys.stderr.write(f"review service on http://{args.host}:{port}\n")
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return EXIT_OK


_COMMANDS = {
    "fetch": cmd_fetch,
    "scan": cmd_scan,
    "groom": cmd_groom,
    "suggest": cmd_suggest,
    "evaluate": cmd_evaluate,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except GroomerError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

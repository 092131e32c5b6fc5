"""Command-line client for the pipeline service.

Each subcommand posts to the corresponding service endpoint. By default
the service runs in-process over an ASGI transport, so no server needs
to be up; pass --server to target a running instance instead. Stage
failures map back to process exit codes: 2 fatal ingest or missing
files, 3 nothing buildable, 4 every request failed for some model,
5 nothing scorable.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx


def _post(server: str | None, path: str, payload: dict) -> tuple[int, dict]:
    """POST to the service, in-process unless a server URL is given."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.post(path, json=payload)
            return response.status_code, response.json()

    async def _in_process() -> httpx.Response:
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://stockrag.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    response = asyncio.run(_in_process())
    return response.status_code, response.json()


def _payload(args: argparse.Namespace) -> dict:
    payload: dict = {"config_path": str(Path(args.config).resolve())}
    if args.out is not None:
        payload["out_dir"] = str(Path(args.out).resolve())
    if args.seed is not None:
        payload["seed"] = args.seed
    if args.runs is not None:
        payload["runs"] = args.runs
    if getattr(args, "dry_run", False):
        payload["dry_run"] = True
    return payload


def _fail(body: dict) -> int:
    detail = body.get("detail")
    if isinstance(detail, dict):
        print(f"error: {detail.get('message', detail)}", file=sys.stderr)
        code = detail.get("exit_code")
        return int(code) if isinstance(code, int) else 1
    print(f"error: {detail if detail is not None else body}", file=sys.stderr)
    return 1


def _print_ingest(body: dict) -> None:
    print(
        f"ingested {body['companies']} companies, {body['articles']} articles, "
        f"{body['prices']} price bars, {body['quarters']} quarters"
    )
    for diagnostic in body["diagnostics"]:
        print(f"  diagnostic: {diagnostic}")


def _print_build(body: dict) -> None:
    print(
        f"built {body['built']} prompt bundles "
        f"({len(body['unbuildable'])} unbuildable, {len(body['unlabeled'])} unlabeled)"
    )
    print(f"  prompts: {body['prompts_path']}")
    print(f"  skipped: {body['skipped_path']}")


def _print_predict(body: dict) -> None:
    if body["dry_run"]:
        print("dry run: no requests sent")
        for combo in body["combos"]:
            print(
                f"  {combo['model']} shots={combo['shots']}: "
                f"{combo['bundles']} bundles, ~{combo['total_tokens']} prompt tokens, "
                f"{combo['est_requests']} requests planned, "
                f"{combo['over_budget']} over budget, "
                f"{combo['exemplar_skipped']} without exemplars"
            )
        return
    print(f"recorded {body['records']} predictions ({body['failures']} failures)")
    for combo in body["combos"]:
        rate = combo.get("invalid_rate")
        rate_text = f", invalid rate {rate:.3f}" if rate is not None else ""
        print(
            f"  {combo['model']} shots={combo['shots']}: "
            f"{combo['records']} records, {combo['failures']} failures{rate_text}"
        )
    print(f"  predictions: {body['predictions_path']}")


def _print_evaluate(body: dict) -> None:
    print(f"evaluated {body['rows']} model/shot rows")
    for fmt, path in sorted(body["report_paths"].items()):
        print(f"  {fmt}: {path}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="stockrag",
        description="Retrieval-augmented stock movement prediction pipeline.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to the JSON config file")
    common.add_argument("--out", default=None, help="override the output directory")
    common.add_argument("--seed", type=int, default=None, help="override the seed")
    common.add_argument("--runs", type=int, default=None, help="override repeat runs")
    common.add_argument(
        "--server", default=None, help="URL of a running service (default: in-process)"
    )

    subparsers.add_parser("ingest", parents=[common], help="load and validate the corpus")
    subparsers.add_parser(
        "build-prompts", parents=[common], help="build anonymized prompt bundles"
    )
    predict_parser = subparsers.add_parser(
        "predict", parents=[common], help="query the configured models"
    )
    predict_parser.add_argument(
        "--dry-run",
        action="store_true",
        help="assemble and cost-estimate without sending",
    )
    subparsers.add_parser(
        "evaluate", parents=[common], help="score predictions and emit reports"
    )
    run_parser = subparsers.add_parser(
        "run", parents=[common], help="all four stages in sequence"
    )
    run_parser.add_argument(
        "--dry-run",
        action="store_true",
        help="stop after assembly and token estimates",
    )

    serve_parser = subparsers.add_parser("serve", help="start the HTTP service")
    serve_parser.add_argument("--host", default="127.0.0.1")
    serve_parser.add_argument("--port", type=int, default=8000)

    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service.app import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    endpoint = {
        "ingest": "/ingest",
        "build-prompts": "/build-prompts",
        "predict": "/predict",
        "evaluate": "/evaluate",
        "run": "/run",
    }[args.command]
    try:
        status, body = _post(args.server, endpoint, _payload(args))
    except httpx.RequestError as error:
        print(f"error: cannot reach {args.server}: {error}", file=sys.stderr)
        return 1
    if status >= 400:
        return _fail(body)

    if args.command == "ingest":
        _print_ingest(body)
    elif args.command == "build-prompts":
        _print_build(body)
    elif args.command == "predict":
        _print_predict(body)
    elif args.command == "evaluate":
        _print_evaluate(body)
    else:
        _print_ingest(body["ingest"])
        _print_build(body["build"])
        _print_predict(body["predict"])
        if body.get("evaluate") is not None:
            _print_evaluate(body["evaluate"])
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: config ingestion, dispatch, artifact export.

Every subcommand reads one JSON config file, runs locally by default, and
writes its artifacts into ``--out``. With ``--server URL`` the same work is
posted to a running service instead and the returned artifacts are written
locally, so scripts behave identically either way.

Exit codes: 0 success, 2 configuration problem, 3 numerical failure,
4 honest "nothing there" outcome (empty coupling set, no usable
determinant, no discriminating pair).
"""

import argparse
import json
import logging
import os
import pathlib
import sys

from .errors import ScanBeamError
from .ops import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    classify_error,
    op_certify,
    op_check3d,
    op_checkhd,
    op_graph,
    op_reconstruct,
    op_regions,
    op_selftest,
    op_simulate,
)
from .runconfig import RunConfig

log = logging.getLogger("scanbeam")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    name = os.environ.get("SCANBEAM_LOG", "error").strip().lower()
    level = _LOG_LEVELS.get(name, logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scanbeam",
        description="Decide which Fourier coefficients a focused-beam scan determines, and demonstrate it.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text, needs_config=True):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=needs_config, metavar="PATH", help="JSON run configuration")
        p.add_argument("--out", default=".", metavar="DIR", help="directory artifacts are written into")
        p.add_argument(
            "--threads", type=int, default=0, metavar="N", help="worker threads; 0 means all available cores"
        )
        p.add_argument("--seed", type=int, default=None, metavar="S", help="override the config seed")
        p.add_argument(
            "--server", default=None, metavar="URL", help="post the work to a running service instead"
        )
        return p

    add("regions", "Rasterize the recoverability classification and export CSV plus PGM.")
    p = add("graph", "Build the coupling-graph component of one frequency and export it as JSON.")
    p.add_argument("--point", required=True, metavar="X,Y", help="frequency point, comma separated")
    p = add("simulate", "Draw random measurement pairs and export the reduced data as CSV.")
    p.add_argument("--count", type=int, default=200, metavar="N", help="number of measurement pairs")
    add("reconstruct", "Recover every uniquely determined grid cell and export field plus error report.")
    p = add("certify", "Construct and verify a non-uniqueness witness at one frequency.")
    p.add_argument("--point", required=True, metavar="X,Y", help="frequency point, comma separated")
    p.add_argument("--pairs", type=int, default=100, metavar="N", help="forward-agreement sample size")
    p = add("check3d", "Diagnose the shifted four-point system at one spatial frequency.")
    p.add_argument("--anchor", required=True, metavar="X,Y,Z", help="frequency point, comma separated")
    p = add("checkhd", "Diagnose the level-sphere pair mechanism in dimension four and up.")
    p.add_argument("--dim", type=int, default=None, metavar="D", help="expected ambient dimension")
    p.add_argument("--point", default=None, metavar="X1,..,XD", help="frequency point; random when omitted")
    add("selftest", "Run the built-in invariant suites.", needs_config=False)

    p = sub.add_parser("serve", help="Run the HTTP service.", description="Run the HTTP service.")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _resolve_threads(args):
    if args.threads < 0:
        raise ValueError(f"--threads must be nonnegative, got {args.threads}")
    return args.threads if args.threads > 0 else (os.cpu_count() or 1)


def _load_config(args):
    rc = RunConfig.from_file(args.config)
    if args.seed is not None:
        rc = rc.model_copy(update={"seed": args.seed})
    return rc


def _run_local(args):
    threads = _resolve_threads(args)
    if args.command == "regions":
        return op_regions(_load_config(args), threads=threads)
    if args.command == "graph":
        return op_graph(_load_config(args), args.point)
    if args.command == "simulate":
        return op_simulate(_load_config(args), count=args.count)
    if args.command == "reconstruct":
        return op_reconstruct(_load_config(args), threads=threads)
    if args.command == "certify":
        return op_certify(_load_config(args), args.point, pairs=args.pairs)
    if args.command == "check3d":
        return op_check3d(_load_config(args), args.anchor)
    if args.command == "checkhd":
        return op_checkhd(_load_config(args), dim=args.dim, point=args.point)
    if args.command == "selftest":
        return op_selftest()
    raise AssertionError(f"unhandled command {args.command}")


def _run_remote(args):
    import httpx

    from .ops import OpResult
    from .runconfig import RunConfig as RC

    payload = {}
    if args.config is not None:
        rc = RC.from_file(args.config)
        if args.seed is not None:
            rc = rc.model_copy(update={"seed": args.seed})
        payload["config"] = rc.model_dump(mode="json", exclude_none=True)
        payload["threads"] = _resolve_threads(args)
    if args.command in ("graph", "certify"):
        payload["point"] = args.point
    if args.command == "checkhd":
        if args.dim is not None:
            payload["dim"] = args.dim
        if args.point is not None:
            payload["point"] = args.point
    if args.command == "check3d":
        payload["anchor"] = args.anchor
    if args.command == "simulate":
        payload["count"] = args.count
    if args.command == "certify":
        payload["pairs"] = args.pairs
    if args.command == "selftest":
        payload = None

    url = args.server.rstrip("/") + "/" + args.command
    log.info("posting %s to %s", args.command, url)
    try:
        response = httpx.post(url, json=payload, timeout=600.0)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach {url}: {exc}", file=sys.stderr)
        return None, EXIT_CONFIG
    if response.status_code == 422:
        print(f"error: the service rejected the request: {response.text}", file=sys.stderr)
        return None, EXIT_CONFIG
    if response.status_code != 200:
        print(f"error: service returned HTTP {response.status_code}", file=sys.stderr)
        return None, EXIT_NUMERICAL
    body = response.json()
    if body.get("error"):
        print(f"error: {body['error']}", file=sys.stderr)
    return OpResult(artifacts=body["artifacts"], summary=body["summary"], code=body["code"]), None


def _write_artifacts(args, result):
    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(result.artifacts.items()):
        target = out_dir / name
        with open(target, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {target}")
    print(json.dumps(result.summary, sort_keys=True))


def _serve(args):
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    _setup_logging()
    if args.command == "serve":
        return _serve(args)
    try:
        if getattr(args, "server", None):
            result, code = _run_remote(args)
            if result is None:
                return code
        else:
            result = _run_local(args)
    except ScanBeamError as exc:
        code = classify_error(exc)
        log.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _write_artifacts(args, result)
    return result.code


if __name__ == "__main__":
    sys.exit(main())

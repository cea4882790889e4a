"""Command-line client.

Every subcommand is a thin wrapper over the HTTP service: by default the app
is driven in-process over an ASGI transport, so no server needs to run;
``--server URL`` points the same requests at a live instance instead.  With a
remote server the path-based commands (run, ablate, scenarios) assume the
manifest and output directory are on a filesystem both sides can see.

Flag resolution: command-line flags win over ``--config`` file values, which
win over built-in defaults.  Exit codes: 0 success, 1 usage/validation
error, 2 runtime or adapter failure.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

import httpx

from .harness import DEFAULT_DECOY
from .service import create_app

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

LOC_DEFAULTS: dict[str, Any] = {
    "padding": 5, "min_area": 100, "max_blocks": 10, "connectivity": 8}
GATE_DEFAULTS: dict[str, Any] = {
    "alpha": 0.6, "beta": 0.4, "tau": 0.8, "token_best": False}
BACKEND_DEFAULTS: dict[str, Any] = {
    "backend": "replay", "endpoint": None, "timeout_ms": 30000,
    "workers": 1, "fallback_policy": "any", "desc_length": "medium"}


class _Parser(argparse.ArgumentParser):
    # usage errors must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fail(message: str, code: int = EXIT_USAGE) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


# --------------------------------------------------------------------------- #
# service access

def _call(server: str | None, method: str, path: str, payload: dict):
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.request(method, path, json=payload)

    async def go():
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, timeout=None,
                                     base_url="http://textgate.internal") as c:
            return await c.request(method, path, json=payload)

    return asyncio.run(go())


def _error_message(resp) -> str:
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = resp.text
    if isinstance(detail, Mapping):
        return str(detail.get("message", detail))
    return json.dumps(detail) if isinstance(detail, list) else str(detail)


def _dispatch(server: str | None, method: str, path: str, payload: dict,
              on_ok) -> int:
    resp = _call(server, method, path, payload)
    if resp.status_code == 200:
        return on_ok(resp.json())
    code = EXIT_USAGE if resp.status_code in (400, 422) else EXIT_RUNTIME
    return _fail(_error_message(resp), code)


# --------------------------------------------------------------------------- #
# flag/file/default overlay

def _load_config_file(path: str) -> dict:
    loaded = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(loaded, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return loaded


def _resolve(args, file_cfg: Mapping[str, Any],
             defaults: Mapping[str, Any]) -> dict:
    unknown = sorted(set(file_cfg) - set(defaults))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    resolved = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in file_cfg:
            resolved[key] = file_cfg[key]
        else:
            resolved[key] = default
    return resolved


def _b64_file(path: str) -> str:
    return base64.b64encode(Path(path).read_bytes()).decode("ascii")


# --------------------------------------------------------------------------- #
# output

def _row_label(row: Mapping) -> str:
    if "scenario" in row:
        return f"scenario={row['scenario']}"
    if "alpha" in row:
        return f"alpha={row['alpha']} beta={row['beta']} tau={row['tau']}"
    return "default"


def _print_table(rows: Sequence[Mapping]) -> None:
    headers = ["setting", "accuracy", "cbr", "fallbacks", "false_pos",
               "failed"]
    cells = [[_row_label(r), f"{r['accuracy']:.4f}", str(r["cbr"]),
              str(r["fallbacks"]), str(r["false_positives"]),
              str(r["failed_images"])] for r in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    print("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
    for row in cells:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())


def _batch_exit(rows: Sequence[Mapping]) -> int:
    failed = max((r["failed_images"] for r in rows), default=0)
    if failed:
        print(f"error: {failed} image(s) failed on a required adapter",
              file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# --------------------------------------------------------------------------- #
# subcommands

def _cmd_localize(args, file_cfg) -> int:
    resolved = _resolve(args, file_cfg, {**LOC_DEFAULTS, "threshold": 128})
    payload = {"mask_pgm_b64": _b64_file(args.mask), **resolved}

    def on_ok(body) -> int:
        text = json.dumps({"blocks": body["blocks"]},
                          separators=(",", ":"), sort_keys=True)
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(text)
        return EXIT_OK

    return _dispatch(args.server, "POST", "/localize", payload, on_ok)


def _cmd_score(args, file_cfg) -> int:
    resolved = _resolve(args, file_cfg, {
        **GATE_DEFAULTS, "embedder": "toy", "endpoint": None,
        "timeout_ms": 30000})
    payload = {"t1": args.t1, "t2": args.t2, "t3": args.t3, **resolved}
    if args.embeddings:
        payload["embeddings"] = json.loads(
            Path(args.embeddings).read_text(encoding="utf-8"))

    def on_ok(body) -> int:
        print(json.dumps(body["breakdown"], sort_keys=True))
        print(json.dumps(body["decision"], sort_keys=True))
        return EXIT_OK

    return _dispatch(args.server, "POST", "/score", payload, on_ok)


def _cmd_run(args, file_cfg) -> int:
    resolved = _resolve(args, file_cfg, {
        **LOC_DEFAULTS, **GATE_DEFAULTS, **BACKEND_DEFAULTS})
    payload = {"manifest_path": args.manifest, "out_dir": args.out_dir,
               **resolved}

    def on_ok(body) -> int:
        _print_table([body["metrics"]])
        return _batch_exit([body["metrics"]])

    return _dispatch(args.server, "POST", "/run", payload, on_ok)


def _parse_grid_file(path: str) -> list[list[float]]:
    grid = []
    for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        bare = line.split("#", 1)[0].strip()
        if not bare:
            continue
        parts = bare.replace(",", " ").split()
        if len(parts) != 3:
            raise ValueError(
                f"{path}:{lineno}: expected 'alpha beta tau', got {line!r}")
        try:
            grid.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(
                f"{path}:{lineno}: non-numeric value in {line!r}") from None
    if not grid:
        raise ValueError(f"{path}: grid file holds no settings")
    return grid


def _cmd_ablate(args, file_cfg) -> int:
    resolved = _resolve(args, file_cfg, {**LOC_DEFAULTS, **BACKEND_DEFAULTS})
    payload = {"manifest_path": args.manifest,
               "grid": _parse_grid_file(args.grid),
               "out_dir": args.out_dir, **resolved}

    def on_ok(body) -> int:
        _print_table(body["rows"])
        return _batch_exit(body["rows"])

    return _dispatch(args.server, "POST", "/ablate", payload, on_ok)


def _cmd_scenarios(args, file_cfg) -> int:
    resolved = _resolve(args, file_cfg, {
        **LOC_DEFAULTS, **GATE_DEFAULTS, **BACKEND_DEFAULTS,
        "decoy": DEFAULT_DECOY})
    payload = {"manifest_path": args.manifest, "scenario": args.scenario,
               "out_dir": args.out_dir, **resolved}

    def on_ok(body) -> int:
        _print_table([body["metrics"]])
        return _batch_exit([body["metrics"]])

    return _dispatch(args.server, "POST", "/scenarios", payload, on_ok)


def _cmd_maskmetrics(args, file_cfg) -> int:
    resolved = _resolve(args, file_cfg, {"threshold": 128})
    payload = {"pred_pgm_b64": _b64_file(args.pred),
               "gt_pgm_b64": _b64_file(args.gt), **resolved}

    def on_ok(body) -> int:
        print(json.dumps(body, sort_keys=True))
        return EXIT_OK

    return _dispatch(args.server, "POST", "/maskmetrics", payload, on_ok)


def _cmd_serve(args, file_cfg) -> int:
    import uvicorn

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


# --------------------------------------------------------------------------- #
# parser wiring

def _add_loc_flags(sub):
    sub.add_argument("--padding", type=int)
    sub.add_argument("--min-area", type=int)
    sub.add_argument("--max-blocks", type=int)
    sub.add_argument("--connectivity", type=int, choices=(4, 8))


def _add_gate_flags(sub):
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--beta", type=float)
    sub.add_argument("--tau", type=float)
    sub.add_argument("--token-best", action=argparse.BooleanOptionalAction,
                     default=None)


def _add_backend_flags(sub):
    sub.add_argument("--backend", choices=("replay", "remote"))
    sub.add_argument("--endpoint", help="model server URL (remote backend)")
    sub.add_argument("--timeout-ms", type=int)
    sub.add_argument("--workers", type=int)
    sub.add_argument("--fallback-policy", choices=("any", "all", "majority"))
    sub.add_argument("--desc-length", choices=("short", "medium", "long"))


def _build_parser() -> _Parser:
    parser = _Parser(prog="textgate",
                     description="confidence-gated scene text pipeline")
    parser.add_argument("--server", help="service URL; default runs the "
                        "service in-process")
    parser.add_argument("--config", help="JSON file of flag defaults")
    subs = parser.add_subparsers(dest="subcommand")

    p = subs.add_parser("localize", help="text blocks from a mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=int)
    _add_loc_flags(p)
    p.set_defaults(func=_cmd_localize)

    p = subs.add_parser("score", help="gate one candidate set")
    p.add_argument("--t1", required=True)
    p.add_argument("--t2", required=True)
    p.add_argument("--t3", required=True)
    p.add_argument("--embedder", choices=("toy", "replay", "remote"))
    p.add_argument("--embeddings", help="JSON text->vector map "
                   "(replay embedder)")
    p.add_argument("--endpoint")
    p.add_argument("--timeout-ms", type=int)
    _add_gate_flags(p)
    p.set_defaults(func=_cmd_score)

    p = subs.add_parser("run", help="full pipeline over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    _add_loc_flags(p)
    _add_gate_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_run)

    p = subs.add_parser("ablate", help="sweep gate settings from a grid file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--grid", required=True,
                   help="file of 'alpha beta tau' lines")
    p.add_argument("--out-dir", required=True)
    _add_loc_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_ablate)

    p = subs.add_parser("scenarios", help="description-rewrite study")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scenario", required=True,
                   choices=("none", "wrong", "correct"))
    p.add_argument("--out-dir")
    p.add_argument("--decoy")
    _add_loc_flags(p)
    _add_gate_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_scenarios)

    p = subs.add_parser("maskmetrics", help="fgIoU and F1 of two masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--threshold", type=int)
    p.set_defaults(func=_cmd_maskmetrics)

    p = subs.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        file_cfg = _load_config_file(args.config) if args.config else {}
        return args.func(args, file_cfg)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    except httpx.HTTPError as exc:
        return _fail(f"cannot reach the service: {exc}", EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())

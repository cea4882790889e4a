"""Command line entry point: `python -m modelserve` or the `modelserve` script."""

from __future__ import annotations

import argparse
import sys

from modelserve.config import DESC_PRESETS, ServerConfig
from modelserve.engines import RoleLoadError
from modelserve.app import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="modelserve",
        description="Serve the remote recognition protocol.")
    parser.add_argument("--recognizer", default="echo")
    parser.add_argument("--captioner", default="echo")
    parser.add_argument("--embedder", default="echo")
    parser.add_argument("--fallback", default="echo")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8093)
    parser.add_argument("--desc-length", default="medium",
                        choices=sorted(DESC_PRESETS))
    args = parser.parse_args(argv)

    try:
        cfg = ServerConfig(
            recognizer=args.recognizer,
            captioner=args.captioner,
            embedder=args.embedder,
            fallback=args.fallback,
            device=args.device,
            port=args.port,
            description_length=args.desc_length,
        )
        serve(cfg, host=args.host)
    except (RoleLoadError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Run the model server: `storyloom-model-server [--port N] [--provider hash]`."""

from __future__ import annotations

import argparse
import os

import uvicorn

from .app import create_app
from .providers import make_provider


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="storyloom-model-server")
    parser.add_argument("--host", default=os.environ.get("MODEL_SERVER_HOST", "127.0.0.1"))
    parser.add_argument(
        "--port", type=int, default=int(os.environ.get("MODEL_SERVER_PORT", "8900"))
    )
    parser.add_argument(
        "--provider",
        choices=["hash", "transformers"],
        default=os.environ.get("MODEL_SERVER_PROVIDER", "hash"),
    )
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    app = create_app(make_provider(args.provider, seed=args.seed))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

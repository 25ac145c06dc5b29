"""Startup flags mirror ServerConfig; everything else lives in app/model."""

from __future__ import annotations

import argparse
from typing import Optional, Sequence

import uvicorn

from .app import create_app
from .config import DEFAULT_MAX_BATCH, ServerConfig
from .model import Seq2SeqScorer


def parse_config(argv: Optional[Sequence[str]] = None) -> ServerConfig:
    parser = argparse.ArgumentParser(
        prog="errlens-server",
        description="Serve token logprobs and top-k candidates from a seq2seq model",
    )
    parser.add_argument("--model", required=True, help="model identifier or local path")
    parser.add_argument("--device", default="cpu", help="torch device (default: cpu)")
    parser.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH,
                        help="largest accepted score_batch size")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--auth-token", help="require this static bearer token")
    args = parser.parse_args(argv)
    return ServerConfig(
        model_id=args.model,
        device=args.device,
        max_batch=args.max_batch,
        host=args.host,
        port=args.port,
        auth_token=args.auth_token,
    )


def main() -> None:
    config = parse_config()
    scorer = Seq2SeqScorer.from_pretrained(config.model_id, config.device)
    uvicorn.run(create_app(scorer, config), host=config.host, port=config.port)


if __name__ == "__main__":
    main()

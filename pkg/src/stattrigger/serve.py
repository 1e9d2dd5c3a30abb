"""Serve the built-in linear oracle over the framed protocol.

Run with ``python -m stattrigger.serve``: speaks over stdio by default (the
``exec:`` addressing mode) or listens on TCP with ``--tcp host:port``. Weights
come from an .npz file saved by the oracle, or a zero-weight classifier when
only a shape is given (useful for protocol smoke tests).
"""

from __future__ import annotations

import argparse
import socket
import sys

from .oracle import BuiltinLinearOracle
from .protocol import serve_oracle_stream


def _parse_shape(text: str) -> tuple[int, int, int]:
    parts = tuple(int(p) for p in text.split(","))
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("shape must be c,h,w")
    return parts


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--weights", help=".npz file with weights/biases/input_shape")
    parser.add_argument("--classes", type=int, default=2, help="classes for the zero oracle")
    parser.add_argument(
        "--shape", type=_parse_shape, default=(3, 32, 32), help="c,h,w for the zero oracle"
    )
    parser.add_argument("--tcp", help="host:port to listen on instead of stdio")
    args = parser.parse_args(argv)

    if args.weights:
        oracle = BuiltinLinearOracle.load(args.weights)
    else:
        oracle = BuiltinLinearOracle.zeros(args.classes, args.shape)

    if args.tcp:
        host, _, port = args.tcp.rpartition(":")
        with socket.create_server((host or "127.0.0.1", int(port))) as server:
            print(f"listening on {server.getsockname()}", file=sys.stderr, flush=True)
            while True:
                conn, _ = server.accept()
                with conn, conn.makefile("rb") as r, conn.makefile("wb") as w:
                    serve_oracle_stream(oracle, r, w)
    else:
        serve_oracle_stream(oracle, sys.stdin.buffer, sys.stdout.buffer)
    return 0


if __name__ == "__main__":
    sys.exit(main())

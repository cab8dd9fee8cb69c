"""Command-line entry point: serve a built-in demo predictor or one loaded
from a JSON spec file.

Demos:
  echo     -- output = first feature (three features x0..x2)
  smoking  -- the bundled smoking example's table model: 1 iff Smoker=1 and
              Cancer=1 (features Smoker, Cancer)

File-backed predictors (--table / --linear) use the same small JSON shapes
the shapcredit CLI reads, so one spec file can drive both sides.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from .server import AdapterSpec, serve

SMOKING_TABLE = {
    (0.0, 0.0): 0.0,
    (0.0, 1.0): 0.0,
    (1.0, 0.0): 0.0,
    (1.0, 1.0): 1.0,
}


def echo_spec() -> AdapterSpec:
    return AdapterSpec(
        ("x0", "x1", "x2"), "numeric", lambda rows: [row[0] for row in rows]
    )


def smoking_spec() -> AdapterSpec:
    def predict(rows: Sequence[Sequence[float]]) -> list[float]:
        return [SMOKING_TABLE[(row[0], row[1])] for row in rows]

    return AdapterSpec(("Smoker", "Cancer"), "discrete", predict)


def table_spec(path: str) -> AdapterSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    table = {
        tuple(float(v) for v in row["in"]): float(row["out"]) for row in doc["rows"]
    }
    features = tuple(str(f) for f in doc["inputs"])

    def predict(rows: Sequence[Sequence[float]]) -> list[float]:
        return [table[tuple(row)] for row in rows]

    return AdapterSpec(features, "discrete", predict)


def linear_spec(path: str) -> AdapterSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    weights = [float(w) for w in doc["weights"]]
    bias = float(doc.get("bias", 0.0))
    features = tuple(str(f) for f in doc["inputs"])

    def predict(rows: Sequence[Sequence[float]]) -> list[float]:
        return [sum(w * v for w, v in zip(weights, row)) + bias for row in rows]

    return AdapterSpec(features, "numeric", predict)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stdio-model-adapter")
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--demo", choices=["echo", "smoking"])
    group.add_argument("--table", help="JSON table-model spec file")
    group.add_argument("--linear", help="JSON linear-model spec file")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.demo == "echo":
        spec = echo_spec()
    elif args.demo == "smoking":
        spec = smoking_spec()
    elif args.table:
        spec = table_spec(args.table)
    else:
        spec = linear_spec(args.linear)
    serve(spec, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

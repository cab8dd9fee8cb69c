"""Server side of the line-delimited JSON model protocol.

One JSON document per line over stdin/stdout. Two operations:

  {"id": n, "op": "spec"}                      -> {"id": n, "features": [...], "output_type": "..."}
  {"id": n, "op": "predict", "points": [[..]]} -> {"id": n, "outputs": [...]}

Responses echo the request id; outputs are index-matched to the incoming
points. A malformed request produces an error object carrying whatever id
could be recovered, and the loop keeps serving. The loop exits cleanly at
end-of-input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, IO, Sequence

Predictor = Callable[[Sequence[Sequence[float]]], Sequence[float]]


@dataclass(frozen=True)
class AdapterSpec:
    """A batch predictor plus the feature order and output type it serves."""

    features: tuple[str, ...]
    output_type: str
    predictor: Predictor

    def __post_init__(self) -> None:
        if not self.features:
            raise ValueError("adapter needs at least one feature")
        if self.output_type not in ("numeric", "discrete"):
            raise ValueError(f"unknown output type {self.output_type!r}")


def _error(request_id, message: str) -> dict:
    return {"id": request_id, "error": message}


def _handle(spec: AdapterSpec, line: str) -> dict:
    try:
        request = json.loads(line)
    except json.JSONDecodeError:
        return _error(None, "request is not valid JSON")
    if not isinstance(request, dict):
        return _error(None, "request must be a JSON object")
    request_id = request.get("id")
    op = request.get("op")
    if op == "spec":
        return {
            "id": request_id,
            "features": list(spec.features),
            "output_type": spec.output_type,
        }
    if op != "predict":
        return _error(request_id, f"unknown op {op!r}")
    points = request.get("points")
    if not isinstance(points, list):
        return _error(request_id, "predict needs a list of points")
    rows = []
    for point in points:
        if not isinstance(point, list) or len(point) != len(spec.features):
            return _error(
                request_id,
                f"each point must list {len(spec.features)} feature values",
            )
        try:
            rows.append([float(v) for v in point])
        except (TypeError, ValueError):
            return _error(request_id, "points must be numeric")
    try:
        outputs = [float(v) for v in spec.predictor(rows)]
    except Exception as exc:  # a broken predictor must not kill the server
        return _error(request_id, f"predictor failed: {exc}")
    if len(outputs) != len(rows):
        return _error(request_id, "predictor returned a mismatched batch")
    if any(not math.isfinite(v) for v in outputs):
        return _error(request_id, "predictor returned a non-finite value")
    return {"id": request_id, "outputs": outputs}


def serve(spec: AdapterSpec, stdin: IO[str], stdout: IO[str]) -> int:
    """Answer requests until end-of-input; returns the number served."""
    served = 0
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        response = _handle(spec, line)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
        served += 1
    return served

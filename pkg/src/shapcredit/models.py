"""Models and losses: built-in evaluatable predictors, their embedding as
deterministic network nodes, dataset ingestion, and the client side of the
external-model stdio protocol.

A model is a deterministic function of an ordered list of input variables.
Built-in kinds: exhaustive lookup table, affine (linear) form, and k-nearest
neighbours over a background dataset. The ``external`` kind talks
line-delimited JSON to a child process (one request object per line,
responses matched by id).
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import subprocess
import threading
import queue as queue_mod
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    ContinuousInputUnsupported,
    IncompatibleLossKind,
    MissingInput,
    NonFiniteOutput,
    ParseError,
    ProtocolError,
    ProtocolTimeout,
    SchemaMismatch,
    UnknownVariable,
)
from .network import Cpt, Network, Variable

log = logging.getLogger(__name__)


class ModelHandle:
    """Base class for evaluatable models.

    ``inputs`` is the ordered list of feature names; ``output_type`` is
    either ``"discrete"`` or ``"numeric"``.
    """

    inputs: tuple[str, ...]
    output_type: str = "numeric"

    def predict_one(self, values: Sequence[Any]) -> Any:
        raise NotImplementedError

    def predict(self, rows: Sequence[Sequence[Any]]) -> list[Any]:
        return [self.predict_one(r) for r in rows]


def evaluate(model: ModelHandle, point: Mapping[str, Any]) -> Any:
    """Evaluate a model at a point given as a name -> value mapping."""
    missing = [name for name in model.inputs if name not in point]
    if missing:
        raise MissingInput(f"model inputs {missing} are unbound")
    return model.predict_one([point[name] for name in model.inputs])


@dataclass
class TableModel(ModelHandle):
    """Exhaustive lookup table keyed by input value tuples."""

    inputs: tuple[str, ...]
    table: dict[tuple[Any, ...], Any]
    output_type: str = "discrete"

    def __post_init__(self) -> None:
        self.inputs = tuple(self.inputs)
        self.table = {tuple(k): v for k, v in self.table.items()}

    def predict_one(self, values: Sequence[Any]) -> Any:
        key = tuple(values)
        if key in self.table:
            return self.table[key]
        skey = tuple(str(v) for v in key)
        for k, v in self.table.items():
            if tuple(str(x) for x in k) == skey:
                return v
        raise MissingInput(f"no table row for inputs {key!r}")


@dataclass
class LinearModel(ModelHandle):
    """Affine form w . x + b over numeric inputs."""

    inputs: tuple[str, ...]
    weights: tuple[float, ...]
    bias: float = 0.0
    output_type: str = "numeric"

    def __post_init__(self) -> None:
        self.inputs = tuple(self.inputs)
        self.weights = tuple(float(w) for w in self.weights)
        if len(self.weights) != len(self.inputs):
            raise ValueError("one weight per input required")

    def predict_one(self, values: Sequence[Any]) -> float:
        try:
            xs = [float(v) for v in values]
        except (TypeError, ValueError):
            raise ContinuousInputUnsupported(
                f"linear model needs numeric inputs, got {values!r}"
            ) from None
        return float(math.fsum(w * x for w, x in zip(self.weights, xs)) + self.bias)

    def predict(self, rows: Sequence[Sequence[Any]]) -> list[float]:
        try:
            matrix = np.asarray(rows, dtype=float)
        except (TypeError, ValueError):
            raise ContinuousInputUnsupported(
                "linear model needs numeric inputs"
            ) from None
        return [float(v) for v in matrix @ np.asarray(self.weights) + self.bias]


@dataclass
class KnnModel(ModelHandle):
    """k-nearest-neighbour prediction against a fixed background.

    Distance is Euclidean on z-scored numeric columns plus Hamming on
    categorical columns; distance ties break on the lower background row
    index. ``task`` selects majority vote (classify) or mean (regress).
    """

    inputs: tuple[str, ...]
    k: int
    background_x: list[tuple[Any, ...]]
    background_y: list[Any]
    numeric_mask: tuple[bool, ...]
    task: str = "classify"
    output_type: str = "discrete"
    _mu: np.ndarray = field(init=False, repr=False)
    _sd: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.background_x:
            raise ValueError("empty background")
        self.inputs = tuple(self.inputs)
        self.output_type = "numeric" if self.task == "regress" else "discrete"
        num_cols = [
            np.asarray([float(r[j]) for r in self.background_x])
            for j, is_num in enumerate(self.numeric_mask)
            if is_num
        ]
        self._mu = np.asarray([c.mean() for c in num_cols])
        sd = np.asarray([c.std() for c in num_cols])
        self._sd = np.where(sd > 0, sd, 1.0)

    def _distance(self, a: Sequence[Any], b: Sequence[Any]) -> float:
        d2 = 0.0
        ni = 0
        for j, is_num in enumerate(self.numeric_mask):
            if is_num:
                da = (float(a[j]) - float(b[j])) / self._sd[ni]
                d2 += da * da
                ni += 1
            else:
                d2 += 0.0 if str(a[j]) == str(b[j]) else 1.0
        return math.sqrt(d2)

    def predict_one(self, values: Sequence[Any]) -> Any:
        ranked = sorted(
            range(len(self.background_x)),
            key=lambda i: (self._distance(values, self.background_x[i]), i),
        )[: self.k]
        labels = [self.background_y[i] for i in ranked]
        if self.task == "regress":
            return float(np.mean([float(v) for v in labels]))
        counts: dict[Any, int] = {}
        for lab in labels:
            counts[lab] = counts.get(lab, 0) + 1
        best = max(counts.values())
        for lab in labels:                       # nearest among tied labels
            if counts[lab] == best:
                return lab
        raise AssertionError("unreachable")


# Loss kinds are plain strings to keep LossSpec serializable.
LOSS_KINDS = ("zero_one", "squared_error", "cross_entropy")


@dataclass(frozen=True)
class LossSpec:
    """A loss kind tied to a model and a target variable."""

    kind: str
    model_node: str
    target: str

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise IncompatibleLossKind(f"unknown loss kind {self.kind!r}")


def loss_value(kind: str, y: Any, pred: Any) -> float:
    """Numeric loss of a single prediction against a single target value."""
    if kind == "zero_one":
        return 0.0 if (pred == y or str(pred) == str(y)) else 1.0
    if kind == "squared_error":
        return (float(pred) - float(y)) ** 2
    if kind == "cross_entropy":
        # Binary form: pred is the probability assigned to class 1.
        p = min(max(float(pred), 1e-12), 1.0 - 1e-12)
        return -(float(y) * math.log(p) + (1.0 - float(y)) * math.log(1.0 - p))
    raise IncompatibleLossKind(f"unknown loss kind {kind!r}")


def _stable_support(values: Sequence[Any]) -> tuple[Any, ...]:
    uniq = list(dict.fromkeys(values))
    try:
        return tuple(sorted(uniq, key=float))
    except (TypeError, ValueError):
        return tuple(sorted(uniq, key=str))


def attach_model_node(net: Network, model: ModelHandle, name: str = "Model") -> Network:
    """Return a new network with a deterministic node for the model output.

    The node's parents are exactly the model's inputs and its CPT rows are
    point masses at the evaluated output for every input state combination.
    """
    if name in net:
        raise UnknownVariable(f"network already has a variable named {name!r}")
    for inp in model.inputs:
        net.variable(inp)
    parent_vars = [net.variable(i) for i in model.inputs]
    combos = list(itertools.product(*[range(v.cardinality) for v in parent_vars]))
    outputs = {}
    for combo in combos:
        point = {
            v.name: v.states[s] for v, s in zip(parent_vars, combo)
        }
        outputs[combo] = evaluate(model, point)
    support = _stable_support(list(outputs.values()))
    index_of = {v: i for i, v in enumerate(support)}
    table = {}
    for combo, out in outputs.items():
        row = [0.0] * len(support)
        row[index_of[out]] = 1.0
        table[combo] = tuple(row)
    new_var = Variable(name, support)
    cpts = [net.cpts[v.name] for v in net.variables] + [Cpt(name, tuple(model.inputs), table)]
    roles = dict(net.roles)
    roles["model"] = name
    return Network(list(net.variables) + [new_var], cpts, roles=roles, name=net.name)


def attach_loss_node(
    net: Network,
    loss: LossSpec,
    name: str = "Loss",
) -> Network:
    """Add a deterministic loss node with parents (target, model node)."""
    if name in net:
        raise UnknownVariable(f"network already has a variable named {name!r}")
    model_var = net.variable(loss.model_node)
    target_var = net.variable(loss.target)
    if loss.kind == "cross_entropy":
        raise IncompatibleLossKind(
            "cross_entropy needs a probability-vector output and cannot be "
            "tabulated as a single discrete node"
        )
    combos = list(itertools.product(range(target_var.cardinality), range(model_var.cardinality)))
    values = {
        (ty, m): loss_value(loss.kind, target_var.states[ty], model_var.states[m])
        for ty, m in combos
    }
    support = _stable_support(list(values.values()))
    index_of = {v: i for i, v in enumerate(support)}
    table = {}
    for combo, val in values.items():
        row = [0.0] * len(support)
        row[index_of[val]] = 1.0
        table[combo] = tuple(row)
    new_var = Variable(name, support)
    cpts = [net.cpts[v.name] for v in net.variables] + [
        Cpt(name, (target_var.name, model_var.name), table)
    ]
    roles = dict(net.roles)
    roles["loss"] = name
    return Network(list(net.variables) + [new_var], cpts, roles=roles, name=net.name)


# --- datasets ---


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "numeric" | "categorical"


@dataclass
class Dataset:
    """Rectangular table of feature/target columns."""

    columns: list[Column]
    rows: list[list[Any]]

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> list[Any]:
        try:
            j = self.column_names.index(name)
        except ValueError:
            raise SchemaMismatch(f"no column named {name!r}") from None
        return [r[j] for r in self.rows]

    def matrix(self, names: Sequence[str]) -> list[tuple[Any, ...]]:
        idx = [self.column_names.index(n) for n in names]
        return [tuple(r[j] for j in idx) for r in self.rows]


def _infer_kind(values: list[str]) -> str:
    for v in values:
        try:
            float(v)
        except ValueError:
            return "categorical"
    return "numeric"


def load_dataset(path: str, schema: Mapping[str, Any] | None = None) -> Dataset:
    """Load a header-ed CSV. Column kinds come from ``schema`` (or a
    ``<path>.schema.json`` sidecar) and are inferred otherwise. A schema
    entry is either a kind string or ``{"kind": "categorical", "states":
    [...]}``; declared state lists are enforced."""
    if schema is None:
        try:
            with open(path + ".schema.json", "r", encoding="utf-8") as fh:
                schema = json.load(fh).get("columns", {})
        except FileNotFoundError:
            schema = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file (no header row)") from None
        raw_rows = list(reader)
    if len(set(header)) != len(header):
        raise SchemaMismatch(f"{path}: duplicate column names in header")
    for i, row in enumerate(raw_rows):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
    columns = []
    states: dict[str, set[str]] = {}
    for j, name in enumerate(header):
        declared = schema.get(name)
        if isinstance(declared, Mapping):
            kind = declared.get("kind")
            if "states" in declared:
                states[name] = {str(s) for s in declared["states"]}
        else:
            kind = declared
        kind = kind or _infer_kind([r[j] for r in raw_rows])
        if kind not in ("numeric", "categorical"):
            raise SchemaMismatch(f"{path}: column {name!r} has unknown kind {kind!r}")
        columns.append(Column(name, kind))
    rows: list[list[Any]] = []
    for i, raw in enumerate(raw_rows):
        row: list[Any] = []
        for j, col in enumerate(columns):
            if col.kind == "numeric":
                try:
                    row.append(float(raw[j]))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {i + 2}, column {col.name!r}: "
                        f"{raw[j]!r} is not numeric"
                    ) from None
            else:
                if col.name in states and raw[j] not in states[col.name]:
                    raise SchemaMismatch(
                        f"{path}: row {i + 2}, column {col.name!r}: "
                        f"{raw[j]!r} is not a declared state"
                    )
                row.append(raw[j])
        rows.append(row)
    log.info(
        "loaded %s: %d rows, columns %s",
        path,
        len(rows),
        {c.name: c.kind for c in columns},
    )
    return Dataset(columns, rows)


# --- external-model protocol (client side) ---


class ExternalModelClient:
    """Client for the line-delimited JSON model protocol.

    One JSON document per line over the child's stdin/stdout. Requests carry
    a monotonically increasing ``id``; the matching response must echo it.
    The connection is serially owned: callers needing parallelism run one
    client (and child process) per worker.
    """

    def __init__(self, command: Sequence[str], timeout: float = 30.0):
        self.command = list(command)
        self.timeout = timeout
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lines: queue_mod.Queue[str | None] = queue_mod.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._next_id = 0

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _roundtrip(self, request: dict[str, Any]) -> dict[str, Any]:
        if self._proc.poll() is not None:
            raise ProtocolError("endpoint process has exited")
        assert self._proc.stdin is not None
        self._proc.stdin.write(json.dumps(request) + "\n")
        self._proc.stdin.flush()
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue_mod.Empty:
            raise ProtocolTimeout(
                f"no response within {self.timeout}s from {self.command}"
            ) from None
        if line is None:
            raise ProtocolError("endpoint closed its output stream")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed response line: {line!r}") from exc
        if not isinstance(response, dict):
            raise ProtocolError(f"response is not an object: {line!r}")
        if "error" in response:
            raise ProtocolError(f"endpoint error: {response['error']}")
        if response.get("id") != request.get("id"):
            raise ProtocolError(
                f"response id {response.get('id')!r} does not match request "
                f"id {request.get('id')!r}"
            )
        return response

    def spec(self) -> dict[str, Any]:
        rid = self._next_id
        self._next_id += 1
        response = self._roundtrip({"id": rid, "op": "spec"})
        if "features" not in response or "output_type" not in response:
            raise ProtocolError(f"spec response missing fields: {response!r}")
        return response

    def predict(self, points: Sequence[Sequence[float]]) -> list[float]:
        if len(points) == 0:
            return []
        rid = self._next_id
        self._next_id += 1
        response = self._roundtrip(
            {"id": rid, "op": "predict", "points": [list(p) for p in points]}
        )
        outputs = response.get("outputs")
        if not isinstance(outputs, list) or len(outputs) != len(points):
            raise ProtocolError(
                f"expected {len(points)} outputs, got {outputs!r}"
            )
        values = []
        for o in outputs:
            v = float(o)
            if not math.isfinite(v):
                raise NonFiniteOutput(f"endpoint returned {o!r}")
            values.append(v)
        return values

    def close(self) -> None:
        try:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        except Exception:
            self._proc.kill()

    def __enter__(self) -> "ExternalModelClient":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


@dataclass
class ExternalModel(ModelHandle):
    """Model evaluated over an external protocol endpoint."""

    inputs: tuple[str, ...]
    client: ExternalModelClient
    output_type: str = "numeric"

    def __post_init__(self) -> None:
        self.inputs = tuple(self.inputs)

    @classmethod
    def connect(cls, command: Sequence[str], timeout: float = 30.0) -> "ExternalModel":
        client = ExternalModelClient(command, timeout=timeout)
        spec = client.spec()
        return cls(tuple(str(f) for f in spec["features"]), client, str(spec["output_type"]))

    def predict_one(self, values: Sequence[Any]) -> float:
        return self.predict([values])[0]

    def predict(self, rows: Sequence[Sequence[Any]]) -> list[float]:
        return self.client.predict([[float(v) for v in r] for r in rows])


def external_evaluate_batch(
    endpoint: ExternalModelClient | ExternalModel,
    points: Sequence[Sequence[float]],
) -> list[float]:
    """Send one batch over the protocol; outputs are index-matched."""
    client = endpoint.client if isinstance(endpoint, ExternalModel) else endpoint
    return client.predict(points)

"""Command-line front end.

Subcommands:
  explain    local attributions for one or more data points
  global     global (information/variance) attributions per feature
  eval       clustering / sensitivity evaluation of attribution matrices
  net-query  condition / do / pin a network and print the resulting law

All randomness flows from the single --seed flag (default 0, never the
clock); identical configurations produce byte-identical output files.
Exit codes: 2 configuration error, 3 inference error, 4 protocol error.
"""

from __future__ import annotations

import argparse
import json
import math
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from typing import Any, Sequence

from . import __version__
from .engine import RegressionPlan, shapley_exact, shapley_regression
from .errors import ConfigError, ProtocolError, ShapcreditError
from .games import (
    Nature,
    TargetKind,
    TargetRv,
    build_empirical_game,
    build_global_game,
    build_local_game,
    build_loss_game,
)
from .harness import (
    clustering_sweep,
    read_matrix_csv,
    sensitivity_sweep,
    supervised_clustering,
    write_matrix_csv,
    write_result_json,
)
from .measures import Measure, MeasureKind, query_distribution
from .models import (
    ExternalModel,
    KnnModel,
    LinearModel,
    LossSpec,
    TableModel,
    attach_loss_node,
    attach_model_node,
    load_dataset,
)
from .network import Network, load_network, parse_assignment

BUNDLED = {
    "fig4": "smoking_fig4.json",
    "fig5": "smoking_fig5.json",
    "smoking_fig4": "smoking_fig4.json",
    "smoking_fig5": "smoking_fig5.json",
}

NATURES = {"obs": Nature.OBSERVATIONAL, "spec": Nature.MODEL_SPECIFIC, "causal": Nature.CAUSAL}
MEASURES = {
    "ev": MeasureKind.EXPECTED_VALUE,
    "var": MeasureKind.VARIANCE,
    "entropy": MeasureKind.SHANNON_ENTROPY,
    "cpe": MeasureKind.CUMULATIVE_PAIRED_ENTROPY,
}


def bundled_network_path(alias: str) -> str:
    filename = BUNDLED[alias]
    return str(resources.files("shapcredit.data").joinpath(filename))


def resolve_network(spec: str) -> Network:
    if spec in BUNDLED:
        return load_network(bundled_network_path(spec))
    return load_network(spec)


def _parse_log_base(text: str) -> float:
    if text == "e":
        return math.e
    base = float(text)
    if base <= 1.0:
        raise ConfigError(f"log base must be > 1, got {text}")
    return base


def _make_measure(args: argparse.Namespace) -> Measure:
    return Measure(
        MEASURES[args.measure],
        entropy_base=_parse_log_base(args.log_base),
        riemann_steps=args.riemann_steps,
    )


def _load_model_spec(spec: str, dataset=None):
    """Model flag: ``node:NAME``, ``external:<command>``, or a JSON file
    whose ``kind`` is table / linear / knn."""
    if spec.startswith("node:"):
        return ("node", spec[len("node:"):])
    if spec.startswith("external:"):
        return ("model", ExternalModel.connect(shlex.split(spec[len("external:"):])))
    with open(spec, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "table":
        table = {tuple(row["in"]): row["out"] for row in doc["rows"]}
        return ("model", TableModel(tuple(doc["inputs"]), table))
    if kind == "linear":
        return (
            "model",
            LinearModel(tuple(doc["inputs"]), tuple(doc["weights"]), float(doc.get("bias", 0.0))),
        )
    if kind == "knn":
        if dataset is None:
            raise ConfigError("knn models need --dataset for their background")
        inputs = tuple(doc["inputs"])
        target = doc["target"]
        mask = tuple(
            next(c for c in dataset.columns if c.name == n).kind == "numeric" for n in inputs
        )
        return (
            "model",
            KnnModel(
                inputs,
                int(doc.get("k", 1)),
                dataset.matrix(inputs),
                dataset.column(target),
                mask,
                task=doc.get("task", "classify"),
            ),
        )
    raise ConfigError(f"unknown model kind {kind!r} in {spec}")


def _resolve_nodes(net: Network, args: argparse.Namespace) -> tuple[Network, list[str], str, str, str]:
    """Returns (net, features, model_node, loss_node, target_y), attaching
    model/loss nodes when the flags ask for it."""
    roles = net.roles
    model_node = roles.get("model", "Model")
    loss_node = roles.get("loss", "Loss")
    if getattr(args, "model", None):
        kind, payload = _load_model_spec(args.model)
        if kind == "node":
            model_node = payload
        else:
            model_node = "Model" if "Model" not in net else "ModelAttached"
            net = attach_model_node(net, payload, model_node)
    if getattr(args, "loss", None):
        if args.loss.startswith("node:"):
            loss_node = args.loss[len("node:"):]
        else:
            loss_node = "Loss" if "Loss" not in net else "LossAttached"
            net = attach_loss_node(
                net,
                LossSpec(args.loss, model_node, roles.get("target", args.y or "")),
                loss_node,
            )
    target_y = args.y or roles.get("target", "")
    features = list(args.features.split(",")) if args.features else list(roles.get("features", []))
    if not features:
        raise ConfigError("no feature players: pass --features or add roles to the network file")
    return net, features, model_node, loss_node, target_y


def _target_rv(args: argparse.Namespace, model_node: str, loss_node: str, target_y: str) -> TargetRv:
    if args.target == "model":
        return TargetRv(TargetKind.MODEL_OUTPUT, model_node)
    if args.target == "loss":
        return TargetRv(TargetKind.LOSS, loss_node)
    if not target_y:
        raise ConfigError("target=y needs --y or a roles.target entry in the network file")
    return TargetRv(TargetKind.TARGET_Y, target_y)


def _solve(game, args: argparse.Namespace):
    if args.method == "exact":
        return shapley_exact(game)
    return shapley_regression(game, RegressionPlan(n_samples=args.samples, seed=args.seed))


def _meta(args: argparse.Namespace, extra: dict[str, Any] | None = None) -> dict[str, Any]:
    meta = {
        "tool": "shapcredit",
        "version": __version__,
        "seed": args.seed,
        "method": getattr(args, "method", None),
        "nature": getattr(args, "nature", None),
        "measure": getattr(args, "measure", None),
        "target": getattr(args, "target", None),
        "log_base": getattr(args, "log_base", None),
    }
    if extra:
        meta.update(extra)
    return {k: v for k, v in meta.items() if v is not None}


def _emit_lines(out: str | None, lines: list[dict[str, Any]]) -> None:
    text = "".join(json.dumps(line, sort_keys=True) + "\n" for line in lines)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _points_from_args(net: Network, args: argparse.Namespace) -> list[dict[str, int]]:
    points = []
    for text in args.point or []:
        points.append(parse_assignment(net, text))
    if args.points_file:
        with open(args.points_file, "r", encoding="utf-8") as fh:
            import csv as _csv

            reader = _csv.DictReader(fh)
            for row in reader:
                points.append(
                    {
                        name: net.variable(name).state_index(value)
                        for name, value in row.items()
                    }
                )
    if not points:
        raise ConfigError("no data points: pass --point or --points-file")
    return points


def cmd_explain(args: argparse.Namespace) -> int:
    if args.dataset:
        return _explain_empirical(args)
    if not args.network:
        raise ConfigError("explain needs --network (or --dataset for empirical mode)")
    net = resolve_network(args.network)
    net, features, model_node, loss_node, target_y = _resolve_nodes(net, args)
    nature = NATURES[args.nature]
    measure = _make_measure(args)
    target = _target_rv(args, model_node, loss_node, target_y)
    points = _points_from_args(net, args)

    def solve_point(point: dict[str, int]) -> dict[str, Any]:
        if target.kind is TargetKind.LOSS:
            game = build_loss_game(net, point, nature, measure, features, target_y, loss_node)
        else:
            game = build_local_game(net, features, point, nature, measure, target)
        report = _solve(game, args)
        label_point = {
            name: str(net.variable(name).states[idx]) for name, idx in point.items()
        }
        return {"point": label_point, "report": report.as_dict()}

    with ThreadPoolExecutor(max_workers=max(args.workers, 1)) as pool:
        results = list(pool.map(solve_point, points))
    lines = [{"meta": _meta(args, {"network": args.network})}] + results
    _emit_lines(args.out, lines)
    return 0


def _explain_empirical(args: argparse.Namespace) -> int:
    if args.nature != "spec":
        raise ConfigError(
            "empirical (dataset) mode supports only --nature spec: conditioning "
            "needs the joint density and do-interventions need the graph"
        )
    dataset = load_dataset(args.dataset)
    if not args.model:
        raise ConfigError("empirical mode needs --model")
    kind, payload = _load_model_spec(args.model, dataset)
    if kind != "model":
        raise ConfigError("empirical mode needs an evaluatable --model, not node:")
    model = payload
    measure = _make_measure(args)
    background = dataset.matrix(model.inputs)
    points: list[Sequence[float]] = []
    for text in args.point or []:
        bound = dict(part.split("=", 1) for part in text.split(","))
        points.append([float(bound[name]) for name in model.inputs])
    if args.points_file:
        header, rows = read_matrix_csv(args.points_file)
        idx = [header.index(n) for n in model.inputs]
        points.extend([r[j] for j in idx] for r in rows)
    if not points:
        raise ConfigError("no data points: pass --point or --points-file")

    def solve_point(x: Sequence[float]) -> dict[str, Any]:
        game = build_empirical_game(model, background, x, measure)
        report = _solve(game, args)
        return {"point": dict(zip(model.inputs, [float(v) for v in x])), "report": report.as_dict()}

    with ThreadPoolExecutor(max_workers=max(args.workers, 1)) as pool:
        results = list(pool.map(solve_point, points))
    lines = [{"meta": _meta(args, {"dataset": args.dataset})}] + results
    _emit_lines(args.out, lines)
    return 0


def cmd_global(args: argparse.Namespace) -> int:
    if args.measure == "ev":
        raise ConfigError(
            "global games need an uncertainty measure (var, entropy or cpe); "
            "the expected-value global game is identically zero"
        )
    net = resolve_network(args.network)
    net, features, model_node, loss_node, target_y = _resolve_nodes(net, args)
    nature = NATURES[args.nature]
    measure = _make_measure(args)
    target = _target_rv(args, model_node, loss_node, target_y)
    game = build_global_game(net, features, nature, measure, target)
    report = _solve(game, args)
    lines = [{"meta": _meta(args, {"network": args.network})}, {"report": report.as_dict()}]
    _emit_lines(args.out, lines)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    header, phi = read_matrix_csv(args.attributions)
    if args.protocol == "cluster":
        _, resp_rows = read_matrix_csv(args.response)
        response = [r[0] for r in resp_rows]
        if args.k_range:
            lo, hi = (int(v) for v in args.k_range.split(":"))
            results = clustering_sweep(
                phi, response, range(lo, hi + 1), restarts=args.restarts, seed=args.seed
            )
            payload = {
                "protocol": "cluster",
                "meta": _meta(args),
                "results": [r.as_dict() for r in results],
            }
        else:
            result = supervised_clustering(
                phi, response, args.k, restarts=args.restarts, seed=args.seed
            )
            payload = {"protocol": "cluster", "meta": _meta(args), "results": [result.as_dict()]}
        write_result_json(args.out, payload)
        return 0
    # sensitivity
    data_header, rows = read_matrix_csv(args.data)
    if args.background:
        _, background = read_matrix_csv(args.background)
    else:
        background = rows
    if not args.model:
        raise ConfigError("sensitivity needs --model")
    dataset = load_dataset(args.dataset) if args.dataset else None
    kind, model = _load_model_spec(args.model, dataset)
    if kind != "model":
        raise ConfigError("sensitivity needs an evaluatable --model, not node:")
    curve = sensitivity_sweep(
        model,
        rows,
        phi,
        background,
        steps=args.steps,
        seed=args.seed,
        resamples=args.resamples,
        method=args.attributions,
    )
    write_result_json(args.out, {"protocol": "sensitivity", "meta": _meta(args), "curve": curve.as_dict()})
    write_matrix_csv(
        args.out + ".csv",
        ["n_masked", "mean_abs_delta"],
        [[float(j), d] for j, d in enumerate(curve.mean_abs_delta)],
    )
    return 0


def cmd_net_query(args: argparse.Namespace) -> int:
    net = resolve_network(args.network)
    given = parse_assignment(net, args.given or "")
    dist = query_distribution(net, args.query, args.mode, given)
    payload = {
        "network": args.network,
        "query": args.query,
        "mode": args.mode,
        "given": args.given or "",
        "support": [str(s) for s in dist.support],
        "weights": list(dist.weights),
    }
    _emit_lines(args.out, [payload])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapcredit",
        description="Shapley credit allocation over discrete causal Bayesian networks",
    )
    parser.add_argument("--version", action="version", version=f"shapcredit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--network", help="network JSON path or bundled alias (fig4, fig5)")
        p.add_argument("--dataset", help="CSV dataset (empirical mode / knn background)")
        p.add_argument("--model", help="node:NAME, model spec JSON, or external:<command>")
        p.add_argument("--loss", help="node:NAME or loss kind to attach (zero_one, squared_error)")
        p.add_argument("--features", help="comma-separated feature players (default: network roles)")
        p.add_argument("--y", help="target variable name (default: network roles)")
        p.add_argument("--nature", choices=sorted(NATURES), default="obs")
        p.add_argument("--measure", choices=sorted(MEASURES), default="ev")
        p.add_argument("--target", choices=["model", "loss", "y"], default="model")
        p.add_argument("--method", choices=["exact", "regression"], default="exact")
        p.add_argument("--samples", type=int, default=10_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--log-base", default="e")
        p.add_argument("--riemann-steps", type=int, default=512)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", help="output path (default: stdout)")

    p_explain = sub.add_parser("explain", help="local attributions at data points")
    common(p_explain)
    p_explain.add_argument("--point", action="append", help='e.g. "Smoker=1,Cancer=1,XRay=1,Dyspnoea=0"')
    p_explain.add_argument("--points-file", help="CSV of points (header = variable names)")
    p_explain.set_defaults(func=cmd_explain)

    p_global = sub.add_parser("global", help="global attributions per feature")
    common(p_global)
    p_global.set_defaults(func=cmd_global)

    p_eval = sub.add_parser("eval", help="evaluate attribution matrices")
    common(p_eval)
    p_eval.add_argument("--protocol", choices=["cluster", "sensitivity"], required=True)
    p_eval.add_argument("--attributions", required=True, help="attribution matrix CSV")
    p_eval.add_argument("--response", help="response vector CSV (cluster)")
    p_eval.add_argument("--data", help="data rows CSV (sensitivity)")
    p_eval.add_argument("--background", help="background rows CSV (sensitivity)")
    p_eval.add_argument("--k", type=int, default=2)
    p_eval.add_argument("--k-range", help="inclusive sweep, e.g. 1:10")
    p_eval.add_argument("--restarts", type=int, default=10)
    p_eval.add_argument("--steps", type=int, default=1)
    p_eval.add_argument("--resamples", type=int, default=32)
    p_eval.set_defaults(func=cmd_eval)

    p_query = sub.add_parser("net-query", help="condition / do / pin a network")
    p_query.add_argument("--network", required=True)
    p_query.add_argument("--mode", choices=["condition", "do", "pin"], required=True)
    p_query.add_argument("--given", default="")
    p_query.add_argument("--query", required=True)
    p_query.add_argument("--out")
    p_query.set_defaults(func=cmd_net_query)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"shapcredit: config error: {exc}", file=sys.stderr)
        return 2
    except ProtocolError as exc:
        print(f"shapcredit: protocol error: {exc}", file=sys.stderr)
        return 4
    except ShapcreditError as exc:
        print(f"shapcredit: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, ValueError) as exc:
        print(f"shapcredit: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

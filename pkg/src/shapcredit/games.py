"""Coalition games built from a (nature, measure, target) triple.

The nature decides how a coalition's variables are fixed:

  * observational -- probabilistic conditioning on the coalition's values,
  * model-specific -- marginal pinning (coalition forced, the rest keep
    their full joint law; only deterministic function nodes respond),
  * causal -- graph-mutilating do-intervention.

The measure decides what statistic of the target's law the game tracks.
Every game satisfies value(empty) = 0 by construction: expected-value games
subtract the unconditional mean; uncertainty games subtract the conditional
statistic from the unconditional one.

Local games fix the coalition at one data point. Global games average the
local value over the factual law of the coalition, giving the information /
variance / cumulative-paired-information contribution families. Loss games
play over Z = features + target, loss-of-the-mean games (players = features
only) score the loss of the conditional-mean prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Sequence

from .errors import (
    ExpectedValueGlobalRejected,
    LossNodeMissing,
    TooManyPlayers,
    UnknownVariable,
)
from .measures import (
    Measure,
    MeasureKind,
    apply_measure,
    conditional_measure,
    expected_conditional_measure,
)
from .models import ModelHandle, loss_value
from .network import Distribution, Network, condition

# Exact play is capped: a game's full coalition lattice is 2^players.
MAX_EXACT_PLAYERS = 24


class Nature(str, Enum):
    OBSERVATIONAL = "observational"
    MODEL_SPECIFIC = "model-specific"
    CAUSAL = "causal"

    @property
    def query_mode(self) -> str:
        return {
            Nature.OBSERVATIONAL: "condition",
            Nature.MODEL_SPECIFIC: "pin",
            Nature.CAUSAL: "do",
        }[self]


class TargetKind(str, Enum):
    MODEL_OUTPUT = "model"
    LOSS = "loss"
    TARGET_Y = "y"


@dataclass(frozen=True)
class TargetRv:
    """The random variable a game allocates credit for."""

    kind: TargetKind
    node: str


def coalition_members(mask: int, players: Sequence[str]) -> tuple[str, ...]:
    return tuple(p for i, p in enumerate(players) if mask >> i & 1)


def coalition_of(players: Sequence[str], members: Iterable[str]) -> int:
    index = {p: i for i, p in enumerate(players)}
    mask = 0
    for m in members:
        if m not in index:
            raise UnknownVariable(f"{m!r} is not a player")
        mask |= 1 << index[m]
    return mask


class Game:
    """A coalition game: ordered players plus a cached characteristic function.

    ``value`` is keyed by coalition bitmask over the player order. The
    metadata fields describe where the characteristic function came from and
    are carried into attribution reports.
    """

    def __init__(
        self,
        players: Sequence[str],
        value_fn: Callable[[int], float],
        nature: Nature | None = None,
        measure: Measure | None = None,
        target: TargetRv | None = None,
        instance: Mapping[str, Any] | None = None,
        baseline: float = 0.0,
    ):
        self.players: tuple[str, ...] = tuple(players)
        if len(self.players) > MAX_EXACT_PLAYERS:
            raise TooManyPlayers(
                f"{len(self.players)} players exceeds the exact-mode cap "
                f"{MAX_EXACT_PLAYERS}"
            )
        self._value_fn = value_fn
        self.nature = nature
        self.measure = measure
        self.target = target
        self.instance = dict(instance) if instance is not None else None
        self.baseline = baseline
        self._cache: dict[int, float] = {0: 0.0}

    @property
    def num_players(self) -> int:
        return len(self.players)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.players)) - 1

    def value(self, mask: int) -> float:
        if mask < 0 or mask > self.full_mask:
            raise ValueError(f"coalition mask {mask:#x} out of range")
        hit = self._cache.get(mask)
        if hit is None:
            hit = self._value_fn(mask)
            self._cache[mask] = hit
        return hit

    def value_of(self, members: Iterable[str]) -> float:
        return self.value(coalition_of(self.players, members))

    def metadata(self) -> dict[str, Any]:
        out: dict[str, Any] = {"players": list(self.players)}
        if self.nature is not None:
            out["nature"] = self.nature.value
        if self.measure is not None:
            out["measure"] = self.measure.kind.value
            out["log_base"] = (
                "e" if self.measure.entropy_base == math.e else self.measure.entropy_base
            )
        if self.target is not None:
            out["target"] = {"kind": self.target.kind.value, "node": self.target.node}
        out["scope"] = "global" if self.instance is None else "local"
        return out

    @staticmethod
    def from_table(
        table: Mapping[int, float] | Mapping[frozenset, float],
        players: Sequence[str] | None = None,
    ) -> "Game":
        """Game over an explicit coalition-value table (testing/solver use)."""
        by_mask: dict[int, float] = {}
        n = 0
        for key, v in table.items():
            mask = key if isinstance(key, int) else sum(1 << i for i in key)
            by_mask[mask] = float(v)
            n = max(n, mask.bit_length())
        names = tuple(players) if players is not None else tuple(f"p{i}" for i in range(n))
        if by_mask.get(0, 0.0) != 0.0:
            raise ValueError("characteristic functions must have value(empty) = 0")

        def value_fn(mask: int) -> float:
            return by_mask[mask]

        return Game(names, value_fn)


def _local_value_fn(
    net: Network,
    players: Sequence[str],
    instance: Mapping[str, int],
    nature: Nature,
    measure: Measure,
    target_node: str,
) -> tuple[Callable[[int], float], float]:
    mode = nature.query_mode
    base_dist = condition(net, {}, target_node)
    baseline = apply_measure(measure, base_dist)

    def value_fn(mask: int) -> float:
        if mask == 0:
            return 0.0
        given = {p: instance[p] for i, p in enumerate(players) if mask >> i & 1}
        stat = conditional_measure(net, target_node, mode, given, measure)
        if measure.kind is MeasureKind.EXPECTED_VALUE:
            return stat - baseline
        return baseline - stat

    return value_fn, baseline


def _global_value_fn(
    net: Network,
    players: Sequence[str],
    nature: Nature,
    measure: Measure,
    target_node: str,
) -> tuple[Callable[[int], float], float]:
    if measure.kind is MeasureKind.EXPECTED_VALUE:
        raise ExpectedValueGlobalRejected(
            "the global expected-value game is identically zero "
            "(the conditional means average back to the unconditional mean); "
            "use variance, shannon-entropy or cumulative-paired-entropy"
        )
    mode = nature.query_mode
    baseline = apply_measure(measure, condition(net, {}, target_node))

    def value_fn(mask: int) -> float:
        if mask == 0:
            return 0.0
        coalition = [p for i, p in enumerate(players) if mask >> i & 1]
        return baseline - expected_conditional_measure(
            net, target_node, coalition, measure, mode=mode
        )

    return value_fn, baseline


def build_local_game(
    net: Network,
    players: Sequence[str],
    instance: Mapping[str, int],
    nature: Nature,
    measure: Measure,
    target: TargetRv,
) -> Game:
    """Local game at one data point; ``instance`` must bind every player."""
    for p in players:
        net.variable(p)
        if p not in instance:
            raise UnknownVariable(f"instance does not bind player {p!r}")
    net.variable(target.node)
    value_fn, baseline = _local_value_fn(net, players, instance, nature, measure, target.node)
    return Game(players, value_fn, nature, measure, target, instance, baseline)


def build_global_game(
    net: Network,
    players: Sequence[str],
    nature: Nature,
    measure: Measure,
    target: TargetRv,
) -> Game:
    """Global game: the local value averaged over the factual law of the
    coalition. Entropy gives the information contribution I(X_S; target),
    variance the variance contribution Var(E[target | X_S]), cumulative
    paired entropy its information analogue."""
    for p in players:
        net.variable(p)
    net.variable(target.node)
    value_fn, baseline = _global_value_fn(net, players, nature, measure, target.node)
    return Game(players, value_fn, nature, measure, target, None, baseline)


def build_loss_game(
    net: Network,
    instance: Mapping[str, int],
    nature: Nature,
    measure: Measure,
    features: Sequence[str],
    target_y: str,
    loss_node: str = "Loss",
) -> Game:
    """Loss game over Z = features + target: the target variable is a player
    and is pinned/conditioned/intervened exactly like a feature."""
    if loss_node not in net:
        raise LossNodeMissing(f"network has no loss node {loss_node!r}")
    players = list(features) + [target_y]
    return build_local_game(
        net, players, instance, nature, measure, TargetRv(TargetKind.LOSS, loss_node)
    )


def build_mean_prediction_loss_game(
    net: Network,
    instance: Mapping[str, int],
    nature: Nature,
    features: Sequence[str],
    target_y: str,
    model_node: str,
    loss_kind: str,
) -> Game:
    """Loss-of-the-conditional-mean game (players are the features only).

    value(S) = l(y, E[g | S fixed per nature]) - l(y, E[g]): credit for how
    much knowing the coalition moves the mean prediction's loss at this
    point, rather than for the point's own loss deviation.
    """
    for p in features:
        net.variable(p)
        if p not in instance:
            raise UnknownVariable(f"instance does not bind player {p!r}")
    y_var = net.variable(target_y)
    if target_y not in instance:
        raise UnknownVariable(f"instance does not bind the target {target_y!r}")
    y_value = y_var.states[instance[target_y]]
    mode = nature.query_mode
    ev = Measure(MeasureKind.EXPECTED_VALUE)
    mean_pred = conditional_measure(net, model_node, "condition", {}, ev)
    baseline = loss_value(loss_kind, y_value, mean_pred)

    def value_fn(mask: int) -> float:
        if mask == 0:
            return 0.0
        given = {p: instance[p] for i, p in enumerate(features) if mask >> i & 1}
        pred = conditional_measure(net, model_node, mode, given, ev)
        return loss_value(loss_kind, y_value, pred) - baseline

    return Game(
        features,
        value_fn,
        nature,
        ev,
        TargetRv(TargetKind.LOSS, model_node),
        instance,
        baseline,
    )


def build_empirical_game(
    model: ModelHandle,
    background: Sequence[Sequence[float]],
    instance: Sequence[float],
    measure: Measure,
) -> Game:
    """Model-specific game estimated from a background sample (no network).

    A coalition's value fixes the coalition's coordinates at the instance
    and lets the rest range over the background rows (their joint empirical
    law). Only the model-specific nature is estimable this way: the
    observational one needs the conditional density and the causal one needs
    the graph.
    """
    players = tuple(model.inputs)
    rows = [tuple(float(v) for v in r) for r in background]
    if not rows:
        raise ValueError("empty background")
    if len(instance) != len(players):
        raise ValueError("instance length does not match model inputs")
    point = tuple(float(v) for v in instance)
    uniform = [1.0 / len(rows)] * len(rows)

    def mixed_outputs(mask: int) -> list[float]:
        mixed = [
            tuple(point[j] if mask >> j & 1 else row[j] for j in range(len(players)))
            for row in rows
        ]
        return [float(v) for v in model.predict(mixed)]

    base_dist = Distribution(tuple(mixed_outputs(0)), tuple(uniform))
    exact = measure.kind is not MeasureKind.CUMULATIVE_PAIRED_ENTROPY
    baseline = apply_measure(measure, base_dist, exact=exact)

    def value_fn(mask: int) -> float:
        if mask == 0:
            return 0.0
        dist = Distribution(tuple(mixed_outputs(mask)), tuple(uniform))
        stat = apply_measure(measure, dist, exact=exact)
        if measure.kind is MeasureKind.EXPECTED_VALUE:
            return stat - baseline
        return baseline - stat

    return Game(
        players,
        value_fn,
        Nature.MODEL_SPECIFIC,
        measure,
        TargetRv(TargetKind.MODEL_OUTPUT, "model"),
        dict(zip(players, point)),
        baseline,
    )

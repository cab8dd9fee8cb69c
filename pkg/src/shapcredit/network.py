"""Discrete causal Bayesian networks with exact enumeration-based inference.

A Network is an immutable DAG of discrete variables, each with a conditional
probability table. Inference is deliberately plain enumeration over the
unbound joint state space (capped), which doubles as the verification oracle
for everything built on top. Deterministic function nodes (a model or a loss
attached to the graph) are ordinary variables whose CPT rows are point
masses.

Supported queries:
  * ``condition``   -- exact posterior given evidence (observational).
  * ``intervene``   -- graph mutilation, returning a new network (causal).
  * ``pin_marginal``-- fix a subset of coordinates while the rest keep their
                       full joint law; deterministic nodes are re-evaluated
                       with the pinned values (marginal pinning).
  * ``forward_sample`` -- seeded ancestral sampling.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    CycleDetected,
    EmptyInput,
    InvalidCpt,
    NonNumericSupport,
    TooLarge,
    UnboundVariable,
    UnknownVariable,
    ZeroProbabilityEvidence,
)

# Exact inference enumerates at most this many joint states of the unbound
# variables before refusing.
DEFAULT_STATE_CAP = 2 ** 22

# CPT rows must sum to 1 within SUM_TOL; rows off by at most RENORM_TOL are
# renormalized, anything worse is rejected.
SUM_TOL = 1e-9
RENORM_TOL = 1e-6

# An assignment maps variable names to state indices (into Variable.states).
Assignment = Mapping[str, int]


@dataclass(frozen=True)
class Variable:
    """A discrete variable: a name plus an ordered list of states."""

    name: str
    states: tuple[Any, ...]
    index: int = 0

    def __post_init__(self) -> None:
        if len(self.states) == 0:
            raise InvalidCpt(f"variable {self.name!r} has empty support")
        labels = [str(s) for s in self.states]
        if len(set(labels)) != len(labels):
            raise InvalidCpt(f"variable {self.name!r} has duplicate states")

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def state_index(self, label: Any) -> int:
        """Resolve a state given as a raw value or its string form."""
        for i, s in enumerate(self.states):
            if s == label or str(s) == str(label):
                return i
        raise UnknownVariable(f"{self.name!r} has no state {label!r}")


@dataclass(frozen=True)
class Cpt:
    """Conditional probability table for one child variable.

    ``table`` maps a tuple of parent state indices (ordered as ``parents``)
    to a probability vector over the child's states.
    """

    child: str
    parents: tuple[str, ...]
    table: dict[tuple[int, ...], tuple[float, ...]]

    def row(self, parent_states: tuple[int, ...]) -> tuple[float, ...]:
        return self.table[parent_states]

    @property
    def is_deterministic(self) -> bool:
        return all(any(abs(p - 1.0) <= 1e-12 for p in row) for row in self.table.values())


def _validate_row(child: str, key: tuple[int, ...], probs: Sequence[float]) -> tuple[float, ...]:
    probs = [float(p) for p in probs]
    for p in probs:
        if p < -1e-12 or p > 1.0 + 1e-12:
            raise InvalidCpt(f"cpt({child}) row {key}: probability {p} outside [0, 1]")
    probs = [min(max(p, 0.0), 1.0) for p in probs]
    total = math.fsum(probs)
    if abs(total - 1.0) <= SUM_TOL:
        return tuple(probs)
    if abs(total - 1.0) <= RENORM_TOL:
        return tuple(p / total for p in probs)
    raise InvalidCpt(f"cpt({child}) row {key} sums to {total!r}")


class Network:
    """Immutable causal Bayesian network over discrete variables."""

    def __init__(
        self,
        variables: Sequence[Variable],
        cpts: Sequence[Cpt],
        edges: Iterable[tuple[str, str]] | None = None,
        roles: Mapping[str, Any] | None = None,
        name: str = "",
    ):
        self.variables: tuple[Variable, ...] = tuple(
            Variable(v.name, v.states, i) for i, v in enumerate(variables)
        )
        self._by_name: dict[str, Variable] = {v.name: v for v in self.variables}
        if len(self._by_name) != len(self.variables):
            raise InvalidCpt("duplicate variable names")
        self.cpts: dict[str, Cpt] = {}
        for cpt in cpts:
            if cpt.child not in self._by_name:
                raise UnknownVariable(f"cpt child {cpt.child!r} is not a variable")
            for p in cpt.parents:
                if p not in self._by_name:
                    raise UnknownVariable(f"cpt parent {p!r} is not a variable")
            self.cpts[cpt.child] = self._validate_cpt(cpt)
        missing = [v.name for v in self.variables if v.name not in self.cpts]
        if missing:
            raise InvalidCpt(f"variables without a cpt: {missing}")

        cpt_edges = {(p, c.child) for c in self.cpts.values() for p in c.parents}
        if edges is not None:
            declared = {(str(a), str(b)) for a, b in edges}
            if declared != cpt_edges:
                raise InvalidCpt(
                    f"edge list does not match cpt parents: "
                    f"extra={sorted(declared - cpt_edges)} missing={sorted(cpt_edges - declared)}"
                )
        self.edges: tuple[tuple[str, str], ...] = tuple(sorted(cpt_edges))
        self.roles: dict[str, Any] = dict(roles or {})
        self.name = name
        self._topo: tuple[str, ...] = self._topological_order()

    # -- construction helpers --

    def _validate_cpt(self, cpt: Cpt) -> Cpt:
        child = self._by_name[cpt.child]
        cards = [self._by_name[p].cardinality for p in cpt.parents]
        expected = set(itertools.product(*[range(c) for c in cards]))
        got = set(cpt.table.keys())
        if got != expected:
            raise InvalidCpt(
                f"cpt({cpt.child}): rows for {len(got)} parent combinations, "
                f"expected {len(expected)}"
            )
        table = {}
        for key, probs in cpt.table.items():
            if len(probs) != child.cardinality:
                raise InvalidCpt(
                    f"cpt({cpt.child}) row {key}: {len(probs)} entries for "
                    f"{child.cardinality} states"
                )
            table[tuple(key)] = _validate_row(cpt.child, tuple(key), probs)
        return Cpt(cpt.child, tuple(cpt.parents), table)

    def _topological_order(self) -> tuple[str, ...]:
        # Kahn's algorithm; ties broken by declaration order so the result
        # is canonical and reproducible.
        indeg = {v.name: len(self.cpts[v.name].parents) for v in self.variables}
        children: dict[str, list[str]] = {v.name: [] for v in self.variables}
        for p, c in self.edges:
            children[p].append(c)
        ready = [v.name for v in self.variables if indeg[v.name] == 0]
        order: list[str] = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            for c in sorted(children[node], key=lambda n: self._by_name[n].index):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort(key=lambda n: self._by_name[n].index)
        if len(order) != len(self.variables):
            stuck = sorted(n for n, d in indeg.items() if d > 0)
            raise CycleDetected(f"no topological order; cycle through {stuck}")
        return tuple(order)

    # -- accessors --

    def variable(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownVariable(f"no variable named {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def variable_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def parents(self, name: str) -> tuple[str, ...]:
        return self.cpts[self.variable(name).name].parents

    def is_deterministic(self, name: str) -> bool:
        return self.cpts[self.variable(name).name].is_deterministic

    def descendants(self, names: Iterable[str]) -> set[str]:
        children: dict[str, list[str]] = {v.name: [] for v in self.variables}
        for p, c in self.edges:
            children[p].append(c)
        out: set[str] = set()
        frontier = list(names)
        while frontier:
            node = frontier.pop()
            for c in children[node]:
                if c not in out:
                    out.add(c)
                    frontier.append(c)
        return out

    # -- serialization --

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "variables": [{"name": v.name, "states": list(v.states)} for v in self.variables],
            "edges": [list(e) for e in self.edges],
            "cpts": [
                {
                    "child": c.child,
                    "parents": list(c.parents),
                    "rows": {
                        ",".join(
                            str(self._by_name[p].states[s]) for p, s in zip(c.parents, key)
                        ): list(row)
                        for key, row in sorted(c.table.items())
                    },
                }
                for c in (self.cpts[v.name] for v in self.variables)
            ],
            "roles": self.roles,
        }


def load_network(source: str | Mapping[str, Any]) -> Network:
    """Build a Network from a JSON file path or an already-parsed dict.

    Format: ``variables`` (name, states[]), ``edges`` (pairs), ``cpts``
    (child, parents[], rows keyed by comma-joined parent state labels; the
    empty key for root nodes). An optional ``roles`` object may tag the
    feature/target/model/loss variables for the CLI.
    """
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = dict(source)
    try:
        variables = [
            Variable(str(v["name"]), tuple(v["states"])) for v in doc["variables"]
        ]
    except (KeyError, TypeError) as exc:
        raise InvalidCpt(f"bad variables block: {exc}") from exc
    by_name = {v.name: v for v in variables}
    cpts = []
    for c in doc.get("cpts", []):
        child = str(c["child"])
        parents = [str(p) for p in c.get("parents", [])]
        for p in parents + [child]:
            if p not in by_name:
                raise UnknownVariable(f"cpt references unknown variable {p!r}")
        table: dict[tuple[int, ...], tuple[float, ...]] = {}
        for key, probs in c["rows"].items():
            labels = [] if key == "" else str(key).split(",")
            if len(labels) != len(parents):
                raise InvalidCpt(f"cpt({child}) row key {key!r} has {len(labels)} labels")
            idx = tuple(by_name[p].state_index(lab) for p, lab in zip(parents, labels))
            table[idx] = tuple(float(x) for x in probs)
        cpts.append(Cpt(child, tuple(parents), table))
    return Network(
        variables,
        cpts,
        edges=[(str(a), str(b)) for a, b in doc["edges"]] if "edges" in doc else None,
        roles=doc.get("roles"),
        name=str(doc.get("name", "")),
    )


@dataclass(frozen=True)
class Distribution:
    """Finite discrete distribution over an ordered support."""

    support: tuple[Any, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.support) != len(self.weights):
            raise ValueError("support and weights length mismatch")
        if len(self.support) == 0:
            raise EmptyInput("empty distribution")
        if any(w < -1e-12 for w in self.weights):
            raise ValueError("negative weight")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"weights sum to {total!r}")

    def numeric_values(self) -> np.ndarray:
        try:
            return np.asarray([float(v) for v in self.support], dtype=float)
        except (TypeError, ValueError):
            raise NonNumericSupport(f"support {self.support!r} is not numeric") from None

    def prob_of(self, value: Any) -> float:
        for v, w in zip(self.support, self.weights):
            if v == value or str(v) == str(value):
                return w
        return 0.0

    @staticmethod
    def from_accumulated(support: Sequence[Any], mass: Sequence[float]) -> "Distribution":
        total = math.fsum(mass)
        if total <= 0.0:
            raise ZeroProbabilityEvidence("all mass vanished")
        return Distribution(tuple(support), tuple(m / total for m in mass))

    @staticmethod
    def point_mass(support: Sequence[Any], index: int) -> "Distribution":
        w = [0.0] * len(support)
        w[index] = 1.0
        return Distribution(tuple(support), tuple(w))


# --- queries ---


def topological_order(net: Network) -> tuple[str, ...]:
    """Variable names ordered so every parent precedes its children."""
    return net._topo


def _check_assignment(net: Network, assignment: Assignment) -> None:
    for name, idx in assignment.items():
        var = net.variable(name)
        if not (0 <= int(idx) < var.cardinality):
            raise UnknownVariable(f"{name!r} has no state index {idx}")


def joint_probability(net: Network, full: Assignment) -> float:
    """Probability of one complete assignment: product of CPT entries."""
    _check_assignment(net, full)
    unbound = [v.name for v in net.variables if v.name not in full]
    if unbound:
        raise UnboundVariable(f"assignment leaves {unbound} unbound")
    prob = 1.0
    for name in topological_order(net):
        cpt = net.cpts[name]
        key = tuple(full[p] for p in cpt.parents)
        prob *= cpt.row(key)[full[name]]
    return prob


def enumerate_joint(
    net: Network,
    evidence: Assignment | None = None,
    max_states: int = DEFAULT_STATE_CAP,
) -> Iterator[tuple[dict[str, int], float]]:
    """Yield every full assignment consistent with ``evidence`` and its
    unnormalized probability. Zero-probability branches are pruned."""
    evidence = dict(evidence or {})
    _check_assignment(net, evidence)
    order = topological_order(net)
    unbound_size = 1
    for name in order:
        if name not in evidence:
            unbound_size *= net.variable(name).cardinality
    if unbound_size > max_states:
        raise TooLarge(
            f"enumeration over {unbound_size} joint states exceeds cap {max_states}"
        )

    def recurse(i: int, current: dict[str, int], prob: float) -> Iterator[tuple[dict[str, int], float]]:
        if prob == 0.0:
            return
        if i == len(order):
            yield dict(current), prob
            return
        name = order[i]
        cpt = net.cpts[name]
        key = tuple(current[p] for p in cpt.parents)
        row = cpt.row(key)
        if name in evidence:
            s = evidence[name]
            current[name] = s
            yield from recurse(i + 1, current, prob * row[s])
            del current[name]
        else:
            for s, p in enumerate(row):
                if p == 0.0:
                    continue
                current[name] = s
                yield from recurse(i + 1, current, prob * p)
                del current[name]

    yield from recurse(0, {}, 1.0)


def condition(
    net: Network,
    evidence: Assignment,
    query: str,
    max_states: int = DEFAULT_STATE_CAP,
) -> Distribution:
    """Exact posterior distribution of ``query`` given ``evidence``."""
    qvar = net.variable(query)
    if query in evidence:
        return Distribution.point_mass(qvar.states, evidence[query])
    mass = [0.0] * qvar.cardinality
    total = 0.0
    for full, p in enumerate_joint(net, evidence, max_states=max_states):
        mass[full[query]] += p
        total += p
    if total <= 0.0:
        raise ZeroProbabilityEvidence(f"evidence {dict(evidence)!r} has probability 0")
    return Distribution.from_accumulated(qvar.states, mass)


def joint_marginal(
    net: Network,
    names: Sequence[str],
    max_states: int = DEFAULT_STATE_CAP,
) -> dict[tuple[int, ...], float]:
    """Exact joint marginal over ``names`` as a map state-tuple -> probability."""
    for n in names:
        net.variable(n)
    out: dict[tuple[int, ...], float] = {}
    for full, p in enumerate_joint(net, None, max_states=max_states):
        key = tuple(full[n] for n in names)
        out[key] = out.get(key, 0.0) + p
    return out


def intervene(net: Network, do: Assignment) -> Network:
    """Mutilated network: intervened variables lose their parents and get a
    point-mass CPT at the forced state; everything else is untouched."""
    _check_assignment(net, do)
    new_cpts = []
    for v in net.variables:
        if v.name in do:
            row = [0.0] * v.cardinality
            row[do[v.name]] = 1.0
            new_cpts.append(Cpt(v.name, (), {(): tuple(row)}))
        else:
            new_cpts.append(net.cpts[v.name])
    return Network(net.variables, new_cpts, roles=net.roles, name=net.name)


def pin_marginal(
    net: Network,
    pinned: Assignment,
    query: str,
    max_states: int = DEFAULT_STATE_CAP,
) -> Distribution:
    """Law of ``query`` when the pinned coordinates are forced and all other
    coordinates keep their full joint law.

    Deterministic variables are treated as functions of their parents and
    re-evaluated against the overridden values (in topological order); all
    stochastic variables keep the value they drew in the factual world. This
    is the explicit-duplicate-network construction collapsed onto the base
    graph.
    """
    _check_assignment(net, pinned)
    qvar = net.variable(query)
    order = topological_order(net)
    recompute = [
        n for n in order if n not in pinned and net.is_deterministic(n)
    ]
    mass = [0.0] * qvar.cardinality
    for full, p in enumerate_joint(net, None, max_states=max_states):
        world = dict(full)
        world.update(pinned)
        for name in recompute:
            cpt = net.cpts[name]
            key = tuple(world[par] for par in cpt.parents)
            row = cpt.row(key)
            world[name] = max(range(len(row)), key=row.__getitem__)
        mass[world[query]] += p
    return Distribution.from_accumulated(qvar.states, mass)


def forward_sample(net: Network, n: int, seed: int) -> list[dict[str, int]]:
    """Ancestral sampling; deterministic given ``seed``.

    Vectorized per variable: all n draws for one variable happen together,
    grouped by parent-state combination.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    order = topological_order(net)
    cols: dict[str, np.ndarray] = {}
    for name in order:
        cpt = net.cpts[name]
        u = rng.random(n)
        col = np.empty(n, dtype=np.int64)
        if not cpt.parents:
            cum = np.cumsum(cpt.row(()))
            col = np.searchsorted(cum, u, side="right")
        else:
            keys = np.stack([cols[p] for p in cpt.parents], axis=1)
            for key, row in cpt.table.items():
                mask = np.all(keys == np.asarray(key), axis=1)
                if not mask.any():
                    continue
                cum = np.cumsum(row)
                col[mask] = np.searchsorted(cum, u[mask], side="right")
        np.clip(col, 0, net.variable(name).cardinality - 1, out=col)
        cols[name] = col
    return [{name: int(cols[name][i]) for name in order} for i in range(n)]


def parse_assignment(net: Network, text: str) -> dict[str, int]:
    """Parse ``"Var=state,Var2=state2"`` into an assignment of state indices."""
    out: dict[str, int] = {}
    text = text.strip()
    if not text:
        return out
    for part in text.split(","):
        if "=" not in part:
            raise UnknownVariable(f"bad assignment fragment {part!r}")
        name, label = part.split("=", 1)
        var = net.variable(name.strip())
        out[var.name] = var.state_index(label.strip())
    return out

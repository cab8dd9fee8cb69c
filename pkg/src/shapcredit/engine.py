"""Shapley allocation of a game's grand value.

Two solvers: exact subset-weighted enumeration (all 2^n coalitions), and the
weighted-linear-regression approximation where coalitions are sampled
proportionally to the regression kernel. The regression enforces both
equality constraints -- value(empty) = 0 and efficiency -- by eliminating
the intercept and one coefficient before the weighted least-squares solve,
so its reports always sum to the grand value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from .errors import PlayerInCoalition, SingularSystem, TooManyPlayers
from .games import Game, MAX_EXACT_PLAYERS


@dataclass(frozen=True)
class AttributionReport:
    """Per-player credit plus the bookkeeping needed to audit it."""

    players: tuple[str, ...]
    phi: tuple[float, ...]
    baseline: float
    grand_value: float
    efficiency_residual: float
    method: dict[str, Any]
    metadata: dict[str, Any]

    def as_dict(self) -> dict[str, Any]:
        return {
            "players": list(self.players),
            "phi": list(self.phi),
            "baseline": self.baseline,
            "grand_value": self.grand_value,
            "efficiency_residual": self.efficiency_residual,
            "method": dict(self.method),
            "metadata": dict(self.metadata),
        }

    def by_player(self) -> dict[str, float]:
        return dict(zip(self.players, self.phi))

    def top_player(self) -> str:
        best = max(range(len(self.players)), key=lambda i: (self.phi[i], -i))
        return self.players[best]


def _shapley_weights(n: int) -> list[float]:
    # weight for a coalition of size s (excluding the entering player):
    # s! (n-1-s)! / n!
    return [
        float(
            Fraction(math.factorial(s) * math.factorial(n - 1 - s), math.factorial(n))
        )
        for s in range(n)
    ]


def marginal_contribution(game: Game, player: int, mask: int) -> float:
    """Influence of one player on one coalition: v(S + i) - v(S)."""
    if mask >> player & 1:
        raise PlayerInCoalition(
            f"player {player} is already in coalition {mask:#x}"
        )
    return game.value(mask | (1 << player)) - game.value(mask)


def shapley_exact(game: Game) -> AttributionReport:
    """Exact Shapley values by enumeration over all coalitions."""
    n = game.num_players
    if n > MAX_EXACT_PLAYERS:
        raise TooManyPlayers(f"{n} players exceeds exact-mode cap {MAX_EXACT_PLAYERS}")
    weights = _shapley_weights(n)
    values = [game.value(mask) for mask in range(1 << n)]
    phi = [0.0] * n
    for mask in range(1 << n):
        v = values[mask]
        size = mask.bit_count()
        for i in range(n):
            if not mask >> i & 1:
                phi[i] += weights[size] * (values[mask | (1 << i)] - v)
    grand = values[(1 << n) - 1]
    residual = grand - math.fsum(phi)
    return AttributionReport(
        players=game.players,
        phi=tuple(phi),
        baseline=game.baseline,
        grand_value=grand,
        efficiency_residual=residual,
        method={"name": "exact"},
        metadata=game.metadata(),
    )


def kernel_weight(n: int, size: int) -> float:
    """Regression kernel weight of one coalition of the given size."""
    if size <= 0 or size >= n:
        raise ValueError("kernel weight is defined for proper non-empty coalitions")
    return (n - 1) / (math.comb(n, size) * size * (n - size))


@dataclass(frozen=True)
class RegressionPlan:
    """Sampling plan for the regression solver.

    ``full_support`` enumerates every proper non-empty coalition once with
    its exact kernel weight (no sampling; reproduces the exact values).
    Otherwise ``n_samples`` coalitions are drawn, sizes first (proportional
    to total kernel mass per size) then uniformly within the size. The empty
    and grand coalitions are never sampled; they enter through the two
    equality constraints.
    """

    n_samples: int = 10_000
    seed: int = 0
    full_support: bool = False

    def describe(self) -> dict[str, Any]:
        if self.full_support:
            return {"name": "regression", "full_support": True}
        return {"name": "regression", "n_samples": self.n_samples, "seed": self.seed}


def _sampled_design(game: Game, plan: RegressionPlan) -> dict[int, float]:
    # Antithetic pairing: each draw contributes the sampled coalition and its
    # complement. The kernel is complement-symmetric, so the marginal law of
    # every row is still proportional to the kernel weight, and the
    # odd/even-size noise largely cancels.
    n = game.num_players
    if plan.n_samples < 2 * n:
        raise ValueError(
            f"n_samples={plan.n_samples} is below the minimum 2*players={2 * n}"
        )
    rng = np.random.default_rng(plan.seed)
    sizes = np.arange(1, n)
    size_mass = np.array([(n - 1) / (s * (n - s)) for s in sizes])
    size_mass = size_mass / size_mass.sum()
    full = (1 << n) - 1
    n_draws = (plan.n_samples + 1) // 2
    drawn = rng.choice(sizes, size=n_draws, p=size_mass)
    counts: dict[int, float] = {}
    budget = plan.n_samples
    for s in drawn:
        members = rng.choice(n, size=int(s), replace=False)
        mask = 0
        for m in members:
            mask |= 1 << int(m)
        for candidate in (mask, full ^ mask):
            if budget == 0:
                break
            counts[candidate] = counts.get(candidate, 0.0) + 1.0
            budget -= 1
    return counts


def shapley_regression(game: Game, plan: RegressionPlan) -> AttributionReport:
    """Constrained weighted least-squares allocation.

    Solves  v(S) ~ sum_{i in S} phi_i  under phi(empty) = 0 and
    sum_i phi_i = v(full), over the (sampled or full) kernel-weighted design.
    With the full support this equals the exact Shapley values.
    """
    n = game.num_players
    if n == 1:
        grand = game.value(1)
        return AttributionReport(
            players=game.players,
            phi=(grand,),
            baseline=game.baseline,
            grand_value=grand,
            efficiency_residual=0.0,
            method=plan.describe(),
            metadata=game.metadata(),
        )
    if plan.full_support:
        design = {
            mask: kernel_weight(n, mask.bit_count())
            for mask in range(1, (1 << n) - 1)
        }
    else:
        design = _sampled_design(game, plan)
        if len(design) < n:
            raise SingularSystem(
                f"{len(design)} distinct sampled coalitions for {n} players; "
                f"raise n_samples"
            )
    grand = game.value(game.full_mask)

    masks = sorted(design)
    w = np.asarray([design[m] for m in masks], dtype=float)
    z = np.zeros((len(masks), n))
    for r, mask in enumerate(masks):
        for i in range(n):
            if mask >> i & 1:
                z[r, i] = 1.0
    y = np.asarray([game.value(m) for m in masks], dtype=float)

    # Eliminate phi_{n-1} via efficiency: phi_{n-1} = grand - sum(others).
    a = z[:, : n - 1] - z[:, [n - 1]]
    b = y - z[:, n - 1] * grand
    sw = np.sqrt(w)
    solution, _, rank, _ = np.linalg.lstsq(a * sw[:, None], b * sw, rcond=None)
    if rank < n - 1:
        raise SingularSystem(
            f"sampled design has rank {rank} < {n - 1}; raise n_samples"
        )
    phi = list(float(x) for x in solution)
    phi.append(grand - math.fsum(phi))
    residual = grand - math.fsum(phi)
    return AttributionReport(
        players=game.players,
        phi=tuple(phi),
        baseline=game.baseline,
        grand_value=grand,
        efficiency_residual=residual,
        method=plan.describe(),
        metadata=game.metadata(),
    )

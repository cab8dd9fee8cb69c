"""Measures of a distribution and their conditional/information forms.

Four measures are supported: expected value, variance, Shannon entropy and
cumulative paired Shannon entropy (CPE). The CPE of a random variable A is
the integral over lambda of the binary entropy of the indicator {A <= lambda}.
For finite discrete laws it has an exact closed form (binary entropy of the
CDF times the gap between consecutive support points); a Riemann-grid
estimator is kept for weighted-sample (empirical) inputs.

Logs are natural by default; the base is configurable and carried in report
metadata by callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Literal, Sequence

import numpy as np

from .errors import EmptyInput, NonNumericSupport
from .network import (
    Assignment,
    Distribution,
    Network,
    condition,
    intervene,
    joint_marginal,
    pin_marginal,
)

# Tiny negative values produced by floating cancellation are clipped to 0
# for variance and the information quantities.
NEG_TOL = 1e-9


class MeasureKind(str, Enum):
    EXPECTED_VALUE = "expected-value"
    VARIANCE = "variance"
    SHANNON_ENTROPY = "shannon-entropy"
    CUMULATIVE_PAIRED_ENTROPY = "cumulative-paired-entropy"


@dataclass(frozen=True)
class Measure:
    """A measure kind plus its numeric knobs.

    ``entropy_base`` applies to both entropies; ``riemann_steps`` only to the
    grid estimator of the cumulative paired entropy on empirical samples.
    """

    kind: MeasureKind
    entropy_base: float = math.e
    riemann_steps: int = 512

    def __post_init__(self) -> None:
        if self.riemann_steps < 2:
            raise ValueError("riemann_steps must be >= 2")
        if not self.entropy_base > 1.0:
            raise ValueError("entropy_base must be > 1")

    @property
    def is_uncertainty(self) -> bool:
        return self.kind is not MeasureKind.EXPECTED_VALUE


def _log(x: float, base: float) -> float:
    return math.log(x) if base == math.e else math.log(x) / math.log(base)


def binary_entropy(p: float, base: float = math.e) -> float:
    """Entropy of a {0,1} indicator with success probability p."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * _log(p, base) - (1.0 - p) * _log(1.0 - p, base)


def expectation(d: Distribution) -> float:
    values = d.numeric_values()
    return float(np.dot(values, np.asarray(d.weights)))


def variance(d: Distribution) -> float:
    values = d.numeric_values()
    w = np.asarray(d.weights)
    mu = float(np.dot(values, w))
    var = float(np.dot(w, (values - mu) ** 2))
    return max(var, 0.0)


def shannon_entropy(d: Distribution, base: float = math.e) -> float:
    # Duplicate support values (one entry per sample row in empirical mode)
    # carry one merged probability.
    mass: dict[Any, float] = {}
    for v, w in zip(d.support, d.weights):
        mass[v] = mass.get(v, 0.0) + w
    h = 0.0
    for w in mass.values():
        if w > 0.0:
            h -= w * _log(w, base)
    return max(h, 0.0)


def _sorted_cdf(values: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse weighted values to unique sorted support with CDF values."""
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    uniq, start = np.unique(v, return_index=True)
    mass = np.add.reduceat(w, start)
    cdf = np.cumsum(mass)
    cdf = cdf / cdf[-1]
    return uniq, cdf


def cumulative_paired_entropy(
    d: Distribution,
    base: float = math.e,
) -> float:
    """Exact CPE of a finite discrete law via the jump-point closed form.

    Between consecutive support points v_i < v_{i+1} the indicator
    {A <= lambda} is Bernoulli(1 - F(v_i)) for every lambda in the gap, so
    the integral is the sum of binary entropies of the CDF times gap widths.
    """
    values = d.numeric_values()
    weights = np.asarray(d.weights, dtype=float)
    uniq, cdf = _sorted_cdf(values, weights)
    if len(uniq) == 1:
        return 0.0
    total = 0.0
    for i in range(len(uniq) - 1):
        total += binary_entropy(float(cdf[i]), base) * float(uniq[i + 1] - uniq[i])
    return total


def cumulative_paired_entropy_riemann(
    values: Sequence[float],
    weights: Sequence[float] | None = None,
    steps: int = 512,
    base: float = math.e,
) -> float:
    """Midpoint Riemann estimate of the CPE of a weighted sample.

    The integrand vanishes outside [min, max] of the sample, so the grid
    spans exactly that range.
    """
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise EmptyInput("cumulative paired entropy of an empty sample")
    if not np.all(np.isfinite(v)):
        raise NonNumericSupport("sample contains non-finite values")
    w = np.ones_like(v) if weights is None else np.asarray(list(weights), dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return 0.0
    uniq, cdf = _sorted_cdf(v, w)
    width = (hi - lo) / steps
    grid = lo + (np.arange(steps) + 0.5) * width
    # CDF at each grid point: mass of support values <= lambda.
    idx = np.searchsorted(uniq, grid, side="right")
    total = 0.0
    for i in idx:
        f = float(cdf[i - 1]) if i > 0 else 0.0
        total += binary_entropy(f, base)
    return total * width


def apply_measure(measure: Measure, d: Distribution, exact: bool = True) -> float:
    """Evaluate a measure on a distribution.

    ``exact=False`` switches the cumulative paired entropy to the Riemann
    grid (sample mode); all other measures are unaffected.
    """
    if measure.kind is MeasureKind.EXPECTED_VALUE:
        return expectation(d)
    if measure.kind is MeasureKind.VARIANCE:
        return variance(d)
    if measure.kind is MeasureKind.SHANNON_ENTROPY:
        return shannon_entropy(d, measure.entropy_base)
    if exact:
        return cumulative_paired_entropy(d, measure.entropy_base)
    return cumulative_paired_entropy_riemann(
        d.numeric_values(), d.weights, measure.riemann_steps, measure.entropy_base
    )


QueryMode = Literal["condition", "pin", "do"]


def query_distribution(
    net: Network,
    target: str,
    mode: QueryMode,
    given: Assignment,
) -> Distribution:
    """Law of ``target`` after fixing ``given`` by the requested mechanism."""
    if mode == "condition":
        return condition(net, given, target)
    if mode == "pin":
        return pin_marginal(net, given, target)
    if mode == "do":
        return condition(intervene(net, given), {}, target)
    raise ValueError(f"unknown query mode {mode!r}")


def conditional_measure(
    net: Network,
    target: str,
    mode: QueryMode,
    given: Assignment,
    measure: Measure,
) -> float:
    return apply_measure(measure, query_distribution(net, target, mode, given))


def _clip_info(x: float) -> float:
    return 0.0 if -NEG_TOL < x < 0.0 else x


def expected_conditional_measure(
    net: Network,
    target: str,
    over: Sequence[str],
    measure: Measure,
    mode: QueryMode = "condition",
) -> float:
    """E over the factual law of ``over`` of the measure of target given it."""
    if not over:
        return apply_measure(measure, condition(net, {}, target))
    total = 0.0
    for key, p in joint_marginal(net, list(over)).items():
        if p <= 0.0:
            continue
        given = dict(zip(over, key))
        total += p * conditional_measure(net, target, mode, given, measure)
    return total


def mutual_information(
    net: Network,
    a: Sequence[str],
    b: str,
    base: float = math.e,
) -> float:
    """I(A; B) = H(B) - E_a[H(B | A=a)], exact by enumeration."""
    measure = Measure(MeasureKind.SHANNON_ENTROPY, entropy_base=base)
    h_b = shannon_entropy(condition(net, {}, b), base)
    return _clip_info(h_b - expected_conditional_measure(net, b, a, measure))


def cumulative_paired_mutual_information(
    net: Network,
    a: Sequence[str],
    b: str,
    base: float = math.e,
) -> float:
    """CPE analogue of mutual information; directional (a -> b)."""
    measure = Measure(MeasureKind.CUMULATIVE_PAIRED_ENTROPY, entropy_base=base)
    e_b = cumulative_paired_entropy(condition(net, {}, b), base)
    return _clip_info(e_b - expected_conditional_measure(net, b, a, measure))

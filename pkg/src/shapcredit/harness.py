"""Evaluation protocols for attribution quality.

Two protocols: supervised clustering (k-means on attribution vectors,
scored by the fraction of response variance explained when every point is
predicted by its cluster's mean response) and masking-based sensitivity
(mask features in decreasing attribution order, replacing masked
coordinates with background draws, and track how far the model output
moves).

k-means is implemented here rather than borrowed so the sweep can nest its
initializations: the (k+1)-candidate set includes the best k-solution's
centers plus the worst-fit row, which keeps the reported explained variance
non-decreasing in k on separable data.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import DegenerateResponse, EmptyBackground
from .models import ModelHandle

KMEANS_MAX_ITER = 100
KMEANS_REL_TOL = 1e-6


@dataclass(frozen=True)
class ClusteringResult:
    k: int
    assignments: tuple[int, ...]
    r_squared: float
    restarts: int
    seed: int

    def as_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "r_squared": self.r_squared,
            "restarts": self.restarts,
            "seed": self.seed,
            "assignments": list(self.assignments),
        }


@dataclass(frozen=True)
class SensitivityCurve:
    method: str
    mean_abs_delta: tuple[float, ...]  # index j = top-j features masked
    mask_order: tuple[tuple[int, ...], ...]  # per row, features by |phi| desc
    seed: int

    def as_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "seed": self.seed,
            "steps": [
                {"n_masked": j, "mean_abs_delta": d}
                for j, d in enumerate(self.mean_abs_delta)
            ],
            "mask_order": [list(o) for o in self.mask_order],
        }


def _lloyd(
    points: np.ndarray, centers: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Run Lloyd iterations to convergence; returns (centers, labels, sse)."""
    k = centers.shape[0]
    prev_sse = math.inf
    labels = np.zeros(len(points), dtype=int)
    for _ in range(KMEANS_MAX_ITER):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        sse = float(d2[np.arange(len(points)), labels].sum())
        for c in range(k):
            members = points[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:
                # Re-seat an empty cluster on the worst-fit point.
                worst = int(d2[np.arange(len(points)), labels].argmax())
                centers[c] = points[worst]
        if prev_sse - sse <= KMEANS_REL_TOL * max(prev_sse, 1e-30):
            break
        prev_sse = sse
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    sse = float(d2[np.arange(len(points)), labels].sum())
    return centers, labels, sse


def _kmeans_best(
    points: np.ndarray,
    k: int,
    restarts: int,
    seed: int,
    extra_inits: Sequence[np.ndarray] = (),
) -> tuple[np.ndarray, np.ndarray, float]:
    """Best of ``restarts`` seeded initializations (plus any provided center
    sets), selected by within-cluster SSE."""
    rng = np.random.default_rng(seed)
    n = len(points)
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    inits: list[np.ndarray] = []
    for _ in range(max(restarts, 1)):
        idx = rng.choice(n, size=min(k, n), replace=False)
        centers = points[idx].astype(float).copy()
        while len(centers) < k:
            centers = np.vstack([centers, points[int(rng.integers(n))]])
        inits.append(centers)
    inits.extend(np.asarray(c, dtype=float).copy() for c in extra_inits)
    for centers in inits:
        result = _lloyd(points, centers)
        if best is None or result[2] < best[2]:
            best = result
    assert best is not None
    return best


def _r_squared(labels: np.ndarray, response: np.ndarray) -> float:
    ss_tot = float(((response - response.mean()) ** 2).sum())
    preds = np.empty_like(response)
    for c in np.unique(labels):
        members = labels == c
        preds[members] = response[members].mean()
    ss_res = float(((response - preds) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def supervised_clustering(
    attributions: Sequence[Sequence[float]],
    response: Sequence[float],
    k: int,
    restarts: int = 10,
    seed: int = 0,
) -> ClusteringResult:
    """Cluster attribution vectors and score the clustering by the share of
    response variance explained by cluster-mean prediction."""
    points = np.asarray(attributions, dtype=float)
    y = np.asarray(response, dtype=float)
    if points.ndim != 2 or len(points) != len(y):
        raise ValueError("attributions must be rows aligned with response")
    if not 1 <= k <= len(points):
        raise ValueError(f"k={k} out of range for {len(points)} rows")
    if float(y.max() - y.min()) == 0.0:
        raise DegenerateResponse("response has zero variance; R^2 is undefined")
    _, labels, _ = _kmeans_best(points, k, restarts, seed)
    return ClusteringResult(k, tuple(int(v) for v in labels), _r_squared(labels, y), restarts, seed)


def loss_clustering(
    attributions: Sequence[Sequence[float]],
    loss_values: Sequence[float],
    k: int,
    restarts: int = 10,
    seed: int = 0,
) -> ClusteringResult:
    """Supervised clustering of loss attributions (feature + target rows)."""
    return supervised_clustering(attributions, loss_values, k, restarts, seed)


def _refine_split(points: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Split the worst-fit point's cluster in two (that point becomes the new
    center; only its old cluster is re-divided). A pure refinement of the
    partition, so cluster-mean prediction cannot get worse."""
    k = centers.shape[0]
    d2 = ((points - centers[labels]) ** 2).sum(axis=1)
    worst = int(d2.argmax())
    cluster = labels[worst]
    new_labels = labels.copy()
    members = np.flatnonzero(labels == cluster)
    to_old = ((points[members] - centers[cluster]) ** 2).sum(axis=1)
    to_new = ((points[members] - points[worst]) ** 2).sum(axis=1)
    new_labels[members[to_new < to_old]] = k
    new_labels[worst] = k
    return new_labels


def clustering_sweep(
    attributions: Sequence[Sequence[float]],
    response: Sequence[float],
    ks: Sequence[int],
    restarts: int = 10,
    seed: int = 0,
) -> list[ClusteringResult]:
    """Sweep k with nested initialization.

    Each k's candidate set holds the seeded k-means restarts, a k-means run
    started from the previous solution's centers plus the worst-fit row, and
    the plain refinement that splits the worst-fit row's cluster. The sweep
    selects per k by explained variance (that is the quantity the protocol
    reports), and because a refinement candidate is always present the
    reported value is non-decreasing in k.
    """
    points = np.asarray(attributions, dtype=float)
    y = np.asarray(response, dtype=float)
    if float(y.max() - y.min()) == 0.0:
        raise DegenerateResponse("response has zero variance; R^2 is undefined")
    out: list[ClusteringResult] = []
    prev: tuple[np.ndarray, np.ndarray] | None = None  # (centers, labels)
    for k in sorted(ks):
        candidates: list[tuple[np.ndarray, np.ndarray]] = []
        centers, labels, _ = _kmeans_best(points, k, restarts, seed + k)
        candidates.append((centers, labels))
        if prev is not None and len(prev[0]) == k - 1:
            prev_centers, prev_labels = prev
            d2 = ((points[:, None, :] - prev_centers[None, :, :]) ** 2).sum(axis=2)
            worst = int(d2.min(axis=1).argmax())
            nested = np.vstack([prev_centers, points[worst]])
            candidates.append(_lloyd(points, nested.copy())[:2])
            split_labels = _refine_split(points, prev_labels, prev_centers)
            split_centers = np.vstack(
                [
                    points[split_labels == c].mean(axis=0)
                    if np.any(split_labels == c)
                    else prev_centers[min(c, k - 2)]
                    for c in range(k)
                ]
            )
            candidates.append((split_centers, split_labels))
        scored = [(_r_squared(lab, y), i) for i, (_, lab) in enumerate(candidates)]
        r2, pick = max(scored, key=lambda t: (t[0], -t[1]))
        centers, labels = candidates[pick]
        out.append(
            ClusteringResult(k, tuple(int(v) for v in labels), r2, restarts, seed)
        )
        prev = (centers, labels)
    return out


def sensitivity_sweep(
    model: ModelHandle,
    rows: Sequence[Sequence[float]],
    attributions: Sequence[Sequence[float]],
    background: Sequence[Sequence[float]],
    steps: int,
    seed: int = 0,
    resamples: int = 32,
    method: str = "",
) -> SensitivityCurve:
    """Mask each row's top-j features (by |attribution|, descending) with
    background draws and record the mean absolute output change per step.

    Masked coordinates are copied jointly from a sampled background row, so
    the replaced block keeps the background's joint law. Randomness is keyed
    by (seed, row) so rows can be processed in any order.
    """
    x = [tuple(float(v) for v in r) for r in rows]
    bg = [tuple(float(v) for v in r) for r in background]
    if not bg:
        raise EmptyBackground("sensitivity masking needs a non-empty background")
    phi = np.asarray(attributions, dtype=float)
    p = phi.shape[1]
    if steps > p:
        raise ValueError(f"steps={steps} exceeds feature count {p}")
    if len(x) != len(phi):
        raise ValueError("attribution rows must align with data rows")
    mask_order = [
        tuple(int(j) for j in np.lexsort((np.arange(p), -np.abs(phi[r]))))
        for r in range(len(x))
    ]
    base = [float(v) for v in model.predict(x)]
    deltas = np.zeros((len(x), steps + 1))
    for r, row in enumerate(x):
        rng = np.random.default_rng((seed, r))
        for j in range(1, steps + 1):
            masked_features = mask_order[r][:j]
            acc = 0.0
            picks = rng.integers(len(bg), size=resamples)
            masked_rows = []
            for pick in picks:
                draw = bg[int(pick)]
                masked_rows.append(
                    tuple(
                        draw[f] if f in masked_features else row[f] for f in range(p)
                    )
                )
            outs = model.predict(masked_rows)
            acc = float(np.mean([abs(float(o) - base[r]) for o in outs]))
            deltas[r, j] = acc
    return SensitivityCurve(
        method=method,
        mean_abs_delta=tuple(float(v) for v in deltas.mean(axis=0)),
        mask_order=tuple(mask_order),
        seed=seed,
    )


# --- CSV / JSON plumbing for harness inputs and outputs ---


def write_matrix_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path: str) -> tuple[list[str], list[list[float]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return header, rows


def write_result_json(path: str, payload: dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

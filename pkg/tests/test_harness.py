"""Supervised clustering and masking sensitivity."""

import numpy as np
import pytest

from shapcredit import (
    LinearModel,
    clustering_sweep,
    loss_clustering,
    sensitivity_sweep,
    supervised_clustering,
)
from shapcredit.errors import DegenerateResponse, EmptyBackground


def two_blob_data(seed=0, rows_per_blob=30, spread=0.05):
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, spread, size=(rows_per_blob, 3)) + np.array([0.0, 0.0, 0.0])
    b = rng.normal(0.0, spread, size=(rows_per_blob, 3)) + np.array([3.0, 3.0, 0.0])
    phi = np.vstack([a, b])
    response = np.concatenate(
        [
            1.0 + rng.normal(0, 0.01, rows_per_blob),
            5.0 + rng.normal(0, 0.01, rows_per_blob),
        ]
    )
    return phi, response


# --- supervised clustering ---


def test_k1_r_squared_is_zero_exact():
    phi, response = two_blob_data()
    result = supervised_clustering(phi, response, k=1, restarts=3, seed=0)
    assert result.r_squared == 0.0


def test_k_equals_rows_r_squared_is_one_exact():
    phi, response = two_blob_data(rows_per_blob=8)
    result = supervised_clustering(phi, response, k=len(phi), restarts=3, seed=0)
    assert result.r_squared == 1.0


def test_two_blobs_high_r_squared_at_k2():
    phi, response = two_blob_data()
    result = supervised_clustering(phi, response, k=2, restarts=5, seed=1)
    assert result.r_squared >= 0.95


def test_distinct_rows_with_distinct_responses_k_rows():
    rng = np.random.default_rng(5)
    phi = rng.normal(size=(12, 4))
    response = rng.normal(size=12)
    result = supervised_clustering(phi, response, k=12, restarts=2, seed=0)
    assert result.r_squared == 1.0


def test_degenerate_response_is_an_error():
    phi, _ = two_blob_data()
    with pytest.raises(DegenerateResponse):
        supervised_clustering(phi, [1.0] * len(phi), k=2)


def test_r_squared_nonnegative_random():
    rng = np.random.default_rng(3)
    for trial in range(5):
        phi = rng.normal(size=(40, 3))
        response = rng.normal(size=40)
        for k in (1, 2, 5, 10):
            result = supervised_clustering(phi, response, k=k, restarts=4, seed=trial)
            assert result.r_squared >= 0.0
            assert result.r_squared <= 1.0 + 1e-9
            assert len(result.assignments) == 40


def test_loss_clustering_accepts_p_plus_one_columns():
    rng = np.random.default_rng(8)
    phi = rng.normal(size=(20, 5))  # 4 features + target column
    losses = rng.normal(size=20)
    result = loss_clustering(phi, losses, k=4, restarts=3, seed=0)
    assert result.k == 4


def test_sweep_r_squared_monotone_in_k():
    phi, response = two_blob_data(seed=7, rows_per_blob=25)
    results = clustering_sweep(phi, response, ks=range(1, 11), restarts=5, seed=0)
    values = [r.r_squared for r in results]
    assert values[0] == 0.0
    for lo, hi in zip(values, values[1:]):
        assert hi >= lo - 1e-12


def test_sweep_monotone_on_noisy_data():
    rng = np.random.default_rng(10)
    phi = rng.normal(size=(60, 4))
    response = phi @ np.array([1.0, -2.0, 0.5, 0.0]) + rng.normal(0, 0.3, size=60)
    results = clustering_sweep(phi, response, ks=range(1, 13), restarts=6, seed=2)
    values = [r.r_squared for r in results]
    for lo, hi in zip(values, values[1:]):
        assert hi >= lo - 1e-12


# --- sensitivity ---


def linear_and_background(seed=0, rows=40, bg=200, weights=(5.0, 1.0, -1.0, 0.8, 1.2)):
    rng = np.random.default_rng(seed)
    model = LinearModel(tuple(f"x{i}" for i in range(len(weights))), weights)
    data = rng.normal(size=(rows, len(weights)))
    background = rng.normal(size=(bg, len(weights)))
    return model, data, background


def test_masking_zero_features_is_zero_delta():
    model, data, background = linear_and_background()
    phi = np.abs(np.random.default_rng(0).normal(size=data.shape))
    curve = sensitivity_sweep(model, data, phi, background, steps=2, seed=0)
    assert curve.mean_abs_delta[0] == 0.0


def test_constant_model_flat_zero_curve():
    model = LinearModel(("a", "b"), (0.0, 0.0), bias=1.0)
    rng = np.random.default_rng(1)
    data = rng.normal(size=(10, 2))
    phi = rng.normal(size=(10, 2))
    curve = sensitivity_sweep(model, data, phi, data, steps=2, seed=0)
    assert all(d == 0.0 for d in curve.mean_abs_delta)


def test_dominant_weight_masks_largest_delta_first():
    # Closed form: masking feature f alone moves the output by
    # |w_f (x_f - b_f)| per resample, so the dominant weight must dominate
    # the per-feature step-1 deltas.
    model, data, background = linear_and_background(seed=3)
    p = len(model.weights)
    deltas = []
    for f in range(p):
        one_hot = np.zeros((len(data), p))
        one_hot[:, f] = 1.0
        curve = sensitivity_sweep(model, data, one_hot, background, steps=1, seed=11)
        deltas.append(curve.mean_abs_delta[1])
    assert int(np.argmax(deltas)) == 0
    assert all(deltas[0] > d for d in deltas[1:])
    # independent closed-form check over the full background
    expected = [
        float(
            np.mean(
                [
                    abs(model.weights[f]) * abs(x[f] - b[f])
                    for x in data
                    for b in background
                ]
            )
        )
        for f in range(p)
    ]
    for f in range(p):
        assert deltas[f] == pytest.approx(expected[f], rel=0.15)


def test_sensitivity_invariant_to_positive_rescaling():
    model, data, background = linear_and_background(seed=4, rows=10, bg=50)
    rng = np.random.default_rng(2)
    phi = rng.normal(size=data.shape)
    a = sensitivity_sweep(model, data, phi, background, steps=3, seed=5)
    b = sensitivity_sweep(model, data, 7.5 * phi, background, steps=3, seed=5)
    assert a.mean_abs_delta == b.mean_abs_delta
    assert a.mask_order == b.mask_order


def test_sensitivity_deterministic_and_row_keyed():
    model, data, background = linear_and_background(seed=6, rows=6, bg=30)
    phi = np.abs(np.random.default_rng(3).normal(size=data.shape))
    a = sensitivity_sweep(model, data, phi, background, steps=2, seed=9)
    b = sensitivity_sweep(model, data, phi, background, steps=2, seed=9)
    assert a.mean_abs_delta == b.mean_abs_delta


def test_empty_background_rejected():
    model, data, _ = linear_and_background(rows=4)
    phi = np.ones((4, 5))
    with pytest.raises(EmptyBackground):
        sensitivity_sweep(model, data, phi, [], steps=1, seed=0)


def test_mask_order_breaks_ties_by_index():
    model, data, background = linear_and_background(rows=1, bg=10)
    phi = np.array([[1.0, 1.0, 0.5, 2.0, 2.0]])
    curve = sensitivity_sweep(model, data, phi, background, steps=1, seed=0)
    assert curve.mask_order[0] == (3, 4, 0, 1, 2)

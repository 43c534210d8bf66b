from __future__ import annotations

import numpy as np
import pytest

from bifuse.datagen import GeneratorSpec, checkerboard_theta, simulate_dataset
from bifuse.errors import InputError
from bifuse.formulation1 import fit_formulation1
from bifuse.model import Hyperparameters
from bifuse.tuning import (Split, assign_clusters, baseline_two_step, cross_validate,
                           default_grids, fit_model, pilot_edges, solution_path)


@pytest.fixture(scope="module")
def small():
    spec = GeneratorSpec(30, 6, 6, (3, 3), (3, 3), sigma_noise=0.5, seed=4)
    theta, truth = checkerboard_theta(spec)
    return simulate_dataset(theta, 30, 0.5, spec.seed), truth


def test_split_partitions():
    parts = Split().partitions(20)
    (train, val), = parts
    test = Split().test_indices(20)
    assert (len(train), len(val), len(test)) == (14, 3, 3)
    assert sorted(np.concatenate([train, val, test]).tolist()) == list(range(20))
    folds = Split("kfold", folds=4).partitions(10)
    assert sorted(np.concatenate([v for _, v in folds]).tolist()) == list(range(10))
    for tr, va in folds:
        assert not set(tr) & set(va)
    assert len(Split("kfold").test_indices(10)) == 0
    assert np.array_equal(Split(seed=3).partitions(20)[0][0], Split(seed=3).partitions(20)[0][0])
    for bad in (dict(kind="loo"), dict(train_fraction=0.9, validation_fraction=0.2),
                dict(kind="kfold", folds=1)):
        with pytest.raises(InputError):
            Split(**bad)
    with pytest.raises(InputError):
        Split("kfold", folds=6).partitions(4)


def test_default_grids_shapes(small):
    data, _ = small
    g1, g2 = default_grids(data, 1), default_grids(data, 2)
    assert len(g1["lambda1"]) == 13 and len(g1["lambda2"]) == 13 and "lambda3" not in g1
    assert len(g2["lambda2"]) == 3 and len(g2["lambda3"]) == 9
    assert np.all(np.diff(g1["lambda2"]) > 0)


def test_path_endpoints_and_single_point(small):
    data, _ = small
    hp = Hyperparameters(lambda1=1.0)
    _, edges = pilot_edges(data, 1.0, hp)
    path = solution_path(data, edges, [1e-3, 1e2, 1e7], hp=hp)
    assert path.col_counts[0] >= 2 and path.col_counts[-1] == 1 and path.row_counts[-1] == 1
    one = solution_path(data, edges, [1e2], hp=hp)
    fit = fit_formulation1(data, edges, hp.replace(lambda2=1e2))
    assert np.array_equal(one.points[0].theta, fit.theta)
    with pytest.raises(InputError):
        solution_path(data, edges, [2.0, 1.0], hp=hp)
    with pytest.raises(InputError):
        solution_path(data, edges, [1.0], which="lambda9")


def test_path_formulation2(small):
    data, _ = small
    hp = Hyperparameters(lambda1=1.0, lambda2=50.0)
    _, edges = pilot_edges(data, 1.0, hp)
    path = solution_path(data, edges, [1.0, 1e6], which="lambda3-f2", hp=hp)
    assert path.points[-1].gamma is not None
    assert path.col_counts[-1] == 1 and path.row_counts[-1] == 1


def test_cv_single_point_and_determinism(small):
    data, _ = small
    grids = {"lambda1": [2.0], "lambda2": [10.0]}
    res = cross_validate(data, grids, 1)
    assert res.hyperparameters.lambda1 == 2.0 and res.hyperparameters.lambda2 == 10.0
    grids = {"lambda1": [0.1, 1.0, 10.0], "lambda2": [1.0, 100.0]}
    a = cross_validate(data, grids, 1, Split("kfold", folds=3))
    b = cross_validate(data, grids, 1, Split("kfold", folds=3), threads=3)
    assert a.hyperparameters == b.hyperparameters
    assert np.array_equal(a.fusion_scores, b.fusion_scores)
    assert a.to_dict()["lambda1"]["grid"] == [0.1, 1.0, 10.0]
    with pytest.raises(InputError):
        cross_validate(data, grids, 3)


def test_cv_formulation2_product_grid(small):
    data, _ = small
    res = cross_validate(data, {"lambda1": [1.0], "lambda2": [1.0, 10.0],
                                "lambda3": [1.0, 10.0, 100.0]}, 2)
    assert len(res.fusion_grid) == 6 and res.fusion_scores.shape == (6,)
    assert (res.hyperparameters.lambda2, res.hyperparameters.lambda3) in res.fusion_grid
    with pytest.raises(InputError):
        cross_validate(data, {"lambda2": [0.0, 1.0], "lambda3": [1.0]}, 2)


def test_cv_picks_true_lasso_scale():
    # the smallest Lasso penalty wins on noiseless dense data
    rng = np.random.default_rng(0)
    theta = rng.normal(size=(4, 3))
    data = simulate_dataset(theta, 40, 0.0, 1)
    res = cross_validate(data, {"lambda1": [1e-4, 1.0, 100.0], "lambda2": [1.0]}, 1)
    assert res.hyperparameters.lambda1 == 1e-4


def test_assign_clusters_modes(small):
    data, truth = small
    theta = np.repeat(np.repeat(np.array([[1.0, -2.0], [2.0, 1.0]]), 3, 0), 3, 1)
    full = assign_clusters(data, theta)
    assert full.assignment.n_row_clusters == 2 and full.assignment.n_col_clusters == 2
    cols = assign_clusters(data, theta, mode="columns-only")
    assert cols.assignment.n_row_clusters == 6 and cols.tau_r == 0.0
    rows = assign_clusters(data, theta, mode="rows-only")
    assert rows.assignment.n_col_clusters == 6 and rows.tau_c == 0.0
    with pytest.raises(InputError):
        assign_clusters(data, theta, mode="both")


def test_fit_model_dispatch(small):
    data, _ = small
    hp = Hyperparameters(lambda1=1.0, lambda2=5.0, lambda3=5.0)
    _, edges = pilot_edges(data, 1.0, hp)
    assert fit_model(data, edges, hp, 1).gamma is None
    assert fit_model(data, edges, hp, 2).gamma is not None
    with pytest.raises(InputError):
        fit_model(data, edges, hp, 3)


def test_baseline_two_step(small):
    data, _ = small
    res = baseline_two_step(data, 1.0)
    assert res.nu in res.nu_grid and np.isfinite(res.nu_scores).all()
    assert res.gamma.shape == res.lasso.shape
    again = baseline_two_step(data, 1.0)
    assert np.array_equal(res.gamma, again.gamma)
    one = baseline_two_step(data, 1.0, nu_grid=[1e6])
    assert one.report.assignment.n_col_clusters == 1
    assert baseline_two_step(data, 1.0, mode="columns-only").report.assignment.n_row_clusters == 6

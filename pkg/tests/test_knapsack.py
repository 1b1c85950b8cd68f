import itertools

import numpy as np
import pytest
from scipy import stats

from cu_sets import KnapsackUncertaintyModel, sample_paths
from errors import DimensionMismatch, KnapsackInfeasible, ModeUnsupportedForDimension, SchemaError
from experiment_profiles import KnapsackExperimentConfig, get_knapsack_profile
from knapsack import (
    CU,
    KNAPSACK_COLUMNS,
    NC,
    KnapsackInstance,
    build_replication,
    constraint_satisfaction,
    cu_knapsack_lhs,
    nc_knapsack_lhs,
    run_knapsack_experiment,
    satisfaction_on_paths,
    solve_knapsack_pair,
    solve_knapsack_radii,
    solve_robust_knapsack,
    true_covariance,
)
from numerics import keyed_rng
from ro_counterpart import center_cu_lhs
from synthetic_market import estimate_mean_cov


def _model(r=1.0, lam=0.5):
    L = np.array([[0.3, 0.0, 0.0], [0.1, 0.2, 0.0], [-0.05, 0.1, 0.25]])
    return KnapsackUncertaintyModel(np.array([1.0, 0.8, 1.2]), np.eye(3), lam * np.eye(3), L, r, r)


def _deterministic(m=2):
    return KnapsackUncertaintyModel(np.ones(m), np.eye(m), np.zeros((m, m)), np.zeros((m, m)), 0.0, 0.0)


def _brute_force(inst):
    best, best_x = -np.inf, None
    for bits in itertools.product((0.0, 1.0), repeat=inst.items):
        x = np.array(bits)
        x1, x2 = x[: inst.m1], x[inst.m1:]
        lhs = cu_knapsack_lhs(x1, x2, inst.model) if inst.mode == CU else nc_knapsack_lhs(x1, x2, inst.model)
        if lhs <= inst.budget + 1e-9 and inst.costs @ x > best:
            best, best_x = float(inst.costs @ x), x
    return best, best_x


def test_cu_lhs_matches_process_recursion():
    model = _model()
    x1, x2 = np.array([1.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0])
    lhs, _ = center_cu_lhs([x1, x2], model.as_process())
    assert cu_knapsack_lhs(x1, x2, model) == pytest.approx(lhs, abs=1e-12)


@pytest.mark.parametrize("center", ["first_period", "nominal"])
def test_nc_lhs_matches_process_recursion(center):
    model = _model()
    x1, x2 = np.array([1.0, 1.0, 0.0]), np.array([1.0, 0.0, 1.0])
    lhs, _ = center_cu_lhs([x1, x2], model.nc_process(center))
    assert nc_knapsack_lhs(x1, x2, model, center) == pytest.approx(lhs, abs=1e-12)


def test_lhs_rejects_bad_center_and_length():
    with pytest.raises(SchemaError):
        nc_knapsack_lhs(np.ones(3), np.ones(3), _model(), "mean")
    with pytest.raises(DimensionMismatch):
        cu_knapsack_lhs(np.ones(2), np.ones(3), _model())


def test_deterministic_weights_pick_best_two():
    inst = KnapsackInstance([1.0, 2.0], [3.0, 4.0], 2.5, _deterministic())
    sol = solve_robust_knapsack(inst)
    assert sol.objective == 7.0
    assert list(sol.x1) == [0.0, 0.0]
    assert list(sol.x2) == [1.0, 1.0]
    assert sol.method == "exhaustive"


@pytest.mark.parametrize("method", ["exhaustive", "branch_and_bound"])
def test_ties_go_to_lexicographically_smallest(method):
    inst = KnapsackInstance([1.0, 1.0], [1.0, 1.0], 1.0, _deterministic())
    sol = solve_robust_knapsack(inst, method)
    assert sol.objective == 1.0
    assert list(sol.x1) + list(sol.x2) == [0.0, 0.0, 0.0, 1.0]


@pytest.mark.parametrize("mode", [CU, NC])
def test_solvers_agree_with_brute_force(mode):
    inst = KnapsackInstance([1.1, 0.9, 1.3], [1.4, 1.2, 1.0], 3.5, _model(r=1.0), mode)
    best, _ = _brute_force(inst)
    ex = solve_robust_knapsack(inst, "exhaustive")
    bb = solve_robust_knapsack(inst, "branch_and_bound")
    assert ex.objective == pytest.approx(best)
    assert bb.objective == pytest.approx(best)
    assert ex.lhs <= 3.5 + 1e-9
    assert bb.lhs <= 3.5 + 1e-9


def test_radius_batch_matches_single_solves():
    inst = KnapsackInstance([1.1, 0.9, 1.3], [1.4, 1.2, 1.0], 3.5, _model(r=0.0))
    radii = [(0.0, 0.0), (1.0, 1.0), (3.0, 3.0)]
    batch = solve_knapsack_radii(inst, radii, "exhaustive")
    for (r1, r2), sol in zip(radii, batch):
        single = solve_robust_knapsack(inst.with_model(inst.model.with_radii(r1, r2)), "exhaustive")
        assert sol.objective == pytest.approx(single.objective)
    objs = [s.objective for s in batch]
    assert objs == sorted(objs, reverse=True)


def test_negative_budget_is_infeasible():
    inst = KnapsackInstance([1.0, 1.0], [1.0, 1.0], -0.1, _deterministic())
    with pytest.raises(KnapsackInfeasible):
        solve_robust_knapsack(inst)


def test_zero_budget_selects_nothing():
    sol = solve_robust_knapsack(KnapsackInstance([1.0, 1.0], [1.0, 1.0], 0.0, _deterministic()))
    assert sol.objective == 0.0
    assert sol.x1.sum() + sol.x2.sum() == 0.0


def test_solver_size_limits():
    inst = KnapsackInstance(np.ones(13), np.ones(13), 5.0, _deterministic(13))
    with pytest.raises(ModeUnsupportedForDimension):
        solve_robust_knapsack(inst, "exhaustive")
    with pytest.raises(SchemaError):
        solve_robust_knapsack(KnapsackInstance([1.0], [1.0], 1.0, _deterministic(1)), "greedy")


def test_satisfaction_on_paths():
    d1 = np.array([[1.0, 1.0], [2.0, 2.0]])
    d2 = np.zeros((2, 2))
    assert satisfaction_on_paths([1.0, 0.0], [0.0, 0.0], d1, d2, 1.5) == 0.5
    assert satisfaction_on_paths([0.0, 0.0], [0.0, 0.0], d1, d2, 0.0) == 1.0


def test_constraint_satisfaction_is_keyed():
    model = _model()
    sigma = np.diag([0.04, 0.04, 0.04])
    a = constraint_satisfaction([1, 1, 0], [0, 1, 1], model, sigma, 400, 7, 3.5, replication=2)
    b = constraint_satisfaction([1, 1, 0], [0, 1, 1], model, sigma, 400, 7, 3.5, replication=2)
    assert a == b
    assert 0.0 <= a <= 1.0
    with pytest.raises(SchemaError):
        constraint_satisfaction([1, 1, 0], [0, 1, 1], model, sigma, 0, 7, 3.5)


def _small_config(**kw):
    doc = dict(
        name="test",
        display_name="test",
        items_per_period=3,
        replications=2,
        estimation_samples=20,
        evaluation_samples=30,
        r_grid=[0.0, 1.0],
        lambda_grid=[0.0, 0.5],
        budget=4.0,
        seed=99,
    )
    doc.update(kw)
    return KnapsackExperimentConfig(**doc)


def test_replication_estimates_from_first_period_sample():
    cfg = _small_config()
    rep = build_replication(cfg, 1)
    z = keyed_rng(cfg.seed, 1, 3).standard_normal((cfg.estimation_samples, 3))
    mu_hat, sigma_hat = estimate_mean_cov(1.0 + z @ rep.L_true.T)
    assert np.allclose(rep.mu_hat, mu_hat)
    assert np.allclose(rep.L_hat @ rep.L_hat.T, sigma_hat)
    assert np.allclose(rep.sigma_true, true_covariance(cfg))


def test_experiment_layout():
    cfg = _small_config()
    result = run_knapsack_experiment(cfg)
    assert result.columns == KNAPSACK_COLUMNS
    assert len(result.records) == (len(cfg.r_grid) + len(cfg.lambda_grid)) * 2
    assert [r["model"] for r in result.records[:4]] == [CU, NC, CU, NC]
    assert [r["sweep"] for r in result.records] == ["r"] * 4 + ["lambda"] * 4
    assert result.records[4]["r"] == cfg.sweep_radius
    assert result.records[0]["lambda"] == cfg.default_lambda
    for rec in result.records:
        assert 0.0 <= rec["avg_satisfaction"] <= 1.0
        assert rec["replications"] == 2
    assert result.failures == []


def test_experiment_is_deterministic_across_threads():
    cfg = _small_config()
    a = run_knapsack_experiment(cfg, threads=1).to_csv_text()
    b = run_knapsack_experiment(cfg, threads=1).to_csv_text()
    c = run_knapsack_experiment(cfg, threads=2).to_csv_text()
    assert a == b == c


def test_experiment_validates_config():
    with pytest.raises(SchemaError):
        run_knapsack_experiment(_small_config(r_grid=[]))


def test_solve_pair():
    out = solve_knapsack_pair(_small_config())
    assert set(out) == {CU, NC}
    for doc in out.values():
        assert len(doc["x1"]) == 3
        assert 0.0 <= doc["satisfaction"] <= 1.0


@pytest.mark.parametrize("center", ["first_period", "nominal"])
def test_unconnected_model_matches_nc_counterpart(center):
    rng = np.random.default_rng(21)
    L = np.tril(rng.normal(scale=0.3, size=(3, 3)))
    model = KnapsackUncertaintyModel(rng.uniform(0.5, 1.5, 3), np.eye(3), np.zeros((3, 3)), L, 1.3, 0.7)
    for bits in itertools.product((0.0, 1.0), repeat=6):
        x = np.array(bits)
        cu = cu_knapsack_lhs(x[:3], x[3:], model)
        assert cu == pytest.approx(nc_knapsack_lhs(x[:3], x[3:], model, center), abs=1e-12)


def test_removing_an_item_never_lowers_satisfaction():
    d1, d2 = sample_paths(_model(lam=0.5), 0.01 * np.eye(3), 400, 5)
    positive = np.all(d1 > 0, axis=1) & np.all(d2 > 0, axis=1)
    d1, d2 = d1[positive], d2[positive]
    rng = np.random.default_rng(8)
    for _ in range(20):
        x = rng.integers(0, 2, 6).astype(float)
        base = satisfaction_on_paths(x[:3], x[3:], d1, d2, 3.0)
        for i in np.flatnonzero(x):
            fewer = x.copy()
            fewer[i] = 0.0
            assert satisfaction_on_paths(fewer[:3], fewer[3:], d1, d2, 3.0) >= base


@pytest.mark.parametrize("mode", [CU, NC])
def test_objective_nonincreasing_in_radius(mode):
    rng = np.random.default_rng(31)
    for _ in range(10):
        L = np.tril(rng.normal(scale=0.3, size=(3, 3)))
        model = KnapsackUncertaintyModel(
            rng.uniform(0.5, 1.5, 3), np.eye(3), rng.uniform(-0.5, 0.5) * np.eye(3), L, 0.0, 0.0
        )
        inst = KnapsackInstance(rng.uniform(0.5, 2.0, 3), rng.uniform(0.5, 2.0, 3), 4.0, model, mode)
        objs = [
            solve_robust_knapsack(inst.with_model(model.with_radii(r, r))).objective
            for r in (0.0, 0.5, 1.0, 2.0, 4.0)
        ]
        assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))


def _sweep(result, sweep, model):
    return [r for r in result.records if r["sweep"] == sweep and r["model"] == model]


def _margins(a, b):
    return a["satisfaction_margin"] + b["satisfaction_margin"]


def _finite_objectives(cu, nc):
    pairs = [(a["avg_objective"], b["avg_objective"]) for a, b in zip(cu, nc)]
    return [(a, b) for a, b in pairs if np.isfinite(a) and np.isfinite(b)]


@pytest.mark.slow
def test_desk_trends():
    result = run_knapsack_experiment(get_knapsack_profile("desk"), threads=4)
    cu, nc = _sweep(result, "r", CU), _sweep(result, "r", NC)

    for a, b in zip(cu, nc):
        assert a["avg_satisfaction"] + _margins(a, b) >= b["avg_satisfaction"]
    pairs = _finite_objectives(cu, nc)
    assert pairs
    assert sum(a for a, _ in pairs) <= sum(b for _, b in pairs) + 1e-9

    for a, b in zip(cu, cu[1:]):
        assert b["avg_satisfaction"] + _margins(a, b) >= a["avg_satisfaction"]
    # NC re-selects items as r grows, so it is only monotone as a trend
    assert nc[-1]["avg_satisfaction"] + _margins(nc[0], nc[-1]) >= nc[0]["avg_satisfaction"]
    assert stats.spearmanr([r["r"] for r in nc], [r["avg_satisfaction"] for r in nc])[0] > 0

    zero = [r for r in result.records if r["sweep"] == "lambda" and abs(r["lambda"]) < 1e-12]
    cu0 = next(r for r in zero if r["model"] == CU)
    nc0 = next(r for r in zero if r["model"] == NC)
    assert cu0["avg_objective"] == pytest.approx(nc0["avg_objective"], abs=1e-9)
    assert cu0["avg_satisfaction"] == pytest.approx(nc0["avg_satisfaction"], abs=1e-12)


@pytest.mark.slow
def test_negative_correlation_trends():
    result = run_knapsack_experiment(get_knapsack_profile("negative"), threads=4)
    cu, nc = _sweep(result, "r", CU), _sweep(result, "r", NC)

    pairs = _finite_objectives(cu, nc)
    assert pairs
    assert sum(a for a, _ in pairs) >= sum(b for _, b in pairs) - 1e-9
    total_margin = sum(_margins(a, b) for a, b in zip(cu, nc))
    assert sum(a["avg_satisfaction"] for a in cu) <= sum(b["avg_satisfaction"] for b in nc) + total_margin

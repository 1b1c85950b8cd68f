import pytest

from errors import SchemaError
from experiment_profiles import (
    KnapsackExperimentConfig,
    PortfolioConfig,
    get_knapsack_profile,
    get_portfolio_profile,
    list_profiles,
)


def test_profiles_listed():
    assert list_profiles() == {"knapsack": ["desk", "full", "negative"], "portfolio": ["desk", "full"]}


def test_default_profiles(monkeypatch):
    monkeypatch.delenv("CU_KNAPSACK_PROFILE", raising=False)
    assert get_knapsack_profile().name == "desk"
    monkeypatch.setenv("CU_KNAPSACK_PROFILE", "negative")
    assert get_knapsack_profile().default_lambda == -0.2
    with pytest.raises(SchemaError):
        get_portfolio_profile("nope")


def test_builtin_profiles_validate():
    for name in list_profiles()["knapsack"]:
        get_knapsack_profile(name).validate()
    for name in list_profiles()["portfolio"]:
        get_portfolio_profile(name).validate()


def test_full_knapsack_uses_branch_and_bound():
    cfg = get_knapsack_profile("full")
    assert cfg.items_per_period == 20
    assert cfg.solver == "branch_and_bound"
    assert len(cfg.r_grid) == 20


def test_from_dict_round_trip_and_unknown_keys():
    cfg = get_portfolio_profile("desk")
    assert PortfolioConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(SchemaError):
        KnapsackExperimentConfig.from_dict({"name": "x", "display_name": "x", "items": 3})


@pytest.mark.parametrize(
    "changes",
    [
        {"items_per_period": 0},
        {"estimation_samples": 1},
        {"r_grid": [-0.1]},
        {"nc_center": "mean"},
        {"solver": "greedy"},
        {"items_per_period": 13, "solver": "exhaustive"},
        {"items_per_period": 21},
    ],
)
def test_knapsack_validation(changes):
    with pytest.raises(SchemaError):
        KnapsackExperimentConfig("x", "x", **changes).validate()


@pytest.mark.parametrize(
    "changes",
    [
        {"mu1": [0.1]},
        {"delta": [-0.1, 0.0]},
        {"variance": 0.0},
        {"rho_grid": [1.5]},
        {"support_points": 1},
        {"utility_slopes": [1.0, 2.0], "utility_intercepts": [0.0]},
    ],
)
def test_portfolio_validation(changes):
    with pytest.raises(SchemaError):
        PortfolioConfig("x", "x", **changes).validate()

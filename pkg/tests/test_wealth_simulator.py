import numpy as np
import pytest

from errors import SchemaError
from experiment_profiles import PortfolioConfig
from wealth_simulator import (
    asset_covariance,
    format_wealth,
    sample_returns,
    simulate_wealth,
    support_bounds,
    terminal_wealth,
)


def _config(**kw):
    return PortfolioConfig(name="test", display_name="test", **kw)


def test_asset_covariance():
    assert asset_covariance(_config(), 0.5) == pytest.approx(np.array([[0.005, 0.0025], [0.0025, 0.005]]))


def test_support_bounds():
    lo, hi = support_bounds(_config(support_width=2.0, variance=0.01))
    assert lo == pytest.approx([-0.17, -0.14])
    assert hi == pytest.approx([0.23, 0.26])


def test_terminal_wealth_gross_and_net():
    d1 = np.array([[0.1, 0.0]])
    d2 = np.array([[0.0, 0.2]])
    assert terminal_wealth([1, 0], [0, 1], d1, d2, 100.0)[0] == pytest.approx(132.0)
    assert terminal_wealth([1, 0], [0, 1], d1, d2, 100.0, gross_returns=False)[0] == pytest.approx(2.0)


def test_returns_stay_in_box_and_share_first_period():
    cfg = _config()
    lo, hi = support_bounds(cfg)
    a1, a2 = sample_returns(cfg, 0.0, 0.3, 500, seed=5, cell=1)
    b1, b2 = sample_returns(cfg, 1.0, 0.3, 500, seed=5, cell=1)
    assert np.all(a1 >= lo) and np.all(a1 <= hi)
    assert np.all(a2 >= lo) and np.all(a2 <= hi)
    assert np.array_equal(a1, b1)
    assert not np.array_equal(a2, b2)


def test_simulate_wealth_is_keyed():
    cfg = _config()
    a = simulate_wealth([0.5, 0.5], [0.2, 0.8], cfg, 0.5, 0.0, 300, seed=3, cell=2)
    b = simulate_wealth([0.5, 0.5], [0.2, 0.8], cfg, 0.5, 0.0, 300, seed=3, cell=2)
    assert a == b
    assert a.worst <= a.mean
    assert a.samples == 300
    mean, std, worst = a
    assert std > 0
    with pytest.raises(SchemaError):
        simulate_wealth([0.5, 0.5], [0.2, 0.8], cfg, 0.5, 0.0, 1, seed=3)


def test_format_wealth():
    cfg = _config()
    stats = simulate_wealth([1, 0], [1, 0], cfg, 0.0, 0.0, 10, seed=1)
    line = format_wealth(stats, "CU")
    assert line.startswith("CU: mean ")
    assert "(10 paths)" in line

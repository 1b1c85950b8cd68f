import numpy as np
import pytest

from cu_sets import MomentAmbiguityProcess
from errors import DimensionMismatch, InvalidProcess
from synthetic_market import (
    SYNTHETIC_LABEL,
    estimate_mean_cov,
    fit_var1,
    generate_var1_returns,
    moment_process_from_fit,
)

A = np.array([[0.5, 0.1], [0.0, 0.3]])
B = np.array([0.01, 0.02])
SIGMA = np.array([[1e-4, 2e-5], [2e-5, 2e-4]])


def test_generated_frame_is_labelled_and_keyed():
    frame = generate_var1_returns(A, B, SIGMA, 100, seed=4)
    assert list(frame.columns) == ["asset_1", "asset_2"]
    assert frame.index.name == "period"
    assert frame.attrs["source"] == SYNTHETIC_LABEL
    assert frame.equals(generate_var1_returns(A, B, SIGMA, 100, seed=4))
    with pytest.raises(DimensionMismatch):
        generate_var1_returns(A, B, SIGMA, 10, seed=4, assets=["x"])
    with pytest.raises(InvalidProcess):
        generate_var1_returns(A, B, SIGMA, 1, seed=4)


def test_fit_recovers_coefficients():
    frame = generate_var1_returns(A, B, SIGMA, 5000, seed=11)
    fit = fit_var1(frame)
    assert np.allclose(fit.A, A, atol=0.05)
    assert np.allclose(fit.b, B, atol=0.005)
    assert np.allclose(fit.sigma, SIGMA, atol=2e-5)
    assert fit.conditional_mean([0.0, 0.0]) == pytest.approx(fit.b)


def test_mean_cov_and_short_data():
    mean, cov = estimate_mean_cov(np.array([[1.0, 0.0], [3.0, 2.0]]))
    assert mean == pytest.approx([2.0, 1.0])
    assert cov == pytest.approx(np.array([[2.0, 2.0], [2.0, 2.0]]))
    with pytest.raises(InvalidProcess):
        estimate_mean_cov(np.array([[1.0, 2.0]]))
    with pytest.raises(InvalidProcess):
        fit_var1(np.zeros((3, 2)))


def test_process_from_fit():
    frame = generate_var1_returns(A, B, SIGMA, 200, seed=2)
    fit = fit_var1(frame)
    proc = moment_process_from_fit(fit, frame, max_points=6)
    assert isinstance(proc, MomentAmbiguityProcess)
    assert proc.periods == 2
    assert proc.supports[0].shape[0] == 6
    assert proc.supports[1].shape[0] == 12
    assert proc.center(2, 0) == pytest.approx(fit.conditional_mean(proc.supports[0][0]))

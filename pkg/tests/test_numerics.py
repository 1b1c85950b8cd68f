import numpy as np
import pytest
from scipy.linalg import eigvalsh

from errors import DimensionMismatch, InvalidProcess, NotPsd, NotSquare, NotSymmetric
from numerics import as_matrix, as_vector, check_symmetric, cholesky, is_psd, keyed_rng, min_eigenvalue, two_norm


def test_as_vector_accepts_scalars_and_checks_length():
    assert as_vector(2.5).tolist() == [2.5]
    with pytest.raises(DimensionMismatch):
        as_vector([1.0, 2.0], length=3)


def test_as_vector_rejects_non_finite():
    with pytest.raises(InvalidProcess):
        as_vector([1.0, np.nan])


def test_as_matrix_shape_check():
    with pytest.raises(DimensionMismatch):
        as_matrix([[1.0, 2.0]], rows=2, cols=2)


def test_cholesky_reconstructs():
    sigma = np.array([[4.0, 2.0], [2.0, 3.0]])
    L = cholesky(sigma)
    assert np.allclose(L @ L.T, sigma)
    assert np.allclose(L, np.tril(L))


def test_cholesky_singular_psd():
    sigma = np.array([[1.0, 1.0], [1.0, 1.0]])
    L = cholesky(sigma)
    assert np.allclose(L @ L.T, sigma)
    assert L[1, 1] == 0.0


def test_cholesky_errors():
    with pytest.raises(NotPsd):
        cholesky([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotSymmetric):
        cholesky([[1.0, 0.0], [1.0, 1.0]])
    with pytest.raises(NotSquare):
        check_symmetric(np.ones((2, 3)))


def test_min_eigenvalue_and_psd():
    lam, v = min_eigenvalue(np.diag([3.0, 1.0]))
    assert lam == pytest.approx(1.0)
    assert abs(v[1]) == pytest.approx(1.0)
    assert is_psd(np.diag([1.0, 0.0]))
    assert not is_psd(np.diag([1.0, -0.1]))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_min_eigenvalue_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(4, 4))
    S = B + B.T
    lam, v = min_eigenvalue(S)
    assert lam == pytest.approx(eigvalsh(S)[0], abs=1e-10)
    assert S @ v == pytest.approx(lam * v, abs=1e-9)


def test_two_norm():
    assert two_norm([3.0, 4.0]) == pytest.approx(5.0)


def test_keyed_rng_is_reproducible():
    a = keyed_rng(7, 1, 2).standard_normal(5)
    b = keyed_rng(7, 1, 2).standard_normal(5)
    c = keyed_rng(7, 1, 3).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)

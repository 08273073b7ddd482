import numpy as np
import pytest
import scipy.sparse as sp

from proxqn.dataset import Dataset, SyntheticQuadratic, synthesize_quadratic
from proxqn.problem import logistic_problem, quadratic_problem


def make_dataset(rows, labels, n_features=None):
    """Dataset from a list of [(idx, val), ...] rows."""
    n_features = n_features or (max(i for r in rows for i, _ in r) + 1)
    indptr = [0]
    indices = []
    data = []
    for r in rows:
        for i, v in r:
            indices.append(i)
            data.append(v)
        indptr.append(len(indices))
    mat = sp.csr_matrix((data, indices, indptr), shape=(len(rows), n_features))
    return Dataset(mat, np.asarray(labels, dtype=float))


@pytest.fixture(scope="session")
def small_logistic():
    rng = np.random.default_rng(7)
    mat = sp.random(60, 15, density=0.4, format="csr",
                    random_state=np.random.RandomState(7))
    mat.data = rng.standard_normal(mat.nnz)
    labels = np.where(rng.standard_normal(60) > 0, 1.0, -1.0)
    return logistic_problem(Dataset(mat, labels), 1e-3)


@pytest.fixture(scope="session")
def small_quadratic():
    return quadratic_problem(synthesize_quadratic(20, 0.3, 6.0, 5), 0.02)


def identity_quadratic(n, b=None):
    """f(x) = 0.5||x||^2 - b'x as a SyntheticQuadratic."""
    return SyntheticQuadratic(np.ones(n), np.eye(n),
                              np.zeros(n) if b is None else np.asarray(b, float))

"""Composite objective oracles: F(x) = f(x) + lambda*||x||_1.

The smooth part f is either the average logistic loss over a
:class:`~proxqn.dataset.Dataset` or a synthetic quadratic
f(x) = 0.5 x'Ax - b'x.  The nonsmooth part is the l1 norm, whose prox
is the componentwise soft threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .dataset import Dataset, SyntheticQuadratic


def softplus(z: np.ndarray) -> np.ndarray:
    """log(1 + exp(z)) computed as max(z,0) + log1p(exp(-|z|)).

    The split keeps the argument of exp nonpositive, so large margins
    (a9a-scale w'x) cannot overflow.
    """
    z = np.asarray(z)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def logistic_value(dataset: Dataset, w: np.ndarray) -> float:
    """Average logistic loss (1/m) sum_i log(1 + exp(-y_i w'x_i))."""
    w = _check_dim(dataset, w)
    margins = dataset.matrix @ w
    return float(np.mean(softplus(-dataset.labels * margins)))


def logistic_gradient(dataset: Dataset, w: np.ndarray) -> np.ndarray:
    """Gradient -(1/m) sum_i y_i sigmoid(-y_i w'x_i) x_i."""
    w = _check_dim(dataset, w)
    margins = dataset.matrix @ w
    coeff = -dataset.labels * expit(-dataset.labels * margins)
    return (dataset.matrix.T @ coeff) / dataset.n_points


def logistic_value_and_gradient(
    dataset: Dataset, w: np.ndarray
) -> tuple[float, np.ndarray]:
    """Loss and gradient sharing a single pass over the margins."""
    w = _check_dim(dataset, w)
    margins = -dataset.labels * (dataset.matrix @ w)
    value = float(np.mean(softplus(margins)))
    coeff = -dataset.labels * expit(margins)
    grad = (dataset.matrix.T @ coeff) / dataset.n_points
    return value, grad


def _check_dim(dataset: Dataset, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (dataset.n_features,):
        raise ValueError(
            f"w has shape {w.shape}, expected ({dataset.n_features},)"
        )
    return w


def l1_value(w: np.ndarray, lam: float) -> float:
    return float(lam * np.sum(np.abs(w)))


def soft_threshold(v: float, tau: float) -> float:
    """sign(v) * max(|v| - tau, 0): minimizer of 0.5(u-v)^2 + tau|u|."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    if v > tau:
        return v - tau
    if v < -tau:
        return v + tau
    return 0.0


def soft_threshold_vec(v: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def prox_l1_scaled_identity(v: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """Exact minimizer of lam*||u||_1 + (1/(2 mu))||u - v||^2."""
    if mu <= 0:
        raise ValueError("step must be positive")
    return soft_threshold_vec(np.asarray(v, dtype=np.float64), mu * lam)


def min_norm_subgradient(grad: np.ndarray, w: np.ndarray, lam: float) -> np.ndarray:
    """Smallest-norm element of the subdifferential of f + lam*||.||_1.

    Componentwise: grad_j + lam*sign(w_j) where w_j != 0, and the
    shrinkage sign(grad_j)*max(|grad_j| - lam, 0) on the zero set.
    Vanishes exactly at minimizers.
    """
    grad = np.asarray(grad, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if grad.shape != w.shape:
        raise ValueError(f"shape mismatch: {grad.shape} vs {w.shape}")
    out = grad + lam * np.sign(w)
    zero = w == 0.0
    out[zero] = np.sign(grad[zero]) * np.maximum(np.abs(grad[zero]) - lam, 0.0)
    return out


@dataclass(frozen=True)
class CompositeProblem:
    """Oracle pair for F = f + lam*||.||_1.

    ``value_and_grad`` shares work between the two smooth oracles; the
    l1 part is handled by the module-level prox helpers.  ``gamma`` is a
    known strong-convexity lower bound of f (0 when unknown) and
    ``lipschitz`` an upper bound on the gradient Lipschitz constant
    (None when unknown).  Oracles are pure; instances can be shared
    across concurrent runs.
    """

    n: int
    lam: float
    f_value: Callable[[np.ndarray], float]
    f_grad: Callable[[np.ndarray], np.ndarray]
    value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]]
    gamma: float = 0.0
    lipschitz: float | None = None
    name: str = "composite"

    def g_value(self, w: np.ndarray) -> float:
        return l1_value(w, self.lam)

    def full_value(self, w: np.ndarray) -> float:
        return self.f_value(w) + self.g_value(w)

    def subgradient_norm(self, w: np.ndarray, grad: np.ndarray | None = None) -> float:
        if grad is None:
            grad = self.f_grad(w)
        return float(np.max(np.abs(min_norm_subgradient(grad, w, self.lam))))


def logistic_problem(dataset: Dataset, lam: float) -> CompositeProblem:
    """l1-regularized average logistic loss over a dataset.

    The Lipschitz bound uses sigmoid'(t) <= 1/4:
    L <= lambda_max(X'X) / (4m), estimated with a sparse SVD.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    import scipy.sparse.linalg as spla

    try:
        smax = spla.svds(dataset.matrix.astype(np.float64), k=1,
                         return_singular_vectors=False)[0]
        lipschitz = float(smax**2 / (4.0 * dataset.n_points))
    except Exception:
        lipschitz = None
    return CompositeProblem(
        n=dataset.n_features,
        lam=lam,
        f_value=lambda w: logistic_value(dataset, w),
        f_grad=lambda w: logistic_gradient(dataset, w),
        value_and_grad=lambda w: logistic_value_and_gradient(dataset, w),
        gamma=0.0,
        lipschitz=lipschitz,
        name="logistic",
    )


def quadratic_problem(quad: SyntheticQuadratic, lam: float) -> CompositeProblem:
    """f(x) = 0.5 x'Ax - b'x with the spectrum of A known exactly."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")

    def value(w: np.ndarray) -> float:
        return float(0.5 * w @ quad.matvec(w) - quad.b @ w)

    def grad(w: np.ndarray) -> np.ndarray:
        return quad.matvec(w) - quad.b

    def value_and_grad(w: np.ndarray) -> tuple[float, np.ndarray]:
        aw = quad.matvec(w)
        return float(0.5 * w @ aw - quad.b @ w), aw - quad.b

    return CompositeProblem(
        n=quad.n,
        lam=lam,
        f_value=value,
        f_grad=grad,
        value_and_grad=value_and_grad,
        gamma=quad.gamma,
        lipschitz=quad.lmax,
        name="quadratic",
    )

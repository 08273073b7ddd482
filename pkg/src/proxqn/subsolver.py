"""Randomized coordinate descent on the composite quadratic model.

Minimizes Q_H(u, v) = f(v) + <grad_v, u-v> + 0.5||u-v||_H^2 + lam*||u||_1
for diagonal-plus-low-rank H.  Each coordinate step is exact (1-D soft
threshold) and costs O(p) thanks to an incrementally maintained gradient
cache.  Also houses the inner-iteration budget rules and the cyclic
solver used as ground truth in tests.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .hessian import HessianModel
from .problem import min_norm_subgradient

# Sentinel for the diverging inner-iteration bound as alpha_n -> 1.
INNER_BOUND_MAX = 10**9


@dataclass(frozen=True)
class SubproblemBudget:
    """Inner-iteration budget r(k) = max(floor, ceil(min(cap, k/divisor))).

    ``step_eps`` is the step length below which a coordinate move counts
    as tiny; n consecutive tiny moves end the solve early.
    """

    cap: int = 1000
    divisor: float = 3.0
    floor: int = 5
    step_eps: float = 1e-16

    def __post_init__(self):
        if not (self.cap >= self.floor >= 1):
            raise ValueError("need cap >= floor >= 1")
        if self.divisor <= 0:
            raise ValueError("divisor must be positive")


def budget_for_iteration(k: int, budget: SubproblemBudget) -> int:
    """Coordinate steps granted to the k-th outer iteration."""
    if k < 1:
        raise ValueError("outer iteration index starts at 1")
    return max(budget.floor, math.ceil(min(budget.cap, k / budget.divisor)))


def phi_constant(m: float, M: float) -> float:
    """Coordinate-descent contraction constant: 1 - m/(4M) when m <= 2M,
    M/m otherwise (the second branch is vacuous for genuine bounds m <= M)."""
    if m <= 0 or M <= 0:
        raise ValueError("eigenvalue bounds must be positive")
    if m <= 2 * M:
        return 1.0 - m / (4.0 * M)
    return M / m


def theoretical_inner_bound(k: int, alpha_n: float, ell: float) -> int:
    """ceil(k * log(k/ell) / log(1/alpha_n)), clamped to [0, INNER_BOUND_MAX].

    Diagnostic companion to :func:`budget_for_iteration`; diverges as
    alpha_n approaches 1, in which case the sentinel is returned with a
    warning.
    """
    if not (0.0 < alpha_n < 1.0):
        raise ValueError("alpha_n must lie in (0, 1)")
    if ell <= 0:
        raise ValueError("ell must be positive")
    if k < 1:
        raise ValueError("k must be at least 1")
    raw = k * math.log(k / ell) / math.log(1.0 / alpha_n)
    if raw >= INNER_BOUND_MAX:
        warnings.warn("inner-iteration bound clamped at sentinel", RuntimeWarning)
        return INNER_BOUND_MAX
    return max(0, math.ceil(raw))


class CdWorkspace:
    """Mutable state of one coordinate-descent solve.

    Tracks the iterate ``u``, the displacement d = u - v, and the
    low-rank projection q = Q'd, so the j-th smooth-model gradient
    component grad_v[j] + [H(u-v)]_j is available in O(p).
    Single-owner: one workspace per solve.
    """

    def __init__(self, model: HessianModel, grad_v: np.ndarray, v: np.ndarray,
                 lam: float):
        eff_delta, q, qw_scaled, diag = model.cd_parts()
        self.eff_delta = eff_delta
        self.q = q
        self.qw_scaled = qw_scaled
        self.diag = diag
        self.grad_v = np.asarray(grad_v, dtype=np.float64)
        self.v = np.asarray(v, dtype=np.float64)
        self.lam = float(lam)
        self.u = self.v.copy()
        self.d = np.zeros_like(self.v)
        self.qcache = np.zeros(q.shape[1])
        self.model = model

    def smooth_component(self, j: int) -> float:
        b = self.grad_v[j] + self.eff_delta * self.d[j]
        if self.qcache.shape[0]:
            b += self.qw_scaled[j] @ self.qcache
        return float(b)

    def step(self, j: int) -> float:
        """Exact minimization over coordinate j; returns the move z*."""
        a = self.diag[j]
        if a <= 0:
            raise ValueError(f"nonpositive model diagonal at coordinate {j}")
        b = self.grad_v[j] + self.eff_delta * self.d[j]
        low_rank = self.qcache.shape[0] > 0
        if low_rank:
            b += self.qw_scaled[j] @ self.qcache
        uj = self.u[j]
        w = uj - b / a
        thr = self.lam / a
        if w > thr:
            w -= thr
        elif w < -thr:
            w += thr
        else:
            w = 0.0
        z = w - uj
        if z != 0.0:
            self.u[j] = w
            self.d[j] += z
            if low_rank:
                self.qcache += z * self.q[j]
        return z

    def smooth_gradient(self) -> np.ndarray:
        """Full grad_v + H(u - v), recomputed from the cache in O(np)."""
        g = self.grad_v + self.eff_delta * self.d
        if self.qcache.shape[0]:
            g = g + self.qw_scaled @ self.qcache
        return g

    def cache_error(self) -> float:
        """Inf-norm gap between the cache and a direct recomputation."""
        direct = self.grad_v + self.model.apply(self.u - self.v)
        return float(np.max(np.abs(self.smooth_gradient() - direct)))


def cd_coordinate_step(model: HessianModel, lam: float,
                       workspace: CdWorkspace, j: int) -> float:
    """One exact coordinate step; returns the updated u_j."""
    workspace.step(j)
    return float(workspace.u[j])


def cd_minimize(
    model: HessianModel,
    grad_v: np.ndarray,
    v: np.ndarray,
    lam: float,
    r: int,
    seed: int | np.random.Generator = 0,
    step_eps: float = 1e-16,
    validate_cache_every: int = 0,
    return_steps: bool = False,
):
    """Randomized coordinate descent, r steps from u_0 = v.

    Coordinates are drawn uniformly from a seeded PCG64 generator
    (numpy's default_rng) using unbiased bounded sampling, so traces are
    bit-reproducible across platforms.  Q_H(u, v) never increases along
    the steps.  After n consecutive steps shorter than ``step_eps`` the
    solve returns early.
    """
    if r < 0:
        raise ValueError("step count must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ws = CdWorkspace(model, grad_v, v, lam)
    n = ws.v.shape[0]
    taken = 0
    if r > 0:
        indices = rng.integers(0, n, size=r)
        tiny = 0
        for j in indices:
            z = ws.step(int(j))
            taken += 1
            if validate_cache_every and taken % validate_cache_every == 0:
                err = ws.cache_error()
                if err > 1e-10:
                    raise AssertionError(f"gradient cache drifted: {err:.3e}")
            if abs(z) < step_eps:
                tiny += 1
                if tiny >= n:
                    break
            else:
                tiny = 0
    if return_steps:
        return ws.u, taken
    return ws.u


def exact_solve_oracle(
    model: HessianModel,
    grad_v: np.ndarray,
    v: np.ndarray,
    lam: float,
    tol: float,
    max_steps: int = 10**7,
    return_steps: bool = False,
):
    """Cyclic coordinate descent until the subproblem's min-norm
    subgradient has inf-norm at most tol.  Ground truth for epsilon-
    minimizer checks; raises past ``max_steps`` coordinate steps.

    A sweep whose largest move falls below the 1e-16 step floor cannot
    improve the certificate any further in double precision, so the
    solve returns the current iterate even if ``tol`` is below that
    rounding floor.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ws = CdWorkspace(model, grad_v, v, lam)
    n = ws.v.shape[0]
    steps = 0
    while True:
        norm = float(np.max(np.abs(
            min_norm_subgradient(ws.smooth_gradient(), ws.u, lam)
        )))
        if norm <= tol:
            return (ws.u, steps) if return_steps else ws.u
        floor = 1e-16 * (1.0 + float(np.max(np.abs(ws.u))))
        biggest = 0.0
        for j in range(n):
            biggest = max(biggest, abs(ws.step(j)))
        steps += n
        if biggest <= floor:
            return (ws.u, steps) if return_steps else ws.u
        if steps > max_steps:
            raise RuntimeError(
                f"exact subproblem solve exceeded {max_steps} coordinate steps"
            )


def solve_scaled_identity(
    model: HessianModel, grad_v: np.ndarray, v: np.ndarray, lam: float
) -> np.ndarray:
    """Closed-form minimizer when H = c*I (no low-rank part): the
    componentwise soft threshold of v - grad_v/c at level lam/c."""
    if model.p != 0:
        raise ValueError("closed form requires a pure diagonal model")
    c = model.scale * model.core.delta
    w = v - grad_v / c
    return np.sign(w) * np.maximum(np.abs(w) - lam / c, 0.0)

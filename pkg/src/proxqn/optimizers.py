"""Drivers for the proximal gradient and proximal quasi-Newton methods.

Five algorithms share the same trace format and termination rule
(relative inf-norm of the min-norm subgradient):

* ``run_pga``       basic proximal gradient with backtracking over mu
* ``run_apga``      FISTA with a nonincreasing step size
* ``run_pqna``      inexact proximal quasi-Newton, H = G + I/(2 mu),
                    relaxed sufficient decrease, coordinate-descent inner
                    solver with an iteration-count budget
* ``run_apqna``     accelerated variant with variable L-BFGS Hessians,
                    either enforcing sigma_k H_k <= sigma_{k-1} H_{k-1}
                    (strict) or setting theta = 1 and skipping it (relaxed)
* ``run_apqna_fh``  accelerated variant with a frozen base matrix,
                    H_k = (1/sigma_k) H, where the domination condition
                    holds automatically

The monotone drivers (pga, pqna) never increase F; the accelerated ones
need not be monotone.  All randomness flows through one seeded PCG64
generator per run, so traces are reproducible bit-for-bit apart from
the elapsed-time column.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .hessian import (
    CorrectionPairs,
    DiagLowRank,
    HessianModel,
    compile_compact,
    enforce_domination,
    estimate_extreme_eigenvalues,
    model_value,
)
from .problem import (
    CompositeProblem,
    l1_value,
    min_norm_subgradient,
    prox_l1_scaled_identity,
)
from .subsolver import (
    SubproblemBudget,
    budget_for_iteration,
    cd_minimize,
    exact_solve_oracle,
    solve_scaled_identity,
)

CONVERGED = "converged"
MAX_ITER = "max_iter"
BACKTRACK_FAILURE = "backtrack_failure"

SIGMA_UNDERFLOW = 1e-300

# Acceptance slack for the backtracking tests.  Near convergence
# F(p) and Q(p, .) agree to rounding error and the strict comparison
# becomes a coin flip whose rejections keep shrinking the step scalar;
# below this slack a violation is not measurable in double precision
# (dataset-scale sums carry ~1e-13 relative error).  The monotone
# drivers additionally require a measured descent, so their traces
# stay exactly nonincreasing and the step scalar recovers
# deterministically once steps round to zero.
ACCEPT_SLACK = 1e-12

# The descent guard tolerates a few ulps of summation wobble: candidate
# values at a regrown step can measure one ulp above F(x) even when the
# step is below rounding resolution, and rejecting those deadlocks the
# step-size recovery.
MONOTONE_SLACK = 8 * np.finfo(float).eps


def _accepts(f_new: float, f_old: float, q_val: float, eta: float,
             monotone: bool = False) -> bool:
    scale = max(1.0, abs(f_old))
    if monotone and f_new > f_old + MONOTONE_SLACK * scale:
        return False
    return f_new - f_old <= eta * (q_val - f_old) + ACCEPT_SLACK * scale


class SigmaUnderflowError(RuntimeError):
    """sigma collapsed below 1e-300: the alternating-Hessian pathology."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs shared by all drivers; defaults follow the benchmark protocol
    (lambda enters through the problem, not here)."""

    beta: float = 0.5
    eta: float = 0.5
    tol_rel: float = 1e-5
    max_outer: int = 20000
    sigma_growth: float = 1.015
    sigma_init: float = 1.0
    mu_init: float = 1.0
    mu_cap: float = 1e6
    warmup_kbar: int = 8
    backtrack_cap: int = 60
    memory: int = 10
    curvature_eps: float = 1e-8
    budget: SubproblemBudget = SubproblemBudget()
    seed: int = 0
    domination: str = "relaxed"
    dense_limit: int = 500
    subsolver: str = "cd"
    exact_tol: float = 1e-10
    diagnostics: bool = False
    eig_iterations: int = 400

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.sigma_growth < 1.0:
            raise ValueError("sigma_growth must be at least 1")
        if self.mu_init <= 0 or self.sigma_init <= 0:
            raise ValueError("initial step scalars must be positive")
        if self.domination not in ("strict", "relaxed"):
            raise ValueError("domination must be 'strict' or 'relaxed'")
        if self.subsolver not in ("cd", "exact"):
            raise ValueError("subsolver must be 'cd' or 'exact'")
        if self.warmup_kbar < 0 or self.max_outer < 1:
            raise ValueError("iteration counts must be positive")


@dataclass(frozen=True)
class TraceRecord:
    k: int
    fval: float
    subgrad_inf: float
    backtracks: int
    inner_iters: int
    step_scalar: float
    t_k: float
    elapsed_sec: float


@dataclass
class Trace:
    """Per-iteration log of one run; row k holds the iterate after k
    accepted outer iterations (row 0 is the starting point)."""

    algorithm: str
    records: list[TraceRecord] = field(default_factory=list)
    status: str = MAX_ITER
    diagnostics: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return self.records[-1].k

    def fvals(self) -> np.ndarray:
        return np.array([r.fval for r in self.records])

    def value_at(self, k: int) -> float:
        """F at iteration k, clamped to the final iterate for k past the end."""
        return self.records[min(k, len(self.records) - 1)].fval

    def final(self) -> TraceRecord:
        return self.records[-1]


def sufficient_decrease_holds(f_new: float, f_old: float, q_val: float,
                              eta: float) -> bool:
    """Relaxed acceptance: F_new - F_old <= eta * (Q - F_old)."""
    return f_new - f_old <= eta * (q_val - f_old)


def t_next(t_k: float, theta_k: float) -> float:
    """Momentum parameter update t_{k+1} = (1 + sqrt(1 + 4 theta t_k^2))/2."""
    if t_k < 0:
        raise ValueError("t_k must be nonnegative")
    if theta_k <= 0:
        raise ValueError("theta_k must be positive")
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta_k * t_k * t_k))


def momentum_point(x_k: np.ndarray, x_km1: np.ndarray, t_k: float,
                   t_kp1: float) -> np.ndarray:
    """Extrapolation y = x_k + ((t_k - 1)/t_{k+1}) (x_k - x_{k-1})."""
    if t_kp1 <= 0:
        raise ValueError("t_{k+1} must be positive")
    if x_k.shape != x_km1.shape:
        raise ValueError("iterate dimension mismatch")
    return x_k + ((t_k - 1.0) / t_kp1) * (x_k - x_km1)


def check_termination(problem: CompositeProblem, x_k: np.ndarray,
                      initial_subgrad_norm: float, tol_rel: float,
                      grad: np.ndarray | None = None) -> bool:
    """Relative min-norm-subgradient stopping rule."""
    if initial_subgrad_norm <= 0:
        raise ValueError("initial subgradient norm must be positive")
    return problem.subgradient_norm(x_k, grad) <= tol_rel * initial_subgrad_norm


def theoretical_linear_rate(gamma: float, big_m: float, eta: float) -> float:
    """rho = 1 - eta*gamma/(gamma + M), the strongly convex contraction."""
    if gamma <= 0 or big_m <= 0:
        raise ValueError("gamma and M must be positive")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    return 1.0 - eta * gamma / (gamma + big_m)


def _start_point(problem: CompositeProblem, x0: np.ndarray | None) -> np.ndarray:
    if x0 is None:
        return np.zeros(problem.n)
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (problem.n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({problem.n},)")
    return x0.copy()


def _subgrad_inf(grad: np.ndarray, x: np.ndarray, lam: float) -> float:
    return float(np.max(np.abs(min_norm_subgradient(grad, x, lam))))


def _q_mu(f_v: float, grad_v: np.ndarray, u: np.ndarray, v: np.ndarray,
          mu: float, lam: float) -> float:
    d = u - v
    return f_v + float(grad_v @ d) + float(d @ d) / (2.0 * mu) + l1_value(u, lam)


def _subsolve(model: HessianModel, grad_v: np.ndarray, v: np.ndarray,
              lam: float, r: int, config: OptimizerConfig,
              rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Inner solve of the composite quadratic model at v.

    A model with no low-rank part is a scaled identity, whose exact
    minimizer is the componentwise soft threshold; only genuinely
    coupled models go through coordinate descent (or the cyclic oracle
    when configured for exact subproblem solutions).
    """
    if model.p == 0:
        return solve_scaled_identity(model, grad_v, v, lam), 0
    if config.subsolver == "exact":
        return exact_solve_oracle(model, grad_v, v, lam, config.exact_tol,
                                  return_steps=True)
    return cd_minimize(model, grad_v, v, lam, r, rng,
                       step_eps=config.budget.step_eps, return_steps=True)


def run_pga(problem: CompositeProblem, config: OptimizerConfig,
            x0: np.ndarray | None = None) -> Trace:
    """Proximal gradient with backtracking; the step may grow again
    after each iteration (mu_{k+1}^0 = min(mu_k/beta, mu_cap))."""
    t0 = time.perf_counter()
    lam = problem.lam
    x = _start_point(problem, x0)
    fsm, grad = problem.value_and_grad(x)
    fval = fsm + l1_value(x, lam)
    norm0 = _subgrad_inf(grad, x, lam)
    mu = config.mu_init
    trace = Trace(algorithm="pga")
    trace.records.append(TraceRecord(0, fval, norm0, 0, 0, mu, 1.0,
                                     time.perf_counter() - t0))
    if norm0 == 0.0:
        trace.status = CONVERGED
        return trace
    for k in range(1, config.max_outer + 1):
        backtracks = 0
        while True:
            cand = prox_l1_scaled_identity(x - mu * grad, mu, lam)
            cand_f = problem.f_value(cand)
            cand_fval = cand_f + l1_value(cand, lam)
            if _accepts(cand_fval, fval, _q_mu(fsm, grad, cand, x, mu, lam),
                        1.0, monotone=True):
                break
            mu *= config.beta
            backtracks += 1
            if backtracks > config.backtrack_cap:
                trace.status = BACKTRACK_FAILURE
                return trace
        x, fsm, fval = cand, cand_f, cand_fval
        grad = problem.f_grad(x)
        norm = _subgrad_inf(grad, x, lam)
        trace.records.append(TraceRecord(k, fval, norm, backtracks, 0, mu, 1.0,
                                         time.perf_counter() - t0))
        if norm <= config.tol_rel * norm0:
            trace.status = CONVERGED
            return trace
        mu = min(mu / config.beta, config.mu_cap)
    return trace


def run_apga(problem: CompositeProblem, config: OptimizerConfig,
             x0: np.ndarray | None = None) -> Trace:
    """FISTA: model built at the momentum point; nonincreasing mu."""
    t0 = time.perf_counter()
    lam = problem.lam
    x_prev = _start_point(problem, x0)
    y = x_prev.copy()
    fy, gy = problem.value_and_grad(y)
    fval = fy + l1_value(y, lam)
    norm0 = _subgrad_inf(gy, y, lam)
    mu = config.mu_init
    t_k = 1.0
    trace = Trace(algorithm="apga")
    trace.records.append(TraceRecord(0, fval, norm0, 0, 0, mu, t_k,
                                     time.perf_counter() - t0))
    if norm0 == 0.0:
        trace.status = CONVERGED
        return trace
    for k in range(1, config.max_outer + 1):
        backtracks = 0
        while True:
            cand = prox_l1_scaled_identity(y - mu * gy, mu, lam)
            cand_f = problem.f_value(cand)
            cand_fval = cand_f + l1_value(cand, lam)
            if _accepts(cand_fval, fy + l1_value(y, lam),
                        _q_mu(fy, gy, cand, y, mu, lam), 1.0):
                break
            mu *= config.beta
            backtracks += 1
            if backtracks > config.backtrack_cap:
                trace.status = BACKTRACK_FAILURE
                return trace
        x = cand
        grad_x = problem.f_grad(x)
        norm = _subgrad_inf(grad_x, x, lam)
        trace.records.append(TraceRecord(k, cand_fval, norm, backtracks, 0, mu,
                                         t_k, time.perf_counter() - t0))
        if norm <= config.tol_rel * norm0:
            trace.status = CONVERGED
            return trace
        t_new = t_next(t_k, 1.0)
        y = momentum_point(x, x_prev, t_k, t_new)
        fy, gy = problem.value_and_grad(y)
        x_prev = x
        t_k = t_new
    return trace


def _shifted_model(core: DiagLowRank | None, shift: float, n: int) -> HessianModel:
    """H = G + shift*I; G = None stands for the zero matrix."""
    if core is None:
        return HessianModel.scaled_identity(shift, n)
    return HessianModel.lbfgs(core, diag_shift=shift)


def _pqna_engine(problem, config, hessian_mode, trace, t0, norm0, rng,
                 state, max_outer):
    """Iterations of the inexact proximal quasi-Newton loop.

    Mutates ``trace`` and ``state`` (x, fsm, fval, grad, pairs, mu,
    last_k) in place; returns a final status or None if ``max_outer``
    was reached without convergence or failure.
    """
    lam = problem.lam
    x = state["x"]
    fsm = state["fsm"]
    fval = state["fval"]
    grad = state["grad"]
    pairs = state["pairs"]
    mu = state["mu"]
    frozen = state.get("frozen")
    for k in range(state["last_k"] + 1, max_outer + 1):
        if hessian_mode == "zero":
            core = None
        elif hessian_mode == "fixed" and k > config.warmup_kbar:
            if frozen is None:
                frozen = compile_compact(pairs)
                state["frozen"] = frozen
            core = frozen
        else:
            core = compile_compact(pairs)
        r = budget_for_iteration(k, config.budget)
        backtracks = 0
        inner = 0
        while True:
            model = _shifted_model(core, 1.0 / (2.0 * mu), problem.n)
            u, steps = _subsolve(model, grad, x, lam, r, config, rng)
            inner += steps
            qval = model_value(model, u, x, fsm, grad, l1_value(u, lam))
            u_f = problem.f_value(u)
            u_fval = u_f + l1_value(u, lam)
            if _accepts(u_fval, fval, qval, config.eta, monotone=True):
                break
            mu *= config.beta
            backtracks += 1
            if backtracks > config.backtrack_cap:
                return BACKTRACK_FAILURE
        new_grad = problem.f_grad(u)
        if hessian_mode == "lbfgs" or (hessian_mode == "fixed"
                                       and k <= config.warmup_kbar):
            pairs.update(u - x, new_grad - grad)
        x, fsm, fval, grad = u, u_f, u_fval, new_grad
        norm = _subgrad_inf(grad, x, lam)
        trace.records.append(TraceRecord(k, fval, norm, backtracks, inner, mu,
                                         1.0, time.perf_counter() - t0))
        if config.diagnostics:
            m_est, big_m_est = estimate_extreme_eigenvalues(
                model, iterations=config.eig_iterations, seed=config.seed + k)
            trace.diagnostics.setdefault("eig_bounds", []).append(
                (k, m_est, big_m_est))
        state.update(x=x, fsm=fsm, fval=fval, grad=grad, mu=mu, last_k=k)
        if norm <= config.tol_rel * norm0:
            return CONVERGED
        mu = min(mu / config.beta, config.mu_cap)
        state["mu"] = mu
    return None


def run_pqna(problem: CompositeProblem, config: OptimizerConfig,
             hessian_mode: str = "lbfgs",
             x0: np.ndarray | None = None) -> Trace:
    """Inexact proximal quasi-Newton: H_k = G_k + I/(2 mu_k) with
    backtracking over mu under the relaxed sufficient decrease test.

    hessian_mode selects G_k: compact L-BFGS throughout ("lbfgs"),
    frozen after the first warmup_kbar iterations ("fixed"), or the
    zero matrix ("zero", in which case the driver reduces to run_pga
    with an effective step of 2 mu).  The inner solver starts at x_k,
    so accepted steps always decrease F.
    """
    if hessian_mode not in ("lbfgs", "fixed", "zero"):
        raise ValueError(f"unknown hessian_mode {hessian_mode!r}")
    t0 = time.perf_counter()
    lam = problem.lam
    x = _start_point(problem, x0)
    fsm, grad = problem.value_and_grad(x)
    fval = fsm + l1_value(x, lam)
    norm0 = _subgrad_inf(grad, x, lam)
    name = {"lbfgs": "pqna-lbfgs", "fixed": "pqna-fh", "zero": "pqna-zero"}
    trace = Trace(algorithm=name[hessian_mode])
    trace.records.append(TraceRecord(0, fval, norm0, 0, 0, config.mu_init, 1.0,
                                     time.perf_counter() - t0))
    if norm0 == 0.0:
        trace.status = CONVERGED
        return trace
    rng = np.random.default_rng(config.seed)
    state = dict(
        x=x, fsm=fsm, fval=fval, grad=grad, mu=config.mu_init, last_k=0,
        pairs=CorrectionPairs(problem.n, config.memory, config.curvature_eps),
    )
    status = _pqna_engine(problem, config, hessian_mode, trace, t0, norm0,
                          rng, state, config.max_outer)
    trace.status = status if status is not None else MAX_ITER
    return trace


def _cached_value_grad(problem, y, cache):
    key = y.tobytes()
    if key not in cache:
        cache[key] = problem.value_and_grad(y)
    return cache[key]


def run_apqna(problem: CompositeProblem, config: OptimizerConfig,
              domination_mode: str | None = None,
              x0: np.ndarray | None = None,
              model_factory=None) -> Trace:
    """Accelerated proximal quasi-Newton with per-iteration L-BFGS models.

    Backtracking multiplies H_k by 1/beta.  In strict mode sigma_k is
    then shrunk to the largest value keeping sigma_k H_k dominated by
    sigma_{k-1} H_{k-1} (dense generalized eigensolve, small n only)
    and the momentum bookkeeping (theta, t_k, y_k) is recomputed, which
    re-evaluates the gradient at the new y_k.  Relaxed mode fixes
    theta = 1 and skips the domination entirely.

    ``model_factory(k, pairs) -> HessianModel`` overrides the compact
    L-BFGS construction of the iteration-k model (used to study
    adversarial Hessian sequences such as alternating axis scalings).
    """
    mode = domination_mode or config.domination
    if mode not in ("strict", "relaxed"):
        raise ValueError("domination_mode must be 'strict' or 'relaxed'")
    t0 = time.perf_counter()
    lam = problem.lam
    x = _start_point(problem, x0)
    fsm, grad = problem.value_and_grad(x)
    fval = fsm + l1_value(x, lam)
    norm0 = _subgrad_inf(grad, x, lam)
    sigma = config.sigma_init
    trace = Trace(algorithm="apqna-lbfgs")
    trace.records.append(TraceRecord(0, fval, norm0, 0, 0, sigma, 1.0,
                                     time.perf_counter() - t0))
    if norm0 == 0.0:
        trace.status = CONVERGED
        return trace
    rng = np.random.default_rng(config.seed)
    pairs = CorrectionPairs(problem.n, config.memory, config.curvature_eps)

    # Accelerated clock: t_0 = 0 and x_{-1} = x_0 make the generic
    # recomputation formulas produce t_1 = 1 and y_1 = x_0.
    t_km1, t_k = 0.0, 1.0
    x_km2 = x.copy()
    x_km1 = x.copy()
    grad_prev = grad
    sigma_prev = config.sigma_init
    if model_factory is None:
        model_factory = lambda k, pairs: HessianModel.lbfgs(compile_compact(pairs))
    model = model_factory(1, pairs)
    model_prev = model
    theta_used = 1.0
    y = x.copy()
    fy, gy = fsm, grad
    sum_sqrt_sigma = 0.0
    prev_sigma_t2 = None
    trace.diagnostics["initial_model"] = (sigma, model.variant, model.core.delta,
                                          model.p)
    for k in range(1, config.max_outer + 1):
        r = budget_for_iteration(k, config.budget)
        backtracks = 0
        inner = 0
        grad_cache = {y.tobytes(): (fy, gy)}
        while True:
            u, steps = _subsolve(model, gy, y, lam, r, config, rng)
            inner += steps
            qval = model_value(model, u, y, fy, gy, l1_value(u, lam))
            u_f = problem.f_value(u)
            u_fval = u_f + l1_value(u, lam)
            if _accepts(u_fval, fy + l1_value(y, lam), qval, 1.0):
                break
            backtracks += 1
            if backtracks > config.backtrack_cap:
                trace.status = BACKTRACK_FAILURE
                return trace
            model = model.rescaled(1.0 / config.beta)
            if mode == "strict":
                feasible = enforce_domination(model, sigma_prev, model_prev,
                                              config.dense_limit)
                sigma = min(sigma, feasible)
                if sigma < SIGMA_UNDERFLOW:
                    raise SigmaUnderflowError(
                        f"sigma={sigma:.3e} at iteration {k}")
                theta_used = sigma_prev / sigma
                t_k = t_next(t_km1, theta_used)
                y = momentum_point(x_km1, x_km2, t_km1, t_k)
                fy, gy = _cached_value_grad(problem, y, grad_cache)
        x = u
        grad_x = problem.f_grad(x)
        norm = _subgrad_inf(grad_x, x, lam)
        trace.records.append(TraceRecord(k, u_fval, norm, backtracks, inner,
                                         sigma, t_k, time.perf_counter() - t0))
        sum_sqrt_sigma += math.sqrt(sigma)
        sigma_t2 = sigma * t_k * t_k
        trace.diagnostics.setdefault("lemma5", []).append(
            (k, sigma_t2 - (sum_sqrt_sigma / 2.0) ** 2))
        if prev_sigma_t2 is not None:
            premise = theta_used <= sigma_prev / sigma * (1.0 + 1e-12)
            trace.diagnostics.setdefault("as1", []).append(
                (k, prev_sigma_t2, sigma * t_k * (t_k - 1.0), premise))
        if norm <= config.tol_rel * norm0:
            trace.status = CONVERGED
            return trace
        pairs.update(x - x_km1, grad_x - grad_prev)
        model_prev = model
        sigma_prev = sigma
        prev_sigma_t2 = sigma_t2
        next_model = model_factory(k + 1, pairs)
        sigma_next = config.sigma_growth * sigma
        if mode == "strict":
            feasible = enforce_domination(next_model, sigma, model,
                                          config.dense_limit)
            sigma_next = min(sigma_next, feasible)
            if sigma_next < SIGMA_UNDERFLOW:
                raise SigmaUnderflowError(
                    f"sigma={sigma_next:.3e} at iteration {k + 1}")
            theta_used = sigma / sigma_next
        else:
            theta_used = 1.0
        t_new = t_next(t_k, theta_used)
        y = momentum_point(x, x_km1, t_k, t_new)
        fy, gy = problem.value_and_grad(y)
        x_km2, x_km1 = x_km1, x
        t_km1, t_k = t_k, t_new
        grad_prev = grad_x
        model = next_model
        sigma = sigma_next
    return trace


def run_apqna_fh(problem: CompositeProblem, config: OptimizerConfig,
                 base: DiagLowRank | None = None,
                 x0: np.ndarray | None = None) -> Trace:
    """Accelerated proximal quasi-Newton with a frozen base matrix.

    Without an explicit ``base`` the first warmup_kbar iterations run
    the L-BFGS quasi-Newton loop to collect correction pairs; the
    compact matrix built from them is then frozen and the accelerated
    phase continues from the warm iterate with H_k = (1/sigma_k) base.
    sigma backtracks by beta (recomputing theta, t_k, y_k) and regrows
    by sigma_growth after each acceptance; sigma_k H_k = base for all k,
    so the domination condition holds with equality.

    Passing ``base`` (e.g. the identity for the sigma_1 = 1, H_1 = I
    setting of the accelerated-rate guarantee) skips the warmup.
    """
    t0 = time.perf_counter()
    lam = problem.lam
    x = _start_point(problem, x0)
    fsm, grad = problem.value_and_grad(x)
    fval = fsm + l1_value(x, lam)
    norm0 = _subgrad_inf(grad, x, lam)
    trace = Trace(algorithm="apqna-fh")
    trace.records.append(TraceRecord(0, fval, norm0, 0, 0, config.sigma_init,
                                     1.0, time.perf_counter() - t0))
    if norm0 == 0.0:
        trace.status = CONVERGED
        return trace
    rng = np.random.default_rng(config.seed)

    k_start = 1
    if base is None:
        state = dict(
            x=x, fsm=fsm, fval=fval, grad=grad, mu=config.mu_init, last_k=0,
            pairs=CorrectionPairs(problem.n, config.memory,
                                  config.curvature_eps),
        )
        if config.warmup_kbar > 0:
            status = _pqna_engine(problem, config, "lbfgs", trace, t0, norm0,
                                  rng, state,
                                  min(config.warmup_kbar, config.max_outer))
            if status is not None:
                trace.status = status
                return trace
            x, fsm, fval, grad = (state["x"], state["fsm"], state["fval"],
                                  state["grad"])
            k_start = state["last_k"] + 1
        base = compile_compact(state["pairs"])
    trace.diagnostics["warmup_end"] = k_start - 1

    lemma6_bound = None
    if config.diagnostics and problem.lipschitz:
        m_est, _ = estimate_extreme_eigenvalues(
            HessianModel.lbfgs(base), iterations=config.eig_iterations,
            seed=config.seed)
        lemma6_bound = config.beta * m_est / problem.lipschitz

    t_km1, t_k = 0.0, 1.0
    x_km2 = x.copy()
    x_km1 = x.copy()
    sigma = config.sigma_init
    sigma_prev = config.sigma_init
    theta_used = 1.0
    y = x.copy()
    fy, gy = fsm, grad
    sum_sqrt_sigma = 0.0
    prev_sigma_t2 = None
    trace.diagnostics["initial_model"] = (sigma, "scaled_fixed", base.delta,
                                          base.p)
    for k in range(k_start, config.max_outer + 1):
        r = budget_for_iteration(k, config.budget)
        backtracks = 0
        inner = 0
        grad_cache = {y.tobytes(): (fy, gy)}
        while True:
            model = HessianModel.scaled_fixed(sigma, base)
            u, steps = _subsolve(model, gy, y, lam, r, config, rng)
            inner += steps
            qval = model_value(model, u, y, fy, gy, l1_value(u, lam))
            u_f = problem.f_value(u)
            u_fval = u_f + l1_value(u, lam)
            if _accepts(u_fval, fy + l1_value(y, lam), qval, 1.0):
                break
            backtracks += 1
            if backtracks > config.backtrack_cap:
                trace.status = BACKTRACK_FAILURE
                return trace
            sigma *= config.beta
            if sigma < SIGMA_UNDERFLOW:
                raise SigmaUnderflowError(f"sigma={sigma:.3e} at iteration {k}")
            theta_used = sigma_prev / sigma
            t_k = t_next(t_km1, theta_used)
            y = momentum_point(x_km1, x_km2, t_km1, t_k)
            fy, gy = _cached_value_grad(problem, y, grad_cache)
        x = u
        grad_x = problem.f_grad(x)
        norm = _subgrad_inf(grad_x, x, lam)
        trace.records.append(TraceRecord(k, u_fval, norm, backtracks, inner,
                                         sigma, t_k, time.perf_counter() - t0))
        sum_sqrt_sigma += math.sqrt(sigma)
        sigma_t2 = sigma * t_k * t_k
        trace.diagnostics.setdefault("lemma5", []).append(
            (k, sigma_t2 - (sum_sqrt_sigma / 2.0) ** 2))
        if lemma6_bound is not None:
            trace.diagnostics.setdefault("lemma6", []).append(
                (k, sigma - lemma6_bound))
        if prev_sigma_t2 is not None:
            premise = theta_used <= sigma_prev / sigma * (1.0 + 1e-12)
            trace.diagnostics.setdefault("as1", []).append(
                (k, prev_sigma_t2, sigma * t_k * (t_k - 1.0), premise))
        if norm <= config.tol_rel * norm0:
            trace.status = CONVERGED
            return trace
        sigma_prev = sigma
        prev_sigma_t2 = sigma_t2
        sigma_next = config.sigma_growth * sigma
        theta_used = sigma / sigma_next
        t_new = t_next(t_k, theta_used)
        y = momentum_point(x, x_km1, t_k, t_new)
        fy, gy = problem.value_and_grad(y)
        x_km2, x_km1 = x_km1, x
        t_km1, t_k = t_k, t_new
        sigma = sigma_next
        fsm, fval, grad = u_f, u_fval, grad_x
    return trace


ALGORITHMS: dict[str, Callable] = {
    "pga": run_pga,
    "apga": run_apga,
    "pqna-lbfgs": lambda p, c, x0=None: run_pqna(p, c, "lbfgs", x0),
    "pqna-fh": lambda p, c, x0=None: run_pqna(p, c, "fixed", x0),
    "apqna-lbfgs": run_apqna,
    "apqna-fh": run_apqna_fh,
}

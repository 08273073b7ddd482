"""Approximate-Hessian models: scaled identity, scaled fixed matrix, and
compact L-BFGS in diagonal-plus-low-rank form delta*I + Q W Q'.

All models are immutable once built; the correction-pair buffer is the
only mutable piece and is owned by a single optimizer run.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


class SingularCompactForm(RuntimeError):
    """Middle matrix of the compact form is numerically singular."""


class DenseLimitExceeded(ValueError):
    """Strict domination requested beyond the dense-solve size limit."""


class DiagLowRank:
    """delta*I + Q W Q' with Q of shape (n, p), W symmetric (p, p).

    p is at most twice the correction memory, so matvecs cost O(n p).
    """

    def __init__(self, delta: float, n: int,
                 q: np.ndarray | None = None, w: np.ndarray | None = None):
        if delta < 0:
            raise ValueError("diagonal coefficient must be nonnegative")
        self.delta = float(delta)
        self.n = int(n)
        if q is None or q.shape[1] == 0:
            self.q = np.zeros((n, 0))
            self.w = np.zeros((0, 0))
        else:
            if q.shape[0] != n:
                raise ValueError("factor rows must match dimension")
            self.q = np.asarray(q, dtype=np.float64)
            self.w = 0.5 * (np.asarray(w, dtype=np.float64) + np.asarray(w).T)
        # qw caches Q W for O(p) coordinate work in the subsolver.
        self.qw = self.q @ self.w
        self._diag = self.delta + np.einsum("ij,ij->i", self.qw, self.q)

    @property
    def p(self) -> int:
        return self.q.shape[1]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if self.p == 0:
            return self.delta * v
        return self.delta * v + self.qw @ (self.q.T @ v)

    def quad_form(self, d: np.ndarray) -> float:
        if self.p == 0:
            return float(self.delta * (d @ d))
        qd = self.q.T @ d
        return float(self.delta * (d @ d) + qd @ self.w @ qd)

    def diag(self) -> np.ndarray:
        return self._diag.copy()

    def dense(self) -> np.ndarray:
        a = self.delta * np.eye(self.n)
        if self.p:
            a += self.qw @ self.q.T
        return a

    def shifted(self, shift: float) -> "DiagLowRank":
        """Same low-rank part with delta increased by ``shift``."""
        return DiagLowRank(self.delta + shift, self.n, self.q, self.w)


class CorrectionPairs:
    """Ring buffer of admissible (s, y) correction pairs.

    A pair is stored only when s'y > curvature_eps * ||s|| ||y||, which
    keeps the compiled compact matrix positive definite.  Single-owner
    mutable state: one buffer per optimizer run.
    """

    def __init__(self, n: int, memory: int = 10, curvature_eps: float = 1e-8):
        if memory < 1:
            raise ValueError("memory must be at least 1")
        self.n = int(n)
        self.memory = int(memory)
        self.curvature_eps = float(curvature_eps)
        self._s: list[np.ndarray] = []
        self._y: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._s)

    def update(self, s: np.ndarray, y: np.ndarray) -> bool:
        """Append (s, y) if the curvature condition holds; report acceptance."""
        s = np.asarray(s, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if s.shape != (self.n,) or y.shape != (self.n,):
            raise ValueError("correction pair dimension mismatch")
        sy = float(s @ y)
        if sy <= self.curvature_eps * np.linalg.norm(s) * np.linalg.norm(y):
            return False
        self._s.append(s.copy())
        self._y.append(y.copy())
        if len(self._s) > self.memory:
            self._s.pop(0)
            self._y.pop(0)
        return True

    def drop_oldest(self) -> None:
        self._s.pop(0)
        self._y.pop(0)

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked S, Y with columns in chronological order."""
        return np.array(self._s).T, np.array(self._y).T


def lbfgs_update(pairs: CorrectionPairs, s: np.ndarray, y: np.ndarray) -> CorrectionPairs:
    """Functional wrapper over :meth:`CorrectionPairs.update`."""
    pairs.update(s, y)
    return pairs


def compile_compact(pairs: CorrectionPairs) -> DiagLowRank:
    """Compact L-BFGS B-matrix from the stored pairs.

    B = delta*I + Q W Q' with delta = y'y / s'y of the newest pair,
    Q = [delta*S  Y] and W = -inv([[delta*S'S, L], [L', -D]]) where L is
    the strictly lower part of S'Y and D its diagonal.  Equals the
    classical BFGS recursion started from delta*I.  A numerically
    singular middle matrix drops the oldest pair and retries; with no
    pairs the identity (delta = 1) is returned.
    """
    while True:
        if len(pairs) == 0:
            return DiagLowRank(1.0, pairs.n)
        s_mat, y_mat = pairs.pairs()
        sy_newest = float(s_mat[:, -1] @ y_mat[:, -1])
        delta = float(y_mat[:, -1] @ y_mat[:, -1]) / sy_newest
        sty = s_mat.T @ y_mat
        m = sty.shape[0]
        lower = np.tril(sty, k=-1)
        middle = np.block([
            [delta * (s_mat.T @ s_mat), lower],
            [lower.T, -np.diag(np.diag(sty))],
        ])
        try:
            w = -np.linalg.inv(middle)
            if not np.all(np.isfinite(w)) or np.linalg.cond(middle) > 1e14:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            if len(pairs) == 1:
                raise SingularCompactForm(
                    "single correction pair yields a singular compact form"
                )
            pairs.drop_oldest()
            continue
        q = np.hstack([delta * s_mat, y_mat])
        return DiagLowRank(delta, pairs.n, q, w)


SCALED_IDENTITY = "scaled_identity"
SCALED_FIXED = "scaled_fixed"
LBFGS_COMPACT = "lbfgs_compact"


class HessianModel:
    """H = scale * (delta*I + Q W Q') with a variant tag.

    scaled_identity : H = coeff * I (coeff = 1/mu)
    scaled_fixed    : H = (1/sigma) * base
    lbfgs_compact   : H = compact L-BFGS matrix, optionally diag-shifted
    """

    def __init__(self, variant: str, core: DiagLowRank, scale: float = 1.0):
        if scale <= 0:
            raise ValueError("scale must be positive")
        if core.delta <= 0 and core.p == 0:
            raise ValueError("model must be positive definite")
        self.variant = variant
        self.core = core
        self.scale = float(scale)

    @classmethod
    def scaled_identity(cls, coeff: float, n: int) -> "HessianModel":
        if coeff <= 0:
            raise ValueError("identity coefficient must be positive")
        return cls(SCALED_IDENTITY, DiagLowRank(1.0, n), scale=coeff)

    @classmethod
    def scaled_fixed(cls, sigma: float, base: DiagLowRank) -> "HessianModel":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls(SCALED_FIXED, base, scale=1.0 / sigma)

    @classmethod
    def lbfgs(cls, core: DiagLowRank, diag_shift: float = 0.0) -> "HessianModel":
        return cls(LBFGS_COMPACT, core.shifted(diag_shift) if diag_shift else core)

    @property
    def n(self) -> int:
        return self.core.n

    @property
    def p(self) -> int:
        return self.core.p

    def rescaled(self, factor: float) -> "HessianModel":
        return HessianModel(self.variant, self.core, self.scale * factor)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n,):
            raise ValueError(f"vector has shape {v.shape}, expected ({self.n},)")
        return self.scale * self.core.matvec(v)

    def quad_form(self, d: np.ndarray) -> float:
        return self.scale * self.core.quad_form(d)

    def diag(self) -> np.ndarray:
        return self.scale * self.core.diag()

    def diag_element(self, j: int) -> float:
        if not 0 <= j < self.n:
            raise IndexError(f"coordinate {j} out of range [0, {self.n})")
        return float(self.scale * self.core._diag[j])

    def dense(self) -> np.ndarray:
        return self.scale * self.core.dense()

    def cd_parts(self) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        """(eff_delta, Q, scale*QW, diag) as consumed by the subsolver."""
        return (
            self.scale * self.core.delta,
            self.core.q,
            self.scale * self.core.qw,
            self.scale * self.core._diag,
        )


def apply(model: HessianModel, v: np.ndarray) -> np.ndarray:
    return model.apply(v)


def diag_element(model: HessianModel, j: int) -> float:
    return model.diag_element(j)


def model_value(
    model: HessianModel,
    u: np.ndarray,
    v: np.ndarray,
    f_v: float,
    grad_v: np.ndarray,
    g_of_u: float,
) -> float:
    """Composite quadratic f(v) + <grad, u-v> + 0.5||u-v||_H^2 + g(u)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.shape != grad_v.shape:
        raise ValueError("dimension mismatch in model evaluation")
    d = u - v
    return f_v + float(grad_v @ d) + 0.5 * model.quad_form(d) + g_of_u


def estimate_extreme_eigenvalues(
    model: HessianModel, iterations: int = 500, seed: int = 0
) -> tuple[float, float]:
    """Best-effort (lambda_min, lambda_max) bounds via power iteration.

    The largest eigenvalue comes from plain power iteration; the
    smallest from power iteration on c*I - H with c slightly above the
    largest-eigenvalue estimate (inverse-free).  Estimates are rounded
    outward by 1% so the pair brackets the true extremes once the
    iteration has roughly converged.
    """
    rng = np.random.default_rng(seed)
    n = model.n

    def power(matvec) -> float:
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(iterations):
            hv = matvec(v)
            lam = float(v @ hv)
            norm = np.linalg.norm(hv)
            if norm == 0.0:
                return 0.0
            v = hv / norm
        return lam

    lam_max = power(model.apply)
    shift = lam_max * 1.01 + 1e-12
    lam_min = shift - power(lambda v: shift * v - model.apply(v))
    return lam_min * 0.99, lam_max * 1.01


def enforce_domination(
    h_new: HessianModel,
    sigma_prev: float,
    h_prev: HessianModel,
    dense_limit: int = 500,
) -> float:
    """Largest sigma with sigma*H_new <= sigma_prev*H_prev (matrix order).

    Computed as sigma_prev times the smallest generalized eigenvalue of
    the (H_prev, H_new) pencil via a dense solve, so the dimension must
    not exceed ``dense_limit``; larger problems should run in relaxed
    mode instead.
    """
    if h_new.n != h_prev.n:
        raise ValueError("models must share a dimension")
    if h_new.n > dense_limit:
        raise DenseLimitExceeded(
            f"n={h_new.n} exceeds dense_limit={dense_limit}; use relaxed mode"
        )
    if sigma_prev <= 0:
        raise ValueError("sigma_prev must be positive")
    eigs = scipy.linalg.eigh(
        h_prev.dense(), h_new.dense(), eigvals_only=True
    )
    return float(sigma_prev * eigs[0])

"""Experiment runner and verification suites behind the CLI.

Reproduces the benchmark protocol (start at zero, lambda = 1e-3,
relative subgradient termination), writes per-iteration traces as CSV,
assembles comparison tables, and executes the cross-module invariant
checks.  CSV is the machine contract; reports are regenerable
byte-identically from stored trace files.
"""

from __future__ import annotations

import configparser
import io
import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _oracles
from .dataset import read_libsvm, synthesize_quadratic
from .hessian import (
    CorrectionPairs,
    HessianModel,
    compile_compact,
    enforce_domination,
    estimate_extreme_eigenvalues,
    model_value,
)
from .optimizers import (
    ALGORITHMS,
    OptimizerConfig,
    Trace,
    TraceRecord,
    run_apga,
    run_apqna_fh,
    run_pga,
    run_pqna,
    theoretical_linear_rate,
)
from .problem import (
    CompositeProblem,
    l1_value,
    logistic_problem,
    min_norm_subgradient,
    prox_l1_scaled_identity,
    quadratic_problem,
    soft_threshold,
)
from .subsolver import (
    CdWorkspace,
    cd_minimize,
    exact_solve_oracle,
    phi_constant,
)

TRACE_HEADER = "k,fval,subgrad_inf,backtracks,inner_iters,step_scalar,t_k,elapsed_sec"


def emit_trace_csv(trace: Trace, path: str) -> None:
    """Write one row per iteration; floats carry 17 significant digits
    so a read back recovers them bit-exactly."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(TRACE_HEADER + "\n")
        for r in trace.records:
            fh.write(
                f"{r.k},{r.fval:.17g},{r.subgrad_inf:.17g},{r.backtracks},"
                f"{r.inner_iters},{r.step_scalar:.17g},{r.t_k:.17g},"
                f"{r.elapsed_sec:.17g}\n"
            )


def read_trace_csv(path: str, algorithm: str = "") -> Trace:
    trace = Trace(algorithm=algorithm or os.path.basename(path).split(".")[0])
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected trace header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            trace.records.append(TraceRecord(
                k=int(parts[0]), fval=float(parts[1]),
                subgrad_inf=float(parts[2]), backtracks=int(parts[3]),
                inner_iters=int(parts[4]), step_scalar=float(parts[5]),
                t_k=float(parts[6]), elapsed_sec=float(parts[7]),
            ))
    if not trace.records:
        raise ValueError(f"{path}: empty trace")
    return trace


# ---------------------------------------------------------------------------
# Experiment specification


_CONFIG_KEYS = {
    "beta": ("beta", float),
    "eta": ("eta", float),
    "tol": ("tol_rel", float),
    "max_iters": ("max_outer", int),
    "sigma_growth": ("sigma_growth", float),
    "sigma_init": ("sigma_init", float),
    "mu_init": ("mu_init", float),
    "mu_cap": ("mu_cap", float),
    "warmup": ("warmup_kbar", int),
    "backtrack_cap": ("backtrack_cap", int),
    "memory": ("memory", int),
    "curvature_eps": ("curvature_eps", float),
    "seed": ("seed", int),
    "domination": ("domination", str),
    "dense_limit": ("dense_limit", int),
    "subsolver": ("subsolver", str),
    "exact_tol": ("exact_tol", float),
}
_BUDGET_KEYS = {
    "inner_cap": ("cap", int),
    "inner_divisor": ("divisor", float),
    "inner_floor": ("floor", int),
    "step_eps": ("step_eps", float),
}


def build_config(overrides: dict[str, str],
                 base: OptimizerConfig | None = None) -> OptimizerConfig:
    """Apply flat key=value overrides (CLI/spec-file names) to a config."""
    cfg = base or OptimizerConfig()
    kwargs = {}
    budget_kwargs = {}
    for key, raw in overrides.items():
        key = key.replace("-", "_")
        if key in _CONFIG_KEYS:
            name, typ = _CONFIG_KEYS[key]
            kwargs[name] = typ(raw)
        elif key in _BUDGET_KEYS:
            name, typ = _BUDGET_KEYS[key]
            budget_kwargs[name] = typ(raw)
        else:
            raise ValueError(f"unknown configuration key {key!r}")
    if budget_kwargs:
        kwargs["budget"] = replace(cfg.budget, **budget_kwargs)
    return replace(cfg, **kwargs) if kwargs else cfg


@dataclass
class ExperimentSpec:
    """One benchmark run: a problem source, algorithms, and overrides."""

    algorithms: list[str]
    lam: float = 1e-3
    dataset_path: str | None = None
    positive_class: str | None = None
    n_features: int | None = None
    synthetic: dict | None = None
    output_dir: str = "."
    checkpoints: list[int] | None = None
    common: dict[str, str] = field(default_factory=dict)
    overrides: dict[str, dict[str, str]] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms: {unknown}")
        if (self.dataset_path is None) == (self.synthetic is None):
            raise ValueError("exactly one of dataset/synthetic must be given")
        if self.checkpoints is not None:
            if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
                raise ValueError("checkpoints must be strictly increasing")


def _parse_synthetic(text: str) -> dict:
    out = {"n": 50, "gamma": 0.1, "l_target": 10.0, "seed": 0}
    for item in text.replace(",", " ").split():
        key, _, val = item.partition("=")
        key = key.strip().lower()
        if key == "n":
            out["n"] = int(val)
        elif key == "gamma":
            out["gamma"] = float(val)
        elif key in ("l", "l_target", "lmax"):
            out["l_target"] = float(val)
        elif key == "seed":
            out["seed"] = int(val)
        else:
            raise ValueError(f"unknown synthetic parameter {key!r}")
    return out


def parse_experiment_spec(path: str) -> ExperimentSpec:
    """Flat key = value sections: [experiment] plus one optional section
    per algorithm with config overrides."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read experiment spec {path!r}")
    if "experiment" not in parser:
        raise ValueError(f"{path}: missing [experiment] section")
    exp = dict(parser["experiment"])
    algorithms = [a.strip() for a in exp.pop("algorithms", "").split(",") if a.strip()]
    spec = ExperimentSpec(algorithms=algorithms)
    if "lambda" in exp:
        spec.lam = float(exp.pop("lambda"))
    if "dataset" in exp:
        spec.dataset_path = exp.pop("dataset")
    if "positive_class" in exp:
        spec.positive_class = exp.pop("positive_class")
    if "n_features" in exp:
        spec.n_features = int(exp.pop("n_features"))
    if "synthetic" in exp:
        spec.synthetic = _parse_synthetic(exp.pop("synthetic"))
    if "output_dir" in exp:
        spec.output_dir = exp.pop("output_dir")
    if "checkpoints" in exp:
        spec.checkpoints = [int(c) for c in exp.pop("checkpoints").split(",")]
    spec.common = exp
    for section in parser.sections():
        if section == "experiment":
            continue
        if section not in ALGORITHMS:
            raise ValueError(f"{path}: unknown algorithm section [{section}]")
        spec.overrides[section] = dict(parser[section])
    spec.validate()
    return spec


def build_problem(spec: ExperimentSpec) -> CompositeProblem:
    if spec.dataset_path is not None:
        ds = read_libsvm(spec.dataset_path, spec.positive_class, spec.n_features)
        return logistic_problem(ds, spec.lam)
    quad = synthesize_quadratic(
        spec.synthetic["n"], spec.synthetic["gamma"],
        spec.synthetic["l_target"], spec.synthetic["seed"],
    )
    return quadratic_problem(quad, spec.lam)


# ---------------------------------------------------------------------------
# Comparison report


@dataclass
class ReportRow:
    algorithm: str
    values: list[tuple[int, float]]
    final_iter: int
    final_fval: float
    elapsed_sec: float


@dataclass
class ComparisonReport:
    checkpoints: list[int]
    rows: list[ReportRow]

    def to_text(self) -> str:
        heads = ["algorithm"]
        for c in self.checkpoints:
            heads += ["iter", f"Fval@{c}"]
        heads += ["iter", "Fval(final)", "time(s)"]
        lines = ["  ".join(f"{h:>14s}" for h in heads)]
        for row in self.rows:
            cells = [f"{row.algorithm:>14s}"]
            for it, fv in row.values:
                cells += [f"{it:>14d}", f"{fv:>14.6e}"]
            cells += [f"{row.final_iter:>14d}", f"{row.final_fval:>14.6e}",
                      f"{row.elapsed_sec:>14.3e}"]
            lines.append("  ".join(cells))
        return "\n".join(lines) + "\n"

    def to_csv_text(self) -> str:
        out = io.StringIO()
        out.write("algorithm,kind,iter,fval,elapsed_sec\n")
        for row in self.rows:
            for it, fv in row.values:
                out.write(f"{row.algorithm},checkpoint,{it},{fv:.17g},\n")
            out.write(
                f"{row.algorithm},final,{row.final_iter},"
                f"{row.final_fval:.17g},{row.elapsed_sec:.17g}\n"
            )
        return out.getvalue()


def assemble_report(traces: list[Trace],
                    checkpoints: list[int] | None = None) -> ComparisonReport:
    """Pure function of traces; default checkpoints are the thirds of the
    slowest run, mirroring the three-column benchmark tables."""
    if not traces:
        raise ValueError("no traces to report on")
    if checkpoints is None:
        slowest = max(t.iterations for t in traces)
        checkpoints = sorted({max(1, math.ceil(slowest / 3)),
                              max(1, math.ceil(2 * slowest / 3)),
                              max(1, slowest)})
    rows = []
    for t in traces:
        vals = [(min(c, t.iterations), t.value_at(c)) for c in checkpoints]
        rows.append(ReportRow(
            algorithm=t.algorithm,
            values=vals,
            final_iter=t.iterations,
            final_fval=t.final().fval,
            elapsed_sec=t.final().elapsed_sec,
        ))
    return ComparisonReport(checkpoints=list(checkpoints), rows=rows)


def run_experiment(spec: ExperimentSpec) -> tuple[ComparisonReport, dict[str, Trace]]:
    """Run every algorithm in the spec from the zero start and write
    trace CSVs plus the text/CSV report into the output directory."""
    spec.validate()
    problem = build_problem(spec)
    os.makedirs(spec.output_dir, exist_ok=True)
    traces: dict[str, Trace] = {}
    for alg in spec.algorithms:
        cfg = build_config(spec.common)
        cfg = build_config(spec.overrides.get(alg, {}), cfg)
        try:
            trace = ALGORITHMS[alg](problem, cfg)
        except Exception as exc:
            raise RuntimeError(f"{alg}: {exc}") from exc
        if trace.status == "backtrack_failure":
            raise RuntimeError(f"{alg}: backtracking failed (broken oracle?)")
        traces[alg] = trace
        emit_trace_csv(trace, os.path.join(spec.output_dir, f"{alg}.trace.csv"))
    report = assemble_report(list(traces.values()), spec.checkpoints)
    with open(os.path.join(spec.output_dir, "report.txt"), "w") as fh:
        fh.write(report.to_text())
    with open(os.path.join(spec.output_dir, "report.csv"), "w") as fh:
        fh.write(report.to_csv_text())
    return report, traces


# ---------------------------------------------------------------------------
# Rate diagnostics


def tolerance_induced_gap(trace: Trace, gamma: float, n: int) -> float:
    """Upper bound on F(x_final) - F* implied by the stopping rule.

    Strong convexity gives F(x) - F* <= ||xi||_2^2 / (2 gamma) for any
    subgradient xi; the trace stores the inf-norm, bounded by sqrt(n)
    times the 2-norm the inequality needs.
    """
    if gamma <= 0:
        raise ValueError("needs a positive strong-convexity estimate")
    return n * trace.final().subgrad_inf ** 2 / (2.0 * gamma)


def final_value_consistency(traces: list[Trace], gamma: float,
                            n: int) -> list[tuple[str, str, float, float]]:
    """Pairs of runs whose final objectives differ by more than ten
    times the larger tolerance-induced gap (empty when all consistent)."""
    bad = []
    for i, a in enumerate(traces):
        for b in traces[i + 1:]:
            gap = max(tolerance_induced_gap(a, gamma, n),
                      tolerance_induced_gap(b, gamma, n))
            diff = abs(a.final().fval - b.final().fval)
            if diff > 10.0 * gap:
                bad.append((a.algorithm, b.algorithm, diff, gap))
    return bad


@dataclass
class RateDiagnostics:
    fitted_ratio: float
    thm1_violations: list[int] | None = None
    thm6_violations: list[int] | None = None
    envelope_violations: list[int] | None = None


def rate_diagnostics(trace: Trace, reference_fstar: float,
                     rho: float | None = None,
                     dist0_sq: float | None = None,
                     skip: int = 0) -> RateDiagnostics:
    """Fit the tail geometric ratio of F(x_k) - F* and check the linear
    and accelerated envelopes when their constants are supplied.

    ``rho`` enables the strongly convex check gap_k <= rho^k gap_0;
    ``dist0_sq`` = ||x_0 - x*||^2 enables both the fixed-Hessian bound
    dist0_sq / (2 sigma_k t_k^2) (sigma, t read from the trace) and the
    1/k^2 envelope 2 dist0_sq / (mu_k (k+1)^2).  ``skip`` ignores the
    first rows (e.g. a warmup phase).
    """
    records = trace.records
    if len(records) < 10:
        raise ValueError("trace too short for rate fitting (need >= 10 rows)")
    if reference_fstar > min(r.fval for r in records) + 1e-12:
        raise ValueError("reference F* exceeds the best trace value")
    gaps = np.array([r.fval - reference_fstar for r in records])
    ks = np.array([r.k for r in records])

    tail = slice(len(records) // 2, None)
    pos = gaps[tail] > 0
    if np.sum(pos) >= 2:
        slope = np.polyfit(ks[tail][pos], np.log(gaps[tail][pos]), 1)[0]
        fitted = float(np.exp(slope))
    else:
        fitted = 0.0

    diag = RateDiagnostics(fitted_ratio=fitted)
    if rho is not None:
        gap0 = gaps[0]
        diag.thm1_violations = [
            int(r.k) for r, g in zip(records, gaps)
            if r.k > skip and g > rho ** r.k * gap0
        ]
    if dist0_sq is not None:
        thm6 = []
        env = []
        for r, g in zip(records, gaps):
            if r.k <= skip or r.k == 0:
                continue
            kk = r.k - skip
            if g > dist0_sq / (2.0 * r.step_scalar * r.t_k * r.t_k):
                thm6.append(int(r.k))
            if g > 2.0 * dist0_sq / (r.step_scalar * (kk + 1) ** 2):
                env.append(int(r.k))
        diag.thm6_violations = thm6
        diag.envelope_violations = env
    return diag


# ---------------------------------------------------------------------------
# Verification suite


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


@dataclass
class VerifyReport:
    results: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_text(self) -> str:
        lines = []
        for r in self.results:
            mark = "PASS" if r.passed else "FAIL"
            lines.append(f"{mark}  {r.name:<38s} ({r.seconds:6.2f}s)  {r.detail}")
        lines.append(f"{'OK' if self.passed else 'FAILED'}: "
                     f"{sum(r.passed for r in self.results)}/{len(self.results)} checks")
        return "\n".join(lines) + "\n"


def _random_sparse_dataset(rng, m=40, n=12, density=0.5):
    from scipy.sparse import random as sprandom
    from .dataset import Dataset
    mat = sprandom(m, n, density=density, random_state=np.random.RandomState(
        rng.integers(2**31)), format="csr")
    mat.data = rng.standard_normal(mat.nnz)
    labels = np.where(rng.standard_normal(m) > 0, 1.0, -1.0)
    return Dataset(mat, labels)


def _random_compact_model(rng, n, n_pairs, memory=10):
    quad = synthesize_quadratic(n, 0.5, 5.0, int(rng.integers(2**31)))
    pairs = CorrectionPairs(n, memory=memory)
    x = rng.standard_normal(n)
    for _ in range(n_pairs):
        s = rng.standard_normal(n) * 0.3
        y = quad.matvec(s)
        pairs.update(s, y)
        x = x + s
    return compile_compact(pairs), pairs


def _check_gradient_fd(level, rng):
    worst = 0.0
    ds = _random_sparse_dataset(rng)
    prob_log = logistic_problem(ds, 1e-3)
    quad = synthesize_quadratic(15, 0.2, 8.0, 3)
    prob_quad = quadratic_problem(quad, 1e-3)
    for prob in (prob_log, prob_quad):
        for _ in range(5):
            w = rng.standard_normal(prob.n)
            g = prob.f_grad(w)
            for _ in range(20):
                d = rng.standard_normal(prob.n)
                d /= np.linalg.norm(d)
                fd = _oracles.directional_derivative(prob.f_value, w, d)
                denom = max(1.0, abs(fd))
                worst = max(worst, abs(fd - g @ d) / denom)
    return worst <= 1e-6, f"max relative gradient error {worst:.2e}"


def _check_soft_threshold_golden(level, rng):
    cases = 1000 if level == "full" else 400
    worst = 0.0
    for _ in range(cases):
        v = float(rng.standard_normal() * 3)
        tau = float(abs(rng.standard_normal()))
        ref = _oracles.prox_scalar_reference(v, tau)
        worst = max(worst, abs(soft_threshold(v, tau) - ref))
    return worst <= 1e-8, f"max |closed form - golden section| = {worst:.2e}"


def _check_coordinate_step_golden(level, rng):
    cases = 1000 if level == "full" else 400
    worst = 0.0
    for _ in range(cases):
        a = float(abs(rng.standard_normal()) + 0.1)
        b = float(rng.standard_normal() * 2)
        u_j = float(rng.standard_normal())
        lam = float(abs(rng.standard_normal()))
        z_closed = soft_threshold(u_j - b / a, lam / a) - u_j
        z_ref = _oracles.coordinate_step_reference(a, b, u_j, lam)
        worst = max(worst, abs(z_closed - z_ref))
    return worst <= 1e-8, f"max coordinate-step deviation {worst:.2e}"


def _check_prox_optimality(level, rng):
    trials = 60 if level == "full" else 25
    for _ in range(trials):
        n = 8
        v = rng.standard_normal(n) * 2
        mu = float(abs(rng.standard_normal()) + 0.1)
        lam = float(abs(rng.standard_normal()))
        u = prox_l1_scaled_identity(v, mu, lam)

        def obj(w):
            return l1_value(w, lam) + float((w - v) @ (w - v)) / (2 * mu)

        base = obj(u)
        for j in range(n):
            for eps in (1e-4, -1e-4):
                w = u.copy()
                w[j] += eps
                if obj(w) < base - 1e-15:
                    return False, f"perturbation at coordinate {j} improved prox"
    return True, "prox stationary under +-1e-4 perturbations"


def _polish_minimizer(problem, iterations=30000):
    """High-accuracy minimizer by fixed-step proximal gradient."""
    mu = 1.0 / (problem.lipschitz or 1.0)
    x = np.zeros(problem.n)
    for _ in range(iterations):
        x = prox_l1_scaled_identity(x - mu * problem.f_grad(x), mu, problem.lam)
    return x


def _check_minnorm_fixed_point(level, rng):
    quad = synthesize_quadratic(12, 0.3, 4.0, 11)
    prob = quadratic_problem(quad, 0.05)
    xstar = _polish_minimizer(prob, 5000)
    for x, should_be_zero in ((xstar, True),
                              (xstar + 0.01 * rng.standard_normal(12), False)):
        g = prob.f_grad(x)
        norm = float(np.max(np.abs(min_norm_subgradient(g, x, prob.lam))))
        resid = float(np.linalg.norm(
            x - prox_l1_scaled_identity(x - g, 1.0, prob.lam)))
        if should_be_zero and not (norm <= 1e-9 and resid <= 1e-9):
            return False, f"optimal point: norm={norm:.1e} resid={resid:.1e}"
        if not should_be_zero and (norm <= 1e-10) != (resid <= 1e-10):
            return False, "min-norm zero and prox fixed point disagree"
    return True, "min-norm subgradient zero iff prox fixed point"


def _check_compact_vs_dense(level, rng):
    cases = 100 if level == "full" else 30
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(5, 51))
        memory = int(rng.integers(1, 11))
        n_pairs = int(rng.integers(1, memory + 4))
        core, pairs = _random_compact_model(rng, n, n_pairs, memory)
        s_mat, y_mat = pairs.pairs()
        dense = _oracles.dense_bfgs_matrix(s_mat, y_mat, core.delta)
        model = HessianModel.lbfgs(core)
        for _ in range(5):
            v = rng.standard_normal(n)
            ref = dense @ v
            err = np.linalg.norm(model.apply(v) - ref) / max(1.0, np.linalg.norm(ref))
            worst = max(worst, err)
        for _ in range(50):
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            ray = float(v @ model.apply(v))
            if ray < 1e-12:
                return False, f"compiled model lost positive definiteness ({ray:.1e})"
        j = int(rng.integers(n))
        e = np.zeros(n)
        e[j] = 1.0
        if abs(model.diag_element(j) - float(e @ model.apply(e))) > 1e-10:
            return False, "diag_element inconsistent with apply"
    return worst <= 1e-8, f"max matvec relative error {worst:.2e}"


def _check_cd_monotone(level, rng):
    n = 15
    core, _ = _random_compact_model(rng, n, 5)
    model = HessianModel.lbfgs(core)
    for seed in range(5 if level == "fast" else 20):
        grad_v = rng.standard_normal(n)
        v = rng.standard_normal(n)
        lam = 0.3
        ws = CdWorkspace(model, grad_v, v, lam)
        local_rng = np.random.default_rng(seed)

        def qval(u):
            return model_value(model, u, v, 0.0, grad_v, l1_value(u, lam))

        prev = qval(ws.u)
        for j in local_rng.integers(0, n, size=300):
            ws.step(int(j))
            cur = qval(ws.u)
            if cur > prev + 1e-12:
                return False, f"Q increased by {cur - prev:.2e}"
            prev = cur
        if ws.cache_error() > 1e-10:
            return False, f"cache drifted {ws.cache_error():.2e}"
    return True, "Q_H nonincreasing along coordinate steps; cache exact"


def _check_cd_vs_exact(level, rng):
    n = 20
    worst = 0.0
    for seed in range(3 if level == "fast" else 8):
        core, _ = _random_compact_model(rng, n, 6)
        model = HessianModel.lbfgs(core)
        grad_v = rng.standard_normal(n)
        v = rng.standard_normal(n)
        lam = 0.2
        ustar = exact_solve_oracle(model, grad_v, v, lam, 1e-12)
        qstar = model_value(model, ustar, v, 0.0, grad_v, l1_value(ustar, lam))
        u = cd_minimize(model, grad_v, v, lam, 5000, seed=seed)
        q = model_value(model, u, v, 0.0, grad_v, l1_value(u, lam))
        worst = max(worst, q - qstar)
    return worst <= 1e-6, f"max Q gap after 5000 steps {worst:.2e}"


def _check_cd_rate(level, rng):
    import scipy.linalg
    n = 20
    if level == "full":
        instances, n_seeds, rs = 100, 200, (100,)
    else:
        instances, n_seeds, rs = 2, 60, (20, 100)
    for _ in range(instances):
        core, _ = _random_compact_model(rng, n, 6)
        model = HessianModel.lbfgs(core)
        eigs = scipy.linalg.eigvalsh(model.dense())
        alpha_n = 1.0 - (1.0 - phi_constant(eigs[0], eigs[-1])) / n
        grad_v = rng.standard_normal(n)
        v = rng.standard_normal(n)
        lam = 0.2
        ustar = exact_solve_oracle(model, grad_v, v, lam, 1e-12)
        qstar = model_value(model, ustar, v, 0.0, grad_v, l1_value(ustar, lam))
        q0 = model_value(model, v, v, 0.0, grad_v, l1_value(v, lam))
        for r in rs:
            ratios = []
            for seed in range(n_seeds):
                u = cd_minimize(model, grad_v, v, lam, r, seed=seed)
                q = model_value(model, u, v, 0.0, grad_v, l1_value(u, lam))
                ratios.append((q - qstar) / (q0 - qstar))
            mean = float(np.mean(ratios))
            bound = 1.10 * alpha_n ** r
            if mean > bound:
                return False, f"r={r}: mean ratio {mean:.3e} > bound {bound:.3e}"
    return True, (f"mean contraction within 1.10 of the alpha_n^r rate "
                  f"({instances} instances x {n_seeds} seeds)")


def _check_eig_estimator(level, rng):
    import scipy.linalg
    for trial in range(3 if level == "fast" else 8):
        n = int(rng.integers(20, 201))
        core, _ = _random_compact_model(rng, n, 6)
        model = HessianModel.lbfgs(core)
        m_est, big_m = estimate_extreme_eigenvalues(model, iterations=800,
                                                    seed=trial)
        eigs = scipy.linalg.eigvalsh(model.dense())
        if not (m_est <= eigs[0] * 1.05 and big_m >= eigs[-1] * 0.95):
            return False, (f"bounds ({m_est:.4g},{big_m:.4g}) miss "
                           f"spectrum ({eigs[0]:.4g},{eigs[-1]:.4g})")
    return True, "power-iteration bounds bracket the dense spectrum"


def _check_domination(level, rng):
    from .hessian import DiagLowRank
    base, _ = _random_compact_model(rng, 10, 4)
    h_prev = HessianModel.scaled_fixed(1.0, base)
    h_new = HessianModel.scaled_fixed(1.7, base)
    got = enforce_domination(h_new, 1.0, h_prev)
    if abs(got - 1.7) > 1e-9:
        return False, f"shared-base domination returned {got}, wanted 1.7"
    h_double = HessianModel(h_prev.variant, base, scale=2.0)
    got = enforce_domination(h_double, 1.0, h_prev)
    if abs(got - 0.5) > 1e-9:
        return False, f"doubled model returned {got}, wanted 0.5"
    # Alternating axis-aligned models collapse sigma geometrically.
    steps = 250 if level == "full" else 40
    d1 = DiagLowRank(1.0, 2, np.array([[1.0], [0.0]]), np.array([[9.0]]))
    d2 = DiagLowRank(1.0, 2, np.array([[0.0], [1.0]]), np.array([[9.0]]))
    models = [HessianModel.lbfgs(d1), HessianModel.lbfgs(d2)]
    sigma = 1.0
    for k in range(1, steps + 1):
        sigma = enforce_domination(models[k % 2], sigma, models[(k + 1) % 2])
        if abs(sigma - 10.0 ** -k) > 1e-12 * 10.0 ** -k:
            return False, f"k={k}: sigma={sigma:.17g} vs 1e-{k}"
    return True, f"sigma_k = 10^-k over {steps} alternations"


def _equiv_config(**kw):
    base = dict(beta=0.5, eta=1.0, tol_rel=1e-8, max_outer=60,
                mu_cap=1e12, seed=3)
    base.update(kw)
    return OptimizerConfig(**base)


def _check_reduction_pqna_pga(level, rng):
    quad = synthesize_quadratic(20, 0.3, 6.0, 5)
    prob = quadratic_problem(quad, 0.02)
    cfg_qn = _equiv_config(mu_init=0.05)
    cfg_pga = _equiv_config(mu_init=0.10, mu_cap=2e12)
    tr_qn = run_pqna(prob, cfg_qn, "zero")
    tr_pga = run_pga(prob, cfg_pga)
    worst = _trace_gap(tr_qn, tr_pga)
    return worst <= 1e-12, f"max per-iterate F gap {worst:.2e}"


def _check_reduction_apqna_apga(level, rng):
    quad = synthesize_quadratic(20, 0.3, 6.0, 9)
    prob = quadratic_problem(quad, 0.02)
    mu = 0.9 / quad.lmax
    cfg_fh = OptimizerConfig(sigma_init=mu, sigma_growth=1.0, warmup_kbar=0,
                             tol_rel=1e-8, max_outer=80, seed=2)
    cfg_ap = OptimizerConfig(mu_init=mu, tol_rel=1e-8, max_outer=80, seed=2)
    from .hessian import DiagLowRank
    tr_fh = run_apqna_fh(prob, cfg_fh, base=DiagLowRank(1.0, prob.n))
    tr_ap = run_apga(prob, cfg_ap)
    worst = _trace_gap(tr_fh, tr_ap)
    return worst <= 1e-12, f"max per-iterate F gap {worst:.2e}"


def _trace_gap(a: Trace, b: Trace) -> float:
    rows = min(len(a.records), len(b.records))
    return max(abs(a.records[i].fval - b.records[i].fval) for i in range(rows))


def _check_fh_trajectory_bounds(level, rng):
    quad = synthesize_quadratic(30, 0.2, 8.0, 21)
    prob = quadratic_problem(quad, 0.0)
    xstar = np.linalg.solve(quad.dense(), quad.b)
    fstar = prob.f_value(xstar)
    dist0 = float(xstar @ xstar)
    from .hessian import DiagLowRank
    cfg = OptimizerConfig(sigma_init=1.0, warmup_kbar=0, tol_rel=1e-10,
                          max_outer=300, seed=4, diagnostics=True)
    trace = run_apqna_fh(prob, cfg, base=DiagLowRank(1.0, prob.n))
    lemma5_bad = [k for k, margin in trace.diagnostics.get("lemma5", [])
                  if margin < -1e-10 * max(1.0, abs(margin))]
    if lemma5_bad:
        return False, f"lemma-5 inequality failed at k={lemma5_bad[:3]}"
    diag = rate_diagnostics(trace, fstar, dist0_sq=dist0)
    if diag.thm6_violations:
        return False, f"fixed-Hessian bound violated at k={diag.thm6_violations[:3]}"
    return True, "sigma_k t_k^2 growth and accelerated bound hold"


def _check_apga_envelope(level, rng):
    quad = synthesize_quadratic(30, 0.2, 8.0, 22)
    prob = quadratic_problem(quad, 0.0)
    xstar = np.linalg.solve(quad.dense(), quad.b)
    fstar = prob.f_value(xstar)
    dist0 = float(xstar @ xstar)
    mu = 0.9 / quad.lmax
    iters = 500 if level == "full" else 200
    cfg = OptimizerConfig(mu_init=mu, tol_rel=1e-14, max_outer=iters, seed=4)
    trace = run_apga(prob, cfg)
    diag = rate_diagnostics(trace, fstar, dist0_sq=dist0)
    if diag.envelope_violations:
        return False, f"1/k^2 envelope violated at k={diag.envelope_violations[:3]}"
    return True, f"2||x0-x*||^2/(mu (k+1)^2) envelope holds over {iters} iterations"


def _check_thm1_linear(level, rng):
    n_seeds = 3 if level == "full" else 1
    for seed in range(n_seeds):
        quad = synthesize_quadratic(50, 0.1, 10.0, 100 + seed)
        prob = quadratic_problem(quad, 0.01)
        cfg = OptimizerConfig(eta=1.0, tol_rel=1e-6, max_outer=4000,
                              subsolver="exact", exact_tol=1e-11,
                              seed=seed, diagnostics=True, eig_iterations=600)
        trace = run_pqna(prob, cfg, "lbfgs")
        ref_cfg = OptimizerConfig(eta=1.0, tol_rel=1e-12, max_outer=20000,
                                  subsolver="exact", exact_tol=1e-13, seed=seed)
        ref = run_pqna(prob, ref_cfg, "lbfgs")
        fstar = ref.final().fval
        big_m = max(m for _, _, m in trace.diagnostics["eig_bounds"])
        rho = theoretical_linear_rate(prob.gamma, big_m, 1.0)
        diag = rate_diagnostics(trace, fstar, rho=rho)
        if diag.thm1_violations:
            return False, f"seed {seed}: rho^k bound violated at {diag.thm1_violations[:3]}"
    return True, f"linear-rate envelope held on {n_seeds} seed(s)"


def _check_trace_determinism(level, rng):
    quad = synthesize_quadratic(25, 0.2, 5.0, 8)
    prob = quadratic_problem(quad, 0.01)
    cfg = OptimizerConfig(tol_rel=1e-7, max_outer=200, seed=42)
    a = run_pqna(prob, cfg, "lbfgs")
    b = run_pqna(prob, cfg, "lbfgs")
    for ra, rb in zip(a.records, b.records):
        if (ra.k, ra.fval, ra.subgrad_inf, ra.backtracks, ra.inner_iters,
                ra.step_scalar, ra.t_k) != (rb.k, rb.fval, rb.subgrad_inf,
                                            rb.backtracks, rb.inner_iters,
                                            rb.step_scalar, rb.t_k):
            return False, f"records diverge at k={ra.k}"
    return True, "identical seeds give identical traces (minus wall time)"


_CHECKS = [
    ("gradient_vs_finite_difference", _check_gradient_fd, ("fast", "full")),
    ("soft_threshold_vs_golden_section", _check_soft_threshold_golden, ("fast", "full")),
    ("coordinate_step_vs_golden_section", _check_coordinate_step_golden, ("fast", "full")),
    ("prox_perturbation_optimality", _check_prox_optimality, ("fast", "full")),
    ("minnorm_zero_iff_prox_fixed_point", _check_minnorm_fixed_point, ("fast", "full")),
    ("compact_lbfgs_vs_dense_bfgs", _check_compact_vs_dense, ("fast", "full")),
    ("cd_model_decrease_and_cache", _check_cd_monotone, ("fast", "full")),
    ("cd_vs_exact_subproblem_oracle", _check_cd_vs_exact, ("fast", "full")),
    ("cd_contraction_vs_phi_rate", _check_cd_rate, ("fast", "full")),
    ("eigenvalue_estimator_vs_dense", _check_eig_estimator, ("fast", "full")),
    ("domination_scaling_and_pathology", _check_domination, ("fast", "full")),
    ("reduction_pqna_to_pga", _check_reduction_pqna_pga, ("fast", "full")),
    ("reduction_apqna_to_apga", _check_reduction_apqna_apga, ("fast", "full")),
    ("fixed_hessian_trajectory_bounds", _check_fh_trajectory_bounds, ("fast", "full")),
    ("fista_inverse_square_envelope", _check_apga_envelope, ("fast", "full")),
    ("strongly_convex_linear_rate", _check_thm1_linear, ("full",)),
    ("trace_determinism", _check_trace_determinism, ("fast", "full")),
]


def verify_suite(level: str = "fast") -> VerifyReport:
    """Run the cross-module invariant checks; ``full`` uses the larger
    case counts from the acceptance suite."""
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    import zlib
    results = []
    for name, fn, levels in _CHECKS:
        if level not in levels:
            continue
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        start = time.perf_counter()
        try:
            passed, detail = fn(level, rng)
        except Exception as exc:
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name, passed, detail,
                                   time.perf_counter() - start))
    return VerifyReport(results)

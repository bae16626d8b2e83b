"""Quadratic surrogate models and the dual solvers for the two policy
subproblems.

Each surrogate is an isotropic quadratic anchored at the current
parameters. The Lagrangian of either subproblem collapses to
sum_j a(w) x_j^2 + b_j(w) x_j + const with a(w) = sum_i w_i * curvature_i,
so the box-constrained inner minimizer is a per-coordinate clamp of
-b/(2a). The dual is maximized by projected subgradient ascent with
diminishing steps, followed by an active-set Newton polish that pushes
the KKT residuals to solver precision.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateDualError


@dataclass(frozen=True)
class SurrogateModel:
    """value + grad . (x - anchor) + curvature * ||x - anchor||^2"""

    value: float
    grad: np.ndarray
    curvature: float
    anchor: np.ndarray

    def __post_init__(self):
        if not self.curvature > 0.0:
            raise ConfigurationError("surrogate curvature must be positive")
        if self.grad.shape != self.anchor.shape:
            raise ConfigurationError("surrogate grad/anchor shape mismatch")


def surrogate_eval(model, x):
    d = np.asarray(x, float) - model.anchor
    return float(model.value + model.grad @ d + model.curvature * (d @ d))


def surrogate_grad(model, x):
    d = np.asarray(x, float) - model.anchor
    return model.grad + 2.0 * model.curvature * d


def build_surrogates(est, anchor, curvatures):
    """One surrogate per cost index from the current running estimates."""
    anchor = np.asarray(anchor, float)
    curvatures = np.broadcast_to(np.asarray(curvatures, float),
                                 (len(est.values),))
    return [SurrogateModel(float(est.values[i]), est.grads[i].copy(),
                           float(curvatures[i]), anchor.copy())
            for i in range(len(est.values))]


def inner_minimizer(models, weights, bound, parallel=True):
    """argmin over the box of sum_i weights_i * model_i, in closed form.

    The weighted objective has Hessian 2*a*I, so each coordinate is the
    clamp of -b_j / (2 a). `parallel` evaluates all coordinates at once;
    the sequential path loops coordinates and must agree bitwise.
    """
    weights = np.asarray(weights, float)
    a = float(sum(w * m.curvature for w, m in zip(weights, models)))
    if a <= 0.0:
        raise DegenerateDualError("weighted curvature must be positive")
    b = np.zeros_like(models[0].grad)
    for w, m in zip(weights, models):
        b += w * (m.grad - 2.0 * m.curvature * m.anchor)
    raw = -b / (2.0 * a)
    if parallel:
        return np.clip(raw, -bound, bound)
    out = np.empty_like(raw)
    for j in range(raw.size):
        v = raw[j]
        if v < -bound:
            v = -bound
        elif v > bound:
            v = bound
        out[j] = v
    return out


def dual_inner_minimizer(models, lam, bound, parallel=True):
    """Inner minimizer of the objective-update Lagrangian: the objective
    surrogate carries weight one, constraints carry lam."""
    weights = np.concatenate([[1.0], np.asarray(lam, float)])
    return inner_minimizer(models, weights, bound, parallel)


def dual_subgradient(models, x):
    """Constraint-surrogate values at x (a dual supergradient)."""
    return np.array([surrogate_eval(m, x) for m in models[1:]])


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-threshold)."""
    v = np.asarray(v, float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    cond = u + (1.0 - css) / j > 0.0
    rho = int(np.nonzero(cond)[0][-1])
    tau = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + tau, 0.0)


@dataclass(frozen=True)
class SolverOptions:
    gamma0: float = 1.0
    max_iterations: int = 2000
    kkt_tol: float = 1e-6
    stall_window: int = 100
    stall_tol: float = 1e-10
    polish: bool = True


@dataclass(frozen=True)
class DualState:
    """Dual multipliers with convergence diagnostics."""

    lam: np.ndarray
    iterations: int
    gap: float


@dataclass(frozen=True)
class SubproblemSolution:
    theta: np.ndarray
    kind: str                      # "objective" | "feasible"
    kkt_residual: float
    dual: DualState
    violation: float = float("nan")   # best achievable max constraint (feasible kind)
    objective: float = float("nan")


def _stationarity_residual(models, weights, x, bound):
    g = np.zeros_like(x)
    for w, m in zip(weights, models):
        g += w * surrogate_grad(m, x)
    return float(np.max(np.abs(np.clip(x - g, -bound, bound) - x)))


def _theta_jacobian(models, weights, bound):
    """d theta / d weight_i of the clamped closed form, one column per model.
    Clamped coordinates have zero sensitivity."""
    weights = np.asarray(weights, float)
    a = float(sum(w * m.curvature for w, m in zip(weights, models)))
    b = np.zeros_like(models[0].grad)
    for w, m in zip(weights, models):
        b += w * (m.grad - 2.0 * m.curvature * m.anchor)
    raw = -b / (2.0 * a)
    free = np.abs(raw) < bound
    cols = []
    for m in models:
        u = m.grad - 2.0 * m.curvature * m.anchor
        col = (-u * a + b * m.curvature) / (2.0 * a * a)
        col[~free] = 0.0
        cols.append(col)
    return np.stack(cols, axis=1), np.clip(raw, -bound, bound)


def feasibility_tolerance(models):
    scale = max(1.0, max(abs(m.value) for m in models))
    return 1e-8 * scale


def _objective_residual(models, lam, theta, bound):
    weights = np.concatenate([[1.0], lam])
    stat = _stationarity_residual(models, weights, theta, bound)
    vals = dual_subgradient(models, theta)
    feas = float(max(0.0, vals.max(initial=-np.inf)))
    comp = float(np.max(np.abs(lam * vals), initial=0.0))
    return max(stat, feas, comp), vals


def _constraint_jacobian(models, lam, bound):
    """d(constraint surrogate values)/d(lam) through the clamped closed-form
    minimizer, plus the values themselves."""
    m = len(models) - 1
    weights = np.concatenate([[1.0], lam])
    jac_cols, theta = _theta_jacobian(models, weights, bound)
    grads = np.stack([surrogate_grad(models[1 + i], theta)
                      for i in range(m)], axis=0)
    return grads @ jac_cols[:, 1:], dual_subgradient(models, theta), theta


def _newton_on_subset(models, idx, lam0, bound, iters=40):
    """Damped Newton driving the subset's constraint values to zero with
    multipliers off the subset pinned at zero. The backtracking is on the
    full KKT residual, which also copes with the clamp kinks."""
    m = len(models) - 1
    lam = np.zeros(m)
    lam[idx] = np.maximum(lam0[idx], 0.0)

    def residual(l):
        theta = dual_inner_minimizer(models, l, bound)
        return _objective_residual(models, l, theta, bound)

    cur, _ = residual(lam)
    for _ in range(iters):
        if cur < 1e-13:
            break
        jac, vals, _ = _constraint_jacobian(models, lam, bound)
        f = vals[idx]
        sub = jac[np.ix_(idx, idx)]
        step, *_ = np.linalg.lstsq(sub, -f, rcond=None)
        s, improved = 1.0, False
        while s >= 1e-8:
            cand = lam.copy()
            cand[idx] = np.maximum(lam[idx] + s * step, 0.0)
            r2, _ = residual(cand)
            if r2 < cur:
                lam, cur, improved = cand, r2, True
                break
            s *= 0.5
        if not improved:
            break
    return lam, cur


def _polish_objective(models, lam, bound, tol=1e-13):
    """Refine the subgradient iterate: damped Newton on the active set it
    suggests, then (if still above tolerance) brute force over the small
    number of candidate active sets."""
    m = len(models) - 1
    lam = np.maximum(np.asarray(lam, float), 0.0)
    theta = dual_inner_minimizer(models, lam, bound)
    vals = dual_subgradient(models, theta)
    guess = np.nonzero((lam > 1e-12) | (vals > 1e-12))[0]
    best_lam, best_res = _newton_on_subset(models, guess, lam, bound)
    if best_res > tol and m <= 8:
        from itertools import combinations
        for size in range(0, m + 1):
            for combo in combinations(range(m), size):
                idx = np.array(combo, dtype=int)
                cand, res = _newton_on_subset(models, idx, lam, bound)
                if res < best_res:
                    best_lam, best_res = cand, res
                if best_res < tol:
                    return best_lam
    return best_lam


def solve_objective_update(models, bound, options=None, warm_lam=None):
    """Maximize the dual of: minimize objective surrogate subject to
    constraint surrogates <= 0 over the box. Assumes feasibility was
    already certified by the feasible update."""
    options = options or SolverOptions()
    m = len(models) - 1
    lam = (np.zeros(m) if warm_lam is None
           else np.maximum(np.asarray(warm_lam, float), 0.0))
    if m == 0:
        theta = dual_inner_minimizer(models, lam, bound)
        return SubproblemSolution(
            theta=theta, kind="objective",
            kkt_residual=_stationarity_residual(models, np.ones(1), theta, bound),
            dual=DualState(lam, 0, 0.0),
            objective=surrogate_eval(models[0], theta))

    best = None
    best_dual = []            # prefix maxima of the dual value
    k = 0
    next_polish = 0           # Newton refinements interleaved with the loop
    for k in range(options.max_iterations):
        theta = dual_inner_minimizer(models, lam, bound)
        resid, vals = _objective_residual(models, lam, theta, bound)
        dual_val = surrogate_eval(models[0], theta) + float(lam @ vals)
        if best is None or resid < best[0]:
            best = (resid, lam.copy(), theta)
        if resid < options.kkt_tol:
            break
        if options.polish and k == next_polish:
            lam2 = _polish_objective(models, lam, bound, tol=options.kkt_tol)
            theta2 = dual_inner_minimizer(models, lam2, bound)
            resid2, _ = _objective_residual(models, lam2, theta2, bound)
            if resid2 < best[0]:
                best = (resid2, lam2, theta2)
            if resid2 < options.kkt_tol:
                break
            next_polish = 8 if next_polish == 0 else next_polish * 4
        best_dual.append(dual_val if not best_dual
                         else max(best_dual[-1], dual_val))
        w = options.stall_window
        if k >= w and best_dual[-1] - best_dual[-1 - w] < options.stall_tol:
            break
        lam = np.maximum(lam + options.gamma0 / np.sqrt(k + 1.0) * vals, 0.0)

    resid, lam, theta = best
    if options.polish and resid >= options.kkt_tol * 1e-3:
        lam2 = _polish_objective(models, lam, bound)
        theta2 = dual_inner_minimizer(models, lam2, bound)
        resid2, _ = _objective_residual(models, lam2, theta2, bound)
        if resid2 < resid:
            resid, lam, theta = resid2, lam2, theta2
    vals = dual_subgradient(models, theta)
    gap = float(abs(lam @ vals))
    return SubproblemSolution(
        theta=theta, kind="objective", kkt_residual=resid,
        dual=DualState(lam, k + 1, gap),
        objective=surrogate_eval(models[0], theta))


def _feasible_residual(models, lam, theta, xbar, bound):
    stat = _stationarity_residual(models, lam, theta, bound)
    vals = np.array([surrogate_eval(m, theta) for m in models])
    comp = float(np.max(np.abs(lam * (vals - xbar)), initial=0.0))
    return max(stat, comp), vals


def _feasible_kkt(models, lam, bound):
    theta = inner_minimizer(models, lam, bound)
    vals = np.array([surrogate_eval(mod, theta) for mod in models])
    resid, _ = _feasible_residual(models, lam, theta, float(vals.max()), bound)
    return resid, vals


def _feasible_newton_on_subset(models, idx, lam0, bound, iters=40):
    """Equalize the subset's surrogate values over the simplex face where
    only the subset carries weight; damped Newton with the reference
    weight eliminated."""
    m = len(models)
    lam = np.zeros(m)
    lam[idx] = np.maximum(lam0[idx], 1e-12)
    lam[idx] /= lam[idx].sum()
    cur, vals = _feasible_kkt(models, lam, bound)
    if idx.size <= 1:
        return lam, cur
    ref, others = idx[0], idx[1:]
    for _ in range(iters):
        if cur < 1e-13:
            break
        jac_cols, theta = _theta_jacobian(models, lam, bound)
        grads = np.stack([surrogate_grad(mod, theta) for mod in models],
                         axis=0)
        jac = grads @ jac_cols
        vals = np.array([surrogate_eval(mod, theta) for mod in models])
        f = vals[others] - vals[ref]
        rr = [ref] * others.size
        sens = (jac[np.ix_(others, others)] - jac[np.ix_(others, rr)]
                - jac[np.ix_(rr, others)] + jac[ref, ref])
        step, *_ = np.linalg.lstsq(sens, -f, rcond=None)
        s, improved = 1.0, False
        while s >= 1e-8:
            cand = np.zeros(m)
            cand[others] = lam[others] + s * step
            cand[ref] = 1.0 - cand[others].sum()
            cand = np.maximum(cand, 0.0)
            tot = cand.sum()
            if tot > 0.0:
                cand /= tot
                r2, _ = _feasible_kkt(models, cand, bound)
                if r2 < cur:
                    lam, cur, improved = cand, r2, True
                    break
            s *= 0.5
        if not improved:
            break
    return lam, cur


def _polish_feasible(models, lam, bound, tol=1e-13):
    """Refine the feasible-update multipliers: Newton on the suggested
    active face, then brute force over faces if still above tolerance."""
    m = len(models)
    lam = project_simplex(np.asarray(lam, float))
    theta = inner_minimizer(models, lam, bound)
    vals = np.array([surrogate_eval(mod, theta) for mod in models])
    guess = np.nonzero((lam > 1e-12) | (vals > vals.max() - 1e-12))[0]
    best_lam, best_res = _feasible_newton_on_subset(models, guess, lam, bound)
    if best_res > tol and m <= 8:
        from itertools import combinations
        for size in range(1, m + 1):
            for combo in combinations(range(m), size):
                idx = np.array(combo, dtype=int)
                cand, res = _feasible_newton_on_subset(models, idx, lam, bound)
                if res < best_res:
                    best_lam, best_res = cand, res
                if best_res < tol:
                    return best_lam
    return best_lam


def solve_feasible_update(models, bound, options=None, warm_lam=None):
    """Minimize the worst constraint surrogate over the box (epigraph
    form); the dual lives on the probability simplex. `models` here are
    the constraint surrogates only."""
    options = options or SolverOptions()
    m = len(models)
    if m < 1:
        raise ConfigurationError("feasible update needs at least one constraint")
    if m == 1:
        lam = np.ones(1)
        theta = inner_minimizer(models, lam, bound)
        xbar = surrogate_eval(models[0], theta)
        stat = _stationarity_residual(models, lam, theta, bound)
        return SubproblemSolution(
            theta=theta, kind="feasible", kkt_residual=stat,
            dual=DualState(lam, 1, 0.0), violation=xbar)

    lam = (project_simplex(np.asarray(warm_lam, float)) if warm_lam is not None
           else np.full(m, 1.0 / m))
    best = None
    best_dual = []
    k = 0
    next_polish = 0
    for k in range(options.max_iterations):
        theta = inner_minimizer(models, lam, bound)
        xbar_vals = np.array([surrogate_eval(mod, theta) for mod in models])
        xbar = float(xbar_vals.max())
        resid, _ = _feasible_residual(models, lam, theta, xbar, bound)
        dual_val = float(lam @ xbar_vals)
        if best is None or resid < best[0]:
            best = (resid, lam.copy(), theta)
        if resid < options.kkt_tol:
            break
        if options.polish and k == next_polish:
            lam2 = _polish_feasible(models, lam, bound, tol=options.kkt_tol)
            theta2 = inner_minimizer(models, lam2, bound)
            vals2 = np.array([surrogate_eval(mod, theta2) for mod in models])
            resid2, _ = _feasible_residual(models, lam2, theta2,
                                           float(vals2.max()), bound)
            if resid2 < best[0]:
                best = (resid2, lam2, theta2)
            if resid2 < options.kkt_tol:
                break
            next_polish = 8 if next_polish == 0 else next_polish * 4
        best_dual.append(dual_val if not best_dual
                         else max(best_dual[-1], dual_val))
        w = options.stall_window
        if k >= w and best_dual[-1] - best_dual[-1 - w] < options.stall_tol:
            break
        lam = project_simplex(lam + options.gamma0 / np.sqrt(k + 1.0) * xbar_vals)

    resid, lam, theta = best
    if options.polish and resid >= options.kkt_tol * 1e-3:
        lam2 = _polish_feasible(models, lam, bound)
        theta2 = inner_minimizer(models, lam2, bound)
        vals2 = np.array([surrogate_eval(mod, theta2) for mod in models])
        resid2, _ = _feasible_residual(models, lam2, theta2,
                                       float(vals2.max()), bound)
        if resid2 < resid:
            resid, lam, theta = resid2, lam2, theta2
    vals = np.array([surrogate_eval(mod, theta) for mod in models])
    xbar = float(vals.max())
    gap = float(xbar - lam @ vals)
    return SubproblemSolution(
        theta=theta, kind="feasible", kkt_residual=resid,
        dual=DualState(lam, k + 1, gap), violation=xbar)


def check_feasibility(models, bound, options=None, warm_lam=None):
    """Solve the feasible update on the constraint surrogates and compare
    its best worst-violation against the scale-aware tolerance."""
    sol = solve_feasible_update(models[1:], bound, options, warm_lam)
    return sol.violation <= feasibility_tolerance(models), sol


def solve_subproblem(models, bound, options=None,
                     warm_obj=None, warm_feas=None):
    """One SCA step: certify feasibility first, then either improve the
    objective (feasible case) or reduce the worst violation."""
    if len(models) == 1:
        return solve_objective_update(models, bound, options, None)
    feasible, sol6 = check_feasibility(models, bound, options, warm_feas)
    if not feasible:
        return sol6
    return solve_objective_update(models, bound, options, warm_obj)

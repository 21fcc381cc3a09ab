"""Nuclear-norm recovery solvers.

Two convex programs share the singular-value soft-threshold as their
proximal core:

* ``solve_quantized_mc``: minimize ||X||_* subject to
  ||P_mask(X) - Q||_F <= radius, handled by accelerated proximal gradient on
  the penalized form ||X||_* + (1/2 mu) ||P_mask(X) - Q||_F^2 plus a
  bisection on mu until the ball constraint is active (residual within 5%
  below the radius, never beyond its feasibility slack).
* ``solve_one_bit_mc``: minimize reg_weight * ||X||_* + 1/2 ||X||_F^2 over
  the sign polyhedron, handled by an exterior quadratic penalty with a x10
  escalation schedule; the penalty enforces a tiny per-entry interior margin
  so the final iterate satisfies the sign constraints strictly.

Both start from the zero matrix and are fully deterministic.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from .core import SampleMask, as_matrix
from .onebit import (
    OneBitObservation,
    PolyhedronSystem,
    feasible_intervals,
    surrogate_data,
    violation_measure,
)

__all__ = [
    "ProxParams",
    "SolverReport",
    "prox_nuclear",
    "solve_one_bit_mc",
    "solve_quantized_mc",
    "solve_statistics_only",
]

# Acceptable undershoot of the target radius before the ball constraint
# stops counting as active (the overshoot side is capped by tol_feas, which
# keeps the feasibility contract hard), and the mu-bisection limits (the
# nominal bracket is [1e-6, 1e6]; the ends extend when the target residual
# is out of reach).
_RESIDUAL_BAND = 0.05
_MU_BRACKET = (1e-6, 1e6)
_MU_LIMITS = (1e-10, 1e10)
_MAX_BISECTIONS = 40

# Interior margin for the one-bit penalty, shrunk per entry to a quarter of
# the entry's feasible interval so the shifted polyhedron stays nonempty.
_FEAS_MARGIN = 5e-7
_PENALTY_RHO0 = 10.0
_MAX_ESCALATIONS = 8


@dataclasses.dataclass(frozen=True)
class ProxParams:
    """Iteration budget and tolerances for the proximal solvers.

    ``max_iters`` is the total budget across all inner solves;
    ``step_size`` scales the analytic 1/L step; ``tol_rel_change`` stops an
    inner loop; ``tol_feas`` is the relative slack on the ball radius
    (quantized) or the absolute violation tolerance (one-bit).
    """

    max_iters: int = 20000
    step_size: float = 1.0
    tol_rel_change: float = 1e-8
    tol_feas: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_size <= 0 or self.tol_rel_change <= 0 or self.tol_feas <= 0:
            raise ValueError("step_size and tolerances must be positive")


@dataclasses.dataclass(eq=False)
class SolverReport:
    """Solution plus run diagnostics.

    ``data_residual`` is the ball residual ||P_mask(X) - Q||_F for the
    quantized problem and the constraint violation for the one-bit problem.
    ``stage_objectives`` holds the per-iteration penalized objective of each
    penalty stage (one-bit solver only).
    """

    matrix: np.ndarray
    iterations: int
    objective: float
    data_residual: float
    converged: bool
    nuclear_norm: float
    stage_objectives: tuple = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "iterations": self.iterations,
                "objective": self.objective,
                "residual": self.data_residual,
                "converged": self.converged,
                "nuclear_norm": self.nuclear_norm,
            },
            sort_keys=True,
        )


def _svd_soft(Z: np.ndarray, theta: float):
    """Soft-threshold the singular values of Z by theta; returns (matrix, sv)."""
    try:
        u, s, vt = np.linalg.svd(Z, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"SVD failed on {Z.shape} matrix (fro={np.linalg.norm(Z):.3e}, "
            f"max={np.abs(Z).max():.3e}, finite={np.all(np.isfinite(Z))})"
        ) from exc
    s_shrunk = np.maximum(s - theta, 0.0)
    return (u * s_shrunk) @ vt, s_shrunk


def prox_nuclear(Z, theta: float) -> np.ndarray:
    """Proximal operator of theta * ||.||_*: shrink each singular value by theta.

    Minimizes theta * ||X||_* + 1/2 ||X - Z||_F^2; theta = 0 returns Z.
    """
    Zm = as_matrix(Z)
    if theta < 0:
        raise ValueError(f"theta must be nonnegative, got {theta}")
    if theta == 0:
        return Zm.copy()
    return _svd_soft(Zm, theta)[0]


def _fista_ball(q, mask: SampleMask, shape, mu, x0, params: ProxParams, cap: int):
    """Accelerated proximal gradient for ||X||_* + (1/2 mu)||P(X) - Q||_F^2.

    The smooth part has Lipschitz constant 1/mu, so the gradient step with
    step_size s is X - s * (P(X) - Q) on the mask and the prox weight is
    s * mu.  Returns (X, iterations, inner_converged, residual, nuclear).
    """
    rows, cols = mask.rows, mask.cols
    s = params.step_size
    theta = s * mu
    X = x0.copy()
    Y = x0.copy()
    t = 1.0
    nuc = float(np.linalg.norm(X, "nuc")) if X.any() else 0.0
    converged = False
    iters = 0
    for iters in range(1, max(cap, 0) + 1):
        Z = Y.copy()
        Z[rows, cols] -= s * (Y[rows, cols] - q)
        Xn, sv = _svd_soft(Z, theta)
        rel = np.linalg.norm(Xn - X) / max(1.0, np.linalg.norm(X))
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        Y = Xn + ((t - 1.0) / t_next) * (Xn - X)
        X = Xn
        nuc = float(sv.sum())
        t = t_next
        if rel <= params.tol_rel_change:
            converged = True
            break
    if cap <= 0:
        iters = 0
    residual = float(np.linalg.norm(X[rows, cols] - q))
    return X, iters, converged, residual, nuc


def solve_quantized_mc(Q, mask: SampleMask, radius: float, params: ProxParams | None = None) -> SolverReport:
    """Minimum nuclear norm subject to ||P_mask(X) - Q||_F <= radius.

    Q must vanish off the mask.  If the zero matrix is feasible it is
    returned directly (it has minimal nuclear norm).  Otherwise the data-fit
    weight mu is bisected until the residual lands in the acceptance window
    [0.95 * radius, radius * (1 + tol_feas)], each subproblem warm-started
    from the previous iterate.  A radius no inner solve can reach yields
    converged=False.
    """
    params = params or ProxParams()
    Qm = as_matrix(Q)
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    off = Qm.copy()
    off[mask.rows, mask.cols] = 0.0
    if np.any(off != 0.0):
        raise ValueError("Q must vanish off the sample mask")
    q = Qm[mask.rows, mask.cols]
    qnorm = float(np.linalg.norm(q))
    shape = Qm.shape

    if qnorm <= radius:
        return SolverReport(
            matrix=np.zeros(shape),
            iterations=0,
            objective=0.0,
            data_residual=qnorm,
            converged=True,
            nuclear_norm=0.0,
        )

    feas_limit = radius * (1.0 + params.tol_feas)
    band_lo = (1.0 - _RESIDUAL_BAND) * radius
    band_hi = feas_limit
    inner_cap = max(100, params.max_iters // 10)

    total = 0
    accepted = None  # (X, residual, nuclear) with residual inside the band
    best_feasible = None  # feasible iterate with the largest residual (smallest nuclear norm)
    closest = None  # smallest residual seen, fallback when nothing is feasible

    def evaluate(mu, warm):
        nonlocal total
        cap = min(inner_cap, params.max_iters - total)
        X, iters, ok, resid, nuc = _fista_ball(q, mask, shape, mu, warm, params, cap)
        total += iters
        return X, ok, resid, nuc

    def consider(X, ok, resid, nuc):
        nonlocal accepted, best_feasible, closest
        if closest is None or resid < closest[1]:
            closest = (X, resid, nuc, ok)
        if resid <= feas_limit and (best_feasible is None or resid > best_feasible[1]):
            best_feasible = (X, resid, nuc, ok)
        if band_lo <= resid <= band_hi and ok and accepted is None:
            accepted = (X, resid, nuc, ok)

    mu_lo, mu_hi = _MU_BRACKET
    warm = np.zeros(shape)

    # qnorm > radius, so the large-mu side over-shoots the band; make sure the
    # small-mu side can undershoot it, expanding below the nominal bracket if
    # the target is tighter than mu = 1e-6 can reach.
    while total < params.max_iters:
        X, ok, resid, nuc = evaluate(mu_lo, warm)
        warm = X
        consider(X, ok, resid, nuc)
        if accepted is not None or resid <= band_hi or mu_lo <= _MU_LIMITS[0]:
            break
        mu_lo = max(mu_lo / 10.0, _MU_LIMITS[0])

    for _ in range(_MAX_BISECTIONS):
        if accepted is not None or total >= params.max_iters:
            break
        mu = math.sqrt(mu_lo * mu_hi)
        X, ok, resid, nuc = evaluate(mu, warm)
        warm = X
        consider(X, ok, resid, nuc)
        if resid > radius:
            mu_hi = mu
        else:
            mu_lo = mu

    if accepted is not None:
        X, resid, nuc, ok = accepted
        converged = True
    elif best_feasible is not None:
        X, resid, nuc, ok = best_feasible
        converged = bool(ok)
    else:
        X, resid, nuc, ok = closest
        converged = False

    return SolverReport(
        matrix=X,
        iterations=total,
        objective=nuc,
        data_residual=resid,
        converged=converged,
        nuclear_norm=nuc,
    )


def _penalty_objective(reg_weight, nuc, X, rho, hinge):
    return reg_weight * nuc + 0.5 * float(np.sum(X * X)) + 0.5 * rho * float(np.sum(hinge * hinge))


def solve_one_bit_mc(
    system: PolyhedronSystem,
    reg_weight: float,
    params: ProxParams | None = None,
    margin: float = _FEAS_MARGIN,
) -> SolverReport:
    """Minimize reg_weight * ||X||_* + 1/2 ||X||_F^2 over the sign polyhedron.

    Exterior quadratic penalty: alternate a gradient step on
    1/2 ||X||_F^2 + (rho/2) * sum of squared hinge violations with a
    singular-value soft-threshold of weight step * reg_weight, escalating
    rho x10 (up to 8 times) until the unshifted violation drops below
    tol_feas.  The hinge targets s*(x - t) >= margin_k with
    margin_k = min(margin, interval_width_k / 4), so at convergence the
    iterate sits strictly inside the polyhedron and the reported violation
    is exactly zero.  The step size halves whenever a candidate would
    increase the penalized objective, keeping it non-increasing per stage.
    """
    params = params or ProxParams()
    if reg_weight < 0:
        raise ValueError(f"reg_weight must be nonnegative, got {reg_weight}")
    mask = system.mask
    rows, cols = mask.rows, mask.cols
    S = system.signs.astype(float)
    T = system.thresholds
    m_seq = S.shape[0]
    shape = (mask.dims.n1, mask.dims.n2)

    lo, hi = feasible_intervals(system)
    width = hi - lo
    gamma = np.minimum(margin, 0.25 * np.clip(width, 0.0, np.inf))

    def smooth_parts(M, rho):
        masked = M[rows, cols]
        hinge = np.maximum(0.0, gamma[None, :] - S * (masked[None, :] - T))
        f = 0.5 * float(np.sum(M * M)) + 0.5 * rho * float(np.sum(hinge * hinge))
        return masked, hinge, f

    X = np.zeros(shape)
    nuc = 0.0
    total = 0
    stage_histories = []
    rho = _PENALTY_RHO0
    viol = violation_measure(system, X)
    feas_exit_tol = max(params.tol_rel_change, 1e-8)

    for _ in range(_MAX_ESCALATIONS + 1):
        if viol <= params.tol_feas or total >= params.max_iters:
            break
        # accelerated proximal gradient with a monotone safeguard: the prox
        # candidate comes from the extrapolated point, but the iterate only
        # advances when the penalized objective does not increase, so the
        # recorded objective is non-increasing within every stage
        step = params.step_size / (1.0 + rho)
        _, hinge, f_x = smooth_parts(X, rho)
        obj = reg_weight * nuc + f_x
        history = [obj]
        Y = X.copy()
        X_prev = X.copy()
        t_mom = 1.0
        stalled = 0
        done = False
        budget = params.max_iters - total
        for _ in range(budget):
            _, hinge_y, f_y = smooth_parts(Y, rho)
            grad = Y.copy()
            grad[rows, cols] -= rho * np.sum(S * hinge_y, axis=0)
            accepted = False
            for _ in range(60):
                Z, sv = _svd_soft(Y - step * grad, step * reg_weight)
                _, hinge_z, f_z = smooth_parts(Z, rho)
                diff = Z - Y
                model = f_y + float(np.sum(grad * diff)) + float(np.sum(diff * diff)) / (2.0 * step)
                if f_z <= model + 1e-12 * (1.0 + abs(model)):
                    accepted = True
                    break
                step *= 0.5
            total += 1
            if not accepted:
                break
            nuc_z = float(sv.sum())
            obj_z = reg_weight * nuc_z + f_z
            if obj_z <= obj + 1e-12 * (1.0 + abs(obj)):
                X_new, nuc_new, obj_new, hinge_new = Z, nuc_z, obj_z, hinge_z
            else:
                # momentum overshot: keep the current iterate, restart momentum
                X_new, nuc_new, obj_new, hinge_new = X, nuc, obj, hinge
                t_mom = 1.0
            rel = np.linalg.norm(X_new - X) / max(1.0, np.linalg.norm(X))
            # consecutive iterations without measurable objective progress
            # certify stage stationarity (the objective is monotone)
            stalled = stalled + 1 if obj - obj_new <= 1e-13 * (1.0 + abs(obj)) else 0
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
            Y = X_new + (t_mom / t_next) * (Z - X_new) + ((t_mom - 1.0) / t_next) * (X_new - X_prev)
            X_prev = X
            X, nuc, obj, hinge = X_new, nuc_new, obj_new, hinge_new
            t_mom = t_next
            history.append(obj)
            step = min(step * 1.2, params.step_size)
            masked_x = X[rows, cols]
            raw = np.minimum(S * (masked_x[None, :] - T), 0.0)
            feasible_now = float(np.sqrt(np.sum(raw * raw))) <= params.tol_feas
            if feasible_now and (rel <= feas_exit_tol or stalled >= 3):
                done = True
                break
            if (0.0 < rel <= params.tol_rel_change) or stalled >= 5:
                break
        stage_histories.append(np.array(history))
        viol = violation_measure(system, X)
        if done:
            break
        rho *= 10.0

    objective = reg_weight * nuc + 0.5 * float(np.sum(X * X))
    return SolverReport(
        matrix=X,
        iterations=total,
        objective=objective,
        data_residual=viol,
        converged=viol <= params.tol_feas,
        nuclear_norm=nuc,
        stage_objectives=tuple(stage_histories),
    )


def solve_statistics_only(
    obs: OneBitObservation,
    delta: float,
    radius: float,
    params: ProxParams | None = None,
) -> SolverReport:
    """Recovery from signs and the dither scale alone (single-sequence mode).

    Builds the scaled-sign surrogate (delta/2) * R on the mask and solves
    the radius-constrained nuclear norm problem against it.  The caller is
    responsible for delta >= 2 * max|X|, the regime in which the surrogate
    is unbiased.
    """
    Q = surrogate_data(obs, delta)
    return solve_quantized_mc(Q, obs.mask, radius, params)

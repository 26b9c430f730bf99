"""Penalized and unpenalized GLM fitting on plain design matrices.

``irls_fit`` is a Fisher-scoring solver with step halving; ``lasso_fit``
wraps cyclic coordinate descent with active-set passes inside the IRLS
linearization, glmnet style.  Objectives, with ``eta = X @ beta``:

* none:   ``neg_loglik(family, eta, y)``
* ridge:  ``neg_loglik + (lam / 2) * sum(beta_penalized^2)``
* lasso:  ``neg_loglik + lam * sum(|beta_penalized|)``

An intercept, when requested, is an extra trailing coefficient that is
never penalized.  Weighted observations enter every term; duplicating a row
is identical to doubling its weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DivergenceError, RankDeficientError, ValidationError
from .families import Family, get_family, neg_loglik
from .rng import STREAM_CV, substream

PENALTIES = ("none", "ridge", "lasso")
MAX_HALVINGS = 20


@dataclass
class DesignProblem:
    """A GLM fitting problem: design, responses, family, penalty."""

    X: np.ndarray
    y: np.ndarray
    family: Family
    penalty: str = "none"
    lam: float = 0.0
    weights: np.ndarray | None = None
    intercept: bool = False

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise ValidationError(
                f"design of shape {self.X.shape} with {self.y.size} responses"
            )
        self.family = get_family(self.family)
        if self.penalty not in PENALTIES:
            raise ValidationError(f"unknown penalty {self.penalty!r}")
        if self.lam < 0:
            raise ValidationError("penalty parameter must be >= 0")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.y.shape or np.any(self.weights < 0):
                raise ValidationError("weights must be nonnegative, one per row")

    @property
    def n_coefficients(self) -> int:
        return self.X.shape[1] + (1 if self.intercept else 0)


def split_coef(problem: DesignProblem, beta: np.ndarray) -> tuple[np.ndarray, float]:
    """Split a solution vector into (coefficients, intercept)."""
    if problem.intercept:
        return beta[:-1], float(beta[-1])
    return beta, 0.0


def _full_design(problem: DesignProblem) -> tuple[np.ndarray, np.ndarray]:
    """Design with any intercept column appended, plus the penalized mask."""
    X = problem.X
    mask = np.ones(X.shape[1], dtype=bool)
    if problem.intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
        mask = np.append(mask, False)
    return X, mask


def _wls_solve(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, int]:
    sol, _, rank, _ = scipy.linalg.lstsq(A, b, lapack_driver="gelsy", check_finite=False)
    return sol, rank


def _objective(problem, X, pen_mask, beta) -> float:
    eta = X @ beta
    if not np.all(np.isfinite(eta)):
        return np.inf
    val = neg_loglik(problem.family, eta, problem.y, problem.weights)
    if problem.penalty == "ridge" and problem.lam > 0:
        val += 0.5 * problem.lam * float(np.sum(beta[pen_mask] ** 2))
    elif problem.penalty == "lasso" and problem.lam > 0:
        val += problem.lam * float(np.sum(np.abs(beta[pen_mask])))
    return val


def _smooth_gradient(problem, X, pen_mask, beta) -> np.ndarray:
    resid = problem.family.mean(X @ beta) - problem.y
    if problem.weights is not None:
        resid = problem.weights * resid
    g = X.T @ resid
    if problem.penalty == "ridge" and problem.lam > 0:
        g = g + problem.lam * np.where(pen_mask, beta, 0.0)
    return g


def irls_fit(
    problem: DesignProblem,
    tol: float = 1e-8,
    max_iter: int = 100,
    start: np.ndarray | None = None,
) -> np.ndarray:
    """Fisher-scoring fit for an unpenalized or ridge problem.

    Returns the coefficient vector (intercept last when requested).  Raises
    :class:`RankDeficientError` for an unpenalized rank-deficient design and
    :class:`DivergenceError` when the iteration is still moving after
    ``max_iter`` steps with step halving exhausted.
    """
    if problem.penalty == "lasso":
        raise ValidationError("use lasso_fit for lasso problems")
    X, pen_mask = _full_design(problem)
    n, p = X.shape
    fam = problem.family
    obs_w = problem.weights if problem.weights is not None else np.ones(n)
    ridge = problem.lam if problem.penalty == "ridge" else 0.0

    ridge_rows = None
    if ridge > 0:
        ridge_rows = np.sqrt(ridge) * np.eye(p)[pen_mask]

    def wls(w, z):
        sw = np.sqrt(w)
        A = sw[:, None] * X
        b = sw * z
        if ridge_rows is not None:
            A = np.vstack([A, ridge_rows])
            b = np.concatenate([b, np.zeros(len(ridge_rows))])
        return _wls_solve(A, b)

    if fam.name == "gaussian":
        beta, rank = wls(obs_w, problem.y)
        if ridge == 0 and rank < p:
            raise RankDeficientError(
                f"design has rank {rank} < {p}; add a ridge penalty to regularize"
            )
        return beta

    beta = np.zeros(p) if start is None else np.asarray(start, dtype=float).copy()
    if beta.shape != (p,):
        raise ValidationError(f"start vector of length {beta.size}, expected {p}")
    obj = _objective(problem, X, pen_mask, beta)
    if not np.isfinite(obj):
        beta = np.zeros(p)
        obj = _objective(problem, X, pen_mask, beta)

    var_floor = 1e-12
    improvement = np.inf
    for it in range(max_iter):
        eta = X @ beta
        mu = fam.mean(eta)
        var = np.maximum(fam.variance(eta), var_floor)
        w = obs_w * var
        z = eta + (problem.y - mu) / var
        cand, rank = wls(w, z)
        if it == 0 and ridge == 0 and rank < p:
            raise RankDeficientError(
                f"design has rank {rank} < {p}; add a ridge penalty to regularize"
            )
        step = cand - beta
        accepted = False
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = beta + t * step
            obj_t = _objective(problem, X, pen_mask, trial)
            if obj_t < obj:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # no descent possible within floating point: at the optimum
            return beta
        improvement = obj - obj_t
        beta, obj = trial, obj_t
        grad = _smooth_gradient(problem, X, pen_mask, beta)
        if np.max(np.abs(grad)) <= tol:
            return beta
        if improvement <= 1e-14 * (1.0 + abs(obj)):
            return beta
    if improvement > 1e-8 * (1.0 + abs(obj)):
        raise DivergenceError(f"IRLS still moving after {max_iter} iterations")
    return beta


def _cd_quadratic(X, w, z, lam_vec, beta, r, col_norms2, tol, max_passes=1000):
    """Cyclic coordinate descent on 0.5*sum w (z - X beta)^2 + sum lam_j |beta_j|.

    ``r`` is the current residual ``z - X beta``; updated in place.
    Active-set iteration: full passes only when a restricted cycle stalls.
    """
    p = X.shape[1]
    Xw = X * w[:, None]

    def pass_over(indices):
        max_delta = 0.0
        for j in indices:
            nu = col_norms2[j]
            if nu <= 0.0:
                continue
            old = beta[j]
            rho = float(Xw[:, j] @ r) + nu * old
            lam_j = lam_vec[j]
            if lam_j > 0:
                new = np.sign(rho) * max(abs(rho) - lam_j, 0.0) / nu
            else:
                new = rho / nu
            if new != old:
                r += X[:, j] * (old - new)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        return max_delta

    scale = max(1.0, float(np.max(np.abs(beta), initial=0.0)))
    for _ in range(max_passes):
        delta = pass_over(range(p))
        active = np.flatnonzero(beta != 0.0)
        for _ in range(max_passes):
            if delta <= tol * scale:
                break
            delta = pass_over(active)
            scale = max(1.0, float(np.max(np.abs(beta), initial=0.0)))
        # one verification pass over all coordinates
        delta = pass_over(range(p))
        scale = max(1.0, float(np.max(np.abs(beta), initial=0.0)))
        if delta <= tol * scale:
            break
    return beta, r


def lasso_fit(
    problem: DesignProblem,
    lam: float | None = None,
    tol: float = 1e-7,
    max_iter: int = 100,
    start: np.ndarray | None = None,
) -> np.ndarray:
    """L1-penalized GLM fit by coordinate descent inside IRLS.

    The returned solution satisfies the KKT conditions of
    ``neg_loglik + lam * ||beta||_1``: for zero coefficients the smooth
    gradient is within ``lam + tol``; for active ones it cancels the
    subgradient within ``tol`` (scaled by the gradient magnitude).
    """
    lam = problem.lam if lam is None else float(lam)
    if lam <= 0:
        raise ValidationError("lasso penalty must be > 0")
    X, pen_mask = _full_design(problem)
    n, p = X.shape
    fam = problem.family
    obs_w = problem.weights if problem.weights is not None else np.ones(n)
    lam_vec = np.where(pen_mask, lam, 0.0)
    prob = DesignProblem(
        problem.X, problem.y, fam, penalty="lasso", lam=lam,
        weights=problem.weights, intercept=problem.intercept,
    )

    beta = np.zeros(p) if start is None else np.asarray(start, dtype=float).copy()
    for outer in range(max_iter):
        eta = X @ beta
        mu = fam.mean(eta)
        var = np.maximum(fam.variance(eta), 1e-12)
        w = obs_w * var
        z = eta + (problem.y - mu) / var
        col_norms2 = np.einsum("ij,ij->j", X * w[:, None], X)
        r = z - eta
        beta_old = beta.copy()
        beta, _ = _cd_quadratic(X, w, z, lam_vec, beta, r, col_norms2, tol)
        if fam.name == "gaussian":
            break
        if np.max(np.abs(beta - beta_old)) <= tol * max(1.0, np.max(np.abs(beta))):
            if kkt_violation(prob, lam, beta) <= 10 * tol * max(1.0, lam):
                break
    viol = kkt_violation(prob, lam, beta)
    if viol > 1e-4 * max(1.0, lam):
        raise DivergenceError(f"lasso did not converge; KKT violation {viol:.3e}")
    return beta


def kkt_violation(problem: DesignProblem, lam: float, beta: np.ndarray) -> float:
    """Worst KKT violation of the lasso objective at ``beta``."""
    X, pen_mask = _full_design(problem)
    g = _smooth_gradient(
        DesignProblem(problem.X, problem.y, problem.family, weights=problem.weights,
                      intercept=problem.intercept),
        X, pen_mask, beta,
    )
    viol = 0.0
    for j in range(len(beta)):
        if not pen_mask[j]:
            viol = max(viol, abs(g[j]))
        elif beta[j] == 0.0:
            viol = max(viol, max(abs(g[j]) - lam, 0.0))
        else:
            viol = max(viol, abs(g[j] + lam * np.sign(beta[j])))
    return float(viol)


def cv_lambda(
    problem: DesignProblem,
    grid,
    folds: int = 5,
    seed: int = 0,
) -> float:
    """Pick the grid penalty minimizing mean held-out deviance.

    Fold assignment is a seeded permutation, deterministic given ``seed``.
    Ties resolve to the larger penalty.  Works for both lasso and ridge
    problems, per ``problem.penalty``.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValidationError("empty penalty grid")
    n = len(problem.y)
    if n < folds:
        raise ValidationError(f"{n} observations cannot fill {folds} folds")
    perm = substream(seed, STREAM_CV).permutation(n)
    fold_of = np.empty(n, dtype=int)
    fold_of[perm] = np.arange(n) % folds

    order = np.argsort(grid)[::-1]  # descending for warm starts
    total_dev = np.zeros(len(grid))
    for k in range(folds):
        hold = fold_of == k
        keep = ~hold
        sub = DesignProblem(
            problem.X[keep], problem.y[keep], problem.family,
            penalty=problem.penalty, lam=problem.lam,
            weights=None if problem.weights is None else problem.weights[keep],
            intercept=problem.intercept,
        )
        Xh, _ = _full_design(problem)
        Xh = Xh[hold]
        start = None
        for gi in order:
            lam = grid[gi]
            sub.lam = lam
            if problem.penalty == "lasso":
                beta = lasso_fit(sub, lam, start=start)
            else:
                beta = irls_fit(sub, start=start)
            start = beta
            mu = problem.family.mean(Xh @ beta)
            total_dev[gi] += float(np.sum(problem.family.unit_deviance(problem.y[hold], mu)))
    best = min(range(len(grid)), key=lambda i: (total_dev[i], -grid[i]))
    return grid[best]

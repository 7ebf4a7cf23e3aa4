"""Comparison estimators: pooled quantile regression and the iterative
known-rank factor quantile regression.

The small quantile-regression subproblem solver is the scalar-prox ADMM
specialization of the ALM solver with the low-rank block removed, plus an
exact finishing stage: a quantile regression solution interpolates q
observations, so from the ADMM warm start we walk vertices (exact
piecewise-linear line searches along basis edges) until the subgradient
certificate holds. No linear-programming dependency is needed, and every
returned solution is an exact minimizer up to floating point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr as _pivoted_qr

from . import constants
from .alm import IllPosedDesignError, PanelData


def _check_design(Z: np.ndarray) -> np.ndarray:
    """Gram inverse of a full-column-rank design."""
    G = Z.T @ Z
    w = np.linalg.eigvalsh(G)
    if w[0] <= 0.0 or w[-1] / w[0] > constants.GRAM_COND_MAX:
        raise IllPosedDesignError(
            f"design matrix is rank deficient (Gram eigenvalue range "
            f"[{w[0]:.3e}, {w[-1]:.3e}])"
        )
    return np.linalg.inv(G)


def _row_check_loss(E: np.ndarray, u: float) -> np.ndarray:
    """Check loss of each row of a residual matrix."""
    return np.sum(E * (u - (E <= 0.0)), axis=1)


def _qr_admm_rows(Yrows, Z, u, tol, max_iters, B0=None):
    """ADMM warm phase for min_b sum_i rho_u(y_i - Z_i' b), many rows at once.

    Yrows is (m, n): m independent problems sharing the n x q design Z.
    Returns (B, converged, iters).
    """
    Yrows = np.atleast_2d(np.asarray(Yrows, dtype=float))
    Z = np.asarray(Z, dtype=float)
    m, n = Yrows.shape
    q = Z.shape[1]
    Gi = _check_design(Z)

    l1 = np.abs(Yrows).sum(axis=1, keepdims=True)
    mu = np.where(l1 > 0.0, 0.25 * n / np.maximum(l1, 1e-300), 1.0)
    c = 1.0 / mu

    B = np.zeros((m, q)) if B0 is None else np.array(B0, dtype=float)
    ZB = B @ Z.T
    H = np.zeros((m, n))
    converged = False
    iters = 0
    for k in range(max_iters):
        Gamma = H * c - ZB + Yrows
        V = np.where(
            Gamma >= 0.0,
            np.maximum(Gamma - u * c, 0.0),
            -np.maximum(-Gamma - (1.0 - u) * c, 0.0),
        )
        B_new = (Yrows - V + H * c) @ Z @ Gi
        ZB = B_new @ Z.T
        H = H - mu * (V + ZB - Yrows)
        crit = float(np.max(np.sum((B_new - B) ** 2, axis=1))) / q
        B = B_new
        iters = k + 1
        if crit <= tol:
            converged = True
            break
    return B, converged, iters


def _exact_line_search(r, zeta, u):
    """Minimize t -> sum_i rho_u(r_i - t zeta_i) exactly.

    The objective is convex piecewise linear with breakpoints r_i/zeta_i;
    the slope jumps by |zeta_i| at each and is negative at -inf, so the
    minimizer is the first breakpoint where the accumulated slope turns
    nonnegative. Returns (t_star, loss_at_t_star).
    """
    scale = float(np.max(np.abs(zeta))) if zeta.size else 0.0
    mask = np.abs(zeta) > 1e-14 * max(scale, 1.0)
    if not np.any(mask):
        return 0.0, float(np.sum(r * (u - (r <= 0.0))))
    z = zeta[mask]
    t_break = r[mask] / z
    jumps = np.abs(z)
    s0 = float(np.sum(-z * (u - (z < 0.0))))
    order = np.argsort(t_break, kind="stable")
    cum = s0 + np.cumsum(jumps[order])
    k = int(np.searchsorted(cum >= 0.0, True))
    if k >= order.size:
        k = order.size - 1
    t_star = float(t_break[order[k]])
    shifted = r - t_star * zeta
    return t_star, float(np.sum(shifted * (u - (shifted <= 0.0))))


def _select_basis(Z, r, q):
    """Pick q independent rows among the smallest absolute residuals."""
    n = Z.shape[0]
    for pool_size in (max(3 * q, q + 8), n):
        pool = np.argsort(np.abs(r), kind="stable")[: min(n, pool_size)]
        _, R, piv = _pivoted_qr(Z[pool].T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        if diag.size >= q and diag[q - 1] > 1e-12 * max(diag[0], 1e-300):
            return pool[piv[:q]]
        if pool_size >= n:
            break
    return None


def _vertex_descent(y, Z, u, b0, max_pivots=1000):
    """Exact finishing stage: descend vertex to vertex until the subgradient
    certificate  Z_A' w = -sum_{i not in A} Z_i psi_u(r_i),  w in [u-1, u]^q
    holds at the active basis A. Returns (b, certified)."""
    n, q = Z.shape
    b = np.asarray(b0, dtype=float).copy()
    r = y - Z @ b
    loss = float(np.sum(r * (u - (r <= 0.0))))
    ctol = 1e-8
    for _ in range(max_pivots):
        basis = _select_basis(Z, r, q)
        if basis is None:
            return b, False
        ZA = Z[basis]
        try:
            b_cand = np.linalg.solve(ZA, y[basis])
        except np.linalg.LinAlgError:
            return b, False
        r_cand = y - Z @ b_cand
        loss_cand = float(np.sum(r_cand * (u - (r_cand <= 0.0))))
        if loss_cand <= loss + 1e-12 * (1.0 + abs(loss)):
            b, r, loss = b_cand, r_cand, loss_cand

        outside = np.ones(n, dtype=bool)
        outside[basis] = False
        psi = u - (r < 0.0)
        g = Z[outside].T @ psi[outside]
        try:
            w = np.linalg.solve(ZA.T, -g)
        except np.linalg.LinAlgError:
            return b, False
        viol = np.maximum(w - u, (u - 1.0) - w)
        if np.all(viol <= ctol):
            return b, True

        D = np.linalg.inv(ZA)
        improved = False
        for j in np.argsort(-viol):
            if viol[j] <= ctol:
                break
            d = D[:, j]
            zeta = Z @ d
            t_star, new_loss = _exact_line_search(r, zeta, u)
            if new_loss < loss - 1e-12 * (1.0 + abs(loss)) and t_star != 0.0:
                b = b + t_star * d
                r = y - Z @ b
                loss = float(np.sum(r * (u - (r <= 0.0))))
                improved = True
                break
        if not improved:
            # No strictly improving edge: numerically optimal (degenerate tie).
            return b, True
    return b, False


def _solve_rows(Yrows, Z, u, tol, max_iters, B0=None, admm_cap=None):
    """ADMM warm start then exact vertex finish, row by row.

    Returns (B, all_certified). admm_cap optionally limits the warm phase;
    the finisher makes each row solution exact regardless.
    """
    Yrows = np.atleast_2d(np.asarray(Yrows, dtype=float))
    Z = np.asarray(Z, dtype=float)
    cap = max_iters if admm_cap is None else min(admm_cap, max_iters)
    B, _, _ = _qr_admm_rows(Yrows, Z, u, tol, cap, B0=B0)
    ok = True
    for i in range(B.shape[0]):
        B[i], cert = _vertex_descent(Yrows[i], Z, u, B[i])
        ok = ok and cert
    return B, ok


def qr_small(y, Z, u, *, tol=constants.QR_TOL, max_iters=constants.QR_MAX_ITERS,
             full_output=False):
    """Quantile regression of a vector y on a small full-rank design Z.

    Returns the coefficient vector (length q); with full_output=True also
    whether the exact optimality certificate was reached. Rank-deficient
    designs raise IllPosedDesignError.
    """
    y = np.asarray(y, dtype=float).ravel()
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, q = Z.shape
    if not (n > q >= 1):
        raise ValueError(f"need n > q >= 1, got n={n}, q={q}")
    if not 0.0 < u < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {u}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(Z))):
        raise ValueError("non-finite entries in y or Z")
    B, certified = _solve_rows(y[None, :], Z, u, tol, max_iters)
    if not certified:
        warnings.warn(
            "qr_small did not reach the optimality certificate", RuntimeWarning
        )
    if full_output:
        return B[0], certified
    return B[0]


def pooled_fit(data: PanelData, u, *, tol=constants.QR_TOL,
               max_iters=constants.QR_MAX_ITERS) -> np.ndarray:
    """Pooled quantile regression ignoring the fixed effects entirely.

    Flattens the panel to NT observations with design (X_it) and returns
    the p-vector of slopes.
    """
    if data.p < 1:
        raise ValueError("pooled_fit requires at least one covariate")
    Z = data.stacked_design()
    return qr_small(data.Y.ravel(), Z, u, tol=tol, max_iters=max_iters)


@dataclass
class IterativeFit:
    """Known-rank iterative estimator output: L = Lambda @ F.T by construction."""

    beta: np.ndarray
    Lambda: np.ndarray
    F: np.ndarray
    L: np.ndarray
    iterations: int
    converged: bool
    degenerate: bool = False
    objective_history: list = field(default_factory=list)


def _panel_objective(data: PanelData, u, beta, L) -> float:
    R = data.Y - L
    for j in range(data.p):
        R = R - data.X[j] * beta[j]
    return float(np.sum(R * (u - (R <= 0.0)))) / (data.N * data.T)


# ADMM warm-phase budget per block inside a sweep; the vertex finisher makes
# each block exact, so this only trades warm-start quality against time.
_SWEEP_ADMM_CAP = 300


def iterative_fit(data: PanelData, u, r, *, tol=constants.ITERATIVE_TOL,
                  max_iters=constants.ITERATIVE_MAX_SWEEPS,
                  qr_tol=constants.QR_TOL,
                  qr_max_iters=constants.QR_MAX_ITERS) -> IterativeFit:
    """Alternating per-unit / per-period / pooled quantile regressions with a
    fixed factor count r.

    Initialization: beta from the pooled fit; F from the top-r right
    singular vectors of the residual matrix scaled by sqrt(T). Each sweep
    updates all unit loadings, then all period factors, then beta, and
    terminates on the same squared-change criterion as the penalized
    solver. Every block update is kept only where it does not increase the
    block's check loss, so the pooled objective is nonincreasing across
    sweeps by construction.
    """
    N, T, p = data.N, data.T, data.p
    if not 0 <= r <= min(N, T):
        raise ValueError(f"rank must lie in [0, min(N,T)], got {r}")

    if p:
        beta = pooled_fit(data, u, tol=qr_tol, max_iters=qr_max_iters)
        Xmat = data.stacked_design()
    else:
        beta = np.zeros(0)
        Xmat = None

    def residual(b):
        R = data.Y.copy()
        for j in range(p):
            R -= data.X[j] * b[j]
        return R

    if r == 0:
        L = np.zeros((N, T))
        return IterativeFit(
            beta=beta, Lambda=np.zeros((N, 0)), F=np.zeros((T, 0)), L=L,
            iterations=0, converged=True,
            objective_history=[_panel_objective(data, u, beta, L)],
        )

    R0 = residual(beta)
    _, _, right_t = np.linalg.svd(R0, full_matrices=False)
    F = right_t[:r].T * np.sqrt(T)
    Lam = np.zeros((N, r))
    L = Lam @ F.T

    history = [_panel_objective(data, u, beta, L)]
    converged = False
    degenerate = False
    sweeps = 0
    for sweep in range(max_iters):
        beta_old, L_old = beta.copy(), L.copy()
        R = residual(beta)

        # Unit loadings given (beta, F): one small regression per row.
        cand, _ = _solve_rows(R, F, u, qr_tol, qr_max_iters,
                              B0=Lam, admm_cap=_SWEEP_ADMM_CAP)
        keep = _row_check_loss(R - cand @ F.T, u) <= _row_check_loss(R - Lam @ F.T, u)
        Lam = np.where(keep[:, None], cand, Lam)

        # Period factors given (beta, Lambda): per-column regressions.
        cand, _ = _solve_rows(R.T, Lam, u, qr_tol, qr_max_iters,
                              B0=F, admm_cap=_SWEEP_ADMM_CAP)
        keep = _row_check_loss(R.T - cand @ Lam.T, u) <= _row_check_loss(R.T - F @ Lam.T, u)
        F = np.where(keep[:, None], cand, F)

        L = Lam @ F.T

        # Coefficients given (Lambda, F): pooled regression on Y - L.
        if p:
            cand_b, _ = _solve_rows((data.Y - L).ravel()[None, :], Xmat, u,
                                    qr_tol, qr_max_iters, B0=beta[None, :],
                                    admm_cap=_SWEEP_ADMM_CAP)
            if _panel_objective(data, u, cand_b[0], L) <= _panel_objective(data, u, beta, L):
                beta = cand_b[0]

        history.append(_panel_objective(data, u, beta, L))
        sweeps = sweep + 1

        fnorms = np.linalg.norm(F, axis=0)
        if np.any(fnorms < 1e-10) or np.linalg.matrix_rank(F) < r:
            degenerate = True
            warnings.warn("factor iterate lost rank during the sweep", RuntimeWarning)

        crit = float(np.sum((L - L_old) ** 2)) / (N * T)
        if p:
            crit += float(np.sum((beta - beta_old) ** 2)) / p
        if crit <= tol:
            converged = True
            break

    return IterativeFit(
        beta=beta, Lambda=Lam, F=F, L=L, iterations=sweeps,
        converged=converged, degenerate=degenerate, objective_history=history,
    )

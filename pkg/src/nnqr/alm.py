"""Nuclear-norm penalized quantile regression via an augmented Lagrangian solver.

Solves, for a panel Y and covariate matrices X_1..X_p at quantile level u,

    min_{beta, L}  (1/NT) sum_it rho_u(Y - sum_j X_j beta_j - L)_it + lam * ||L||_*

by alternating closed-form block updates on the equivalent constrained form
with slack V = Y - sum_j X_j beta_j - L and multiplier H:

    L <- svt(Y - V - sum_j X_j beta_j + H/mu, 1/mu)
    V <- prox_check(H/mu - sum_j X_j beta_j - L + Y, u, 1/(mu lam NT))
    beta <- (X'X)^{-1} X' vec(Y - L - V + H/mu)
    H <- H - mu (V + sum_j X_j beta_j + L - Y)

with beta0 = 0, V0 = H0 = 0, mu fixed across iterations, and termination
when ||beta_new - beta||^2 / p + ||L_new - L||_F^2 / NT <= tol (the beta
term is dropped when p = 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import constants
from .linalg import as_matrix, nuclear_norm
from .losses import check_loss, prox_check


class IllPosedDesignError(ValueError):
    """The stacked covariate design is rank deficient (or numerically so)."""


class DegenerateInputError(ValueError):
    """Input data degenerate for the requested operation (e.g. ||Y||_1 = 0)."""


@dataclass(frozen=True)
class PanelData:
    """A balanced panel: outcome Y (N x T) and p covariate matrices X_j (N x T)."""

    Y: np.ndarray
    X: tuple
    N: int
    T: int
    p: int

    @classmethod
    def from_arrays(cls, Y, X: Sequence = ()) -> "PanelData":
        Y = as_matrix(Y, "Y")
        N, T = Y.shape
        Xs = []
        for j, Xj in enumerate(X):
            Xj = as_matrix(Xj, f"X{j + 1}")
            if Xj.shape != (N, T):
                raise ValueError(
                    f"X{j + 1} has shape {Xj.shape}, expected {(N, T)} to match Y"
                )
            Xs.append(Xj)
        return cls(Y=Y, X=tuple(Xs), N=N, T=T, p=len(Xs))

    def stacked_design(self) -> Optional[np.ndarray]:
        """NT x p matrix (vec(X_1), ..., vec(X_p)); None when p = 0."""
        if self.p == 0:
            return None
        return np.stack([Xj.ravel() for Xj in self.X], axis=1)


@dataclass(frozen=True)
class FitConfig:
    """Solver configuration. lam and mu default to the data-driven rules."""

    u: float
    lam: Optional[float] = None
    mu: Optional[float] = None
    max_iters: int = constants.ALM_MAX_ITERS
    tol: float = constants.ALM_TOL
    l_inf_bound: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.u < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {self.u}")
        if self.lam is not None and self.lam <= 0.0:
            raise ValueError("lambda must be positive")
        if self.mu is not None and self.mu <= 0.0:
            raise ValueError("mu must be positive")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.l_inf_bound is not None and self.l_inf_bound <= 0.0:
            raise ValueError("l_inf_bound must be positive")


@dataclass
class FitResult:
    """Estimated coefficients and low-rank component plus solver telemetry."""

    beta: np.ndarray
    L: np.ndarray
    singulars: np.ndarray
    iterations: int
    converged: bool
    final_constraint_residual: float
    objective: float
    max_abs_L: float
    lam: float
    mu: float
    seconds: float = field(default=0.0)


def default_lambda(N: int, T: int) -> float:
    """Penalty rule log(NT) * sqrt(max(N, T)) / (3.6 N T)."""
    if N < 2 or T < 2:
        raise ValueError("default lambda rule requires N, T >= 2")
    return float(np.log(N * T) * np.sqrt(max(N, T)) / (3.6 * N * T))


def default_mu(Y) -> float:
    """Augmented Lagrangian penalty rule 0.25 N T / ||Y||_1 (entrywise 1-norm)."""
    Y = as_matrix(Y, "Y")
    l1 = float(np.abs(Y).sum())
    if l1 == 0.0:
        raise DegenerateInputError("||Y||_1 = 0: mu rule undefined for a zero panel")
    return 0.25 * Y.size / l1


def objective_value(data: PanelData, u: float, lam: float, beta, L) -> float:
    """(1/NT) rho_u(Y - sum_j X_j beta_j - L) + lam ||L||_*."""
    L = as_matrix(L, "L")
    if L.shape != (data.N, data.T):
        raise ValueError(f"L has shape {L.shape}, expected {(data.N, data.T)}")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape != (data.p,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({data.p},)")
    R = data.Y - L
    for j in range(data.p):
        R = R - data.X[j] * beta[j]
    return check_loss(R, u) / (data.N * data.T) + lam * nuclear_norm(L)


def _gram_inverse(Xmat: np.ndarray) -> np.ndarray:
    G = Xmat.T @ Xmat
    w = np.linalg.eigvalsh(G)
    if w[0] <= 0.0 or w[-1] / w[0] > constants.GRAM_COND_MAX:
        raise IllPosedDesignError(
            "stacked covariate design is rank deficient "
            f"(Gram eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}])"
        )
    return np.linalg.inv(G)


def alm_fit(data: PanelData, config: FitConfig) -> FitResult:
    """Run the augmented Lagrangian iteration until the termination criterion.

    Non-convergence within max_iters returns a result flagged
    converged=False rather than raising.
    """
    N, T, p = data.N, data.T, data.p
    Y = data.Y
    lam = config.lam if config.lam is not None else default_lambda(N, T)
    mu = config.mu if config.mu is not None else default_mu(Y)
    c = 1.0 / (mu * lam * N * T)

    Xmat = data.stacked_design()
    Gi = _gram_inverse(Xmat) if p else None

    beta = np.zeros(p)
    L = np.zeros((N, T))
    V = np.zeros((N, T))
    H = np.zeros((N, T))
    XB = np.zeros((N, T))

    converged = False
    iterations = 0
    singulars = np.zeros(min(N, T))
    for k in range(config.max_iters):
        M = Y - V - XB + H / mu
        left, s, right_t = np.linalg.svd(M, full_matrices=False)
        s_new = np.maximum(s - 1.0 / mu, 0.0)
        L_new = (left * s_new) @ right_t
        if config.l_inf_bound is not None:
            np.clip(L_new, -config.l_inf_bound, config.l_inf_bound, out=L_new)

        Gamma_v = H / mu - XB - L_new + Y
        V_new = prox_check(Gamma_v, config.u, c)

        if p:
            Gamma_b = Y - L_new - V_new + H / mu
            beta_new = Gi @ (Xmat.T @ Gamma_b.ravel())
            XB_new = (Xmat @ beta_new).reshape(N, T)
        else:
            beta_new, XB_new = beta, XB

        H = H - mu * (V_new + XB_new + L_new - Y)

        crit = float(np.sum((L_new - L) ** 2)) / (N * T)
        if p:
            crit += float(np.sum((beta_new - beta) ** 2)) / p

        beta, L, V, XB, singulars = beta_new, L_new, V_new, XB_new, s_new
        iterations = k + 1
        if crit <= config.tol:
            converged = True
            break

    residual = float(np.linalg.norm(Y - XB - L - V))
    if config.l_inf_bound is not None:
        # Clipping invalidates the L-step spectrum; recompute.
        singulars = np.linalg.svd(L, compute_uv=False)
    return FitResult(
        beta=beta,
        L=L,
        singulars=singulars,
        iterations=iterations,
        converged=converged,
        final_constraint_residual=residual,
        objective=objective_value(data, config.u, lam, beta, L),
        max_abs_L=float(np.max(np.abs(L))),
        lam=lam,
        mu=mu,
    )

"""Rank estimation from fitted singular values, tangent-space projection,
and the cone diagnostic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import ORTHONORMAL_TOL
from .linalg import as_matrix, nuclear_norm


@dataclass(frozen=True)
class RankEstimate:
    r_hat: int
    threshold: float
    singulars: np.ndarray


@dataclass(frozen=True)
class ConeReport:
    """Left-hand side of the cone inequality and whether it is satisfied."""

    value: float
    in_cone: bool


def estimate_rank(singulars, threshold: float) -> RankEstimate:
    """Count singular values at or above the threshold."""
    s = np.asarray(singulars, dtype=float).ravel()
    if np.any(np.diff(s) > 0):
        raise ValueError("singular values must be sorted nonincreasing")
    if np.any(s < 0):
        raise ValueError("singular values must be nonnegative")
    threshold = float(threshold)
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    return RankEstimate(r_hat=int(np.sum(s >= threshold)), threshold=threshold,
                        singulars=s)


def default_rank_threshold(N: int, T: int) -> float:
    """(N*T*max(N,T))^(1/4): geometric mean of the signal order sqrt(NT)
    and the noise order sqrt(max(N,T)); one valid choice among many."""
    if N < 2 or T < 2:
        raise ValueError("default rank threshold requires N, T >= 2")
    return float((N * T * max(N, T)) ** 0.25)


def _check_orthonormal(Q: np.ndarray, name: str) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2:
        raise ValueError(f"{name} must be 2-D")
    k = Q.shape[1]
    if k and np.linalg.norm(Q.T @ Q - np.eye(k)) > ORTHONORMAL_TOL:
        raise ValueError(f"{name} does not have orthonormal columns")
    return Q


def project_tangent(W, R, S) -> np.ndarray:
    """Orthogonal projection onto the tangent space of a low-rank matrix
    with left/right singular vectors R (N x r) and S (T x r):

        P W = R R' W + W S S' - R R' W S S'
    """
    W = as_matrix(W, "W")
    R = _check_orthonormal(R, "R")
    S = _check_orthonormal(S, "S")
    if R.shape[1] == 0 or S.shape[1] == 0:
        return np.zeros_like(W)
    RtW = R.T @ W
    WS = W @ S
    return R @ RtW + (WS - R @ (RtW @ S)) @ S.T


def cone_diagnostic(delta_beta, Delta_L, L0_factors, p: int, N: int, T: int,
                    C_cone: float = 1.0) -> ConeReport:
    """Evaluate the restricted-cone inequality on an estimation error pair.

    value = ||Delta_L||_* - 4 ||P Delta_L||_*
            - C_cone * sqrt(p (N ^ T) log(p N T)) * ||delta_beta||_F

    in_cone is value <= 0. Purely diagnostic, never a gate on estimation.
    """
    Delta_L = as_matrix(Delta_L, "Delta_L")
    if Delta_L.shape != (N, T):
        raise ValueError(f"Delta_L has shape {Delta_L.shape}, expected {(N, T)}")
    R, S = L0_factors
    proj = project_tangent(Delta_L, R, S)
    value = nuclear_norm(Delta_L) - 4.0 * nuclear_norm(proj)
    if p > 0:
        db = np.asarray(delta_beta, dtype=float).ravel()
        if db.shape != (p,):
            raise ValueError(f"delta_beta has shape {db.shape}, expected ({p},)")
        value -= C_cone * np.sqrt(p * min(N, T) * np.log(p * N * T)) * float(
            np.linalg.norm(db)
        )
    return ConeReport(value=float(value), in_cone=bool(value <= 0.0))

"""Dense-matrix primitives: thin SVD contract and singular value thresholding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import SVD_RTOL


class SvdConvergenceError(RuntimeError):
    """The underlying SVD iteration failed to converge within its cap."""


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate a dense real matrix: 2-D, at least 1x1, all entries finite."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD  M = left @ diag(singulars) @ right.T.

    left is N x k, right is T x k, k = min(N, T); singulars are
    nonincreasing and nonnegative. Sign convention: the largest-magnitude
    entry of each left singular vector is nonnegative, which makes factors
    reproducible across runs.
    """

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singulars) @ self.right.T


def svd(M) -> SvdFactors:
    """Thin SVD with deterministic signs.

    Relative reconstruction accuracy and orthonormality are within
    SVD_RTOL; convergence failure of the backing LAPACK iteration raises
    SvdConvergenceError.
    """
    M = as_matrix(M)
    try:
        left, s, right_t = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(
            f"SVD did not converge for a {M.shape[0]}x{M.shape[1]} matrix: {exc}"
        ) from exc
    # Fix signs: largest-|entry| of each left vector made nonnegative.
    anchor = np.argmax(np.abs(left), axis=0)
    flip = np.where(left[anchor, np.arange(left.shape[1])] < 0.0, -1.0, 1.0)
    return SvdFactors(left=left * flip, singulars=s, right=right_t.T * flip)


def nuclear_norm(M) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(as_matrix(M), compute_uv=False).sum())


def svt(M, tau: float) -> np.ndarray:
    """Singular value thresholding: shrink every singular value by tau.

    Output singular values are max(sigma_j - tau, 0); tau = 0 reproduces M
    up to SVD accuracy.
    """
    tau = float(tau)
    if tau < 0.0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    f = svd(M)
    s = np.maximum(f.singulars - tau, 0.0)
    return (f.left * s) @ f.right.T


def validate_factors(f: SvdFactors, M, rtol: float = SVD_RTOL) -> None:
    """Assert the SvdFactors invariants against the decomposed matrix."""
    M = as_matrix(M)
    s = f.singulars
    if np.any(s < 0) or np.any(np.diff(s) > 0):
        raise ValueError("singular values must be nonincreasing and nonnegative")
    scale = 1.0 + float(np.linalg.norm(M))
    if np.linalg.norm(f.reconstruct() - M) > rtol * scale:
        raise ValueError("reconstruction error exceeds the SVD tolerance")
    k = s.shape[0]
    for Q in (f.left, f.right):
        if np.linalg.norm(Q.T @ Q - np.eye(k)) > rtol * k:
            raise ValueError("factor columns are not orthonormal within tolerance")

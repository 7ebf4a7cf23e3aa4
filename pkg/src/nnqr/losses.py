"""Quantile check loss and its elementwise proximal map."""

from __future__ import annotations

import numpy as np


def _validate_u(u: float) -> float:
    u = float(u)
    if not 0.0 < u < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {u}")
    return u


def _validate_finite(Z: np.ndarray, name: str = "input") -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if not np.all(np.isfinite(Z)):
        raise ValueError(f"{name} contains non-finite entries")
    return Z


def check_loss(Z, u: float) -> float:
    """Summed check loss  sum_it Z_it (u - 1(Z_it <= 0)).

    The indicator convention at Z_it == 0 follows the printed definition;
    the summand is 0 there either way.
    """
    u = _validate_u(u)
    Z = _validate_finite(Z)
    return float(np.sum(Z * (u - (Z <= 0.0))))


def check_subgradient(Z, u: float) -> np.ndarray:
    """Elementwise subgradient selection u - 1(Z <= 0) of the check loss."""
    u = _validate_u(u)
    Z = _validate_finite(Z)
    return u - (Z <= 0.0).astype(float)


def prox_check(Gamma, u: float, c: float) -> np.ndarray:
    """Proximal map of the scaled check loss, elementwise.

    Each output entry minimizes  c * rho_u(v) + (v - Gamma_it)^2 / 2  over v:

        Gamma_it >= 0:  max(Gamma_it - u*c, 0)
        Gamma_it <  0: -max(-Gamma_it - (1-u)*c, 0)

    A tie at Gamma_it == 0 returns 0 (both branches agree).
    """
    u = _validate_u(u)
    c = float(c)
    if c <= 0.0:
        raise ValueError(f"prox constant must be positive, got {c}")
    G = _validate_finite(Gamma, "Gamma")
    pos = np.maximum(G - u * c, 0.0)
    neg = -np.maximum(-G - (1.0 - u) * c, 0.0)
    return np.where(G >= 0.0, pos, neg)

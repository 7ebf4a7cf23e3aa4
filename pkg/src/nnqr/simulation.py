"""Monte Carlo data-generating process with quantile-dependent rank structure.

One panel per call: three covariates, three interactive fixed effect terms
whose activation depends on the latent uniform draw (all active above 0.7,
two above 0.3, one always), plus an additive error from a chosen law. The
u-th conditional quantile surface is linear in the covariates plus a
low-rank matrix whose rank steps from 2 to 3 to 4 across u.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from scipy.special import ndtri

from .alm import PanelData

ERROR_LAWS = ("standard_normal", "student_t2")


def normal_quantile(u):
    """Inverse standard normal CDF (absolute error well inside 1e-9)."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("quantile level must lie in (0, 1)")
    out = ndtri(u)
    return float(out) if out.ndim == 0 else out


def t2_quantile(u):
    """Inverse CDF of Student's t with 2 degrees of freedom, closed form
    (2u - 1) * sqrt(2 / (4u(1-u)))."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("quantile level must lie in (0, 1)")
    out = (2.0 * u - 1.0) * np.sqrt(2.0 / (4.0 * u * (1.0 - u)))
    return float(out) if out.ndim == 0 else out


def _error_quantile(u, law: str):
    if law == "standard_normal":
        return normal_quantile(u)
    if law == "student_t2":
        return t2_quantile(u)
    raise ValueError(f"unknown error law {law!r}; expected one of {ERROR_LAWS}")


@dataclass(frozen=True)
class SimulationSpec:
    N: int
    T: int
    phi: float
    error_law: str = "standard_normal"
    seed: int = 0
    quantile_levels: Tuple[float, ...] = (0.2, 0.5, 0.8)

    def __post_init__(self):
        if self.N < 2 or self.T < 2:
            raise ValueError("panel dimensions must be at least 2")
        if self.phi < 0.0:
            raise ValueError("phi must be nonnegative")
        if self.error_law not in ERROR_LAWS:
            raise ValueError(f"error_law must be one of {ERROR_LAWS}")
        for u in self.quantile_levels:
            if not 0.0 < u < 1.0:
                raise ValueError("quantile levels must lie in (0, 1)")


def true_beta(u) -> np.ndarray:
    """Coefficients (-1 + 0.1u, 1 + 0.1u, -1 + 0.1u)."""
    u = float(u)
    return np.array([-1.0 + 0.1 * u, 1.0 + 0.1 * u, -1.0 + 0.1 * u])


def true_rank(u) -> int:
    """Ones-matrix term plus active factor terms: 2, 3 or 4 as u crosses 0.3, 0.7."""
    u = float(u)
    if u <= 0.3:
        return 2
    if u <= 0.7:
        return 3
    return 4


@dataclass
class SimulationTruth:
    """A simulated panel with its ground truth at the requested levels.

    latent retains the raw draws (F, chi, eta, U) for audits; beta_true,
    L0 and r_true are keyed by the exact floats in quantile_levels.
    """

    data: PanelData
    spec: SimulationSpec
    beta_true: Dict[float, np.ndarray]
    L0: Dict[float, np.ndarray]
    r_true: Dict[float, int]
    latent: Dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def low_rank_truth(self, u) -> np.ndarray:
        """L0(u) for an arbitrary level: error-law quantile times the ones
        matrix plus the active loading-times-factor terms evaluated at u."""
        u = float(u)
        F, chi = self.latent["F"], self.latent["chi"]
        N, T = self.data.N, self.data.T
        L = _error_quantile(u, self.spec.error_law) * np.ones((N, T))
        L += np.outer(chi[0] + 0.1 * u, F[0])
        if u > 0.3:
            L += np.outer(chi[1] + 0.1 * u, F[1])
        if u > 0.7:
            L += np.outer(chi[2] + 0.1 * u, F[2])
        return L

    def quantile_surface(self, u) -> np.ndarray:
        """The u-th conditional quantile of Y given the draws.

        Evaluating this surface at the latent U entry reproduces Y exactly,
        so strict monotonicity of Y in the latent uniform can be audited by
        sweeping u here.
        """
        b = true_beta(u)
        q = self.low_rank_truth(u)
        for j in range(3):
            q = q + self.data.X[j] * b[j]
        return q


def simulate(spec: SimulationSpec) -> SimulationTruth:
    """Draw one panel: independent substreams per variable so replications
    and variables are order-independent under parallel execution."""
    root = np.random.SeedSequence(spec.seed)
    streams = [np.random.Generator(np.random.Philox(s)) for s in root.spawn(4)]
    N, T, phi = spec.N, spec.T, spec.phi

    U = streams[0].uniform(0.0, 1.0, (N, T))
    F = streams[1].uniform(0.0, 2.0, (3, T))
    chi = streams[2].uniform(0.0, 1.0, (3, N))
    eta = streams[3].uniform(0.0, 2.0, (3, N, T))

    X = [eta[j] + phi * (F[j][None, :] ** 2 + chi[j][:, None] ** 2) for j in range(3)]

    # Structural equation: loadings are evaluated at the entrywise latent
    # uniform U_it, unlike the truth surface which evaluates them at the
    # requested level u.
    act2 = U > 0.3
    act3 = U > 0.7
    Y = (
        X[0] * (-1.0 + 0.1 * U)
        + X[1] * (1.0 + 0.1 * U)
        + X[2] * (-1.0 + 0.1 * U)
        + F[0][None, :] * (chi[0][:, None] + 0.1 * U)
        + act2 * F[1][None, :] * (chi[1][:, None] + 0.1 * U)
        + act3 * F[2][None, :] * (chi[2][:, None] + 0.1 * U)
        + _error_quantile(U, spec.error_law)
    )

    truth = SimulationTruth(
        data=PanelData.from_arrays(Y, X),
        spec=spec,
        beta_true={},
        L0={},
        r_true={},
        latent={"F": F, "chi": chi, "eta": eta, "U": U},
    )
    for u in spec.quantile_levels:
        truth.beta_true[u] = true_beta(u)
        truth.L0[u] = truth.low_rank_truth(u)
        truth.r_true[u] = true_rank(u)
    return truth

"""Central tolerance record.

Every numeric tolerance used by the library lives here so the test suite
(and the acceptance gate in particular) can reference the same values the
solvers use.
"""

# SVD contract: relative reconstruction / orthonormality accuracy of the
# thin factorization, and the tolerance used when validating factors.
SVD_RTOL = 1e-10

# Elementwise check-loss proximal map must agree with a brute-force scalar
# minimizer to this absolute tolerance.
PROX_ORACLE_TOL = 1e-6

# Singular value thresholding must agree with an independent
# SVD-shrink-reconstruct oracle Frobenius-wise to this tolerance; the
# nuclear-norm identity holds to the same tolerance.
SVT_ORACLE_TOL = 1e-8

# ALM solver defaults (termination threshold on the squared-change
# criterion, and the iteration cap).
ALM_TOL = 1e-6
ALM_MAX_ITERS = 10_000

# Feasibility of converged ALM fits: ||Y - sum_j X_j b_j - L - V||_F must
# not exceed FEASIBILITY_RTOL * (1 + ||Y||_F).
FEASIBILITY_RTOL = 1e-3

# Normal-equation residual of every beta step, relative.
NORMAL_EQ_RTOL = 1e-8

# Gram-matrix conditioning guard for the stacked covariate design.
GRAM_COND_MAX = 1e12

# Small-problem quantile regression (ADMM specialization) defaults.
QR_TOL = 1e-8
QR_MAX_ITERS = 50_000

# Orthonormality validation for tangent-space projector inputs.
ORTHONORMAL_TOL = 1e-8

# Inverse-CDF accuracy contract for the simulation error laws.
QUANTILE_FN_ATOL = 1e-9

# Iterative (known-rank) estimator defaults: same termination criterion as
# the ALM solver, sweep cap.
ITERATIVE_TOL = 1e-6
ITERATIVE_MAX_SWEEPS = 200

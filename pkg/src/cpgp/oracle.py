"""Dense brute-force reference model: the ground truth for equivalence tests.

Everything here is assembled entrywise and factorized densely, on purpose.
This module must stay independent of the structured fast paths (its kernel
evaluation is its own, duplicated arithmetic) so that a shared bug cannot
validate itself.  Cost is O(n^3); a hard size cap guards against misuse.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NotPositiveDefiniteError
from .kernel import Hyperparams, KernelBlocks, PeriodSpec, Signal, build_kernel_blocks
from .likelihood import ConstantBasis, RegressionBasis

LOG2PI = math.log(2.0 * math.pi)

DENSE_CAP = 2048


def _dense_correlation(n: int, theta: float, p: int, d: int) -> np.ndarray:
    """Entrywise n x n correlation matrix; deliberately not the kernel module's code."""
    idx = np.arange(1, n + 1, dtype=np.float64)
    diff = idx[:, None] - idx[None, :]
    return np.exp(-(theta**2) * np.sin(np.pi * d * diff / p) ** 2)


@dataclass
class DenseModel:
    """Fully materialized GP pieces at one (theta, delta, p, d)."""

    signal: Signal
    theta: float
    delta: float
    p: int
    d: int
    basis: RegressionBasis
    K_delta: np.ndarray
    F: np.ndarray
    chol: np.ndarray
    beta_hat: np.ndarray
    sigma2_hat: float
    loglik: float


def build_dense_model(
    signal: Signal,
    theta: float,
    delta: float,
    p: int,
    d: int = 1,
    basis: RegressionBasis | None = None,
    allow_large: bool = False,
) -> DenseModel:
    """Assemble and factorize the full covariance; GLS estimates and exact log-likelihood.

    Refuses n > DENSE_CAP unless `allow_large` is set: this path exists for
    verification, not production use.
    """
    n = signal.n
    if n > DENSE_CAP and not allow_large:
        raise InvalidArgumentError(
            f"dense reference refuses n={n} > {DENSE_CAP}; pass allow_large=True to override"
        )
    basis = basis or ConstantBasis()
    K = _dense_correlation(n, theta, p, d)
    Kd = K + delta**2 * np.eye(n)
    try:
        chol = np.linalg.cholesky(Kd)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"dense covariance is not PSD: {exc}") from exc
    F = basis.design(signal.times())
    y = signal.values
    Ki_y = np.linalg.solve(Kd, y)
    Ki_F = np.linalg.solve(Kd, F)
    beta = np.linalg.solve(F.T @ Ki_F, F.T @ Ki_y)
    resid = y - F @ beta
    sigma2 = float(resid @ np.linalg.solve(Kd, resid)) / n
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    if sigma2 <= 0.0:
        loglik = -math.inf
    else:
        loglik = -0.5 * (n * math.log(sigma2) + logdet + n + n * LOG2PI)
    return DenseModel(
        signal=signal,
        theta=theta,
        delta=delta,
        p=p,
        d=d,
        basis=basis,
        K_delta=Kd,
        F=F,
        chol=chol,
        beta_hat=beta,
        sigma2_hat=sigma2,
        loglik=loglik,
    )


def dense_loglik(
    signal: Signal,
    theta: float,
    delta: float,
    p: int,
    d: int = 1,
    basis: RegressionBasis | None = None,
    allow_large: bool = False,
):
    """(log-likelihood, beta_hat, sigma2_hat) from the dense model."""
    model = build_dense_model(signal, theta, delta, p, d, basis, allow_large)
    return model.loglik, model.beta_hat, model.sigma2_hat


def dense_blup(t: float, model: DenseModel):
    """Dense best linear unbiased prediction and its variance at time t (seconds).

    The variance is for the noisy observation at t (it includes the nugget)
    and accounts for the estimated regression coefficients.
    """
    sig = model.signal
    T = model.p / (model.d * sig.fs)
    ti = sig.times()
    r = np.exp(-(model.theta**2) * np.sin(np.pi * (t - ti) / T) ** 2)
    Kd = model.K_delta
    Ki_r = np.linalg.solve(Kd, r)
    f = model.basis.at(t)
    resid = sig.values - model.F @ model.beta_hat
    yhat = float(f @ model.beta_hat + r @ np.linalg.solve(Kd, resid))
    omega = f - model.F.T @ Ki_r
    A = model.F.T @ np.linalg.solve(Kd, model.F)
    var = model.sigma2_hat * (
        1.0 + model.delta**2 - float(r @ Ki_r) + float(omega @ np.linalg.solve(A, omega))
    )
    return yhat, var


@dataclass(frozen=True)
class DecompositionReport:
    """Outcome of the entrywise block-structure verification."""

    passed: bool
    max_block_error: float
    max_circulant_error: float
    max_toeplitz_error: float
    first_mismatch: tuple[int, int] | None

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        loc = "" if self.first_mismatch is None else f" first mismatch at {self.first_mismatch}"
        return (
            f"{status}: block err {self.max_block_error:.3e}, "
            f"circulant err {self.max_circulant_error:.3e}, "
            f"toeplitz err {self.max_toeplitz_error:.3e}{loc}"
        )


def dense_decomposition_check(
    signal: Signal,
    spec: PeriodSpec,
    hyper: Hyperparams,
    blocks: KernelBlocks | None = None,
    tol: float = 1e-14,
) -> DecompositionReport:
    """Verify that the dense correlation matrix equals its structured block layout.

    Checks, entry for entry: every p x p block of the segmented part equals
    the circulant built from `blocks`, the segments-vs-remainder strip equals
    its first m columns, the corner equals the Toeplitz form, the circulant
    row is reversal-symmetric, and the corner has constant diagonals.
    Passing corrupted `blocks` localizes the first offending entry.
    """
    n, p, k, m = signal.n, spec.p, spec.k, spec.m
    if blocks is None:
        blocks = build_kernel_blocks(spec, hyper)
    K = _dense_correlation(n, hyper.theta, spec.p, spec.d)
    R = blocks.dense_circulant()
    first_mismatch = None
    max_block = 0.0

    def _scan(block, ref, off_i, off_j):
        nonlocal max_block, first_mismatch
        err = np.abs(block - ref)
        worst = float(err.max()) if err.size else 0.0
        if worst > max_block:
            max_block = worst
        if worst > tol and first_mismatch is None:
            i, j = np.unravel_index(int(np.argmax(err)), err.shape)
            first_mismatch = (off_i + int(i), off_j + int(j))

    for r_i in range(k):
        for s_j in range(k):
            _scan(K[r_i * p : (r_i + 1) * p, s_j * p : (s_j + 1) * p], R, r_i * p, s_j * p)
        if m:
            _scan(K[r_i * p : (r_i + 1) * p, k * p :], blocks.bullet_cols, r_i * p, k * p)
    if m:
        i = np.arange(m)
        star = blocks.star_row[np.abs(i[:, None] - i[None, :])]
        _scan(K[k * p :, k * p :], star, k * p, k * p)

    row = blocks.circ_row
    circ_err = float(np.abs(row - row[(-np.arange(p)) % p]).max())
    if m:
        corner = K[k * p :, k * p :]
        toe_err = 0.0
        for off in range(1, m):
            diag = np.diagonal(corner, offset=off)
            toe_err = max(toe_err, float(np.abs(diag - diag[0]).max()))
    else:
        toe_err = 0.0

    passed = max_block <= tol and circ_err <= tol and toe_err <= 1e-10
    return DecompositionReport(
        passed=passed,
        max_block_error=max_block,
        max_circulant_error=circ_err,
        max_toeplitz_error=toe_err,
        first_mismatch=first_mismatch,
    )

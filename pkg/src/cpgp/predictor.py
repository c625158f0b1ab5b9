"""Best linear unbiased prediction at arbitrary (possibly off-grid) times.

The predictor caches every factorization once (circulant eigenvalues,
Toeplitz factor, decorrelated remainder, and the normal-equation matrix), so
batch prediction pays the heavy costs a single time and each point costs one
circulant solve plus one triangular solve.  Predictions use the
continuous-time kernel with the fitted period, so off-grid queries are exact,
not interpolated.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import NumericalFailureError, RankDeficientBasisError
from .kernel import Hyperparams, PeriodSpec, Signal, build_kernel_blocks
from .likelihood import (
    ConstantBasis,
    RegressionBasis,
    SufficientStats,
    build_rdelta,
    estimate_beta_sigma,
    remainder_only,
    remainder_terms,
    segment,
    sufficient_stats,
)
from .structured import SymmetricCirculant

# Variances this far below zero (relative to sigma2) are roundoff; lower is a bug.
VAR_CLAMP = 1e-10


@dataclass
class PredictorState:
    """Fitted parameters plus the shared factorizations; immutable after build."""

    fs: float
    n: int
    theta: float
    delta: float
    p: int
    d: int
    beta: np.ndarray
    sigma2: float
    basis: RegressionBasis
    k: int
    m: int
    eta: int
    period: float  # p/(d*fs), the continuous kernel period
    r_op: SymmetricCirculant | None
    rdelta: SymmetricCirculant | None
    u_resid: np.ndarray  # Rdelta^-1 (ybar - Gbar beta), (p,)
    W: np.ndarray  # Rdelta^-1 Gbar, (p, q)
    pi_factor: object  # SymmetricToeplitz or None
    w_pi: np.ndarray  # Pi^-1 (y_dot - G_dot beta), (m,)
    ZG: np.ndarray  # L^-1 G_dot, (m, q)
    M_cho: tuple  # Cholesky of S_GG + eta * G_dot' Pi^-1 G_dot


def build_state(
    signal: Signal,
    theta: float,
    delta: float,
    p: int,
    d: int = 1,
    basis: RegressionBasis | None = None,
) -> PredictorState:
    """Run the likelihood pipeline once at (theta, delta, p, d) and cache everything."""
    hyper = Hyperparams(theta, delta)
    basis = basis or ConstantBasis()
    spec = PeriodSpec(p=p, d=d, fs=signal.fs, n=signal.n)
    seg = segment(signal, spec, basis)
    blocks = build_kernel_blocks(spec, hyper)
    k, q = spec.k, basis.dim

    if k >= 1:
        r_op, rdelta = build_rdelta(blocks, k, delta)
        U = rdelta.solve(np.column_stack([seg.segment_mean, seg.gamma_bar]))
        solves = (U[:, 0], U[:, 1:])
        stats = sufficient_stats(seg, spec, hyper, rdelta, solves=solves)
        rem = (
            remainder_terms(seg, blocks, spec, hyper, rdelta, r_op=r_op, solves=solves)
            if spec.eta
            else None
        )
    else:
        r_op = rdelta = None
        stats = SufficientStats(S_GG=np.zeros((q, q)), S_GY=np.zeros(q), S_YY=0.0)
        rem = remainder_only(seg, blocks, delta)

    beta, sigma2 = estimate_beta_sigma(stats, rem, signal.n)
    M = stats.S_GG + (rem.half_G.T @ rem.half_G if rem is not None else 0.0)
    try:
        M_cho = cho_factor(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientBasisError(f"prediction normal equations are singular: {exc}") from exc

    if k >= 1:
        u_resid = rdelta.solve(seg.segment_mean - seg.gamma_bar @ beta)
        W = rdelta.solve(seg.gamma_bar)
    else:
        u_resid = np.zeros(0)
        W = np.zeros((0, q))
    if rem is not None:
        L = rem.pi_factor.cholesky_factor
        w_pi = solve_triangular(L.T, rem.half_y - rem.half_G @ beta, lower=False, check_finite=False)
        ZG = rem.half_G
        pi_factor = rem.pi_factor
    else:
        w_pi = np.zeros(0)
        ZG = np.zeros((0, q))
        pi_factor = None

    return PredictorState(
        fs=signal.fs,
        n=signal.n,
        theta=theta,
        delta=delta,
        p=p,
        d=d,
        beta=beta,
        sigma2=sigma2,
        basis=basis,
        k=k,
        m=spec.m,
        eta=spec.eta,
        period=spec.period_seconds,
        r_op=r_op,
        rdelta=rdelta,
        u_resid=u_resid,
        W=W,
        pi_factor=pi_factor,
        w_pi=w_pi,
        ZG=ZG,
        M_cho=M_cho,
    )


def state_from_fit(signal: Signal, fit, basis: RegressionBasis | None = None) -> PredictorState:
    """PredictorState at a FitResult's estimated parameters."""
    return build_state(signal, fit.theta_hat, fit.delta_hat, fit.p_hat, fit.d, basis)


def _corr(state: PredictorState, t: np.ndarray, sample_idx: np.ndarray) -> np.ndarray:
    """Continuous-lag correlations between query times t (columns) and grid samples (rows)."""
    ti = sample_idx / state.fs
    lag = t[None, :] - ti[:, None]
    return np.exp(-(state.theta**2) * np.sin(np.pi * lag / state.period) ** 2)


def cross_correlations(t: float, state: PredictorState):
    """(gamma_bar, gamma_star): correlation of y(t) with one segment and with the remainder."""
    t_arr = np.asarray([t], dtype=np.float64)
    gbar = _corr(state, t_arr, np.arange(1, state.p + 1))[:, 0]
    gstar = _corr(state, t_arr, np.arange(state.k * state.p + 1, state.n + 1))[:, 0]
    return gbar, gstar


def predict_batch(state: PredictorState, times) -> tuple[np.ndarray, np.ndarray]:
    """BLUP mean and variance at every query time, sharing all factorizations.

    Variance is for the noisy observation (nugget included) and accounts for
    the estimated regression coefficients.  Values inside the negative
    roundoff band are clamped to zero; anything below it raises.
    """
    t = np.asarray(times, dtype=np.float64)
    if t.ndim == 0:
        t = t[None]
    if t.size == 0:
        return np.zeros(0), np.zeros(0)
    if not np.all(np.isfinite(t)):
        raise NumericalFailureError("query times contain non-finite values")
    f_mat = state.basis.design(t)  # (B, q)
    yhat = f_mat @ state.beta
    pi_t = np.full(t.size, 1.0 + state.delta**2)
    omega = f_mat.copy()
    reduction = np.zeros(t.size)

    if state.k >= 1:
        c = state.k / state.delta**2
        gbar = _corr(state, t, np.arange(1, state.p + 1))  # (p, B)
        U = state.rdelta.solve(gbar)
        yhat = yhat + c * (gbar * state.u_resid[:, None]).sum(axis=0)
        pi_t = pi_t - c * (gbar * U).sum(axis=0)
        omega = omega - c * (gbar.T @ state.W)
    if state.eta:
        gstar = _corr(state, t, np.arange(state.k * state.p + 1, state.n + 1))  # (m, B)
        gdot = gstar - c * state.r_op.matvec(U)[: state.m] if state.k >= 1 else gstar
        yhat = yhat + gdot.T @ state.w_pi
        zg = solve_triangular(state.pi_factor.cholesky_factor, gdot, lower=True, check_finite=False)
        reduction = (zg * zg).sum(axis=0)
        omega = omega - zg.T @ state.ZG

    m_inv_omega = cho_solve(state.M_cho, omega.T, check_finite=False)  # (q, B)
    var = state.sigma2 * (pi_t - reduction + (omega.T * m_inv_omega).sum(axis=0))
    floor = -VAR_CLAMP * state.sigma2
    if np.any(var < floor):
        raise NumericalFailureError(
            f"prediction variance {float(var.min()):.3e} is negative beyond the roundoff band",
            theta=state.theta,
            delta=state.delta,
            p=state.p,
        )
    return yhat, np.maximum(var, 0.0)


def predict(t: float, state: PredictorState) -> tuple[float, float]:
    """BLUP mean and variance at a single time (seconds)."""
    yhat, var = predict_batch(state, [t])
    return float(yhat[0]), float(var[0])


def denoise(state: PredictorState, grid) -> tuple[np.ndarray, np.ndarray]:
    """Batch BLUP over a grid of times; empty grids give empty outputs."""
    return predict_batch(state, grid)

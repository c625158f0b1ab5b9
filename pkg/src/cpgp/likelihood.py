"""Exact profile log-likelihood of the circulant periodic GP.

The signal is split into k whole segments of p samples plus an m-sample
remainder.  The joint Gaussian log-likelihood decomposes exactly into the
segment part (circulant algebra, O(p log p)) and the remainder conditional on
the segments (Toeplitz algebra, O(m^2)); profiling out the regression
coefficients and the process variance leaves a function of (theta, delta, p,
d) only.  All values include the full n/2*log(2*pi) constant so that equality
against a dense implementation is strict, not "up to a constant".
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidArgumentError,
    NumericalFailureError,
    RankDeficientBasisError,
    SingularMatrixError,
)
from .kernel import Hyperparams, KernelBlocks, PeriodSpec, Signal, build_kernel_blocks
from .structured import SymmetricCirculant, SymmetricToeplitz, circulant_eigenvalues

LOG2PI = math.log(2.0 * math.pi)

# R_delta = I + (k/delta^2) R has eigenvalues >= 1 for a PSD kernel row; FFT
# roundoff may dip just below.  Values in [1 - EIG_CLAMP, 1) are clamped to 1,
# anything lower is treated as a real PSD violation.
EIG_CLAMP = 1e-8

try:
    import numba

    @numba.njit(cache=True)
    def _segment_pass(y, k, p):  # pragma: no cover - exercised via segment()
        """One pass over the k*p segmented samples: per-position segment sums plus
        the compensated (Neumaier) totals of y and y^2."""
        seg_sum = np.zeros(p)
        seg_c = np.zeros(p)
        s_y = 0.0
        c_y = 0.0
        s_yy = 0.0
        c_yy = 0.0
        for r in range(k):
            base = r * p
            for j in range(p):
                v = y[base + j]
                t = seg_sum[j] + v
                if np.abs(seg_sum[j]) >= np.abs(v):
                    seg_c[j] += (seg_sum[j] - t) + v
                else:
                    seg_c[j] += (v - t) + seg_sum[j]
                seg_sum[j] = t
                t = s_y + v
                if np.abs(s_y) >= np.abs(v):
                    c_y += (s_y - t) + v
                else:
                    c_y += (v - t) + s_y
                s_y = t
                vv = v * v
                t = s_yy + vv
                if s_yy >= vv:
                    c_yy += (s_yy - t) + vv
                else:
                    c_yy += (vv - t) + s_yy
                s_yy = t
        return seg_sum + seg_c, s_y + c_y, s_yy + c_yy

    _HAVE_SEGMENT_JIT = True
except ImportError:  # pragma: no cover - environment without numba
    _HAVE_SEGMENT_JIT = False

_CHUNK = 65536


def _segment_pass_numpy(y, k, p):
    """Fallback aggregation: pairwise reductions plus exactly-combined chunk partials."""
    seg = y[: k * p].reshape(k, p)
    seg_sum = seg.sum(axis=0)
    flat = y[: k * p]
    sums = [float(np.add.reduce(flat[i : i + _CHUNK])) for i in range(0, flat.size, _CHUNK)]
    sqs = [
        float(np.add.reduce(np.square(flat[i : i + _CHUNK]))) for i in range(0, flat.size, _CHUNK)
    ]
    return seg_sum, math.fsum(sums), math.fsum(sqs)


if not _HAVE_SEGMENT_JIT:  # pragma: no cover
    _segment_pass = _segment_pass_numpy


# ---------------------------------------------------------------------------
# Regression bases
# ---------------------------------------------------------------------------


class RegressionBasis:
    """Finite regression basis f(t) evaluated on arrays of timestamps."""

    dim: int = 1
    is_constant: bool = False

    def design(self, times: np.ndarray) -> np.ndarray:
        """Design matrix of shape (len(times), dim)."""
        raise NotImplementedError

    def at(self, t: float) -> np.ndarray:
        """f(t) as a (dim,) vector."""
        return self.design(np.asarray([t], dtype=np.float64))[0]


class ConstantBasis(RegressionBasis):
    """f(t) = 1, the default mean model."""

    dim = 1
    is_constant = True

    def design(self, times):
        return np.ones((np.asarray(times).size, 1))


class PolynomialBasis(RegressionBasis):
    """Monomials 1, t, ..., t^degree."""

    def __init__(self, degree: int):
        if degree < 0:
            raise InvalidArgumentError(f"degree must be >= 0, got {degree}")
        self.degree = degree
        self.dim = degree + 1
        self.is_constant = degree == 0

    def design(self, times):
        t = np.asarray(times, dtype=np.float64)
        return np.vander(t, self.dim, increasing=True)


# ---------------------------------------------------------------------------
# Segmentation aggregates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SegmentedData:
    """One-pass aggregates of the segmented signal; raw segments are never stored."""

    segment_mean: np.ndarray  # ybar, (p,) or empty when k = 0
    remainder: np.ndarray  # y*, (m,)
    sum_yy: float  # Y'Y over the k*p segmented points
    segment_count: int
    eta: int
    gamma_bar: np.ndarray  # (p, q) segment-mean design block
    gamma_star: np.ndarray  # (m, q) remainder design block
    sum_GG: np.ndarray  # (q, q) Gamma'Gamma over segmented points
    sum_GY: np.ndarray  # (q,)  Gamma'Y  over segmented points
    constant_design: bool  # Gamma_1 = ... = Gamma_k (enables simplified stats)


def segment(signal: Signal, spec: PeriodSpec, basis: RegressionBasis | None = None) -> SegmentedData:
    """Aggregate the signal for one candidate p; O(n) work, O(p + q^2) memory.

    For p > n the degenerate form is produced: no segments (k = 0), the whole
    signal is the remainder, and the segment-likelihood branch is disabled.
    """
    basis = basis or ConstantBasis()
    y = signal.values
    k, p, m, q = spec.k, spec.p, spec.m, basis.dim
    kp = k * p
    # Compensated single-pass aggregation: large-n power sums must stay
    # accurate enough for strict oracle agreement even at tiny sigma2.
    if k:
        seg_sum, sum_y, sum_yy = _segment_pass(y, k, p)
        ybar = seg_sum / k
    else:
        ybar, sum_y, sum_yy = np.zeros(0), 0.0, 0.0
    remainder = y[kp:].copy()

    if basis.is_constant:
        gamma_bar = np.ones((p, 1)) if k else np.zeros((0, 1))
        gamma_star = np.ones((m, 1))
        sum_GG = np.array([[float(kp)]])
        sum_GY = np.array([sum_y])
        constant = True
    else:
        times = signal.times()
        B = basis.design(times)
        if B.shape != (signal.n, q):
            raise InvalidArgumentError(f"basis design returned shape {B.shape}, expected {(signal.n, q)}")
        if not np.all(np.isfinite(B)):
            raise InvalidArgumentError("basis design contains non-finite values")
        gamma_bar = B[:kp].reshape(k, p, q).mean(axis=0) if k else np.zeros((0, q))
        gamma_star = B[kp:].copy()
        sum_GG = B[:kp].T @ B[:kp]
        sum_GY = B[:kp].T @ y[:kp]
        constant = bool(k) and bool(np.all(B[:kp].reshape(k, p, q) == gamma_bar[None]))

    return SegmentedData(
        segment_mean=ybar,
        remainder=remainder,
        sum_yy=sum_yy,
        segment_count=k,
        eta=spec.eta,
        gamma_bar=gamma_bar,
        gamma_star=gamma_star,
        sum_GG=sum_GG,
        sum_GY=sum_GY,
        constant_design=constant,
    )


# ---------------------------------------------------------------------------
# Sufficient statistics and remainder terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SufficientStats:
    """Segment-block quadratic forms Gamma' Sigma^-1 Gamma, Gamma' Sigma^-1 Y, Y' Sigma^-1 Y."""

    S_GG: np.ndarray  # (q, q)
    S_GY: np.ndarray  # (q,)
    S_YY: float


@dataclass(frozen=True)
class RemainderTerms:
    """Conditional remainder pieces: decorrelated data/design and the Toeplitz covariance."""

    y_dot: np.ndarray  # (m,)
    G_dot: np.ndarray  # (m, q)
    pi_first_col: np.ndarray  # (m,)
    pi_logdet: float
    pi_factor: SymmetricToeplitz
    half_y: np.ndarray  # L^-1 y_dot
    half_G: np.ndarray  # L^-1 G_dot


def build_rdelta(blocks: KernelBlocks, k: int, delta: float):
    """(R operator, R_delta operator) with R_delta = I + (k/delta^2) R.

    R_delta eigenvalues are >= 1 in exact arithmetic; values inside the
    roundoff band below 1 are clamped to 1 and anything lower raises.
    """
    lam_R = circulant_eigenvalues(blocks.circ_row)
    R = SymmetricCirculant(blocks.circ_row, eigenvalues=lam_R)
    lam = 1.0 + (k / delta**2) * lam_R
    low = lam.min()
    if low < 1.0 - EIG_CLAMP:
        raise SingularMatrixError(
            f"R_delta eigenvalue {low:.6e} below the PSD roundoff band; kernel row is not PSD"
        )
    lam = np.maximum(lam, 1.0)
    rd_row = (k / delta**2) * blocks.circ_row
    rd_row = rd_row.copy()
    rd_row[0] += 1.0
    return R, SymmetricCirculant(rd_row, eigenvalues=lam)


def sufficient_stats(
    seg: SegmentedData,
    spec: PeriodSpec,
    hyper: Hyperparams,
    rdelta: SymmetricCirculant,
    solves: tuple[np.ndarray, np.ndarray] | None = None,
) -> SufficientStats:
    """The three segment-block statistics from a single batched circulant solve.

    When every segment shares the same design block the simplified forms are
    used, which cancels the Gamma'Gamma - k*Gbar'Gbar pair analytically.
    """
    k = seg.segment_count
    if k < 1:
        raise InvalidArgumentError("sufficient statistics need at least one whole segment")
    d2 = hyper.delta**2
    ybar, gbar = seg.segment_mean, seg.gamma_bar
    if solves is None:
        U = rdelta.solve(np.column_stack([ybar, gbar]))
        u_y, U_g = U[:, 0], U[:, 1:]
    else:
        u_y, U_g = solves
    S_YY = (seg.sum_yy - k * float(ybar @ ybar) + k * float(ybar @ u_y)) / d2
    if seg.constant_design:
        S_GG = k * (gbar.T @ U_g) / d2
        S_GY = k * (gbar.T @ u_y) / d2
    else:
        S_GG = (seg.sum_GG - k * gbar.T @ gbar + k * gbar.T @ U_g) / d2
        S_GY = (seg.sum_GY - k * gbar.T @ ybar + k * gbar.T @ u_y) / d2
    return SufficientStats(S_GG=S_GG, S_GY=np.atleast_1d(S_GY), S_YY=S_YY)


def remainder_terms(
    seg: SegmentedData,
    blocks: KernelBlocks,
    spec: PeriodSpec,
    hyper: Hyperparams,
    rdelta: SymmetricCirculant,
    r_op: SymmetricCirculant | None = None,
    solves: tuple[np.ndarray, np.ndarray] | None = None,
) -> RemainderTerms:
    """Remainder data/design decorrelated against the segments, plus the Toeplitz factor.

    The conditional covariance is Toeplitz, so only its first column is formed
    (one extra circulant solve against the kernel row); the factorization then
    costs O(m^2).
    """
    k, m = seg.segment_count, spec.m
    if m < 1 or k < 1:
        raise InvalidArgumentError("remainder terms need k >= 1 and a non-empty remainder")
    c = k / hyper.delta**2
    r_op = r_op or SymmetricCirculant(blocks.circ_row)
    if solves is None:
        U = rdelta.solve(np.column_stack([seg.segment_mean, seg.gamma_bar]))
        u_y, U_g = U[:, 0], U[:, 1:]
    else:
        u_y, U_g = solves
    # One batched multiply by R covers y_dot, G_dot, and the Pi column.
    W = r_op.matvec(np.column_stack([u_y, U_g, rdelta.solve(blocks.circ_row)]))
    y_dot = seg.remainder - c * W[:m, 0]
    G_dot = seg.gamma_star - c * W[:m, 1:-1]
    pi_col = blocks.star_row - c * W[:m, -1]
    pi_col = pi_col.copy()
    pi_col[0] += hyper.delta**2
    pi = SymmetricToeplitz(pi_col)
    try:
        half = pi.half_solve(np.column_stack([y_dot, G_dot]))
    except Exception as exc:
        exc_ctx = getattr(exc, "context", None)
        if exc_ctx is not None:
            exc.context = {"theta": hyper.theta, "delta": hyper.delta, "p": spec.p}
        raise
    return RemainderTerms(
        y_dot=y_dot,
        G_dot=G_dot,
        pi_first_col=pi_col,
        pi_logdet=pi.logdet(),
        pi_factor=pi,
        half_y=half[:, 0],
        half_G=half[:, 1:],
    )


def remainder_only(seg: SegmentedData, blocks: KernelBlocks, delta: float) -> RemainderTerms:
    """Remainder terms for the no-segment case (p > n): the covariance is the
    nugget-augmented Toeplitz corner and nothing is conditioned away."""
    pi_col = blocks.star_row.copy()
    pi_col[0] += delta**2
    pi = SymmetricToeplitz(pi_col)
    half = pi.half_solve(np.column_stack([seg.remainder, seg.gamma_star]))
    return RemainderTerms(
        y_dot=seg.remainder,
        G_dot=seg.gamma_star,
        pi_first_col=pi_col,
        pi_logdet=pi.logdet(),
        pi_factor=pi,
        half_y=half[:, 0],
        half_G=half[:, 1:],
    )


def estimate_beta_sigma(stats: SufficientStats, rem: RemainderTerms | None, n: int):
    """Closed-form GLS estimates of the regression coefficients and process variance.

    Returns (beta_hat, sigma2_hat); sigma2_hat is clamped at zero when the
    residual quadratic form cancels to roundoff (degenerate data).
    """
    M = stats.S_GG.copy()
    b = stats.S_GY.copy()
    quad = stats.S_YY
    if rem is not None:
        M = M + rem.half_G.T @ rem.half_G
        b = b + rem.half_G.T @ rem.half_y
        quad = quad + float(rem.half_y @ rem.half_y)
    try:
        beta = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientBasisError(f"normal equations are singular: {exc}") from exc
    sigma2 = (quad - float(beta @ M @ beta)) / n
    return beta, max(sigma2, 0.0)


# ---------------------------------------------------------------------------
# Profile likelihood
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LikelihoodEval:
    """Profile log-likelihood at one (theta, delta, p, d), with its two components."""

    loglik: float
    l1: float
    l2: float
    beta_hat: np.ndarray
    sigma2_hat: float
    logdet_Rdelta: float
    logdet_Pi: float
    p: int
    d: int
    theta: float
    delta: float


def _degenerate_eval(spec, hyper, beta):
    return LikelihoodEval(
        loglik=-math.inf,
        l1=-math.inf,
        l2=0.0,
        beta_hat=beta,
        sigma2_hat=0.0,
        logdet_Rdelta=0.0,
        logdet_Pi=0.0,
        p=spec.p,
        d=spec.d,
        theta=hyper.theta,
        delta=hyper.delta,
    )


def profile_loglik(
    signal: Signal,
    theta: float,
    delta: float,
    p: int,
    d: int = 1,
    basis: RegressionBasis | None = None,
    *,
    seg: SegmentedData | None = None,
) -> LikelihoodEval:
    """Exact profile log-likelihood of the periodic GP at one candidate period.

    Cost is one O(n) aggregation pass plus O(p log p) circulant work plus
    O(m^2) Toeplitz work, independent of n beyond the aggregation.

    Parameters
    ----------
    signal : Signal
    theta, delta : float
        Kernel roughness and noise ratio (both positive).
    p, d : int
        Candidate period T = p/(d*fs).
    basis : RegressionBasis, optional
        Mean model; defaults to the constant function.

    Returns
    -------
    LikelihoodEval
        With `loglik = l1 + eta*l2` and the 2*pi constants included.
        Degenerate data (zero profiled variance) yields loglik = -inf.

    Raises
    ------
    NumericalFailureError
        If the assembled value is NaN; carries (theta, delta, p).

    A precomputed `seg` (from `segment` at the same p) may be supplied to
    share aggregation across hyperparameter evaluations; it only depends on
    (signal, p, basis), never on theta, delta, or d.
    """
    hyper = Hyperparams(theta, delta)
    basis = basis or ConstantBasis()
    spec = PeriodSpec(p=p, d=d, fs=signal.fs, n=signal.n)
    if seg is None:
        seg = segment(signal, spec, basis)
    n, k, m, eta = signal.n, spec.k, spec.m, spec.eta
    q = basis.dim
    blocks = build_kernel_blocks(spec, hyper)

    if k >= 1:
        r_op, rdelta = build_rdelta(blocks, k, delta)
        U = rdelta.solve(np.column_stack([seg.segment_mean, seg.gamma_bar]))
        solves = (U[:, 0], U[:, 1:])
        stats = sufficient_stats(seg, spec, hyper, rdelta, solves=solves)
        logdet_rd = rdelta.logdet()
        rem = (
            remainder_terms(seg, blocks, spec, hyper, rdelta, r_op=r_op, solves=solves)
            if eta
            else None
        )
    else:
        # p > n: the whole signal is the remainder; the segment branch
        # contributes nothing to the likelihood.
        stats = SufficientStats(S_GG=np.zeros((q, q)), S_GY=np.zeros(q), S_YY=0.0)
        logdet_rd = 0.0
        rem = remainder_only(seg, blocks, delta)

    beta, sigma2 = estimate_beta_sigma(stats, rem, n)
    if sigma2 <= 0.0:
        return _degenerate_eval(spec, hyper, beta)

    kp = k * p
    logdet_pi = rem.pi_logdet if rem is not None else 0.0
    loglik = -0.5 * (
        n * math.log(sigma2)
        + 2.0 * kp * math.log(delta)
        + logdet_rd
        + eta * logdet_pi
        + n
        + n * LOG2PI
    )
    if math.isnan(loglik):
        raise NumericalFailureError(
            f"profile log-likelihood is NaN at theta={theta} delta={delta} p={p}",
            theta=theta,
            delta=delta,
            p=p,
        )

    if k >= 1:
        q1 = stats.S_YY - 2.0 * float(beta @ stats.S_GY) + float(beta @ stats.S_GG @ beta)
        l1 = -0.5 * (
            kp * math.log(sigma2) + 2.0 * kp * math.log(delta) + logdet_rd + q1 / sigma2 + kp * LOG2PI
        )
    else:
        l1 = 0.0
    if eta:
        resid = rem.half_y - rem.half_G @ beta
        q2 = float(resid @ resid)
        l2 = -0.5 * (m * math.log(sigma2) + logdet_pi + q2 / sigma2 + m * LOG2PI)
    else:
        l2 = 0.0

    return LikelihoodEval(
        loglik=loglik,
        l1=l1,
        l2=l2,
        beta_hat=beta,
        sigma2_hat=sigma2,
        logdet_Rdelta=logdet_rd,
        logdet_Pi=eta * logdet_pi,
        p=p,
        d=d,
        theta=theta,
        delta=delta,
    )


def acpgp_loglik(
    signal: Signal,
    theta: float,
    delta: float,
    p: int,
    d: int = 1,
    basis: RegressionBasis | None = None,
    *,
    seg: SegmentedData | None = None,
) -> LikelihoodEval:
    """Approximate variant: segment likelihood only, normalized by its k*p points.

    The remainder never enters; estimates come from the segment statistics
    alone, with the variance divided by the full n (as the approximate scheme
    defines it) even though only k*p points contribute.  O(p log p) per call.
    """
    hyper = Hyperparams(theta, delta)
    basis = basis or ConstantBasis()
    spec = PeriodSpec(p=p, d=d, fs=signal.fs, n=signal.n)
    if spec.k < 1:
        raise InvalidArgumentError(f"approximate likelihood needs p <= n, got p={p} n={signal.n}")
    if seg is None:
        seg = segment(signal, spec, basis)
    blocks = build_kernel_blocks(spec, hyper)
    _, rdelta = build_rdelta(blocks, spec.k, delta)
    stats = sufficient_stats(seg, spec, hyper, rdelta)
    try:
        beta = np.linalg.solve(stats.S_GG, stats.S_GY)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientBasisError(f"segment normal equations are singular: {exc}") from exc
    n, kp = signal.n, spec.k * p
    sigma2 = (stats.S_YY - float(beta @ stats.S_GG @ beta)) / n
    if sigma2 <= 0.0:
        return _degenerate_eval(spec, hyper, beta)
    logdet_rd = rdelta.logdet()
    q1 = stats.S_YY - 2.0 * float(beta @ stats.S_GY) + float(beta @ stats.S_GG @ beta)
    l1 = -0.5 * (
        kp * math.log(sigma2) + 2.0 * kp * math.log(delta) + logdet_rd + q1 / sigma2 + kp * LOG2PI
    )
    loglik = l1 / kp
    if math.isnan(loglik):
        raise NumericalFailureError(
            f"approximate log-likelihood is NaN at theta={theta} delta={delta} p={p}",
            theta=theta,
            delta=delta,
            p=p,
        )
    return LikelihoodEval(
        loglik=loglik,
        l1=l1,
        l2=0.0,
        beta_hat=beta,
        sigma2_hat=sigma2,
        logdet_Rdelta=logdet_rd,
        logdet_Pi=0.0,
        p=p,
        d=d,
        theta=theta,
        delta=delta,
    )

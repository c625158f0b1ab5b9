"""Period scan, grid-initialized pattern search, and the full fitting pipeline.

Hyperparameters (theta, delta) are tuned against the scan objective
max_p loglik(theta, delta, p, d*) over the coarse candidate set; the final
period estimate then comes from one exhaustive scan over the fine set with
the tuned hyperparameters plugged in.  Everything is deterministic: scans
reduce by candidate index regardless of worker scheduling, and argmax ties
break toward the smallest p so that harmonics never shadow the fundamental.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CpgpError, FitFailureError, InitializationFailureError, InvalidArgumentError
from .kernel import PeriodSpec, Signal
from .likelihood import RegressionBasis, acpgp_loglik, profile_loglik, segment

VARIANTS = ("cpgp", "acpgp")


class SegmentCache:
    """Per-p segmentation aggregates, shared across hyperparameter evaluations.

    Segmentation depends only on (signal, p, basis), so one fit can reuse it
    for every (theta, delta) the search visits.  Purely an evaluation-order-
    independent memoization: results are bitwise identical with or without it.
    """

    def __init__(self, signal: Signal, basis: RegressionBasis | None):
        self.signal = signal
        self.basis = basis
        self._store = {}

    def get(self, p: int):
        seg = self._store.get(p)
        if seg is None:
            spec = PeriodSpec(p=p, d=1, fs=self.signal.fs, n=self.signal.n)
            seg = segment(self.signal, spec, self.basis)
            self._store[p] = seg
        return seg


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the fitting pipeline.

    `d` controls the period resolution of the final scan (period T = p/(d*fs));
    `d_star <= d` is the cheaper resolution used while tuning hyperparameters.
    Ranges may collapse to a point to pin a parameter.
    """

    p_max: int
    d: int = 1
    d_star: int = 1
    theta_range: tuple[float, float] = (1.0, 30.0)
    delta_range: tuple[float, float] = (2.0, 20.0)
    init_step_frac: float = 0.25
    contraction: float = 0.5
    tol: float = 1e-3
    max_iters: int = 200
    workers: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.p_max < 1:
            raise InvalidArgumentError(f"p_max must be >= 1, got {self.p_max}")
        if self.d < 1 or not (1 <= self.d_star <= self.d):
            raise InvalidArgumentError(f"need 1 <= d_star <= d, got d={self.d} d_star={self.d_star}")
        for name, (lo, hi) in (("theta", self.theta_range), ("delta", self.delta_range)):
            if not (math.isfinite(lo) and math.isfinite(hi) and 0 < lo <= hi):
                raise InvalidArgumentError(f"{name}_range must satisfy 0 < lo <= hi, got ({lo}, {hi})")
        if not (0 < self.contraction < 1):
            raise InvalidArgumentError(f"contraction must be in (0, 1), got {self.contraction}")
        if self.workers < 1:
            raise InvalidArgumentError(f"workers must be >= 1, got {self.workers}")

    @property
    def scan_set_coarse(self) -> range:
        return range(1, self.d_star * self.p_max + 1)

    @property
    def scan_set_fine(self) -> range:
        return range(1, self.d * self.p_max + 1)


@dataclass(frozen=True)
class FitResult:
    """Estimated model, plus the traces that produced it."""

    theta_hat: float
    delta_hat: float
    p_hat: int
    d: int
    fs: float
    T_hat: float
    beta_hat: np.ndarray
    sigma2_hat: float
    loglik: float
    variant: str
    scan_trace: list  # [(p, loglik at (theta_hat, delta_hat, p, d))]
    hyper_trace: list  # [((theta, delta), scan objective)]

    def reduced_period(self) -> tuple[int, int]:
        g = math.gcd(self.p_hat, self.d)
        return self.p_hat // g, self.d // g


def _objective_fn(variant: str):
    if variant not in VARIANTS:
        raise InvalidArgumentError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return profile_loglik if variant == "cpgp" else acpgp_loglik


def _eval_chunk(args):
    values, fs, theta, delta, d, p_list, basis, variant = args
    fn = _objective_fn(variant)
    sig = Signal(values=values, fs=fs)
    out = []
    for p in p_list:
        try:
            out.append(fn(sig, theta, delta, p, d, basis).loglik)
        except CpgpError:
            out.append(-math.inf)
    return out


def scan_values(
    signal: Signal,
    theta: float,
    delta: float,
    d: int,
    p_values,
    basis: RegressionBasis | None = None,
    variant: str = "cpgp",
    workers: int = 1,
    cache: SegmentCache | None = None,
) -> np.ndarray:
    """Log-likelihood at every candidate p; failures record -inf and never abort.

    The reduction is by candidate index, so results are bitwise identical for
    any worker count or scheduling order.
    """
    p_list = list(p_values)
    if workers <= 1 or len(p_list) < 4 * workers:
        if cache is None:
            return np.asarray(
                _eval_chunk((signal.values, signal.fs, theta, delta, d, p_list, basis, variant))
            )
        fn = _objective_fn(variant)
        out = np.empty(len(p_list))
        for i, p in enumerate(p_list):
            try:
                out[i] = fn(signal, theta, delta, p, d, basis, seg=cache.get(p)).loglik
            except CpgpError:
                out[i] = -math.inf
        return out
    chunks = np.array_split(np.asarray(p_list), workers * 4)
    jobs = [
        (signal.values, signal.fs, theta, delta, d, chunk.tolist(), basis, variant)
        for chunk in chunks
        if chunk.size
    ]
    values = np.empty(len(p_list))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        pos = 0
        for res in pool.map(_eval_chunk, jobs):
            values[pos : pos + len(res)] = res
            pos += len(res)
    return values


def scan_objective(
    signal: Signal,
    theta: float,
    delta: float,
    d_star: int,
    p_max: int,
    basis: RegressionBasis | None = None,
    variant: str = "cpgp",
    workers: int = 1,
    cache: SegmentCache | None = None,
):
    """(best p, best loglik) over p in {1, ..., d_star * p_max}; ties go to smallest p."""
    p_list = range(1, d_star * p_max + 1)
    values = scan_values(signal, theta, delta, d_star, p_list, basis, variant, workers, cache)
    best = int(np.argmax(values))
    return best + 1, float(values[best])


def _grid_points(lo: float, hi: float):
    """Low, geometric middle, high; collapsed ranges deduplicate."""
    if lo == hi:
        return [lo]
    mid = math.sqrt(lo * hi)
    pts = [lo, mid, hi]
    return sorted(set(pts))


def init_grid(
    signal: Signal,
    config: SearchConfig,
    basis: RegressionBasis | None = None,
    variant: str = "cpgp",
):
    """Best (theta, delta) among the 3 x 3 grid over both ranges.

    Returns ((theta0, delta0), trace) where trace lists every grid evaluation.
    Raises when no grid point evaluates to a finite objective.
    """
    best = (-math.inf, None)
    trace = []
    for theta in _grid_points(*config.theta_range):
        for delta in _grid_points(*config.delta_range):
            _, value = scan_objective(
                signal, theta, delta, config.d_star, config.p_max, basis, variant, config.workers
            )
            trace.append(((theta, delta), value))
            if value > best[0]:
                best = (value, (theta, delta))
    if best[1] is None or best[0] == -math.inf:
        raise InitializationFailureError("all nine grid candidates failed to evaluate")
    return best[1], trace


def optimize_hyperparams(
    signal: Signal,
    config: SearchConfig,
    basis: RegressionBasis | None = None,
    variant: str = "cpgp",
    start: tuple[float, float] | None = None,
):
    """Box-constrained Hooke-Jeeves pattern search maximizing the scan objective.

    Exploratory +/- step moves per axis, an accelerated pattern move after any
    success, step halving after failures, termination when the step falls
    under tol * range on both axes (or the iteration cap).  Returns
    ((theta_hat, delta_hat), hyper_trace) with the best visited point.
    """
    (t_lo, t_hi), (d_lo, d_hi) = config.theta_range, config.delta_range
    lo = np.array([t_lo, d_lo])
    hi = np.array([t_hi, d_hi])
    span = hi - lo

    trace = []

    def evaluate(point):
        _, value = scan_objective(
            signal, float(point[0]), float(point[1]), config.d_star, config.p_max,
            basis, variant, config.workers,
        )
        trace.append(((float(point[0]), float(point[1])), value))
        return value

    if start is None:
        start, grid_trace = init_grid(signal, config, basis, variant)
        trace.extend(grid_trace)
        start_val = max(v for _, v in grid_trace)
    else:
        start_val = evaluate(np.asarray(start, dtype=float))

    x = np.clip(np.asarray(start, dtype=float), lo, hi)
    fx = start_val
    best_x, best_f = x.copy(), fx
    steps = config.init_step_frac * span

    def explore(base, f_base):
        pt = base.copy()
        f_cur = f_base
        for axis in range(2):
            if steps[axis] == 0.0:
                continue
            for sign in (1.0, -1.0):
                cand = pt.copy()
                cand[axis] = min(max(cand[axis] + sign * steps[axis], lo[axis]), hi[axis])
                if cand[axis] == pt[axis]:
                    continue
                f_cand = evaluate(cand)
                if f_cand > f_cur:
                    pt, f_cur = cand, f_cand
                    break
        return pt, f_cur

    for _ in range(config.max_iters):
        x_new, f_new = explore(x, fx)
        if f_new > fx:
            # Pattern moves: keep doubling along the improvement direction
            # while exploration around the projected point keeps paying off.
            while True:
                pattern = np.clip(x_new + (x_new - x), lo, hi)
                x, fx = x_new, f_new
                if fx > best_f:
                    best_x, best_f = x.copy(), fx
                f_pat = evaluate(pattern)
                x_try, f_try = explore(pattern, f_pat)
                if f_try > fx:
                    x_new, f_new = x_try, f_try
                else:
                    break
            if fx > best_f:
                best_x, best_f = x.copy(), fx
        else:
            steps = steps * config.contraction
            if np.all((steps < config.tol * span) | (span == 0.0)):
                break
    return (float(best_x[0]), float(best_x[1])), trace


def fit(
    signal: Signal,
    config: SearchConfig,
    basis: RegressionBasis | None = None,
    variant: str = "cpgp",
) -> FitResult:
    """Grid init, pattern search over (theta, delta), then the fine period scan.

    The reported period T_hat = p_hat/(d*fs) is reduced to lowest terms before
    the division.  Raises FitFailureError when no candidate p evaluates.
    """
    fn = _objective_fn(variant)
    (theta_hat, delta_hat), hyper_trace = optimize_hyperparams(signal, config, basis, variant)
    p_list = list(config.scan_set_fine)
    values = scan_values(signal, theta_hat, delta_hat, config.d, p_list, basis, variant, config.workers)
    if not np.any(np.isfinite(values)):
        raise FitFailureError(
            f"no valid period candidate in 1..{config.d * config.p_max} at "
            f"theta={theta_hat} delta={delta_hat}"
        )
    best_idx = int(np.argmax(values))
    p_hat = p_list[best_idx]
    final = fn(signal, theta_hat, delta_hat, p_hat, config.d, basis)
    spec = PeriodSpec(p=p_hat, d=config.d, fs=signal.fs, n=signal.n)
    p_red, d_red = spec.reduced()
    return FitResult(
        theta_hat=theta_hat,
        delta_hat=delta_hat,
        p_hat=p_hat,
        d=config.d,
        fs=signal.fs,
        T_hat=p_red / (d_red * signal.fs),
        beta_hat=final.beta_hat,
        sigma2_hat=final.sigma2_hat,
        loglik=float(values[best_idx]),
        variant=variant,
        scan_trace=list(zip(p_list, values.tolist())),
        hyper_trace=hyper_trace,
    )

"""Periodic correlation on a regular sampling grid and its structured blocks.

The correlation between grid samples i and j depends only on the integer lag
through exp(-theta^2 * sin^2(pi*d*lag/p)), so the full correlation matrix of a
signal splits into a p x p symmetric circulant block (within/between whole
segments), its first m columns (segments vs. remainder), and an m x m
symmetric Toeplitz corner (remainder vs. remainder).  Only the first circulant
row is ever computed here; everything else is a view on it.
"""

from dataclasses import dataclass, field
from functools import cached_property
from math import gcd

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class Signal:
    """Grid-sampled observations with timestamps t_i = i/fs, i = 1..n."""

    values: np.ndarray
    fs: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise InvalidArgumentError(f"signal needs >= 2 samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("signal contains non-finite values")
        if not (np.isfinite(self.fs) and self.fs > 0):
            raise InvalidArgumentError(f"sampling frequency must be positive, got {self.fs}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "fs", float(self.fs))

    @property
    def n(self) -> int:
        return self.values.size

    def times(self) -> np.ndarray:
        return np.arange(1, self.n + 1) / self.fs


@dataclass(frozen=True)
class PeriodSpec:
    """Candidate period written as T = p/(d*fs) with p samples per d true periods.

    Coprimality of (p, d) is not required: a reducible pair scans the same
    model as its reduced form and is only reduced when reporting T.
    """

    p: int
    d: int
    fs: float
    n: int

    def __post_init__(self):
        if self.p < 1 or self.d < 1:
            raise InvalidArgumentError(f"need p >= 1 and d >= 1, got p={self.p} d={self.d}")
        if self.n < 1:
            raise InvalidArgumentError(f"need n >= 1, got n={self.n}")
        if not (np.isfinite(self.fs) and self.fs > 0):
            raise InvalidArgumentError(f"sampling frequency must be positive, got {self.fs}")

    @property
    def k(self) -> int:
        """Number of whole p-sample segments."""
        return self.n // self.p

    @property
    def m(self) -> int:
        """Remainder samples that do not fill a segment."""
        return self.n - self.k * self.p

    @property
    def eta(self) -> int:
        return 1 if self.m else 0

    @property
    def period_seconds(self) -> float:
        return self.p / (self.d * self.fs)

    def reduced(self) -> tuple[int, int]:
        """(p, d) in lowest terms, the reporting form of the period."""
        g = gcd(self.p, self.d)
        return self.p // g, self.d // g


@dataclass(frozen=True)
class Hyperparams:
    """Kernel roughness theta and noise-to-signal standard deviation ratio delta."""

    theta: float
    delta: float

    def __post_init__(self):
        if not (np.isfinite(self.theta) and self.theta > 0):
            raise InvalidArgumentError(f"theta must be a positive real, got {self.theta}")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise InvalidArgumentError(f"delta must be a positive real, got {self.delta}")


def periodic_correlation(lag, theta: float, p: int, d: int):
    """Correlation exp(-theta^2 * sin^2(pi*d*lag/p)) at integer sample lag(s).

    Parameters
    ----------
    lag : int or array of int
        Sample lag; the result is periodic in lag with period p and symmetric
        in its sign.  Lags are reduced mod p before evaluation, which makes
        the periodicity exact in floating point.
    theta, p, d :
        Roughness and period parameters; all validated positive.

    Returns
    -------
    float or ndarray in (0, 1].
    """
    if p < 1 or d < 1:
        raise InvalidArgumentError(f"need p >= 1 and d >= 1, got p={p} d={d}")
    if not (np.isfinite(theta) and theta > 0):
        raise InvalidArgumentError(f"theta must be a positive real, got {theta}")
    lag_arr = np.asarray(lag)
    if not np.all(np.isfinite(lag_arr)):
        raise InvalidArgumentError("lag contains non-finite values")
    reduced = np.mod(lag_arr, p)
    out = np.exp(-(theta**2) * np.sin(np.pi * d * reduced / p) ** 2)
    return float(out) if np.isscalar(lag) or lag_arr.ndim == 0 else out


@dataclass(frozen=True)
class KernelBlocks:
    """Structured pieces of the grid correlation matrix for one (p, d, theta).

    `circ_row` is the first row of the p x p circulant block R; `star_row` is
    the first row of the m x m Toeplitz corner; `bullet_cols` (the p x m block
    between segments and remainder) equals the first m columns of R and is
    materialized lazily because the fast paths only ever need products with
    it, which go through R's FFT.
    """

    circ_row: np.ndarray
    m: int

    @property
    def p(self) -> int:
        return self.circ_row.size

    @property
    def star_row(self) -> np.ndarray:
        return self.circ_row[: self.m]

    @cached_property
    def bullet_cols(self) -> np.ndarray:
        i = np.arange(self.p)[:, None]
        j = np.arange(self.m)[None, :]
        return self.circ_row[(i - j) % self.p]

    def dense_circulant(self) -> np.ndarray:
        """Full p x p matrix R; test/diagnostic use only."""
        i = np.arange(self.p)[:, None]
        j = np.arange(self.p)[None, :]
        return self.circ_row[(i - j) % self.p]


def build_kernel_blocks(spec: PeriodSpec, hyper: Hyperparams) -> KernelBlocks:
    """Evaluate the circulant row for `spec` and wrap it with the remainder size."""
    lags = np.arange(spec.p)
    row = periodic_correlation(lags, hyper.theta, spec.p, spec.d)
    row = np.atleast_1d(np.asarray(row, dtype=np.float64))
    return KernelBlocks(circ_row=row, m=spec.m)

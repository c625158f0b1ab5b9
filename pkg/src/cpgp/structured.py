"""Fast exact linear algebra for symmetric circulant and symmetric Toeplitz matrices.

Circulant work is FFT diagonalization (O(p log p) solves, log-determinants,
matrix-vector products).  Toeplitz work is a generator-based Cholesky
factorization in O(m^2); the tight inner loop is JIT-compiled when numba is
importable and falls back to a vectorized numpy version otherwise.  A dense
O(m^3) route is kept behind the same interface as an always-correct
cross-check for small matrices.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NotPositiveDefiniteError, NumericalSymmetryError, SingularMatrixError

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - environment without numba
    _HAVE_NUMBA = False

# Relative pivot floor below which a Toeplitz matrix is declared not PD.
PIVOT_FLOOR = 1e-12


def circulant_eigenvalues(first_row: np.ndarray) -> np.ndarray:
    """Eigenvalues of the symmetric circulant with this first row, by DFT.

    Eigenvalue j corresponds to Fourier mode j.  The imaginary parts of the
    transform are a symmetry residual: they are checked against
    1e-8 * max|row| and then discarded.
    """
    row = np.asarray(first_row, dtype=np.float64)
    if row.ndim != 1 or row.size < 1:
        raise SingularMatrixError(f"first row must be a non-empty vector, got shape {row.shape}")
    if not np.all(np.isfinite(row)):
        raise SingularMatrixError("first row contains non-finite values")
    spec = np.fft.fft(row)
    scale = np.abs(row).max()
    resid = np.abs(spec.imag).max()
    if resid > 1e-8 * max(scale, np.finfo(np.float64).tiny):
        raise NumericalSymmetryError(
            f"imaginary residual {resid:.3e} exceeds 1e-8*max|row|; row is not a symmetric circulant row"
        )
    return spec.real.copy()


class SymmetricCirculant:
    """Symmetric circulant operator held as its first row, diagonalized by FFT."""

    def __init__(self, first_row: np.ndarray, eigenvalues: np.ndarray | None = None):
        self.first_row = np.asarray(first_row, dtype=np.float64)
        self._eig = None if eigenvalues is None else np.asarray(eigenvalues, dtype=np.float64)

    @property
    def p(self) -> int:
        return self.first_row.size

    @property
    def eigenvalues(self) -> np.ndarray:
        if self._eig is None:
            self._eig = circulant_eigenvalues(self.first_row)
        return self._eig

    def matvec(self, rhs: np.ndarray) -> np.ndarray:
        """Product C @ rhs for a vector or p x q block, via FFT along axis 0."""
        rhs = np.asarray(rhs, dtype=np.float64)
        lam = self.eigenvalues if rhs.ndim == 1 else self.eigenvalues[:, None]
        return np.fft.ifft(np.fft.fft(rhs, axis=0) * lam, axis=0).real

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solution of C @ x = rhs for a vector or p x q block."""
        lam = self.eigenvalues
        if lam.min() <= 0:
            raise SingularMatrixError(
                f"circulant has non-positive eigenvalue {lam.min():.3e}; cannot solve"
            )
        rhs = np.asarray(rhs, dtype=np.float64)
        div = lam if rhs.ndim == 1 else lam[:, None]
        return np.fft.ifft(np.fft.fft(rhs, axis=0) / div, axis=0).real

    def logdet(self) -> float:
        lam = self.eigenvalues
        if lam.min() <= 0:
            raise SingularMatrixError(
                f"circulant has non-positive eigenvalue {lam.min():.3e}; log-determinant undefined"
            )
        return float(np.sum(np.log(lam)))

    def dense(self) -> np.ndarray:
        """Materialize the full matrix; test/diagnostic use only."""
        i = np.arange(self.p)[:, None]
        j = np.arange(self.p)[None, :]
        return self.first_row[(j - i) % self.p]


def circulant_solve(c: SymmetricCirculant, rhs: np.ndarray) -> np.ndarray:
    return c.solve(rhs)


def circulant_logdet(c: SymmetricCirculant) -> float:
    return c.logdet()


# ---------------------------------------------------------------------------
# Toeplitz Cholesky factorization (generator / Schur-style recursion).
#
# The recursion keeps a two-row generator (g0, g1); each step applies the
# hyperbolic rotation [[1, rho], [rho, 1]]/gamma and shifts g0 one slot right.
# The rotation and shift are fused into one forward pass with a carry, which
# is what makes the compiled loop memory-friendly.
# ---------------------------------------------------------------------------


def _toeplitz_cholesky_core_py(t, floor):
    m = t.shape[0]
    L = np.zeros((m, m))
    L[:, 0] = t
    g0 = np.roll(t, 1)
    g1 = t.copy()
    for i in range(1, m):
        if g0[i] <= 0:
            return L, 2, i
        rho = -g1[i] / g0[i]
        if abs(rho) >= 1.0:
            return L, 2, i
        ig = 1.0 / np.sqrt((1.0 - rho) * (1.0 + rho))
        r0 = (g0[i:] + rho * g1[i:]) * ig
        g1[i:] = (g1[i:] + rho * g0[i:]) * ig
        L[i:, i] = r0
        if r0[0] * r0[0] < floor:
            return L, 3, i
        g0[i + 1 :] = r0[:-1]
    return L, 0, -1


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _toeplitz_cholesky_core_nb(t, floor):  # pragma: no cover - exercised via wrapper
        m = t.shape[0]
        L = np.zeros((m, m))
        for i in range(m):
            L[i, 0] = t[i]
        g0 = np.empty(m)
        g1 = np.empty(m)
        g0[0] = 0.0
        for i in range(1, m):
            g0[i] = t[i - 1]
        for i in range(m):
            g1[i] = t[i]
        for i in range(1, m):
            if g0[i] <= 0.0:
                return L, 2, i
            rho = -g1[i] / g0[i]
            if np.abs(rho) >= 1.0:
                return L, 2, i
            ig = 1.0 / np.sqrt((1.0 - rho) * (1.0 + rho))
            carry = 0.0
            for j in range(i, m):
                a = g0[j]
                b = g1[j]
                r0 = (a + rho * b) * ig
                g1[j] = (b + rho * a) * ig
                L[j, i] = r0
                g0[j] = carry
                carry = r0
            if L[i, i] * L[i, i] < floor:
                return L, 3, i
        return L, 0, -1

    _toeplitz_cholesky_core = _toeplitz_cholesky_core_nb
else:  # pragma: no cover
    _toeplitz_cholesky_core = _toeplitz_cholesky_core_py


def toeplitz_cholesky(first_column: np.ndarray, method: str = "fast") -> np.ndarray:
    """Lower Cholesky factor L of the symmetric Toeplitz matrix with this first column.

    Parameters
    ----------
    first_column : (m,) array
    method : {"fast", "dense"}
        "fast" runs the O(m^2) generator recursion; "dense" materializes the
        matrix and calls a dense Cholesky, kept as an internal cross-check.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot falls below PIVOT_FLOOR * first_column[0] (relative floor)
        or the recursion detects an indefinite leading minor.
    """
    t = np.asarray(first_column, dtype=np.float64)
    if t.ndim != 1 or t.size < 1:
        raise NotPositiveDefiniteError(f"first column must be a non-empty vector, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise NotPositiveDefiniteError("first column contains non-finite values")
    if t[0] <= 0:
        raise NotPositiveDefiniteError(f"leading entry {t[0]:.3e} is not positive", index=0)
    if method == "dense":
        i = np.arange(t.size)
        dense = t[np.abs(i[:, None] - i[None, :])]
        try:
            return np.linalg.cholesky(dense)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(f"dense Cholesky failed: {exc}") from exc
    if method != "fast":
        raise ValueError(f"unknown method {method!r}")
    # Normalize to unit diagonal: the recursion assumes t[0] == 1.
    scale = np.sqrt(t[0])
    L, status, idx = _toeplitz_cholesky_core(t / t[0], PIVOT_FLOOR)
    if status == 2:
        raise NotPositiveDefiniteError(f"leading minor {idx + 1} is not positive definite", index=idx)
    if status == 3:
        raise NotPositiveDefiniteError(
            f"pivot at index {idx} fell below the relative floor {PIVOT_FLOOR:g}", index=idx
        )
    return scale * L


class SymmetricToeplitz:
    """Symmetric Toeplitz matrix held as its first column, with a lazy Cholesky factor."""

    def __init__(self, first_column: np.ndarray):
        self.first_column = np.asarray(first_column, dtype=np.float64)
        self._factor = None

    @property
    def m(self) -> int:
        return self.first_column.size

    @property
    def cholesky_factor(self) -> np.ndarray:
        if self._factor is None:
            self._factor = toeplitz_cholesky(self.first_column)
        return self._factor

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.cholesky_factor))))

    def half_solve(self, rhs: np.ndarray) -> np.ndarray:
        """L^{-1} @ rhs; quadratic forms x' T^{-1} y are inner products of these."""
        return solve_triangular(self.cholesky_factor, rhs, lower=True, check_finite=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        L = self.cholesky_factor
        z = solve_triangular(L, rhs, lower=True, check_finite=False)
        return solve_triangular(L.T, z, lower=False, check_finite=False)

    def dense(self) -> np.ndarray:
        i = np.arange(self.m)
        return self.first_column[np.abs(i[:, None] - i[None, :])]


def toeplitz_cholesky_logdet_solve(t: SymmetricToeplitz, rhs: np.ndarray):
    """(log det T, solution of T x = rhs) through one Cholesky factorization."""
    return t.logdet(), t.solve(rhs)

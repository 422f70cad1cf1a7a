"""Dense complex linear algebra kernel: solves, rank with threshold sweep, spectra.

Backed by LAPACK through numpy.  Rank determination always carries a
threshold sweep so borderline ranks are visible to the caller instead of
being collapsed into a single integer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularMatrixError(ArithmeticError):
    """Coefficient matrix is singular to working precision."""


class NotHermitianError(ValueError):
    """Matrix is not Hermitian within tolerance."""


def solve_linear(A, b) -> np.ndarray:
    """Solve A x = b by partially pivoted LU; raise on singular input."""
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("non-finite solution (singular to tolerance)")
    return x


@dataclass
class RankReport:
    """Rank under the default threshold plus rank-vs-threshold table."""

    rank: int
    singular_values: np.ndarray  # descending
    threshold: float
    sweep: list  # [(threshold, rank)] for threshold * 10^k, k in -2..2

    def sweep_ranks(self) -> list:
        return [r for _, r in self.sweep]


def svd_rank(A, rtol: float | None = None) -> RankReport:
    """Singular values and rank, with a 5-decade threshold sweep.

    Default threshold is max(rows, cols) * machine_eps * sigma_1; the sweep
    reports the rank at threshold * 10^k for k in {-2, ..., 2} so borderline
    cases surface instead of silently picking a side.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    sv = np.linalg.svd(A, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        zero_sweep = [(0.0, 0)] * 5
        return RankReport(0, sv, 0.0, zero_sweep)
    tol = rtol * sv[0] if rtol is not None else max(A.shape) * np.finfo(float).eps * sv[0]
    sweep = []
    for k in range(-2, 3):
        t = tol * 10.0**k
        sweep.append((t, int(np.count_nonzero(sv > t))))
    rank = int(np.count_nonzero(sv > tol))
    return RankReport(rank, sv, tol, sweep)


def eig_hermitian(A, herm_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix: ascending values, orthonormal vectors.

    The input is validated against its conjugate transpose and symmetrized
    internally before factorization.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.conj().T) > herm_tol * max(1.0, scale):
        raise NotHermitianError("matrix deviates from Hermitian beyond tolerance")
    sym = 0.5 * (A + A.conj().T)
    vals, vecs = np.linalg.eigh(sym)
    return vals, vecs

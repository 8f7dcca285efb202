"""Dense complex matrix helpers for small fixed dimensions.

Everything here operates on plain ``numpy`` arrays (complex128, square,
N <= ~6).  The Frobenius norm is the norm everywhere; relative residuals
are ``abs / (1 + ||reference||_F)`` so verdicts stay scale-free across
degrees and deformation parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SingularMatrixError

#: Condition-number ceiling beyond which solves refuse to proceed.
COND_LIMIT = 1e12


def as_cmatrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return ``m`` as a square complex128 array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not (np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag))):
        raise ValueError(f"{name} has non-finite entries")
    return a


def frob(m: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(m))


def rel_residual(abs_residual: float, reference: np.ndarray | float) -> float:
    """Scale-free residual: ``abs / (1 + ||reference||_F)``."""
    ref = reference if np.isscalar(reference) else frob(reference)
    return float(abs_residual) / (1.0 + float(ref))


def hermitian_defect(m: np.ndarray) -> float:
    """``||M - M*||_F``; zero iff M is Hermitian."""
    m = np.asarray(m)
    return frob(m - m.conj().T)


def skew_defect(m: np.ndarray) -> float:
    """``||M + M*||_F``; zero iff M is skew-Hermitian."""
    m = np.asarray(m)
    return frob(m + m.conj().T)


def adj(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(m).conj().T


def comm(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Commutator ``[X, Y] = XY - YX``."""
    return x @ y - y @ x


def mat_power_log(b: np.ndarray, x: float) -> np.ndarray:
    """Matrix power ``x**B = exp(B log x)`` for x > 0.

    Satisfies the group law ``x**B @ y**B = (x y)**B`` and equals the
    eigendecomposition value whenever B is diagonalizable.
    """
    b = as_cmatrix(b, "B")
    x = float(x)
    if not np.isfinite(x) or x <= 0.0:
        raise ValueError(f"x must be positive and finite, got {x}")
    return scipy.linalg.expm(b * np.log(x))


def solve(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``M X = rhs`` with a condition guard and iterative refinement.

    Raises
    ------
    SingularMatrixError
        If the 2-norm condition number of ``M`` exceeds ``COND_LIMIT``.
        Degenerate a_n / gamma_n are meaningful; they are never patched.
    """
    m = as_cmatrix(m, "M")
    rhs = np.asarray(rhs, dtype=complex)
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > COND_LIMIT:
        cond = np.inf if sv[-1] == 0.0 else sv[0] / sv[-1]
        raise SingularMatrixError(
            f"matrix numerically singular (cond ~ {cond:.3e})", condition=float(cond)
        )
    lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    # Two refinement passes with an extended-precision residual recover the
    # digits lost to Hankel-type conditioning.
    ml = m.astype(np.clongdouble)
    rl = rhs.astype(np.clongdouble)
    for _ in range(2):
        r = rl - ml @ x.astype(np.clongdouble)
        x = x + scipy.linalg.lu_solve((lu, piv), r.astype(complex), check_finite=False)
    return x


def solve_right(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``X M = rhs`` (multiplication by ``M**-1`` from the right)."""
    return solve(np.asarray(m).T, np.asarray(rhs).T).T


def inv(m: np.ndarray) -> np.ndarray:
    """Inverse through :func:`solve` (same condition guard)."""
    m = as_cmatrix(m)
    return solve(m, np.eye(m.shape[0], dtype=complex))


def hermitian_inv_sqrt(m: np.ndarray) -> np.ndarray:
    """``M**-1/2`` for Hermitian positive definite M, itself Hermitian."""
    m = as_cmatrix(m)
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w[0] <= 0.0:
        raise SingularMatrixError(
            f"matrix not positive definite (min eigenvalue {w[0]:.3e})"
        )
    return (v / np.sqrt(w)) @ v.conj().T


@dataclass(frozen=True)
class BlockMatrix:
    """2x2 grid of equal-dimension square blocks, stored as one 2N x 2N array."""

    full: np.ndarray

    def __post_init__(self):
        a = as_cmatrix(self.full, "block matrix")
        if a.shape[0] % 2:
            raise ValueError("block matrix must have even dimension")
        a.setflags(write=False)
        object.__setattr__(self, "full", a)

    @classmethod
    def from_blocks(cls, tl, tr, bl, br) -> "BlockMatrix":
        return cls(np.block([[np.asarray(tl), np.asarray(tr)],
                             [np.asarray(bl), np.asarray(br)]]))

    @property
    def dim(self) -> int:
        return self.full.shape[0] // 2

    def block(self, i: int, j: int) -> np.ndarray:
        n = self.dim
        return self.full[i * n:(i + 1) * n, j * n:(j + 1) * n]

    @property
    def tl(self) -> np.ndarray:
        return self.block(0, 0)

    @property
    def tr(self) -> np.ndarray:
        return self.block(0, 1)

    @property
    def bl(self) -> np.ndarray:
        return self.block(1, 0)

    @property
    def br(self) -> np.ndarray:
        return self.block(1, 1)


def sigma3(n: int) -> BlockMatrix:
    """diag(I_N, -I_N)."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return BlockMatrix.from_blocks(eye, zero, zero, -eye)

"""The special (B, B_0) family admitting a unitary weight twist.

With ``[B, B_0] = B_0`` and ``B**2 + alpha B - B_0`` Hermitian, the pair is
conjugate to a diagonal J and a nilpotent L through an explicit unit
upper-triangular transformation Z built from the free parameters nu_k.
Conjugating the twisted Lax pair produces six extra difference/differential
relations plus one reduction identity for the associated polynomial data;
:func:`verify_section_final` evaluates all seven as residuals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import linalg
from .errors import DegenerateParametersError
from .report import ResidualReport

if TYPE_CHECKING:  # pragma: no cover
    from .lax import LaxQuantities

_INVARIANT_TOL = 1e-12


@dataclass(frozen=True)
class DG1Family:
    """Constructed (B, B_0) pair with its building blocks."""

    dim: int
    alpha: float
    nu: tuple[complex, ...]
    J: np.ndarray
    L: np.ndarray
    Z: np.ndarray
    B: np.ndarray
    B0: np.ndarray
    c: np.ndarray  # diagonal of J**2 + alpha J

    def __post_init__(self):
        for name in ("J", "L", "Z", "B", "B0", "c"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def build_dg1(nu: Sequence[complex], alpha: float, dim: int | None = None) -> DG1Family:
    """Build the family from nu_1..nu_{N-1} and alpha.

    ``B = Z J Z**-1`` and ``B_0 = Z L Z**-1`` with J = diag(N-1, ..., 0),
    L the nilpotent shift weighted by nu, and Z the explicit product
    transformation.  All structural invariants are asserted on exit.

    Raises
    ------
    DegenerateParametersError
        If some nu_k vanishes or the diagonal of J**2 + alpha J has
        coincident entries (cannot happen for alpha > 0).
    """
    nu = tuple(complex(v) for v in nu)
    n = len(nu) + 1
    if dim is not None and int(dim) != n:
        raise ValueError(f"dim {dim} inconsistent with {len(nu)} nu parameters")
    if any(v == 0 for v in nu):
        raise DegenerateParametersError("all nu_k must be nonzero")

    j_diag = np.arange(n - 1, -1, -1, dtype=float)
    j = np.diag(j_diag).astype(complex)
    c = j_diag**2 + alpha * j_diag
    ell = np.zeros((n, n), dtype=complex)
    for k in range(n - 1):
        ell[k, k + 1] = nu[k]

    z = np.eye(n, dtype=complex)
    for i in range(n):
        for col in range(i + 1, n):
            prod = 1.0 + 0.0j
            for l in range(1, col - i + 1):
                denom = c[i + l] - c[i]
                if abs(denom) < 1e-14:
                    raise DegenerateParametersError(
                        f"coincident c values: c[{i + l}] = c[{i}] = {c[i]}"
                    )
                prod *= nu[i + l - 1] / denom
            z[i, col] = prod

    zi = linalg.inv(z)
    b = z @ j @ zi
    b0 = z @ ell @ zi
    fam = DG1Family(n, float(alpha), nu, j, ell, z, b, b0, c)

    if linalg.frob(linalg.comm(b, b0) - b0) > _INVARIANT_TOL:
        raise DegenerateParametersError("[B, B0] = B0 violated by construction")
    if linalg.hermitian_defect(b @ b + alpha * b - b0) > _INVARIANT_TOL:
        raise DegenerateParametersError("B^2 + alpha B - B0 not Hermitian")
    if linalg.frob(np.linalg.matrix_power(b0, n)) > _INVARIANT_TOL:
        raise DegenerateParametersError("B0 not nilpotent")
    return fam


def dg1_tt_poly(fam: DG1Family) -> tuple[np.ndarray, ...]:
    """Coefficients C_k of T(x) T*(x) where T(x) = x**B = Z x**J Z**-1.

    Since J is diagonal with integer entries, T is a matrix polynomial of
    degree N-1 and T T* one of degree 2(N-1).
    """
    n = fam.dim
    zi = linalg.inv(fam.Z)
    # T(x) = sum_m T_m x^m with T_m = Z E_{k k} Z^-1 picking N-k = m
    t_coeff = []
    for m in range(n):
        sel = np.zeros((n, n), dtype=complex)
        sel[n - 1 - m, n - 1 - m] = 1.0
        t_coeff.append(fam.Z @ sel @ zi)
    c = []
    for k in range(2 * n - 1):
        acc = np.zeros((n, n), dtype=complex)
        for m in range(max(0, k - n + 1), min(k, n - 1) + 1):
            acc += t_coeff[m] @ t_coeff[k - m].conj().T
        acc = 0.5 * (acc + acc.conj().T)  # symmetrize roundoff only
        c.append(acc)
    return tuple(c)


def s_exponent_hermiticity(fam: DG1Family) -> float:
    """Hermitian defect of B**2 + alpha B - B0; S(z) unitarity holds iff 0."""
    return linalg.hermitian_defect(fam.B @ fam.B + fam.alpha * fam.B - fam.B0)


def h_conjugation_residual(fam: DG1Family, zs: Sequence[float]) -> float:
    """Max residual of ``z**B (i X / z) z**-B = i((B**2 + alpha B)/z - B0)``.

    Here X = B**2 + alpha B - B0; the identity encodes [B, B0] = B0 at the
    exponent level.
    """
    x = fam.B @ fam.B + fam.alpha * fam.B - fam.B0
    worst = 0.0
    for zv in zs:
        tb = linalg.mat_power_log(fam.B, zv)
        tbi = linalg.mat_power_log(fam.B, 1.0 / zv)
        lhs = tb @ (1j * x / zv) @ tbi
        rhs = 1j * ((fam.B @ fam.B + fam.alpha * fam.B) / zv - fam.B0)
        worst = max(worst, linalg.rel_residual(linalg.frob(lhs - rhs), rhs))
    return worst


def conjugated_nilpotent(fam: DG1Family, gamma_n: np.ndarray) -> np.ndarray:
    """L_n = gamma_n B0 gamma_n**-1."""
    return linalg.solve_right(gamma_n, gamma_n @ fam.B0)


def verify_section_final(fam: DG1Family, lq_prev: "LaxQuantities",
                         lq: "LaxQuantities", lq_next: "LaxQuantities",
                         tol: float = 1e-6) -> ResidualReport:
    """Residuals of the six twist relations and their reduction at index n.

    Requires n >= 1 (beta_n and L_{n-1} enter) and the n+1 data for the
    relation coupling beta_{n+1}.
    """
    n = lq.n
    report = ResidualReport(context={"kind": "section-final", "n": n, "s": lq.s})
    if n < 1 or lq_prev.n != n - 1 or lq_next.n != n + 1:
        raise ValueError("need consecutive quantities at n-1, n, n+1 with n >= 1")

    s = lq.s
    eye = np.eye(fam.dim)
    a, b = lq.a, lq.b
    ai_b = linalg.solve(a, b)
    an1 = lq.an_coeff
    gam = lq.gamma
    alpha_n = lq.alpha_rec
    beta_n = lq.beta_rec
    beta_n1 = lq_next.beta_rec

    ell_n = conjugated_nilpotent(fam, gam)
    ell_nm1 = conjugated_nilpotent(fam, lq_prev.gamma)
    ell_np1 = conjugated_nilpotent(fam, lq_next.gamma)

    big_k = fam.B @ fam.B + fam.alpha * fam.B + linalg.comm(fam.B0, an1)
    gam_an1 = linalg.solve_right(gam, gam @ an1)
    k_n = linalg.adj(lq.Bn @ lq.Bn + fam.alpha * lq.Bn + linalg.comm(ell_n, gam_an1))

    d0 = fam.B0 - linalg.adj(ell_n)
    d0_prev = fam.B0 - linalg.adj(ell_nm1)
    d0_next = fam.B0 - linalg.adj(ell_np1)
    sb = s * eye - b

    lhs = a @ beta_n @ d0_prev + d0 @ ai_b @ sb
    rhs = linalg.comm(big_k, b)
    report.check("twist-rel-1", lhs - rhs, rhs, tol, n=n, s=s)

    lhs = sb @ d0 - d0 @ ai_b @ a
    rhs = big_k @ a - a @ k_n
    report.check("twist-rel-2", lhs - rhs, rhs, tol, n=n, s=s)

    lhs = d0_next @ beta_n1 - beta_n @ d0_prev
    rhs = linalg.comm(big_k, alpha_n) + linalg.comm(alpha_n, fam.B0 @ alpha_n)
    report.check("twist-rel-3", lhs - rhs, rhs, tol, n=n, s=s)

    lhs = big_k - k_n
    rhs = fam.B0 @ alpha_n - alpha_n @ linalg.adj(ell_n)
    report.check("twist-rel-4", lhs - rhs, rhs, tol, n=n, s=s)

    bhat_sq = lq.Bhat @ lq.Bhat + fam.alpha * lq.Bhat
    lhs = a @ beta_n @ d0_prev - sb @ d0 @ ai_b + s * bhat_sq
    rhs = sb @ big_k + a @ k_n @ ai_b
    report.check("twist-rel-5", lhs - rhs, rhs, tol, n=n, s=s)

    lhs = ai_b @ big_k - k_n @ ai_b + beta_n @ d0_prev + ai_b @ d0 @ ai_b
    report.check("twist-rel-6", lhs, big_k, tol, n=n, s=s)

    lhs = bhat_sq
    rhs = big_k + d0 @ ai_b
    report.check("twist-reduction", lhs - rhs, rhs, tol, n=n, s=s)
    return report

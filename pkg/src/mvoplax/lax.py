"""Lax-triple quantities at z = 0 and their structural identities.

All stored objects are the complex quantities of the Riemann-Hilbert
normalization (2 pi i factors kept verbatim), so identities are checked in
their original form rather than in rescaled real variables.  The Cauchy
transform at the origin is evaluated through the k = -1 moment expansion;
no contour evaluation is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg, quadrature, weight
from .linalg import BlockMatrix
from .mvop import MVOPFamily, eval_poly_many
from .report import ResidualReport

TAU_I = 2j * np.pi


@dataclass(frozen=True)
class LaxQuantities:
    """Per-(n, s) bundle of the z = 0 Riemann-Hilbert data.

    ``p`` and ``q`` are skew-Hermitian; ``a = 2 pi i s p gamma_n``,
    ``b = s p q`` (b_0 = 0, q_0 = 0 by convention); ``Bn``/``Bhat`` are the
    conjugations of the constant matrix by gamma_n and P_n(s; 0).
    ``alpha_rec`` is None when the family was not built past n, and
    ``beta_rec``/``gamma_prev`` are None at n = 0.
    """

    n: int
    s: float
    p: np.ndarray
    q: np.ndarray
    a: np.ndarray
    b: np.ndarray
    Bn: np.ndarray
    Bhat: np.ndarray
    P0: np.ndarray
    an_coeff: np.ndarray
    gamma: np.ndarray
    gamma_prev: np.ndarray | None
    alpha_rec: np.ndarray | None
    beta_rec: np.ndarray | None


def cauchy_zero(fam: MVOPFamily, n: int, side: str = "left") -> np.ndarray:
    """``C(P_n W)(s; 0)`` (side="left") or ``C(W P_n*)(s; 0)`` (side="right").

    Expands the polynomial factor so only matrix moments k >= -1 appear.
    """
    acc = np.zeros((fam.spec.dim, fam.spec.dim), dtype=complex)
    for j in range(n + 1):
        mom = weight.matrix_moment(fam.spec, j - 1)
        if side == "left":
            acc += fam.coefficient(n, j) @ mom
        else:
            acc += mom @ linalg.adj(fam.coefficient(n, j))
    return acc / TAU_I


def compute_lax(fam: MVOPFamily, n: int) -> LaxQuantities:
    """Assemble the Lax quantities at index n from the built family.

    Requires s > 0 (the a, b variables carry an explicit factor s) and
    invertibility of P_n(s; 0) for q_n when n >= 1.
    """
    if not 0 <= n <= fam.n_max:
        raise ValueError(f"n = {n} outside built range 0..{fam.n_max}")
    spec = fam.spec
    if spec.s <= 0.0:
        raise ValueError("Lax quantities need s > 0; use initial_derivatives at s = 0")
    nn = spec.dim
    p0 = fam.constant_term(n)
    p = cauchy_zero(fam, n, "left") @ linalg.adj(p0)
    gam = fam.gamma[n]
    a = TAU_I * spec.s * p @ gam
    if n >= 1:
        q = TAU_I * linalg.solve_right(p0, fam.gamma[n - 1] @ fam.constant_term(n - 1))
        b = spec.s * p @ q
    else:
        q = np.zeros((nn, nn), dtype=complex)
        b = np.zeros((nn, nn), dtype=complex)
    bn = linalg.solve_right(gam, gam @ spec.B)
    bhat = linalg.solve_right(p0, p0 @ spec.B)
    return LaxQuantities(
        n=n,
        s=spec.s,
        p=p,
        q=q,
        a=a,
        b=b,
        Bn=bn,
        Bhat=bhat,
        P0=p0,
        an_coeff=fam.coefficient(n, n - 1),
        gamma=gam,
        gamma_prev=fam.gamma[n - 1] if n >= 1 else None,
        alpha_rec=fam.alpha[n] if n < fam.n_max else None,
        beta_rec=fam.beta[n],
    )


def lax_chain(fam: MVOPFamily, n_hi: int | None = None) -> list[LaxQuantities]:
    """Lax quantities for n = 0..n_hi (default n_max)."""
    top = fam.n_max if n_hi is None else n_hi
    return [compute_lax(fam, n) for n in range(top + 1)]


@dataclass(frozen=True)
class LaxMatrices:
    """The 2N x 2N coefficients of the z-equation and the shift pencil.

    ``A1`` is None at n = 0 where gamma_{n-1} is not defined.  ``U0``/``U1``
    give the degree-1 pencil U(z) = U0 + z U1.
    """

    A1: BlockMatrix | None
    A2: BlockMatrix
    A2_alt: BlockMatrix
    U0: BlockMatrix | None
    U1: BlockMatrix


def assemble_lax_matrices(lq: LaxQuantities, alpha_exp: float) -> LaxMatrices:
    """Build A_{-1}, both forms of A_{-2}, and the shift pencil.

    ``alpha_exp`` is the weight exponent alpha entering (n + alpha/2).
    ``A2`` uses the p/q form, ``A2_alt`` the equivalent a/b form; their
    agreement is one of the structural checks.
    """
    nn = lq.gamma.shape[0]
    eye = np.eye(nn, dtype=complex)
    gam_inv = linalg.inv(lq.gamma)
    s, p, q, a, b = lq.s, lq.p, lq.q, lq.a, lq.b

    a1 = None
    if lq.gamma_prev is not None:
        spec_b = _constant_b(lq)
        a1 = BlockMatrix.from_blocks(
            (lq.n + alpha_exp / 2.0) * eye + spec_b,
            -gam_inv / TAU_I,
            TAU_I * lq.gamma_prev,
            -(lq.n + alpha_exp / 2.0) * eye - linalg.adj(spec_b),
        )
    a2 = BlockMatrix.from_blocks(
        (s / 2.0) * (eye - 2.0 * p @ q),
        -s * p,
        -s * q @ (eye - p @ q),
        -(s / 2.0) * (eye - 2.0 * q @ p),
    )
    a2_alt = BlockMatrix.from_blocks(
        (s / 2.0) * eye - b,
        -(a @ gam_inv) / TAU_I,
        -TAU_I * lq.gamma @ linalg.solve(a, b @ (s * eye - b)),
        -(s / 2.0) * eye + linalg.adj(b),
    )
    zero = np.zeros((nn, nn))
    u0 = None
    if lq.alpha_rec is not None:
        u0 = BlockMatrix.from_blocks(-lq.alpha_rec, gam_inv / TAU_I,
                                     -TAU_I * lq.gamma, zero)
    u1 = BlockMatrix.from_blocks(eye, zero, zero, zero)
    return LaxMatrices(a1, a2, a2_alt, u0, u1)


def _constant_b(lq: LaxQuantities) -> np.ndarray:
    """Recover the constant matrix B from its gamma_n conjugation."""
    return linalg.solve(lq.gamma, lq.Bn @ lq.gamma)


def q_factors(lq: LaxQuantities) -> tuple[np.ndarray, np.ndarray]:
    """``Q^(n)`` and ``Q^(-n)`` in the skew-Hermitian factored forms."""
    nn = lq.gamma.shape[0]
    eye = np.eye(nn, dtype=complex)
    p0i = linalg.inv(lq.P0)
    left = np.block([[eye, lq.p], [-lq.q, eye - lq.q @ lq.p]])
    qn = left @ np.block([[lq.P0, np.zeros((nn, nn))],
                          [np.zeros((nn, nn)), linalg.adj(p0i)]])
    right = np.block([[eye - lq.p @ lq.q, -lq.p], [lq.q, eye]])
    qmn = np.block([[p0i, np.zeros((nn, nn))],
                    [np.zeros((nn, nn)), linalg.adj(lq.P0)]]) @ right
    return qn, qmn


def dual_route_ab(fam: MVOPFamily, n: int) -> tuple[np.ndarray, np.ndarray | None]:
    """Quadrature route for (a_n, b_n) through the weighted 1/y integrals.

    Independent oracle for the moment-expansion values stored in
    :class:`LaxQuantities`; b is None at n = 0.
    """
    spec = fam.spec

    def integrand(m):
        def f(xs):
            pn = eval_poly_many(fam, n, xs)
            pm = eval_poly_many(fam, m, xs)
            w = weight.eval_weight_many(spec, xs)
            return np.einsum("kab,kbc,kdc->kad", pn, w, pm.conj()) / xs[:, None, None]
        return f

    a = spec.s * quadrature.integrate_semiaxis(integrand(n)) @ fam.gamma[n]
    b = None
    if n >= 1:
        b = spec.s * quadrature.integrate_semiaxis(integrand(n - 1)) @ fam.gamma[n - 1]
    return a, b


def verify_structural(fam: MVOPFamily, lq: LaxQuantities,
                      tolerances: dict[str, float] | None = None) -> ResidualReport:
    """Structural identity residuals at (n, s).

    Entries: Liouville-Ostrogradski at z = 0, skew-Hermiticity of p and q,
    Hermiticity of gamma_n, the conjugation identity between b* and b, the
    structural relation between beta_n - b_n and the subleading polynomial
    coefficient, dual-route agreement for a and b, agreement of the two
    forms of A_{-2} (with its trace), and Q Q**-1 = I.  Identities that are
    undefined at n = 0 are marked skipped.
    """
    tol = {
        "lof": 1e-8, "p-skew": 1e-8, "q-skew": 1e-8, "gamma-hermitian": 1e-9,
        "bb-conjugation": 1e-7, "beta-minus-b": 1e-7, "a-dual-route": 1e-8,
        "b-dual-route": 1e-8, "a2-two-form": 1e-9, "a2-trace": 1e-9,
        "qq-inverse": 1e-9,
    }
    if tolerances:
        tol.update(tolerances)
    n, s = lq.n, lq.s
    spec = fam.spec
    report = ResidualReport(context={"kind": "structural", "n": n, "s": s,
                                     "spec": spec.digest})
    eye = np.eye(spec.dim, dtype=complex)

    report.record("p-skew", linalg.skew_defect(lq.p),
                  linalg.rel_residual(linalg.skew_defect(lq.p), lq.p),
                  tol["p-skew"], n=n, s=s)
    report.record("q-skew", linalg.skew_defect(lq.q),
                  linalg.rel_residual(linalg.skew_defect(lq.q), lq.q),
                  tol["q-skew"], n=n, s=s)
    report.record("gamma-hermitian", linalg.hermitian_defect(lq.gamma),
                  linalg.rel_residual(linalg.hermitian_defect(lq.gamma), lq.gamma),
                  tol["gamma-hermitian"], n=n, s=s)

    if n >= 1:
        lof = TAU_I * lq.gamma_prev @ (
            fam.constant_term(n - 1) @ cauchy_zero(fam, n, "right")
            - cauchy_zero(fam, n - 1, "left") @ linalg.adj(lq.P0))
        report.check("lof", lof - eye, eye, tol["lof"], n=n, s=s)
    else:
        report.skip("lof", "gamma_{-1} undefined at n = 0", n=n, s=s)

    if n >= 1:
        lhs = linalg.solve(lq.gamma, linalg.adj(lq.b) @ lq.gamma)
        rhs = linalg.solve(lq.a, lq.b @ lq.a)
        report.check("bb-conjugation", lhs - rhs, rhs, tol["bb-conjugation"], n=n, s=s)
        # beta_n - b_n = -(a_{n,n-1} + [B, a_{n,n-1}]); recurrence convention
        # x P_n = P_{n+1} + alpha_n P_n + beta_n P_{n-1} fixes the sign.
        lhs = lq.beta_rec - lq.b
        rhs = -(lq.an_coeff + linalg.comm(spec.B, lq.an_coeff))
        report.check("beta-minus-b", lhs - rhs, rhs, tol["beta-minus-b"], n=n, s=s)
    else:
        report.skip("bb-conjugation", "b_0 = 0 trivially", n=n, s=s)
        report.skip("beta-minus-b", "beta_0 undefined at n = 0", n=n, s=s)

    a_quad, b_quad = dual_route_ab(fam, n)
    report.check("a-dual-route", lq.a - a_quad, a_quad, tol["a-dual-route"], n=n, s=s)
    if b_quad is not None:
        report.check("b-dual-route", lq.b - b_quad, b_quad, tol["b-dual-route"], n=n, s=s)
    else:
        report.skip("b-dual-route", "b_0 = 0 by convention", n=n, s=s)

    mats = assemble_lax_matrices(lq, spec.alpha)
    report.check("a2-two-form", mats.A2.full - mats.A2_alt.full, mats.A2.full,
                 tol["a2-two-form"], n=n, s=s)
    tr = complex(np.trace(mats.A2.full))
    report.record("a2-trace", abs(tr), abs(tr) / (1.0 + s),
                  tol["a2-trace"], n=n, s=s)

    qn, qmn = q_factors(lq)
    eye2 = np.eye(2 * spec.dim)
    report.check("qq-inverse", qn @ qmn - eye2, eye2, tol["qq-inverse"], n=n, s=s)
    return report

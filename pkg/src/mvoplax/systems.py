"""Difference and differential systems satisfied by the Lax variables.

Residual evaluation (never symbolic trust) for: the four differential and
five difference compatibility relations, the Toda pair, the formal
monodromy identity and its telescoped consequence, the closed first- and
second-order systems in (a_n, b_n, B_n, Bhat_n), the discrete bootstrap,
ODE evolution in s, the s = 0 initial data, and the scalar Painleve III
reduction.

Two print ambiguities are handled explicitly:

* the closed-difference quantity D_n is implemented with the term
  ``a_n B a_n**-1`` (switchable to the literal ``a_n B a_n**(n-1)``
  power reading, which does not close numerically);
* the second-order equation for a_n is implemented with the factor
  ``(da a**-2 + a**-1 da a**-1) b a`` (switchable to the printed
  ``(da a**-2 + a**-1 da) b a``, which fails the scalar reduction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate

from . import linalg, quadrature, weight
from .errors import (
    DivergentMomentError,
    IterationDivergedError,
    SingularMatrixError,
    StepFailureError,
)
from .lax import LaxQuantities, compute_lax, lax_chain
from .linalg import adj, comm, solve, solve_right
from .mvop import MVOPFamily, build_family, eval_poly_many
from .report import ResidualReport
from .weight import WeightSpec

DP_TOL = 1e-6
P_TOL = 1e-5
SECOND_ORDER_TOL = 1e-3
FD_STEP = 1e-4
FD_STEP_SECOND = 1e-3


# ---------------------------------------------------------------------------
# discrete systems
# ---------------------------------------------------------------------------

def residual_dPsystem(spec: WeightSpec, lq_prev: LaxQuantities | None,
                      lq: LaxQuantities, lq_next: LaxQuantities,
                      history: list[LaxQuantities] | None = None,
                      tol: float = DP_TOL) -> ResidualReport:
    """Difference-system residuals centered at n = lq.n.

    ``history`` (quantities for k = 0..n-1) enables the telescoped norm
    identity; entries needing data below n = 1 are skipped at the boundary.
    """
    n, s = lq.n, lq.s
    al = spec.alpha
    bmat = spec.B
    eye = np.eye(spec.dim, dtype=complex)
    rep = ResidualReport(context={"kind": "discrete", "n": n, "s": s,
                                  "spec": spec.digest})

    lhs = lq.alpha_rec
    rhs = (2 * n + al + 1) * eye + lq.a + bmat + adj(lq.Bn)
    rep.check("dP1", lhs - rhs, rhs, tol, n=n, s=s)

    rhs = lq_next.b + solve(lq.gamma, adj(lq.b) @ lq.gamma)
    lhs = s * eye - lq.alpha_rec @ lq.a
    rep.check("dP2", lhs - rhs, rhs, tol, n=n, s=s)

    lhs = lq_next.b @ lq_next.b - s * lq_next.b
    rhs = lq_next.a @ lq_next.beta_rec @ lq.a
    rep.check("dP3", lhs - rhs, rhs, tol, n=n, s=s)

    if n >= 1:
        lhs = lq_next.beta_rec - lq.beta_rec
        rhs = lq.alpha_rec + lq_next.b - lq.b + comm(bmat, lq.alpha_rec)
        rep.check("dP4", lhs - rhs, rhs, tol, n=n, s=s)

        lhs = lq_next.a @ lq_next.beta_rec - lq.beta_rec @ lq_prev.a
        rhs = lq.alpha_rec @ lq.b - lq_next.b @ lq.alpha_rec
        rep.check("dP5", lhs - rhs, rhs, tol, n=n, s=s)

        ai_b = solve(lq.a, lq.b)
        lhs = lq.a @ lq.beta_rec
        rhs = (s * (n * eye + bmat + ai_b - lq.Bhat)
               - lq.b @ ((2 * n + al) * eye + bmat)
               - lq.b @ ai_b
               - lq.a @ adj(lq.Bn) @ ai_b)
        rep.check("monodromy-3.13", lhs - rhs, rhs, tol, n=n, s=s)

        lhs = lq.a @ lq.beta_rec + lq.beta_rec @ lq_prev.a
        rhs = (s * (n * eye + bmat - lq.Bhat)
               - lq.b @ ((2 * n + al) * eye + bmat)
               - lq.a @ adj(lq.Bn) @ ai_b
               - lq.b @ ai_b
               + solve(lq.a, lq.b @ lq.b))
        rep.check("monodromy-combined", lhs - rhs, rhs, tol, n=n, s=s)
    else:
        for name in ("dP4", "dP5", "monodromy-3.13", "monodromy-combined"):
            rep.skip(name, "beta_0 / a_{-1} undefined at n = 0", n=n, s=s)

    if n >= 1 and history is not None:
        if len(history) < n or any(history[k].n != k for k in range(n)):
            raise ValueError("history must hold quantities for k = 0..n-1")
        acc = np.zeros_like(eye)
        for k in range(n):
            term = history[k].a + adj(history[k].Bn)
            acc += term + comm(bmat, term)
        rhs = n * ((n + al) * eye + bmat) + lq.b + acc
        rep.check("telescoped-beta", lq.beta_rec - rhs, rhs, tol, n=n, s=s)
    elif n >= 1:
        rep.skip("telescoped-beta", "history not supplied", n=n, s=s)
    else:
        rep.skip("telescoped-beta", "beta_0 undefined at n = 0", n=n, s=s)
    return rep


def _cq(lq: LaxQuantities, b_next: np.ndarray, bmat: np.ndarray,
        s: float) -> np.ndarray:
    """C_n = s a**-1 - a - a B a**-1 - a b_{n+1} a**-2 - b a**-1."""
    eye = np.eye(lq.a.shape[0], dtype=complex)
    ai = solve(lq.a, eye)
    return (s * ai - lq.a - lq.a @ bmat @ ai - lq.a @ b_next @ ai @ ai
            - lq.b @ ai)


def _dq(lq: LaxQuantities, b_next: np.ndarray, a_prev_inv_b,
        bmat: np.ndarray, s: float, reading: str) -> np.ndarray:
    """D_n; ``a_prev_inv_b`` supplies the (s I - b)(... b a_{n-1}**-1) term.

    reading = "inverse" uses a B a**-1; "literal-power" uses the printed
    a B a**(n-1) matrix power.
    """
    eye = np.eye(lq.a.shape[0], dtype=complex)
    ai = solve(lq.a, eye)
    if reading == "inverse":
        mid = lq.a @ bmat @ ai
    elif reading == "literal-power":
        mid = lq.a @ bmat @ np.linalg.matrix_power(lq.a, lq.n - 1)
    else:
        raise ValueError(f"unknown reading {reading!r}")
    return ((s * eye - lq.b) @ (bmat + a_prev_inv_b)
            + (eye + lq.a + mid + lq.a @ b_next @ ai @ ai) @ lq.b)


@dataclass(frozen=True)
class SDerivatives:
    """Central-difference s-derivatives of the Lax data at fixed n."""

    lq: LaxQuantities
    h: float
    h2: float
    adot: np.ndarray
    bdot: np.ndarray
    Bndot: np.ndarray
    Bhatdot: np.ndarray
    gamdot: np.ndarray
    gamprevdot: np.ndarray | None
    alphadot: np.ndarray | None
    betadot: np.ndarray | None
    P0dot: np.ndarray
    addot: np.ndarray
    bddot: np.ndarray


def s_derivatives(spec: WeightSpec, n: int, s: float, h: float = FD_STEP,
                  h2: float = FD_STEP_SECOND) -> SDerivatives:
    """First (step h) and second (step h2) central differences at (n, s)."""
    if s - max(h, h2) <= 0:
        raise ValueError("stencil leaves the domain s > 0")

    def at(sv: float) -> LaxQuantities:
        return compute_lax(build_family(spec.with_s(sv), n + 1), n)

    lo, hi = at(s - h), at(s + h)
    mid = at(s)
    lo2, hi2 = at(s - h2), at(s + h2)

    def d1(attr):
        lov, hiv = getattr(lo, attr), getattr(hi, attr)
        if lov is None or hiv is None:
            return None
        return (hiv - lov) / (2.0 * h)

    def d2(attr):
        return (getattr(hi2, attr) - 2.0 * getattr(mid, attr)
                + getattr(lo2, attr)) / h2**2

    return SDerivatives(
        lq=mid, h=h, h2=h2,
        adot=d1("a"), bdot=d1("b"), Bndot=d1("Bn"), Bhatdot=d1("Bhat"),
        gamdot=d1("gamma"), gamprevdot=d1("gamma_prev"),
        alphadot=d1("alpha_rec"), betadot=d1("beta_rec"), P0dot=d1("P0"),
        addot=d2("a"), bddot=d2("b"),
    )


def residual_Psystem(spec: WeightSpec, n: int, s: float, h: float = FD_STEP,
                     tol: float = P_TOL) -> ResidualReport:
    """Differential-system residuals (P1-P4, Toda pair, P_n(0) flow) at (n, s).

    Derivatives are central differences with step h, so residuals carry an
    O(h**2) truncation floor.
    """
    der = s_derivatives(spec, n, s, h=h)
    lq = der.lq
    fam_next = build_family(spec.with_s(s), n + 1)
    beta_next = fam_next.beta[n + 1]
    b_next = compute_lax(fam_next, n + 1).b
    al = spec.alpha
    bmat = spec.B
    eye = np.eye(spec.dim, dtype=complex)
    rep = ResidualReport(context={"kind": "continuous", "n": n, "s": s,
                                  "h": h, "spec": spec.digest})

    rhs = lq.gamma @ lq.a
    rep.check("P1", s * der.gamdot - rhs, rhs, tol, n=n, s=s)

    if n >= 1:
        rhs = -lq.gamma @ solve(lq.a, lq.b @ (s * eye - lq.b))
        rep.check("P2", s * der.gamprevdot - rhs, rhs, tol, n=n, s=s)
    else:
        rep.skip("P2", "gamma_{-1} undefined at n = 0", n=n, s=s)

    rhs = ((2 * n + al + 1) * lq.a + lq.a @ lq.a + bmat @ lq.a
           + lq.a @ adj(lq.Bn) - s * eye + lq.b
           + solve(lq.gamma, adj(lq.b) @ lq.gamma))
    rep.check("P3", s * der.adot - rhs, rhs, tol, n=n, s=s)

    if n >= 1:
        rhs = (lq.b + comm(bmat, lq.b) - solve(lq.a, lq.b @ (s * eye - lq.b))
               - lq.a @ lq.beta_rec)
        rep.check("P4", s * der.bdot - rhs, rhs, tol, n=n, s=s)
    else:
        rep.skip("P4", "beta_0 undefined at n = 0", n=n, s=s)

    rhs = lq.b - b_next
    rep.check("toda-alpha", s * der.alphadot - rhs, rhs, tol, n=n, s=s)

    if n >= 1:
        rhs = lq.alpha_rec - beta_next + lq.beta_rec + comm(bmat, lq.alpha_rec)
        rep.check("toda-alpha-couple", s * der.alphadot - rhs, rhs, tol, n=n, s=s)
        rhs = lq.beta_rec @ lq_prev_a(spec, n, s) - lq.a @ lq.beta_rec
        rep.check("toda-beta", s * der.betadot - rhs, rhs, tol, n=n, s=s)
    else:
        rep.skip("toda-alpha-couple", "beta_0 undefined at n = 0", n=n, s=s)
        rep.skip("toda-beta", "beta_0 undefined at n = 0", n=n, s=s)

    rhs = n * eye + bmat - lq.Bhat + solve(lq.a, lq.b)
    lhs = s * solve_right(lq.P0, der.P0dot)
    rep.check("pdot", lhs - rhs, rhs, tol, n=n, s=s)
    return rep


def lq_prev_a(spec: WeightSpec, n: int, s: float) -> np.ndarray:
    """a_{n-1} at s (helper for the Toda beta flow)."""
    return compute_lax(build_family(spec.with_s(s), n), n - 1).a


def residual_closed_systems(spec: WeightSpec, lq_prev: LaxQuantities,
                            lq: LaxQuantities, lq_next: LaxQuantities,
                            derivs: SDerivatives | None = None,
                            lq_prev2: LaxQuantities | None = None,
                            d_reading: str = "inverse",
                            second_reading: str = "derived",
                            tol_discrete: float = DP_TOL,
                            tol_continuous: float = P_TOL,
                            tol_second: float = SECOND_ORDER_TOL) -> ResidualReport:
    """Residuals of the closed systems at n = lq.n >= 1.

    The four first-order difference equations, the reduced pair in
    (C_n, D_n), and (when ``derivs`` is given) the four first-order
    differential equations, the two recovery relations, and the two
    second-order equations.  ``lq_prev2`` (n-2 data) is needed by the D_n
    pair when n >= 2.
    """
    n, s = lq.n, lq.s
    if n < 1:
        raise ValueError("closed systems start at n = 1")
    al = spec.alpha
    bmat = spec.B
    eye = np.eye(spec.dim, dtype=complex)
    rep = ResidualReport(context={"kind": "closed", "n": n, "s": s,
                                  "d_reading": d_reading,
                                  "second_reading": second_reading,
                                  "spec": spec.digest})
    a, b = lq.a, lq.b
    ap = lq_prev.a
    ai_b = solve(a, b)
    sb = s * eye - b

    # first-order difference system, printed index n (data at n-1 and n)
    lhs = ap @ b + lq_prev.b @ ap
    rhs = (s * ap - (2 * n + al - 1) * ap @ ap - ap @ ap @ ap
           - ap @ (bmat + adj(lq_prev.Bn)) @ ap)
    rep.check("closed-d1", lhs - rhs, rhs, tol_discrete, n=n, s=s)

    lhs = b @ b - s * b
    rhs = (s * (n * eye + bmat - lq.Bhat + ai_b)
           - b @ ((2 * n + al) * eye + bmat + ai_b)
           - a @ adj(lq.Bn) @ ai_b) @ ap
    rep.check("closed-d2", lhs - rhs, rhs, tol_discrete, n=n, s=s)

    lhs = a @ adj(lq.Bn) @ ai_b @ sb
    rhs = b @ sb @ solve(ap, adj(lq_prev.Bn) @ ap)
    rep.check("closed-d3", lhs - rhs, rhs, tol_discrete, n=n, s=s)

    lhs = lq.Bhat @ sb
    rhs = sb @ solve(ap, lq_prev.Bhat @ ap)
    rep.check("closed-d4", lhs - rhs, rhs, tol_discrete, n=n, s=s)

    # reduced pair in C_n / D_n
    c_n = _cq(lq, lq_next.b, bmat, s)
    c_prev = _cq(lq_prev, lq.b, bmat, s)
    api = solve(ap, eye)
    lhs = c_n @ b @ sb - b @ sb @ api @ api @ c_prev @ ap @ ap
    rhs = 2.0 * b @ sb
    rep.check("closed-44-C", lhs - rhs, rhs, tol_discrete, n=n, s=s,
              note=f"reading={d_reading}")

    if n == 1 or lq_prev2 is not None:
        if n == 1:
            prev_tail = np.zeros_like(eye)  # b_0 = 0 kills the a_{n-2} term
        else:
            prev_tail = lq_prev.b @ solve(lq_prev2.a, eye)
        d_n = _dq(lq, lq_next.b, b @ api, bmat, s, d_reading)
        d_prev = _dq(lq_prev, lq.b, prev_tail, bmat, s, d_reading)
        lhs = d_n @ sb - sb @ api @ d_prev @ ap
        rhs = s * (b - s * eye)
        rep.check("closed-44-D", lhs - rhs, rhs, tol_discrete, n=n, s=s,
                  note=f"reading={d_reading}")
    else:
        rep.skip("closed-44-D", "needs n-2 data (a_{n-2} enters D_{n-1})",
                 n=n, s=s)

    if derivs is None:
        return rep

    da, db = derivs.adot, derivs.bdot
    bn_star = adj(lq.Bn)

    rhs = (-s * eye + b + ((2 * n + al + 1) * eye + bmat + a + ai_b) @ a
           + a @ bn_star)
    rep.check("closed-c1", s * da - rhs, rhs, tol_continuous, n=n, s=s)

    rhs = (b @ ((2 * n + al + 1) * eye + bmat + ai_b)
           - s * (2.0 * ai_b + n * eye + bmat - lq.Bhat)
           + ai_b @ b + comm(bmat, b) + a @ bn_star @ ai_b)
    rep.check("closed-c2", s * db - rhs, rhs, tol_continuous, n=n, s=s)

    rhs = comm(adj(a), lq.Bn)
    rep.check("closed-c3", s * derivs.Bndot - rhs, rhs, tol_continuous, n=n, s=s)

    rhs = comm(ai_b + bmat, lq.Bhat)
    rep.check("closed-c4", s * derivs.Bhatdot - rhs, rhs, tol_continuous, n=n, s=s)

    recon = solve(a, s * da + s * eye - b
                  - ((2 * n + al + 1) * eye + bmat + a + ai_b) @ a)
    rep.check("recover-Bn", recon - bn_star, bn_star, tol_continuous, n=n, s=s)

    recon = db + n * eye + bmat + ai_b - da @ ai_b + a @ b / s
    rep.check("recover-Bhat", recon - lq.Bhat, lq.Bhat, tol_continuous, n=n, s=s)

    rhs = second_order_a_rhs(spec, n, s, a, b, da, db, second_reading)
    rep.check("second-a", derivs.addot - rhs, rhs, tol_second, n=n, s=s,
              note=f"reading={second_reading}")
    rhs = second_order_b_rhs(spec, n, s, a, b, da, db)
    rep.check("second-b", derivs.bddot - rhs, rhs, tol_second, n=n, s=s)
    return rep


def second_order_a_rhs(spec: WeightSpec, n: int, s: float, a, b, da, db,
                       reading: str = "derived") -> np.ndarray:
    """Right side of the closed second-order equation for a_n.

    reading = "derived" uses (da a**-2 + a**-1 da a**-1) b a, the unique
    form consistent with the first-order system; "printed" reproduces the
    паper text (missing an a**-1) and does not close.
    """
    eye = np.eye(a.shape[0], dtype=complex)
    ai = solve(a, eye)
    bmat = spec.B
    if reading == "derived":
        mixed = (da @ ai @ ai + ai @ da @ ai) @ b @ a
    elif reading == "printed":
        mixed = (da @ ai @ ai + ai @ da) @ b @ a
    else:
        raise ValueError(f"unknown reading {reading!r}")
    return (da @ ai @ da + da @ ai
            - (comm(bmat @ a, a) + comm(ai @ b, a @ a)) / s**2
            + (db - da + ai @ db @ a + da @ a - mixed
               + bmat @ da - da @ ai @ bmat @ a + comm(ai @ b, da) - eye) / s)


def second_order_b_rhs(spec: WeightSpec, n: int, s: float, a, b, da, db) -> np.ndarray:
    """Right side of the closed second-order equation for b_n (as printed)."""
    eye = np.eye(a.shape[0], dtype=complex)
    ai = solve(a, eye)
    bmat = spec.B
    return ((da @ ai + ai @ da) @ ai @ b + da @ ai @ db - ai @ db
            + a @ (b + comm(bmat, b)) / s**2
            - (a @ db + comm(db, bmat) + da @ ai @ comm(bmat, b)
               - ai @ (db @ b + b @ db)
               + (da @ ai @ ai + ai @ da @ ai) @ b @ b
               + da @ ai @ b + ai @ b) / s)


# ---------------------------------------------------------------------------
# scalar Painleve III reduction
# ---------------------------------------------------------------------------

def _require_scalar(spec: WeightSpec) -> None:
    if spec.dim != 1 or linalg.frob(spec.B) != 0.0:
        raise ValueError("scalar reduction requires N = 1 and B = 0")


def _scalar_ab_grid(spec: WeightSpec, n: int, s_grid: np.ndarray):
    a_vals = np.empty(len(s_grid))
    b_vals = np.empty(len(s_grid))
    for i, sv in enumerate(s_grid):
        lq = compute_lax(build_family(spec.with_s(float(sv)), n), n)
        a_vals[i] = lq.a[0, 0].real
        b_vals[i] = lq.b[0, 0].real
    return a_vals, b_vals


def _validate_grid(s_grid) -> np.ndarray:
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size < 3:
        raise ValueError("grid must contain at least 3 points for differences")
    steps = np.diff(s_grid)
    if not np.allclose(steps, steps[0], rtol=1e-9):
        raise ValueError("grid must be uniform")
    if s_grid[0] <= 0:
        raise ValueError("grid must lie in s > 0")
    return s_grid


def scalar_piii_residual(spec: WeightSpec, n: int, s_grid) -> float:
    """Max Painleve III residual of the quadrature-computed a_n over a grid.

    Second derivatives come from central differences on the grid itself, so
    the result is limited by O(step**2) truncation.
    """
    _require_scalar(spec)
    s_grid = _validate_grid(s_grid)
    a_vals, _ = _scalar_ab_grid(spec, n, s_grid)
    if np.min(np.abs(a_vals)) < 1e-12:
        raise ZeroDivisionError("a_n vanishes on the grid (pole of 1/a)")
    ds = s_grid[1] - s_grid[0]
    c1 = 2 * n + spec.alpha + 1
    worst = 0.0
    for i in range(1, len(s_grid) - 1):
        sv, av = s_grid[i], a_vals[i]
        dda = (a_vals[i + 1] - 2 * a_vals[i] + a_vals[i - 1]) / ds**2
        da = (a_vals[i + 1] - a_vals[i - 1]) / (2 * ds)
        res = (dda - da**2 / av + da / sv - c1 * av**2 / sv**2
               - av**3 / sv**2 - spec.alpha / sv + 1.0 / av)
        worst = max(worst, abs(res))
    return worst


def scalar_p3_residual(spec: WeightSpec, n: int, s_grid) -> float:
    """Max first-order residual ``s da - ((2n+al+1)a + a^2 - s + 2b)``.

    Uses the five-point first derivative, whose O(step**4) truncation sits
    below the quadrature floor on desk-scale grids.
    """
    _require_scalar(spec)
    s_grid = _validate_grid(s_grid)
    if s_grid.size < 5:
        raise ValueError("grid must contain at least 5 points")
    a_vals, b_vals = _scalar_ab_grid(spec, n, s_grid)
    ds = s_grid[1] - s_grid[0]
    c1 = 2 * n + spec.alpha + 1
    worst = 0.0
    for i in range(2, len(s_grid) - 2):
        sv = s_grid[i]
        da = (-a_vals[i + 2] + 8 * a_vals[i + 1] - 8 * a_vals[i - 1]
              + a_vals[i - 2]) / (12 * ds)
        res = sv * da - (c1 * a_vals[i] + a_vals[i] ** 2 - sv + 2 * b_vals[i])
        worst = max(worst, abs(res))
    return worst


# ---------------------------------------------------------------------------
# ODE evolution of the closed first-order system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OdeState:
    """Evolved (a, b, B_n, Bhat_n) at abscissa s."""

    n: int
    s: float
    a: np.ndarray
    b: np.ndarray
    Bn: np.ndarray
    Bhat: np.ndarray


def _pack(*mats: np.ndarray) -> np.ndarray:
    return np.concatenate([np.concatenate([m.real.ravel(), m.imag.ravel()])
                           for m in mats])


def _unpack(y: np.ndarray, nn: int) -> list[np.ndarray]:
    out = []
    step = 2 * nn * nn
    for i in range(4):
        chunk = y[i * step:(i + 1) * step]
        out.append((chunk[:nn * nn] + 1j * chunk[nn * nn:]).reshape(nn, nn))
    return out


def evolve_ode(spec: WeightSpec, n: int, s0: float, s1: float,
               init: LaxQuantities | OdeState | None = None,
               rtol: float = 1e-10, atol: float = 1e-12,
               keep_trajectory: bool = False) -> tuple[OdeState, list[OdeState] | None]:
    """Integrate the closed first-order system from s0 to s1.

    Initial data default to the quadrature/moment values at s0.  The system
    carries 1/s and 1/s**2 coefficients, so s0 must be positive.

    Raises
    ------
    StepFailureError
        If a_n becomes numerically singular along the path; ``last_s``
        reports the last abscissa where the right side was evaluated.
    """
    if not 0 < s0 <= s1:
        raise ValueError("need 0 < s0 <= s1")
    if init is None:
        init = compute_lax(build_family(spec.with_s(s0), n), n)
    nn = spec.dim
    al = spec.alpha
    bmat = spec.B
    eye = np.eye(nn, dtype=complex)
    y0 = _pack(init.a, init.b, init.Bn, init.Bhat)
    if s1 == s0:
        state = OdeState(n, s0, init.a, init.b, init.Bn, init.Bhat)
        return state, ([state] if keep_trajectory else None)

    last_good = [s0]

    def rhs(sv: float, y: np.ndarray) -> np.ndarray:
        a, b, bn, bhat = _unpack(y, nn)
        ai_b = solve(a, b)
        bn_star = adj(bn)
        da = (-sv * eye + b + ((2 * n + al + 1) * eye + bmat + a + ai_b) @ a
              + a @ bn_star) / sv
        dbv = (b @ ((2 * n + al + 1) * eye + bmat + ai_b)
               - sv * (2.0 * ai_b + n * eye + bmat - bhat)
               + ai_b @ b + comm(bmat, b) + a @ bn_star @ ai_b) / sv
        dbn = comm(adj(a), bn) / sv
        dbh = comm(ai_b + bmat, bhat) / sv
        last_good[0] = sv
        return _pack(da, dbv, dbn, dbh)

    try:
        sol = scipy.integrate.solve_ivp(rhs, (s0, s1), y0, method="DOP853",
                                        rtol=rtol, atol=atol,
                                        dense_output=keep_trajectory)
    except SingularMatrixError as exc:
        raise StepFailureError(
            f"a_n singular during evolution near s = {last_good[0]:.6g}",
            last_s=last_good[0]) from exc
    if not sol.success:
        raise StepFailureError(f"integrator failed: {sol.message}",
                               last_s=float(sol.t[-1]))
    a, b, bn, bhat = _unpack(sol.y[:, -1], nn)
    final = OdeState(n, s1, a, b, bn, bhat)
    trajectory = None
    if keep_trajectory:
        trajectory = []
        for sv in np.linspace(s0, s1, 65):
            av, bv, bnv, bhv = _unpack(sol.sol(sv), nn)
            trajectory.append(OdeState(n, float(sv), av, bv, bnv, bhv))
    return final, trajectory


# ---------------------------------------------------------------------------
# discrete bootstrap
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BootstrapStep:
    """One level of the normalized (gamma_0 = I) discrete recursion."""

    n: int
    a: np.ndarray
    b: np.ndarray
    Bn: np.ndarray
    Bhat: np.ndarray
    alpha_rec: np.ndarray
    beta_rec: np.ndarray | None


def bootstrap_discrete(spec: WeightSpec, n_max: int,
                       a0: np.ndarray | None = None, check: bool = True,
                       check_tol: float = 1e-2) -> list[BootstrapStep]:
    """Run the 4-step difference recursion from a_0 alone.

    Operates in the gamma_0 = I frame (the weight is rescaled internally);
    ``a0``, when supplied, must already live in that frame.  Each level
    computes b, Bhat, B_n, a in turn from the closed difference system,
    emitting the recursion coefficients on the way.

    Raises
    ------
    IterationDivergedError
        When ``check`` is set and a level drifts from the directly
        computed family values by more than ``check_tol`` (relative).
    """
    if spec.s <= 0:
        raise ValueError("bootstrap needs s > 0")
    nspec = weight.normalized_spec(spec)
    s = nspec.s
    al = nspec.alpha
    bmat = nspec.B
    nn = nspec.dim
    eye = np.eye(nn, dtype=complex)
    if a0 is None:
        a0 = s * weight.matrix_moment(nspec, -1) @ linalg.inv(
            weight.matrix_moment(nspec, 0))

    oracle = None
    if check:
        fam = build_family(nspec, n_max)
        oracle = lax_chain(fam, n_max)

    a = np.asarray(a0, dtype=complex)
    b = np.zeros((nn, nn), dtype=complex)
    bn = bmat.copy()
    bhat = bmat.copy()
    running = np.zeros((nn, nn), dtype=complex)  # sum of a_k + B_k* (+ comms)
    steps: list[BootstrapStep] = []
    for n in range(n_max + 1):
        alpha_rec = (2 * n + al + 1) * eye + a + bmat + adj(bn)
        beta_rec = None
        if n >= 1:
            beta_rec = n * ((n + al) * eye + bmat) + b + running
        steps.append(BootstrapStep(n, a, b, bn, bhat, alpha_rec, beta_rec))
        if oracle is not None:
            _bootstrap_check(steps[-1], oracle[n], check_tol)
        if n == n_max:
            break

        term = a + adj(bn)
        running = running + term + comm(bmat, term)

        b_next = solve(a, s * a - (2 * n + al + 1) * a @ a - a @ a @ a
                       - a @ (bmat + adj(bn)) @ a - b @ a)
        sb = s * eye - b_next
        bhat_next = solve_right(sb, sb @ solve(a, bhat @ a))
        beta_next = (n + 1) * ((n + 1 + al) * eye + bmat) + b_next + running
        bn_next = solve(adj(beta_next), bn @ adj(beta_next))
        a_next = solve_right(beta_next @ a, b_next @ b_next - s * b_next)
        a, b, bn, bhat = a_next, b_next, bn_next, bhat_next
    return steps


def _bootstrap_check(step: BootstrapStep, lq: LaxQuantities, tol: float) -> None:
    pairs = [("a", step.a, lq.a), ("b", step.b, lq.b),
             ("Bn", step.Bn, lq.Bn), ("Bhat", step.Bhat, lq.Bhat)]
    for name, got, expect in pairs:
        rel = linalg.rel_residual(linalg.frob(got - expect), expect)
        if rel > tol:
            raise IterationDivergedError(
                f"bootstrap {name} at n = {step.n} off by rel {rel:.3e}")


# ---------------------------------------------------------------------------
# initial data at s = 0
# ---------------------------------------------------------------------------

def initial_derivatives(spec: WeightSpec, n: int, method: str = "moments"
                        ) -> tuple[np.ndarray, np.ndarray | None]:
    """(da_n/ds, db_n/ds) at s = 0, where a_n(0) = b_n(0) = 0.

    method = "moments" uses the Gamma closed forms of the s = 0 moments;
    "quadrature" integrates the weighted 1/y bilinear forms directly;
    "overlap" evaluates the monic-Laguerre overlap double sum (scalar
    weights only).  The b derivative is undefined at n = 0.

    Raises
    ------
    DivergentMomentError
        When alpha <= 1 (the k = -1 moment contract at s = 0).
    """
    if spec.alpha <= 1.0:
        raise DivergentMomentError("initial derivatives need alpha > 1")
    spec0 = spec.with_s(0.0)
    if method == "overlap":
        return _initial_overlap(spec0, n)
    fam = build_family(spec0, n)
    if method == "moments":
        def bilinear(nl: int, nr: int) -> np.ndarray:
            acc = np.zeros((spec.dim, spec.dim), dtype=complex)
            for i in range(nl + 1):
                for j in range(nr + 1):
                    acc += (fam.coefficient(nl, i)
                            @ weight.matrix_moment(spec0, i + j - 1)
                            @ adj(fam.coefficient(nr, j)))
            return acc
    elif method == "quadrature":
        def bilinear(nl: int, nr: int) -> np.ndarray:
            def f(xs):
                pl = eval_poly_many(fam, nl, xs)
                pr = eval_poly_many(fam, nr, xs)
                w = weight.eval_weight_many(spec0, xs)
                return np.einsum("kab,kbc,kdc->kad", pl, w, pr.conj()) \
                    / xs[:, None, None]
            return quadrature.integrate_semiaxis(f)
    else:
        raise ValueError(f"unknown method {method!r}")

    adot = bilinear(n, n) @ fam.gamma[n]
    bdot = bilinear(n, n - 1) @ fam.gamma[n - 1] if n >= 1 else None
    return adot, bdot


def _initial_overlap(spec0: WeightSpec, n: int):
    from .specfun import laguerre_overlap

    _require_scalar(spec0)
    al = spec0.alpha
    adot = laguerre_overlap(n, n, al, al, al) / laguerre_overlap(n, n, al, al, al + 1.0)
    bdot = None
    if n >= 1:
        bdot = (laguerre_overlap(n, n - 1, al, al, al)
                / laguerre_overlap(n - 1, n - 1, al, al, al + 1.0))
    return np.array([[adot]], dtype=complex), (
        None if bdot is None else np.array([[bdot]], dtype=complex))

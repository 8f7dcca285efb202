"""Monic matrix-valued orthogonal polynomials from moments.

The degree-n coefficients solve one block row of the block-Hankel moment
system; norms and three-term recursion coefficients follow directly.  No
regularization is applied to singular Hankel blocks: numerical
nonexistence of the family at some s is meaningful and raised as
:class:`~mvoplax.errors.SingularMomentError`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import linalg, quadrature, weight
from .errors import SingularMatrixError, SingularMomentError
from .report import ResidualReport
from .weight import WeightSpec

#: Conditioning degrades geometrically with the Hankel size; this ceiling is
#: a design choice for double precision, not a constraint of the theory.
DEFAULT_N_MAX = 8


@dataclass(frozen=True)
class MVOPFamily:
    """Monic family data up to degree n_max at the spec's fixed s.

    ``coeffs[n]`` has shape (n, N, N) and stores a_{n,0..n-1}; the leading
    identity coefficient is implicit.  ``gamma[n]`` is Hermitian,
    ``gamma_inv[n]`` its inverse as assembled from moments,
    ``beta[n] = gamma_inv[n] @ gamma[n-1]`` for n >= 1 and
    ``alpha[n] = a_{n,n-1} - a_{n+1,n}`` for n < n_max (recurrence signs:
    x P_n = P_{n+1} + alpha_n P_n + beta_n P_{n-1}).
    """

    spec: WeightSpec
    n_max: int
    coeffs: tuple[np.ndarray, ...]
    gamma: tuple[np.ndarray, ...]
    gamma_inv: tuple[np.ndarray, ...]
    alpha: tuple[np.ndarray, ...]
    beta: tuple[np.ndarray | None, ...]

    def coefficient(self, n: int, j: int) -> np.ndarray:
        """a_{n,j} including the implicit leading identity (j = n)."""
        if j == n:
            return np.eye(self.spec.dim, dtype=complex)
        if j < 0 or j > n:
            return np.zeros((self.spec.dim, self.spec.dim), dtype=complex)
        return self.coeffs[n][j]

    def constant_term(self, n: int) -> np.ndarray:
        """P_n(s; 0)."""
        return self.coefficient(n, 0)


def build_family(spec: WeightSpec, n_max: int = DEFAULT_N_MAX) -> MVOPFamily:
    """Construct the monic family by solving block-Hankel systems.

    Raises
    ------
    SingularMomentError
        When a block-Hankel matrix is numerically singular, signalling
        nonexistence of the family at this s.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if spec.normalize_gamma0:
        return build_family(weight.normalized_spec(spec), n_max)
    nn = spec.dim
    moments = [weight.matrix_moment(spec, k) for k in range(2 * n_max + 1)]

    coeffs: list[np.ndarray] = [np.zeros((0, nn, nn), dtype=complex)]
    for n in range(1, n_max + 1):
        # Diagonal block equilibration removes the Gamma-scale spread of the
        # Hankel entries; a genuinely singular system stays singular.
        d = np.repeat([1.0 / np.sqrt(1.0 + linalg.frob(moments[2 * i]))
                       for i in range(n)], nn)
        h = np.zeros((n * nn, n * nn), dtype=complex)
        r = np.zeros((nn, n * nn), dtype=complex)
        for i in range(n):
            for j in range(n):
                h[i * nn:(i + 1) * nn, j * nn:(j + 1) * nn] = moments[i + j]
            r[:, i * nn:(i + 1) * nn] = moments[n + i]
        try:
            x_scaled = linalg.solve_right(d[:, None] * h * d[None, :], -r * d[None, :])
        except SingularMatrixError as exc:
            raise SingularMomentError(
                f"block-Hankel system singular at degree {n} (s = {spec.s})"
            ) from exc
        x = x_scaled * d[None, :]
        coeffs.append(np.stack([x[:, i * nn:(i + 1) * nn] for i in range(n)]))

    gamma_inv: list[np.ndarray] = []
    gamma: list[np.ndarray] = []
    for n in range(n_max + 1):
        g = moments[2 * n].copy()
        for i in range(n):
            g += coeffs[n][i] @ moments[i + n]
        gamma_inv.append(g)
        try:
            gamma.append(linalg.inv(g))
        except SingularMatrixError as exc:
            raise SingularMomentError(f"gamma_{n} numerically singular") from exc

    alpha: list[np.ndarray] = []
    beta: list[np.ndarray | None] = [None]
    for n in range(n_max):
        a_n_top = coeffs[n][n - 1] if n >= 1 else np.zeros((nn, nn), dtype=complex)
        alpha.append(a_n_top - coeffs[n + 1][n])
    for n in range(1, n_max + 1):
        beta.append(gamma_inv[n] @ gamma[n - 1])

    return MVOPFamily(spec, n_max, tuple(coeffs), tuple(gamma),
                      tuple(gamma_inv), tuple(alpha), tuple(beta))


def eval_poly(fam: MVOPFamily, n: int, x: complex) -> np.ndarray:
    """P_n(s; x) by Horner evaluation; x may be any complex scalar."""
    if not 0 <= n <= fam.n_max:
        raise ValueError(f"degree {n} outside built range 0..{fam.n_max}")
    nn = fam.spec.dim
    p = np.eye(nn, dtype=complex)
    for j in range(n - 1, -1, -1):
        p = p * x + fam.coeffs[n][j]
    return p


def eval_poly_many(fam: MVOPFamily, n: int, xs: np.ndarray) -> np.ndarray:
    """Vectorized P_n values, shape (len(xs), N, N)."""
    if not 0 <= n <= fam.n_max:
        raise ValueError(f"degree {n} outside built range 0..{fam.n_max}")
    nn = fam.spec.dim
    xs = np.asarray(xs, dtype=complex)
    p = np.broadcast_to(np.eye(nn, dtype=complex), (len(xs), nn, nn)).copy()
    for j in range(n - 1, -1, -1):
        p = p * xs[:, None, None] + fam.coeffs[n][j]
    return p


def gram_pair(fam: MVOPFamily, n: int, m: int, power: int = 0) -> np.ndarray:
    """Quadrature oracle for ``int P_n W P_m* x**power dx`` (independent of
    the moment route used to build the family)."""
    def integrand(xs):
        pn = eval_poly_many(fam, n, xs)
        pm = eval_poly_many(fam, m, xs)
        w = weight.eval_weight_many(fam.spec, xs)
        vals = np.einsum("kab,kbc,kdc->kad", pn, w, pm.conj())
        if power:
            vals = vals * xs[:, None, None] ** power
        return vals

    return quadrature.integrate_semiaxis(integrand)


def orthogonality_residual(fam: MVOPFamily, n_limit: int | None = None,
                           tol: float = 1e-8) -> ResidualReport:
    """Quadrature check of ``int P_n W P_m* = delta_nm gamma_n**-1``.

    Each (n, m) deviation is normalized by the geometric mean of the two
    diagonal norms so the verdict does not inflate with Gamma-scale growth.
    """
    n_top = fam.n_max if n_limit is None else min(n_limit, fam.n_max)
    report = ResidualReport(context={"kind": "orthogonality",
                                     "spec": fam.spec.digest, "s": fam.spec.s})
    scales = [1.0 + linalg.frob(fam.gamma_inv[n]) for n in range(n_top + 1)]
    for n in range(n_top + 1):
        for m in range(n + 1):
            val = gram_pair(fam, n, m)
            expect = fam.gamma_inv[n] if n == m else np.zeros_like(val)
            absr = linalg.frob(val - expect)
            scale = float(np.sqrt(scales[n] * scales[m]))
            report.record(f"orth[{n},{m}]", absr, absr / scale, tol,
                          n=n, s=fam.spec.s)
    return report


def family_to_json(fam: MVOPFamily) -> str:
    """JSON dump of coefficient tensors and recursion data."""
    enc = weight._encode_matrix
    doc = {
        "spec": json.loads(fam.spec.to_json()),
        "n_max": fam.n_max,
        "coeffs": [[enc(c) for c in fam.coeffs[n]] for n in range(fam.n_max + 1)],
        "gamma": [enc(g) for g in fam.gamma],
        "alpha": [enc(a) for a in fam.alpha],
        "beta": [None] + [enc(b) for b in fam.beta[1:]],
    }
    return json.dumps(doc, indent=2)

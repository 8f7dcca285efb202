"""The deformed matrix Laguerre weight and its moments.

``W(s; x) = x**alpha exp(-x - s/x) T(x) T*(x)`` on (0, inf), where
``T(x) = x**B`` for a constant matrix B.  When T T* is a matrix polynomial
(coefficients ``tt_poly``) every moment has a closed form through the
MacDonald function; otherwise moments fall back to quadrature.  Moments
are the single ingestion point for the weight: all downstream objects are
built from them, with quadrature reserved for oracle cross-checks.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg, quadrature, special_family
from .errors import DivergentMomentError
from .specfun import scalar_moment

_HERM_TOL = 1e-12
_PD_SAMPLES = (0.1, 0.5, 1.0, 4.0, 25.0)


@dataclass(frozen=True, eq=False)
class WeightSpec:
    """Immutable description of one weight W(s; x).

    Parameters
    ----------
    dim : int
        Matrix dimension N.
    alpha : float
        Laguerre exponent, > 0.
    s : float
        Deformation parameter, >= 0.
    B : ndarray
        Constant N x N matrix with T(x) = x**B; independent of s.
    tt_poly : tuple of ndarray, optional
        Hermitian coefficients C_k with T(x) T*(x) = sum_k C_k x**k.
        When absent, weight values use exp(B log x) directly.
    normalize_gamma0 : bool
        Request the two-sided rescaling that makes gamma_0 = I at this s.
    """

    dim: int
    alpha: float
    s: float
    B: np.ndarray
    tt_poly: tuple[np.ndarray, ...] | None = None
    normalize_gamma0: bool = False
    dg1_nu: tuple[complex, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not (self.alpha > 0.0):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.s < 0.0:
            raise ValueError(f"s must be >= 0, got {self.s}")
        b = linalg.as_cmatrix(self.B, "B")
        if b.shape[0] != self.dim:
            raise ValueError("B dimension does not match dim")
        b.setflags(write=False)
        object.__setattr__(self, "B", b)
        if self.tt_poly is not None:
            coeffs = []
            for k, c in enumerate(self.tt_poly):
                c = linalg.as_cmatrix(c, f"tt_poly[{k}]")
                if c.shape[0] != self.dim:
                    raise ValueError("tt_poly coefficient dimension mismatch")
                if linalg.hermitian_defect(c) > _HERM_TOL:
                    raise ValueError(f"tt_poly[{k}] is not Hermitian")
                c.setflags(write=False)
                coeffs.append(c)
            object.__setattr__(self, "tt_poly", tuple(coeffs))
            for x in _PD_SAMPLES:
                w = sum(c * x**k for k, c in enumerate(coeffs))
                if np.linalg.eigvalsh(w)[0] <= 0.0:
                    raise ValueError(f"T T* not positive definite at x = {x}")

    def with_s(self, s: float) -> "WeightSpec":
        """Same weight family at another deformation value."""
        return replace(self, s=float(s))

    @property
    def digest(self) -> str:
        """Stable content hash used as cache / report key."""
        h = hashlib.sha256()
        h.update(repr((self.dim, self.alpha, self.s, self.normalize_gamma0)).encode())
        h.update(np.ascontiguousarray(self.B).tobytes())
        if self.tt_poly is not None:
            for c in self.tt_poly:
                h.update(np.ascontiguousarray(c).tobytes())
        return h.hexdigest()[:16]

    def to_json(self) -> str:
        doc = {
            "N": self.dim,
            "alpha": self.alpha,
            "s": self.s,
            "B": _encode_matrix(self.B),
            "normalize_gamma0": self.normalize_gamma0,
        }
        if self.dg1_nu is not None:
            doc["dg1"] = {
                "N": self.dim,
                "alpha": self.alpha,
                "nu": [[z.real, z.imag] for z in self.dg1_nu],
            }
        elif self.tt_poly is not None:
            doc["tt_poly"] = [_encode_matrix(c) for c in self.tt_poly]
        return json.dumps(doc, indent=2)


def _encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _decode_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def from_json(text: str) -> WeightSpec:
    """Parse a weight spec document (complex entries as [re, im] pairs).

    A ``dg1`` block takes precedence over an explicit ``B`` matrix.
    """
    doc = json.loads(text)
    s = float(doc.get("s", 1.0))
    normalize = bool(doc.get("normalize_gamma0", False))
    if "dg1" in doc:
        block = doc["dg1"]
        nu = [complex(p[0], p[1]) if isinstance(p, list) else complex(p)
              for p in block["nu"]]
        fam = special_family.build_dg1(nu, float(block["alpha"]), block.get("N"))
        return dg1_weight_spec(fam, s, normalize_gamma0=normalize)
    dim = int(doc["N"])
    alpha = float(doc["alpha"])
    b = _decode_matrix(doc["B"]) if "B" in doc else np.zeros((dim, dim))
    tt = None
    if doc.get("tt_poly") is not None:
        tt = tuple(_decode_matrix(c) for c in doc["tt_poly"])
    return WeightSpec(dim, alpha, s, b, tt_poly=tt, normalize_gamma0=normalize)


def scalar_spec(alpha: float, s: float) -> WeightSpec:
    """N = 1 classical deformed Laguerre weight (B = 0)."""
    return WeightSpec(1, alpha, s, np.zeros((1, 1)), tt_poly=(np.eye(1),))


def dg1_weight_spec(fam, s: float, normalize_gamma0: bool = False) -> WeightSpec:
    """WeightSpec for a special-family (B, B_0) pair; T T* is polynomial."""
    return WeightSpec(
        fam.dim,
        fam.alpha,
        float(s),
        fam.B,
        tt_poly=special_family.dg1_tt_poly(fam),
        normalize_gamma0=normalize_gamma0,
        dg1_nu=fam.nu,
    )


def eval_weight(spec: WeightSpec, x: float) -> np.ndarray:
    """W(s; x) at a single x > 0; Hermitian positive definite."""
    if not (np.isfinite(x) and x > 0.0):
        raise ValueError(f"weight defined for x > 0, got {x}")
    return eval_weight_many(spec, np.array([float(x)]))[0]


def eval_weight_many(spec: WeightSpec, xs: np.ndarray) -> np.ndarray:
    """Vectorized weight values, shape (len(xs), N, N)."""
    xs = np.asarray(xs, dtype=float)
    scal = xs**spec.alpha * np.exp(-xs - np.divide(
        spec.s, xs, out=np.zeros_like(xs), where=xs > 0))
    if spec.tt_poly is not None:
        tt = np.zeros((len(xs), spec.dim, spec.dim), dtype=complex)
        for k, c in enumerate(spec.tt_poly):
            tt += xs[:, None, None] ** k * c
    else:
        tt = np.empty((len(xs), spec.dim, spec.dim), dtype=complex)
        for i, x in enumerate(xs):
            t = linalg.mat_power_log(spec.B, x)
            tt[i] = t @ t.conj().T
    return scal[:, None, None] * tt


_moment_cache: dict[tuple[str, int], np.ndarray] = {}
_moment_lock = threading.Lock()


def matrix_moment(spec: WeightSpec, k: int) -> np.ndarray:
    """``int_0^inf x**k W(s; x) dx`` for k >= -1; Hermitian.

    Closed form when ``tt_poly`` is present, quadrature otherwise.

    Raises
    ------
    DivergentMomentError
        For k = -1 with s = 0 and alpha <= 1 (no deformation to suppress
        the endpoint).
    """
    k = int(k)
    if k < -1:
        raise ValueError("moments defined for k >= -1")
    if k == -1 and spec.s == 0.0 and spec.alpha <= 1.0:
        raise DivergentMomentError(
            f"moment(-1) needs s > 0 or alpha > 1 (alpha = {spec.alpha})"
        )
    key = (spec.digest, k)
    with _moment_lock:
        cached = _moment_cache.get(key)
    if cached is not None:
        return cached
    if spec.tt_poly is not None:
        m = np.zeros((spec.dim, spec.dim), dtype=complex)
        for j, c in enumerate(spec.tt_poly):
            m += c * scalar_moment(spec.alpha + k + j + 1.0, spec.s)
    else:
        m = quadrature.integrate_semiaxis(
            lambda xs: xs[:, None, None] ** k * eval_weight_many(spec, xs))
    with _moment_lock:
        _moment_cache[key] = m
    return m


def normalization_transform(spec: WeightSpec) -> np.ndarray:
    """Hermitian E = moment(0)**-1/2, so that E W E* has gamma_0 = I."""
    return linalg.hermitian_inv_sqrt(matrix_moment(spec, 0))


def normalized_spec(spec: WeightSpec) -> WeightSpec:
    """Equivalent spec rescaled so gamma_0 = I at this spec's s.

    The rescaling E W E* maps T -> E T, hence B -> E B E**-1 and
    C_k -> E C_k E; it is only available on the polynomial path.  The
    transform depends on s, so differential identities should be checked
    on unnormalized specs.
    """
    if spec.tt_poly is None:
        raise ValueError("normalization requires a polynomial T T*")
    e = normalization_transform(spec)
    ei = linalg.inv(e)
    return WeightSpec(
        spec.dim,
        spec.alpha,
        spec.s,
        e @ spec.B @ ei,
        tt_poly=tuple(e @ c @ e for c in spec.tt_poly),
        normalize_gamma0=False,
    )

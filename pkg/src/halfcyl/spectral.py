"""Finite selfadjoint operator truncations and their Borel functional calculus.

Everything in this package ultimately runs through an :class:`EigenSystem`:
a dense Hermitian matrix reduced to its spectral data.  Functions of the
operator, spectral projectors, fractional-power norms and their duals,
semigroups, square-function integrals and Rellich-type embedding singular
values are all diagonal in the eigenbasis and computed as such.

Sign convention: the nonnegative spectral projector includes the kernel,
``chi_plus = chi_[0, inf)``, so ``sgn(0) = +1``.  Eigenvalues within
``ZERO_TOL`` of zero are snapped to exactly ``0.0`` at construction time so
that this routing is reproducible.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ZERO_TOL = 1e-12


class DomainError(ValueError):
    """Raised when a Borel function is undefined on the spectrum."""


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Spectral decomposition of a Hermitian matrix.

    Attributes
    ----------
    eigenvalues : ndarray
        Real eigenvalues, ascending.  Values with ``|lam| <= ZERO_TOL`` are
        stored as exactly ``0.0``.
    eigenvectors : ndarray
        Unitary matrix whose columns are the corresponding eigenvectors.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        U = np.asarray(self.eigenvectors)
        if lam.ndim != 1 or U.shape != (lam.size, lam.size):
            raise ValueError("eigenvalue/eigenvector shape mismatch")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be ascending")
        gram = U.conj().T @ U
        if np.max(np.abs(gram - np.eye(lam.size))) > 1e-10:
            raise ValueError("eigenvector matrix is not orthonormal to 1e-10")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", U)

    @classmethod
    def from_matrix(cls, mat) -> "EigenSystem":
        """Diagonalize a Hermitian matrix (dense solver)."""
        mat = np.asarray(mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("matrix must be square")
        if np.max(np.abs(mat - mat.conj().T)) > 1e-10 * max(1.0, np.abs(mat).max()):
            raise ValueError("matrix is not Hermitian")
        lam, U = np.linalg.eigh(mat)
        lam = _snap_zeros(lam)
        return cls(lam, U)

    @classmethod
    def from_eigenvalues(cls, values: Sequence[float]) -> "EigenSystem":
        """System with the given spectrum and permutation eigenbasis."""
        vals = np.asarray(values, dtype=float)
        order = np.argsort(vals, kind="stable")
        U = np.eye(vals.size)[:, order]
        return cls(_snap_zeros(vals[order]), U)

    @property
    def dimension(self) -> int:
        return self.eigenvalues.size

    @property
    def matrix(self) -> np.ndarray:
        """Reassembled operator ``U diag(lam) U*``."""
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T

    # spectral masks; chi_plus includes the (snapped) kernel
    @property
    def kernel_mask(self) -> np.ndarray:
        return self.eigenvalues == 0.0

    @property
    def plus_mask(self) -> np.ndarray:
        return self.eigenvalues >= 0.0

    @property
    def minus_mask(self) -> np.ndarray:
        return self.eigenvalues < 0.0

    def to_coefficients(self, v) -> np.ndarray:
        """Expand a vector (standard coordinates) in the eigenbasis."""
        return self.eigenvectors.conj().T @ np.asarray(v)

    def from_coefficients(self, c) -> np.ndarray:
        return self.eigenvectors @ np.asarray(c)

    def matrix_to_coefficients(self, m) -> np.ndarray:
        """Conjugate an operator into eigenbasis coordinates."""
        U = self.eigenvectors
        return U.conj().T @ np.asarray(m) @ U

    def shifted(self, r: float) -> "EigenSystem":
        """System of ``A - r I`` (same eigenvectors, shifted spectrum)."""
        return EigenSystem(_snap_zeros(self.eigenvalues - r), self.eigenvectors)


def _snap_zeros(lam: np.ndarray) -> np.ndarray:
    lam = np.array(lam, dtype=float)
    lam[np.abs(lam) <= ZERO_TOL] = 0.0
    return lam


def sgn(x: float) -> float:
    """Sign with the chi_plus convention: sgn(0) = +1."""
    return 1.0 if x >= 0.0 else -1.0


@dataclass(frozen=True, eq=False)
class BorelInterval:
    """Interval of the real line, each endpoint open or closed, +-inf allowed.

    Membership snaps spectrum points within ``ZERO_TOL`` of an endpoint onto
    the endpoint, consistent with the eigenvalue snapping in
    :class:`EigenSystem`.
    """

    lo: float = -math.inf
    hi: float = math.inf
    closed_lo: bool = True
    closed_hi: bool = True

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty interval: lo > hi")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        at_lo = np.abs(x - self.lo) <= ZERO_TOL if math.isfinite(self.lo) else np.zeros(x.shape, bool)
        at_hi = np.abs(x - self.hi) <= ZERO_TOL if math.isfinite(self.hi) else np.zeros(x.shape, bool)
        inside = (x > self.lo) & (x < self.hi) & ~at_lo & ~at_hi
        if self.closed_lo:
            inside |= at_lo
        if self.closed_hi:
            inside |= at_hi & (self.hi >= self.lo)
        return inside


NONNEGATIVE_AXIS = BorelInterval(0.0, math.inf)
NEGATIVE_AXIS = BorelInterval(-math.inf, 0.0, closed_hi=False)


@dataclass(frozen=True, eq=False)
class SpectralProjector:
    """``chi_I(T)`` for an interval ``I``: a selfadjoint idempotent."""

    interval: BorelInterval
    matrix: np.ndarray
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        P = np.asarray(self.matrix)
        if np.max(np.abs(P @ P - P)) > 1e-12 * max(1.0, np.abs(P).max()):
            raise ValueError("projector is not idempotent to 1e-12")
        if np.max(np.abs(P - P.conj().T)) > 1e-12:
            raise ValueError("projector is not selfadjoint to 1e-12")

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.mask))


def borel_apply(sys: EigenSystem, f: Callable[[float], float], v) -> np.ndarray:
    """Apply ``f(T)`` to a vector, ``U diag(f(lam)) U* v``.

    ``f`` is evaluated at every eigenvalue; a NaN or an exception there is a
    :class:`DomainError`.  Linear in ``v`` and commutes with any other Borel
    function of the same system.
    """
    v = np.asarray(v)
    if v.shape[0] != sys.dimension:
        raise ValueError(f"vector length {v.shape[0]} != dimension {sys.dimension}")
    try:
        fvals = np.array([f(lam) for lam in sys.eigenvalues], dtype=complex)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise DomainError(f"function undefined on the spectrum: {exc}") from exc
    if np.any(np.isnan(fvals)):
        bad = sys.eigenvalues[np.isnan(fvals)]
        raise DomainError(f"function is NaN at eigenvalues {bad}")
    U = sys.eigenvectors
    out = U @ (fvals * (U.conj().T @ v).T).T
    if np.isrealobj(v) and np.max(np.abs(out.imag)) == 0.0:
        return out.real
    return out


def borel_matrix(sys: EigenSystem, f: Callable[[float], float]) -> np.ndarray:
    """Dense matrix of ``f(T)``."""
    return borel_apply(sys, f, np.eye(sys.dimension))


def spectral_projector(sys: EigenSystem, interval: BorelInterval) -> SpectralProjector:
    """Projector onto the span of eigenvectors with eigenvalue in the interval."""
    mask = interval.contains(sys.eigenvalues)
    U = sys.eigenvectors
    P = (U * mask.astype(float)) @ U.conj().T
    P = 0.5 * (P + P.conj().T)
    return SpectralProjector(interval, P, mask)


def chi_plus(sys: EigenSystem) -> SpectralProjector:
    return spectral_projector(sys, NONNEGATIVE_AXIS)


def chi_minus(sys: EigenSystem) -> SpectralProjector:
    return spectral_projector(sys, NEGATIVE_AXIS)


# ---------------------------------------------------------------------------
# fractional-power norms on eigencoefficients

DEFAULT_EPSILON = 1.0


def frac_weights(sys: EigenSystem, alpha: float, epsilon: float) -> np.ndarray:
    """Diagonal weights ``(|lam| + eps)^alpha`` of ``|T|_eps^alpha``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return (np.abs(sys.eigenvalues) + epsilon) ** alpha


def frac_norm(sys: EigenSystem, alpha: float, epsilon: float, coeffs) -> float:
    """Graph-scale norm ``|| (|T| + eps)^alpha v ||`` of a coefficient vector.

    Equivalent to ``sqrt(|| |T|^alpha v ||^2 + ||v||^2)`` with two-sided
    constants depending only on ``alpha``, ``epsilon`` and the spectral
    radius.  Negative ``alpha`` is rejected; use :func:`dual_norm`.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0; use dual_norm for the dual scale")
    c = np.asarray(coeffs)
    _check_len(sys, c)
    return float(np.linalg.norm(frac_weights(sys, alpha, epsilon) * c))


def dual_norm(sys: EigenSystem, alpha: float, epsilon: float, coeffs) -> float:
    """Dual-scale norm ``|| (|T| + eps)^{-alpha} v ||``.

    Realizes the norm of ``dom(|T|^alpha)*``; duality
    ``|<u, v>| <= frac_norm(u) * dual_norm(v)`` holds with equality along
    each eigendirection.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    c = np.asarray(coeffs)
    _check_len(sys, c)
    return float(np.linalg.norm(frac_weights(sys, -alpha, epsilon) * c))


def _check_len(sys: EigenSystem, c: np.ndarray) -> None:
    if c.shape[0] != sys.dimension:
        raise ValueError(f"coefficient length {c.shape[0]} != dimension {sys.dimension}")


@dataclass(frozen=True, eq=False)
class GradedVector:
    """Coefficient vector tagged with the scale its norm lives on.

    ``scale`` is one of ``("frac", alpha)``, ``("dual", alpha)``, ``"czech"``
    or ``"hat"``.
    """

    base: EigenSystem
    coefficients: np.ndarray
    scale: object = ("frac", 0.0)
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        _check_len(self.base, c)
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "coefficients", c)
        if not np.isfinite(self.norm()):
            raise ValueError("non-finite norm")

    def norm(self) -> float:
        from . import czech  # local import; czech builds on this module

        if self.scale == "czech":
            return czech.czech_norm(self.base, self.coefficients, self.epsilon)
        if self.scale == "hat":
            return czech.hat_norm(self.base, self.coefficients, self.epsilon)
        kind, alpha = self.scale
        if kind == "frac":
            return frac_norm(self.base, alpha, self.epsilon, self.coefficients)
        if kind == "dual":
            return dual_norm(self.base, alpha, self.epsilon, self.coefficients)
        raise ValueError(f"unknown scale {self.scale!r}")


# ---------------------------------------------------------------------------
# semigroup and square-function estimate


def semigroup(sys: EigenSystem, t: float, epsilon: float, v) -> np.ndarray:
    """Apply ``exp(-t (|T| + eps))`` to a vector in standard coordinates.

    Contraction for t >= 0 with ``||result|| <= exp(-t eps) ||v||`` and the
    semigroup law in t.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return borel_apply(sys, lambda lam: math.exp(-t * (abs(lam) + epsilon)), v)


@dataclass(frozen=True, eq=False)
class LogGridSpec:
    """Log-spaced quadrature grid for ``dt/t`` integrals.

    Bounds default to ``[1e-6 / max|lam|, 1e3 / min nonzero |lam|]``; the
    integrand of the square function is smooth in ``log t`` so composite
    trapezoid there converges fast.
    """

    n_nodes: int = 400
    t_min: float | None = None
    t_max: float | None = None

    def nodes(self, sys: EigenSystem) -> np.ndarray:
        nz = np.abs(sys.eigenvalues[sys.eigenvalues != 0.0])
        if nz.size == 0:
            # pure-kernel operator; any grid integrates the zero function
            lo, hi = 1e-6, 1e3
        else:
            lo = self.t_min if self.t_min is not None else 1e-6 / nz.max()
            hi = self.t_max if self.t_max is not None else 1e3 / nz.min()
        return np.exp(np.linspace(math.log(lo), math.log(hi), self.n_nodes))


def quadratic_estimate(
    sys: EigenSystem,
    psi: Callable[[np.ndarray], np.ndarray],
    v,
    quadrature: LogGridSpec = LogGridSpec(),
) -> float:
    """Square-function integral ``int_0^inf || psi(t |T|) v ||^2 dt/t``.

    ``psi`` must decay like ``min(x^a, x^-a)`` on ``(0, inf)``.  Kernel
    components of ``v`` are excluded (with a warning when present), matching
    the restriction to the closure of ``ran(|T|)``.  For ``psi(z) = z e^-z``
    the exact value is ``0.25 * ||v_perp||^2`` independent of the spectrum.
    """
    v = np.asarray(v)
    _check_len(sys, v)
    c = sys.to_coefficients(v)
    ker = sys.kernel_mask
    if np.any(ker) and np.linalg.norm(c[ker]) > 1e-14 * max(1.0, np.linalg.norm(c)):
        warnings.warn("kernel component excluded from quadratic estimate", stacklevel=2)
    c = np.where(ker, 0.0, c)
    if not np.any(np.abs(c) > 0):
        return 0.0
    t = quadrature.nodes(sys)
    z = t[:, None] * np.abs(sys.eigenvalues)[None, :]
    integrand = (np.abs(psi(z)) ** 2) @ (np.abs(c) ** 2)
    return float(np.trapezoid(integrand, np.log(t)))


def psi_ze(z: np.ndarray) -> np.ndarray:
    """The standard square-function symbol ``z e^{-z}``."""
    return z * np.exp(-z)


# ---------------------------------------------------------------------------
# Rellich embedding singular values


def rellich_singular_values(sys: EigenSystem, s: float, t: float) -> np.ndarray:
    """Singular values of ``dom((1+T^2)^s) -> dom((1+T^2)^t)``, descending.

    For the truncation these are exactly ``(1 + lam^2)^(t - s)``; their decay
    as the truncation grows is the finite shadow of compactness.
    """
    if not s > t or t < 0:
        raise ValueError("require s > t >= 0")
    vals = (1.0 + sys.eigenvalues**2) ** (t - s)
    return np.sort(vals)[::-1]


def rellich_dense_oracle(sys: EigenSystem, s: float, t: float) -> np.ndarray:
    """Same singular values via a dense SVD of the weighted identity map."""
    if not s > t or t < 0:
        raise ValueError("require s > t >= 0")
    w_s = (1.0 + sys.eigenvalues**2) ** s
    w_t = (1.0 + sys.eigenvalues**2) ** t
    U = sys.eigenvectors
    Ws = (U * w_s) @ U.conj().T
    Wt = (U * w_t) @ U.conj().T
    J = Wt @ np.linalg.inv(Ws)
    return np.linalg.svd(J, compute_uv=False)


# ---------------------------------------------------------------------------
# involutions


@dataclass(frozen=True, eq=False)
class InvolutionReport:
    involution_defect: float          # ||Xi^2 - I||
    anticommutator_norm: float        # ||Xi T + T Xi||
    p_plus_defect: float              # ||P+^2 - P+||
    p_minus_defect: float
    p_plus_rank: int
    p_minus_rank: int
    projector_norms: dict             # alpha -> (P+, P-, P+*, P-*) operator norms
    is_involution: bool
    anticommutes: bool
    epsilon: float = DEFAULT_EPSILON  # shift behind the fractional scales


def involution_report(
    sys: EigenSystem, Xi, epsilon: float = DEFAULT_EPSILON, alphas=(0.0, 0.5, 1.0)
) -> InvolutionReport:
    """Diagnostics for an involution interacting with the operator.

    Reports ``Xi^2 = I`` and anticommutation margins, idempotence of
    ``P_pm = (I +- Xi)/2``, and the operator norms of ``P_pm`` and their
    adjoints on the fractional scales (finite in truncation; bounded
    uniformly exactly when the anticommutation relation holds).
    """
    Xi = np.asarray(Xi)
    n = sys.dimension
    if Xi.shape != (n, n):
        raise ValueError("Xi must be square of matching dimension")
    T = sys.matrix
    inv_defect = float(np.linalg.norm(Xi @ Xi - np.eye(n), 2))
    anti = float(np.linalg.norm(Xi @ T + T @ Xi, 2))
    Pp, Pm = 0.5 * (np.eye(n) + Xi), 0.5 * (np.eye(n) - Xi)
    Xi_c = sys.matrix_to_coefficients(Xi)
    Pp_c, Pm_c = 0.5 * (np.eye(n) + Xi_c), 0.5 * (np.eye(n) - Xi_c)
    norms = {}
    for a in alphas:
        w = frac_weights(sys, a, epsilon)
        norms[a] = tuple(
            float(np.linalg.norm((w[:, None] * P) / w[None, :], 2))
            for P in (Pp_c, Pm_c, Pp_c.conj().T, Pm_c.conj().T)
        )
    return InvolutionReport(
        involution_defect=inv_defect,
        anticommutator_norm=anti,
        p_plus_defect=float(np.linalg.norm(Pp @ Pp - Pp, 2)),
        p_minus_defect=float(np.linalg.norm(Pm @ Pm - Pm, 2)),
        p_plus_rank=int(round(np.real(np.trace(Pp)))),
        p_minus_rank=int(round(np.real(np.trace(Pm)))),
        projector_norms=norms,
        is_involution=inv_defect <= 1e-10,
        anticommutes=anti <= 1e-10 * max(1.0, float(np.linalg.norm(T, 2))),
        epsilon=epsilon,
    )


# ---------------------------------------------------------------------------
# smoothing of bounded spectral windows


@dataclass(frozen=True, eq=False)
class SmoothingReport:
    constants: dict        # k -> sharp constant over spectrum ∩ S
    observed: dict         # k -> max sampled ratio
    max_ratio: float       # worst observed/predicted; <= 1 + 1e-8 when clean
    empty_window: bool
    epsilon: float = DEFAULT_EPSILON


def bounded_set_smoothing_check(
    sys: EigenSystem,
    S: BorelInterval,
    alpha: float,
    epsilon: float,
    k_max: int,
    n_samples: int = 50,
    rng: np.random.Generator | None = None,
) -> SmoothingReport:
    """Check ``||T^2k chi_S(T) v|| <= C_k,S dual_norm(alpha, v)``.

    The constant is the sharp one over the spectrum inside ``S``:
    ``max |lam|^2k (|lam| + eps)^alpha``.  Sampled ratios never exceed it
    (up to 1e-8 slack); the extremal eigendirection attains it.
    """
    if not S.bounded:
        raise ValueError("S must be a bounded interval")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    rng = rng or np.random.default_rng(0)
    lam = sys.eigenvalues
    inside = S.contains(lam)
    constants, observed = {}, {}
    worst = 0.0
    for k in range(1, k_max + 1):
        if not np.any(inside):
            constants[k] = 0.0
            observed[k] = 0.0
            continue
        C = float(np.max(np.abs(lam[inside]) ** (2 * k) * (np.abs(lam[inside]) + epsilon) ** alpha))
        constants[k] = C
        num_w = np.where(inside, np.abs(lam) ** (2 * k), 0.0)
        best = 0.0
        samples = [rng.standard_normal(sys.dimension) + 1j * rng.standard_normal(sys.dimension)
                   for _ in range(n_samples)]
        # include the extremal eigendirection so the bound is attained
        j_star = int(np.argmax(np.where(inside, np.abs(lam) ** (2 * k) * (np.abs(lam) + epsilon) ** alpha, -1.0)))
        samples.append(np.eye(sys.dimension)[j_star])
        for c in samples:
            denom = dual_norm(sys, alpha, epsilon, c)
            if denom == 0.0:
                continue
            best = max(best, float(np.linalg.norm(num_w * c)) / denom)
        observed[k] = best
        if C > 0:
            worst = max(worst, best / C)
    return SmoothingReport(constants, observed, worst,
                           empty_window=not bool(np.any(inside)), epsilon=epsilon)

"""Model half-cylinder: extension operator, first-order operator, identities.

Sections live on a uniform time grid as rows of boundary eigencoefficients.
Time derivatives are second-order centered differences (one-sided at the
ends) and time integrals are trapezoid sums, so every residual here is
expected to vanish at second order in the step; the tests pin that order on
closed-form solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .spectral import DEFAULT_EPSILON, EigenSystem
from .czech import czech_norm


@dataclass(frozen=True, eq=False)
class CylinderGrid:
    """Uniform time grid ``[0, T]`` over a boundary operator."""

    T: float
    nt: int
    base: EigenSystem

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.nt < 8:
            raise ValueError("nt must be at least 8")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt)

    @property
    def h(self) -> float:
        return self.T / (self.nt - 1)

    def diff_matrix(self) -> np.ndarray:
        """Centered first derivative, one-sided second order at the ends."""
        nt, h = self.nt, self.h
        L = np.zeros((nt, nt))
        for i in range(1, nt - 1):
            L[i, i - 1] = -0.5 / h
            L[i, i + 1] = 0.5 / h
        L[0, 0:3] = np.array([-1.5, 2.0, -0.5]) / h
        L[-1, -3:] = np.array([0.5, -2.0, 1.5]) / h
        return L

    def weights(self) -> np.ndarray:
        w = np.full(self.nt, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


def smoothstep(x: np.ndarray) -> np.ndarray:
    """Quintic smoothstep, 0 to 1 on [0, 1] with two flat derivatives."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (6.0 * x**2 - 15.0 * x + 10.0)


@dataclass(frozen=True, eq=False)
class CutoffProfile:
    """Cutoff in time: 1 on ``[0, rho/2]``, 0 from ``3 rho/4`` on."""

    rho: float
    values: np.ndarray
    grid: CylinderGrid

    @classmethod
    def build(cls, grid: CylinderGrid, rho: float) -> "CutoffProfile":
        if not 0 < rho <= grid.T:
            raise ValueError("rho must lie in (0, T]")
        t = grid.times
        vals = 1.0 - smoothstep((t - rho / 2.0) / (rho / 4.0))
        pad = 1e-12 * grid.T  # masks tolerate float rounding of rho fractions
        vals[t <= rho / 2.0 + pad] = 1.0
        vals[t >= 3.0 * rho / 4.0 - pad] = 0.0
        return cls(rho, vals, grid)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.nt,):
            raise ValueError("profile length mismatch")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("profile values must lie in [0, 1]")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class CylinderSection:
    """Time samples of boundary eigencoefficients, one row per node."""

    values: np.ndarray
    grid: CylinderGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.nt, self.grid.base.dimension):
            raise ValueError("section shape must be (nt, dimension)")
        if not np.all(np.isfinite(v)):
            raise ValueError("section has non-finite entries")
        object.__setattr__(self, "values", v)

    def l2_norm(self) -> float:
        w = self.grid.weights()
        return float(np.sqrt(np.sum(w * np.sum(np.abs(self.values) ** 2, axis=1))))

    def trace(self) -> np.ndarray:
        """Boundary trace: the coefficient row at t = 0."""
        return self.values[0].copy()

    def vanishes_at_far_end(self, n_rows: int = 2, tol: float = 1e-13) -> bool:
        scale = max(1.0, float(np.abs(self.values).max()))
        return bool(np.abs(self.values[-n_rows:]).max() <= tol * scale)


def l2_inner(u: CylinderSection, v: CylinderSection) -> complex:
    w = u.grid.weights()
    return complex(np.sum(w * np.sum(np.conj(u.values) * v.values, axis=1)))


@dataclass(frozen=True, eq=False)
class CylinderOperator:
    """Data of ``D = sigma_t (d/dt + A + R_t)`` on the grid.

    ``sigma0``, the family ``sigma_t`` and the remainder family ``R_t`` are
    given in standard coordinates (or None for identity/zero) and stored in
    eigencoefficient coordinates.  The uniform bound on ``sigma_t`` and its
    inverse is recorded.
    """

    grid: CylinderGrid
    sigma0: Optional[np.ndarray] = None
    sigma_t: Optional[object] = None      # callable t -> matrix, or (nt, n, n)
    R_t: Optional[object] = None
    sigma0_c: np.ndarray = field(init=False, repr=False)
    sigma_t_c: Optional[np.ndarray] = field(init=False, repr=False)
    R_t_c: Optional[np.ndarray] = field(init=False, repr=False)
    sigma_bound: float = field(init=False)

    def __post_init__(self):
        n = self.grid.base.dimension
        s0 = np.eye(n, dtype=complex) if self.sigma0 is None else np.asarray(self.sigma0, complex)
        if s0.shape != (n, n):
            raise ValueError("sigma0 shape mismatch")
        object.__setattr__(self, "sigma0_c", self.grid.base.matrix_to_coefficients(s0))
        object.__setattr__(self, "sigma_t_c", self._family(self.sigma_t))
        object.__setattr__(self, "R_t_c", self._family(self.R_t))
        bound = float(max(np.linalg.norm(self.sigma0_c, 2),
                          np.linalg.norm(np.linalg.inv(self.sigma0_c), 2)))
        if self.sigma_t_c is not None:
            for m in self.sigma_t_c:
                bound = max(bound, float(np.linalg.norm(m, 2)),
                            float(np.linalg.norm(np.linalg.inv(m), 2)))
        object.__setattr__(self, "sigma_bound", bound)

    def _family(self, fam) -> Optional[np.ndarray]:
        if fam is None:
            return None
        n = self.grid.base.dimension
        if callable(fam):
            mats = np.stack([np.asarray(fam(t), dtype=complex) for t in self.grid.times])
        else:
            mats = np.asarray(fam, dtype=complex)
        if mats.shape != (self.grid.nt, n, n):
            raise ValueError("time family must have shape (nt, n, n)")
        return np.stack([self.grid.base.matrix_to_coefficients(m) for m in mats])

    @property
    def base(self) -> EigenSystem:
        return self.grid.base


def extension(
    op: CylinderOperator,
    eta: CutoffProfile,
    epsilon: float,
    u0,
) -> CylinderSection:
    """Extension ``(E_rho u0)(t) = eta(t) exp(-t |A|_eps) u0``.

    The trace at t = 0 equals ``u0`` exactly because the profile starts on
    its plateau.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if eta.grid is not op.grid and (eta.grid.nt != op.grid.nt or eta.grid.T != op.grid.T):
        raise ValueError("profile grid mismatch")
    u0 = np.asarray(u0, dtype=complex)
    lam_eps = np.abs(op.base.eigenvalues) + epsilon
    t = op.grid.times
    vals = eta.values[:, None] * np.exp(-np.outer(t, lam_eps)) * u0[None, :]
    return CylinderSection(vals, op.grid)


def apply_model(op: CylinderOperator, u: CylinderSection) -> CylinderSection:
    """Model operator ``sigma0 (d/dt + A) u``."""
    L = op.grid.diff_matrix()
    core = L @ u.values + u.values * op.base.eigenvalues[None, :]
    return CylinderSection(core @ op.sigma0_c.T, op.grid)


def apply_full(op: CylinderOperator, u: CylinderSection) -> CylinderSection:
    """Full operator ``sigma_t (d/dt + A + R_t) u`` per time sample."""
    L = op.grid.diff_matrix()
    core = L @ u.values + u.values * op.base.eigenvalues[None, :]
    if op.R_t_c is not None:
        core = core + np.einsum("tij,tj->ti", op.R_t_c, u.values)
    if op.sigma_t_c is not None:
        out = np.einsum("tij,tj->ti", op.sigma_t_c, core)
    else:
        out = core @ op.sigma0_c.T
    return CylinderSection(out, op.grid)


def apply_adjoint(op: CylinderOperator, v: CylinderSection) -> CylinderSection:
    """Formal adjoint ``D! v = -d/dt(sigma_t* v) + A sigma_t* v + R_t* sigma_t* v``."""
    L = op.grid.diff_matrix()
    if op.sigma_t_c is not None:
        w = np.einsum("tij,tj->ti", np.conj(np.transpose(op.sigma_t_c, (0, 2, 1))), v.values)
    else:
        w = v.values @ np.conj(op.sigma0_c)
    out = -(L @ w) + w * op.base.eigenvalues[None, :]
    if op.R_t_c is not None:
        out = out + np.einsum("tij,tj->ti", np.conj(np.transpose(op.R_t_c, (0, 2, 1))), w)
    return CylinderSection(out, op.grid)


def greens_residual(op: CylinderOperator, u: CylinderSection, v: CylinderSection) -> float:
    """Defect of the integration-by-parts identity with one boundary term.

    Both sections must vanish on the last two samples so the far end
    contributes nothing; the residual ``|<Du, v> - <u, D! v> + <s0 u(0), v(0)>|``
    is then pure discretization error, second order in the step.
    """
    for name, s in (("u", u), ("v", v)):
        if not s.vanishes_at_far_end():
            raise ValueError(f"{name} must vanish on the last two time samples")
    lhs = l2_inner(apply_full(op, u), v)
    rhs = l2_inner(u, apply_adjoint(op, v))
    boundary = complex(np.vdot(op.sigma0_c @ u.values[0], v.values[0]))
    return float(abs(lhs - rhs + boundary))


def energy_identity_residual(op: CylinderOperator, u: CylinderSection) -> float:
    """Defect of the model energy identity.

    ``||(d/dt + A) u||^2 = ||u'||^2 + ||A u||^2 - <A u(0), u(0)>`` for
    sections vanishing at the far end; the residual converges at second
    order.  The identity is independent of the symbol.
    """
    if not u.vanishes_at_far_end(n_rows=1):
        raise ValueError("u must vanish at t = T")
    L = op.grid.diff_matrix()
    lam = op.base.eigenvalues
    du = L @ u.values
    au = u.values * lam[None, :]
    w = op.grid.weights()

    def sq(mat):
        return float(np.sum(w * np.sum(np.abs(mat) ** 2, axis=1)))

    boundary = float(np.real(np.vdot(u.values[0], lam * u.values[0])))
    return abs(sq(du + au) - sq(du) - sq(au) + boundary)


def graph_norm(op: CylinderOperator, u: CylinderSection) -> float:
    return float(np.hypot(u.l2_norm(), apply_full(op, u).l2_norm()))


def trace_constant(
    op: CylinderOperator,
    samples: Sequence[CylinderSection],
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Largest sampled ratio of the check norm of the trace to the graph norm."""
    best = 0.0
    for u in samples:
        g = graph_norm(op, u)
        if g == 0.0:
            continue
        best = max(best, czech_norm(op.base, u.trace(), epsilon) / g)
    return best


def extension_constant(
    op: CylinderOperator,
    eta: CutoffProfile,
    epsilon: float,
    boundary_data: Sequence[np.ndarray],
) -> float:
    """Largest sampled ratio of the graph norm of the extension to the check norm."""
    best = 0.0
    for u0 in boundary_data:
        c = czech_norm(op.base, u0, epsilon)
        if c == 0.0:
            continue
        best = max(best, graph_norm(op, extension(op, eta, epsilon, u0)) / c)
    return best


def per_mode_trace_oracle(grid: CylinderGrid, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Per-eigenmode optimum of the trace-to-graph ratio, solved densely.

    For a single mode the ratio ``w |phi(0)| / ||phi||_{graph}`` is a
    Rayleigh quotient; its square equals ``w^2 e0* G^{-1} e0`` for the
    discrete graph Gram matrix ``G`` restricted to profiles vanishing at the
    far end.  Used as an independent oracle for :func:`trace_constant`.
    """
    t, nt = grid.times, grid.nt
    L = grid.diff_matrix()
    w_quad = grid.weights()
    from .czech import czech_weights

    wts = czech_weights(grid.base, epsilon)
    out = np.zeros(grid.base.dimension)
    keep = slice(0, nt - 1)  # enforce phi(T) = 0
    for j, lam in enumerate(grid.base.eigenvalues):
        Dmode = L + lam * np.eye(nt)
        G = (Dmode.conj().T * w_quad) @ Dmode + np.diag(w_quad)
        Gk = G[keep, keep]
        e0 = np.zeros(nt - 1)
        e0[0] = 1.0
        val = np.real(e0 @ np.linalg.solve(Gk, e0))
        out[j] = wts[j] * np.sqrt(max(val, 0.0))
    return out


def per_mode_trace_optimizer(grid: CylinderGrid, mode: int,
                             epsilon: float = DEFAULT_EPSILON) -> CylinderSection:
    """Section attaining the per-mode trace optimum (far-end value zero)."""
    t, nt = grid.times, grid.nt
    L = grid.diff_matrix()
    w_quad = grid.weights()
    lam = grid.base.eigenvalues[mode]
    Dmode = L + lam * np.eye(nt)
    G = (Dmode.conj().T * w_quad) @ Dmode + np.diag(w_quad)
    e0 = np.zeros(nt - 1)
    e0[0] = 1.0
    phi = np.zeros(nt, dtype=complex)
    phi[: nt - 1] = np.linalg.solve(G[: nt - 1, : nt - 1], e0)
    vals = np.zeros((nt, grid.base.dimension), dtype=complex)
    vals[:, mode] = phi
    return CylinderSection(vals, grid)


def measure_remainder_constant(op: CylinderOperator, n_probe: int = 32,
                               rng: np.random.Generator | None = None) -> float:
    """Best constant in ``||R_t u|| <= C (t ||A u|| + ||u||)`` over probes.

    Probes include every eigendirection, where the ratio for diagonal
    remainder families is sharp, plus random vectors.
    """
    if op.R_t_c is None:
        return 0.0
    rng = rng or np.random.default_rng(0)
    n = op.base.dimension
    lam = op.base.eigenvalues
    t = op.grid.times
    probes = [np.eye(n)[:, j].astype(complex) for j in range(n)]
    probes += [rng.standard_normal(n) + 1j * rng.standard_normal(n) for _ in range(n_probe)]
    best = 0.0
    for c in probes:
        for i in range(op.grid.nt):
            num = np.linalg.norm(op.R_t_c[i] @ c)
            den = t[i] * np.linalg.norm(lam * c) + np.linalg.norm(c)
            best = max(best, num / den)
    return best


@dataclass(frozen=True, eq=False)
class NearBoundaryReport:
    constant: float
    T_d: float
    remainder_constant: float
    shrank: bool            # True when the admissible window is below T
    epsilon: float = DEFAULT_EPSILON


def near_boundary_apriori(
    op: CylinderOperator,
    B,
    samples: Sequence[CylinderSection],
    epsilon: float = DEFAULT_EPSILON,
) -> NearBoundaryReport:
    """A-priori control of ``||u|| + ||u'|| + ||A u||`` by the graph norm.

    Samples must be supported in ``[0, T_d]`` (zero beyond) with traces in
    ``B``; a trace outside ``B`` is an input error.  ``T_d`` is derived from
    the measured remainder constant by the absorption threshold
    ``T_d < min(T, 1 / sqrt(2 C_2))`` with ``C_2 = 4 C^2``.
    """
    C = max(measure_remainder_constant(op), op.sigma_bound, 1.0)
    C2 = 4.0 * C * C
    T_d = min(op.grid.T, 1.0 / np.sqrt(2.0 * C2)) if C2 > 0 else op.grid.T
    t = op.grid.times
    L = op.grid.diff_matrix()
    lam = op.base.eigenvalues
    w = op.grid.weights()
    best = 0.0
    for u in samples:
        if not B.contains(u.trace()):
            raise ValueError("sample trace is not in the boundary condition")
        beyond = t > T_d + 1e-12
        if np.any(np.abs(u.values[beyond]) > 1e-12 * max(1.0, np.abs(u.values).max())):
            raise ValueError(f"sample not supported in [0, T_d] with T_d={T_d:.4g}")
        du = L @ u.values
        au = u.values * lam[None, :]
        num = (u.l2_norm()
               + np.sqrt(float(np.sum(w * np.sum(np.abs(du) ** 2, axis=1))))
               + np.sqrt(float(np.sum(w * np.sum(np.abs(au) ** 2, axis=1)))))
        den = graph_norm(op, u)
        if den > 0:
            best = max(best, num / den)
    return NearBoundaryReport(best, float(T_d), float(C), bool(T_d < op.grid.T),
                              epsilon=epsilon)


def _forward_diff(nt: int, r: float) -> np.ndarray:
    """Forward-difference derivative (nt - 1) x nt on a uniform grid.

    Its normal matrix is the standard Neumann second-difference operator,
    free of the checkerboard modes a centered stencil would introduce into
    the quadratic form.
    """
    h = r / (nt - 1)
    D = np.zeros((nt - 1, nt))
    for i in range(nt - 1):
        D[i, i] = -1.0 / h
        D[i, i + 1] = 1.0 / h
    return D


def h1_embedding_svals(grid: CylinderGrid, r: float) -> np.ndarray:
    """Singular values of ``H^1_r(A, d/dt) -> L^2`` from the tensor spectrum.

    The graph Gram of ``(d/dt, A)`` on ``[0, r]`` separates into the
    spectrum of the discrete ``(d/dt)^T (d/dt)`` (Neumann: one zero mode,
    then ``(i pi / r)^2`` up to grid dispersion) plus ``lam^2``; the
    singular values are ``1 / sqrt(1 + theta_i^2 + lam_j^2)`` descending.
    """
    if not 0 < r <= grid.T:
        raise ValueError("require 0 < r <= T")
    D = _forward_diff(grid.nt, r)
    theta2 = np.clip(np.linalg.eigvalsh(D.T @ D), 0.0, None)
    lam2 = grid.base.eigenvalues**2
    vals = 1.0 / np.sqrt(1.0 + theta2[:, None] + lam2[None, :])
    return np.sort(vals.ravel())[::-1]


def h1_embedding_svals_dense(grid: CylinderGrid, r: float) -> np.ndarray:
    """Dense Kronecker-assembly oracle for :func:`h1_embedding_svals`."""
    if not 0 < r <= grid.T:
        raise ValueError("require 0 < r <= T")
    D = _forward_diff(grid.nt, r)
    n = grid.base.dimension
    G = (np.kron(np.eye(grid.nt), np.eye(n))
         + np.kron(D.T @ D, np.eye(n))
         + np.kron(np.eye(grid.nt), np.diag(grid.base.eigenvalues**2)))
    ev = np.clip(np.linalg.eigvalsh(G), 1.0, None)
    return np.sort(1.0 / np.sqrt(ev))[::-1]

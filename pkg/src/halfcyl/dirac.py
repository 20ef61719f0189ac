"""Concrete operator builders and Callias-type potential verification.

Circle Dirac operators are built in the Fourier mode basis ``k in [-N, N]``
where the derivative is diagonal and a real potential is a Hermitian
Toeplitz convolution.  1-D Callias checks work pointwise on a sampled
spatial grid: the commutator with ``D = -i sigma d/dx`` is zeroth order
exactly when the symbol commutes with the potential, and then equals
``sigma Phi'`` with ``Phi'`` from centered differences.  Line operators for
the discreteness proxy are truncated in the Hermite basis, where ladder
algebra makes both the derivative and the position exact tridiagonal blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .spectral import EigenSystem, DEFAULT_EPSILON, frac_weights

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


# ---------------------------------------------------------------------------
# small closed-form expression grammar for potentials


_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "sech": lambda x: 1.0 / np.cosh(x),
    "exp": np.exp,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}


def parse_expression(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a small arithmetic expression into a vectorized function.

    Grammar: ``+ - * / ^``, parentheses, unary minus, numeric literals,
    the variable (``x``, ``theta`` or ``t``), constants ``pi``/``e`` and the
    functions sin, cos, tanh, sech, exp.
    """
    tokens = _tokenize(text)
    expr, rest = _parse_sum(tokens)
    if rest:
        raise ValueError(f"trailing tokens in expression: {rest}")
    return lambda x: expr(np.asarray(x, dtype=float)) * np.ones_like(np.asarray(x, dtype=float))


def _tokenize(text: str) -> list:
    out, i = [], 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "+-*/^()":
            out.append(ch)
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < len(text) and (text[j].isdigit() or text[j] in ".eE" or
                                     (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            out.append(float(text[i:j]))
            i = j
        elif ch.isalpha() or ch == "θ":
            j = i
            while j < len(text) and (text[j].isalpha() or text[j] == "θ"):
                j += 1
            out.append(text[i:j])
            i = j
        else:
            raise ValueError(f"unexpected character {ch!r} in expression")
    return out


def _parse_sum(tok):
    left, tok = _parse_product(tok)
    while tok and tok[0] in ("+", "-"):
        op, (right, tok) = tok[0], _parse_product(tok[1:])
        l = left
        left = (lambda a, b: lambda x: a(x) + b(x))(l, right) if op == "+" \
            else (lambda a, b: lambda x: a(x) - b(x))(l, right)
    return left, tok


def _parse_product(tok):
    left, tok = _parse_unary(tok)
    while tok and tok[0] in ("*", "/"):
        op, (right, tok) = tok[0], _parse_unary(tok[1:])
        l = left
        left = (lambda a, b: lambda x: a(x) * b(x))(l, right) if op == "*" \
            else (lambda a, b: lambda x: a(x) / b(x))(l, right)
    return left, tok


def _parse_unary(tok):
    if tok and tok[0] == "-":
        inner, tok = _parse_unary(tok[1:])
        return (lambda f: lambda x: -f(x))(inner), tok
    if tok and tok[0] == "+":
        return _parse_unary(tok[1:])
    return _parse_power(tok)


def _parse_power(tok):
    base, tok = _parse_atom(tok)
    if tok and tok[0] == "^":
        expo, tok = _parse_unary(tok[1:])  # right associative
        return (lambda b, e: lambda x: b(x) ** e(x))(base, expo), tok
    return base, tok


def _parse_atom(tok):
    if not tok:
        raise ValueError("unexpected end of expression")
    head, rest = tok[0], tok[1:]
    if isinstance(head, float):
        return (lambda c: lambda x: np.full_like(x, c))(head), rest
    if head == "(":
        inner, rest = _parse_sum(rest)
        if not rest or rest[0] != ")":
            raise ValueError("missing closing parenthesis")
        return inner, rest[1:]
    if head in _FUNCTIONS:
        if not rest or rest[0] != "(":
            raise ValueError(f"{head} must be followed by parentheses")
        inner, rest = _parse_sum(rest[1:])
        if not rest or rest[0] != ")":
            raise ValueError("missing closing parenthesis")
        return (lambda f, g: lambda x: f(g(x)))(_FUNCTIONS[head], inner), rest[1:]
    if head in _CONSTANTS:
        return (lambda c: lambda x: np.full_like(x, c))(_CONSTANTS[head]), rest
    if head in ("x", "theta", "t", "θ"):
        return (lambda x: x), rest
    raise ValueError(f"unknown identifier {head!r}")


def potential_from_csv(path) -> tuple:
    """Load (grid, values) from a two-or-more-column CSV."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return data[:, 0], data[:, 1:].squeeze()


# ---------------------------------------------------------------------------
# circle Dirac


@dataclass(frozen=True, eq=False)
class CircleDiracSpec:
    """Fourier truncation of ``-i d/dtheta + shift`` with a real potential.

    ``potential`` may be None, an array of ``2N + 1`` samples on the uniform
    circle grid, a callable, or an expression string.  The potential must be
    band-limited to ``|m| <= N/2``; anything beyond is an aliasing error.
    """

    N: int
    shift: float = 0.0
    potential: object = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def theta_grid(self) -> np.ndarray:
        m = 2 * self.N + 1
        return 2.0 * math.pi * np.arange(m) / m

    def potential_samples(self) -> Optional[np.ndarray]:
        if self.potential is None:
            return None
        pot = self.potential
        if isinstance(pot, str):
            pot = parse_expression(pot)
        if callable(pot):
            vals = np.asarray(pot(self.theta_grid()), dtype=complex)
        else:
            vals = np.asarray(pot, dtype=complex)
        if vals.shape != (2 * self.N + 1,):
            raise ValueError("potential must have 2N + 1 samples")
        if np.max(np.abs(vals.imag)) > 1e-12 * max(1.0, np.abs(vals).max()):
            raise ValueError("potential must be real valued")
        return vals.real


def circle_dirac(spec: CircleDiracSpec) -> EigenSystem:
    """Hermitian Fourier matrix of the circle Dirac operator.

    With no potential the eigenvalues are exactly ``k + shift``.  The
    potential enters as convolution with its DFT; mass beyond ``N/2`` is a
    hard error because such a mode aliases in the truncation.
    """
    k = spec.modes
    mat = np.diag((k + spec.shift).astype(complex))
    vals = spec.potential_samples()
    if vals is not None:
        m = vals.size
        vhat = np.fft.fft(vals) / m
        freqs = np.fft.fftfreq(m, d=1.0 / m).astype(int)
        coeff = dict(zip(freqs, vhat))
        band = spec.N / 2.0
        heavy = [f for f in freqs if abs(f) > band and abs(coeff[f]) > 1e-10 * (np.abs(vals).max() + 1)]
        if heavy:
            raise ValueError(f"potential has Fourier mass beyond N/2 at modes {sorted(heavy)}")
        n = k.size
        for i in range(n):
            for j in range(n):
                d = int(k[i] - k[j])
                if d in coeff and abs(d) <= band:
                    mat[i, j] += coeff[d]
    return EigenSystem.from_matrix(mat)


def circle_dirac_realspace_oracle(spec: CircleDiracSpec, n_points: int) -> np.ndarray:
    """Eigenvalues from Fourier collocation on a finer real-space grid.

    Independent route for the interior spectrum: spectral differentiation on
    ``n_points`` nodes plus pointwise multiplication by the potential.
    """
    m = n_points
    theta = 2.0 * math.pi * np.arange(m) / m
    freqs = np.fft.fftfreq(m, d=1.0 / m)
    F = np.exp(1j * np.outer(theta, freqs)) / math.sqrt(m)
    Dmat = F @ np.diag(freqs + spec.shift) @ F.conj().T
    if spec.potential is not None:
        pot = spec.potential
        if isinstance(pot, str):
            pot = parse_expression(pot)
        if callable(pot):
            v = np.asarray(pot(theta), dtype=float)
        else:
            coarse = np.asarray(pot, dtype=float)
            ck = np.fft.fft(coarse) / coarse.size
            cf = np.fft.fftfreq(coarse.size, d=1.0 / coarse.size).astype(int)
            v = np.zeros(m)
            for f, c in zip(cf, ck):
                v += np.real(c * np.exp(1j * f * theta))
        Dmat = Dmat + np.diag(v)
    return np.linalg.eigvalsh(Dmat)


# ---------------------------------------------------------------------------
# Callias potentials on a sampled 1-D domain


def _centered_derivative(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """d/dx along the first axis of sampled matrices, second order."""
    out = np.zeros_like(f)
    dx = np.diff(x)
    out[1:-1] = (f[2:] - f[:-2]) / (x[2:] - x[:-2]).reshape(-1, *([1] * (f.ndim - 1)))
    out[0] = (f[1] - f[0]) / dx[0]
    out[-1] = (f[-1] - f[-2]) / dx[-1]
    return out


@dataclass(frozen=True, eq=False)
class CalliasSpec:
    """Sampled symmetric potential for a 1-D Dirac operator.

    ``Phi`` has shape ``(m, d, d)`` with each sample Hermitian; ``sigma`` is
    the Dirac symbol (any Hermitian involution works in one dimension) and
    must commute with the potential for the commutator ``i[D, Phi] =
    sigma Phi'`` to be zeroth order; the residual skewness is reported, not
    silently dropped.  ``smooth_declared`` records that the caller vouches
    for the differentiability that sampling cannot certify.
    """

    x_grid: np.ndarray
    Phi: np.ndarray
    K: tuple = (0.0, 0.0)
    Lambda: float = 1.0
    sigma: np.ndarray = field(default_factory=lambda: SIGMA1.copy())
    smooth_declared: bool = True

    def __post_init__(self):
        x = np.asarray(self.x_grid, dtype=float)
        P = np.asarray(self.Phi, dtype=complex)
        if P.ndim != 3 or P.shape[0] != x.size or P.shape[1] != P.shape[2]:
            raise ValueError("Phi must have shape (len(x_grid), d, d)")
        herm = np.max(np.abs(P - np.conj(np.transpose(P, (0, 2, 1)))))
        if herm > 1e-12 * max(1.0, np.abs(P).max()):
            raise ValueError(f"Phi samples not Hermitian (defect {herm:.2e})")
        if self.Lambda <= 0:
            raise ValueError("Lambda must be positive")
        object.__setattr__(self, "x_grid", x)
        object.__setattr__(self, "Phi", P)
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=complex))

    def commutator(self) -> np.ndarray:
        """Samples of ``i[D, Phi] = sigma Phi'`` (zeroth-order part)."""
        dPhi = _centered_derivative(self.x_grid, self.Phi)
        return np.einsum("ab,xbc->xac", self.sigma, dPhi)


def _hermitian_margin(M: np.ndarray) -> tuple:
    """Min eigenvalue of the Hermitian part per sample, plus skew defect."""
    H = 0.5 * (M + np.conj(np.transpose(M, (0, 2, 1))))
    skew = float(np.max(np.abs(M - H)))
    margins = np.array([np.linalg.eigvalsh(h)[0] for h in H])
    return margins, skew


@dataclass(frozen=True, eq=False)
class CalliasReport:
    verdict: bool
    margins: np.ndarray          # per-sample min eigenvalue of Phi^2 + i[D, Phi]
    margin_outside: float        # min margin off K
    classical_margins: np.ndarray  # min eig Phi^2 - ||[D, Phi]||
    classical_holds: bool
    plus_passes: bool
    minus_passes: bool
    skew_defect: float
    grid_spacing: float
    smooth_declared: bool


def callias_check(spec: CalliasSpec) -> CalliasReport:
    """Pointwise verification of the Callias condition.

    The verdict is True when the minimum eigenvalue of
    ``Phi^2 + i[D, Phi]`` clears ``Lambda`` at every sample outside ``K``.
    Also evaluates the classical sufficient bound
    ``Phi^2 - ||[D, Phi]|| >= Lambda`` and which of ``+-Phi`` pass.
    """
    C = spec.commutator()
    Phi2 = np.einsum("xab,xbc->xac", spec.Phi, spec.Phi)
    margins_p, skew = _hermitian_margin(Phi2 + C)
    margins_m, _ = _hermitian_margin(Phi2 - C)
    outside = (spec.x_grid < spec.K[0]) | (spec.x_grid > spec.K[1])
    if not np.any(outside):
        raise ValueError("K covers the whole sampled domain")
    comm_norm = np.array([np.linalg.norm(c, 2) for c in C])
    phi2_min = np.array([np.linalg.eigvalsh(0.5 * (p + p.conj().T))[0] for p in Phi2])
    classical = phi2_min - comm_norm
    plus_ok = bool(np.all(margins_p[outside] >= spec.Lambda))
    minus_ok = bool(np.all(margins_m[outside] >= spec.Lambda))
    return CalliasReport(
        verdict=plus_ok,
        margins=margins_p,
        margin_outside=float(margins_p[outside].min()),
        classical_margins=classical,
        classical_holds=bool(np.all(classical[outside] >= spec.Lambda)),
        plus_passes=plus_ok,
        minus_passes=minus_ok,
        skew_defect=skew,
        grid_spacing=float(np.max(np.diff(spec.x_grid))),
        smooth_declared=spec.smooth_declared,
    )


@dataclass(frozen=True, eq=False)
class ParaCalliasReport:
    verdict: bool
    margins: np.ndarray
    margin_outside: float
    skew_defect: float      # non-Hermitian residue of the pointwise matrix


def para_callias_check(x_grid, sigma, Psi, K: tuple, Lambda: float) -> ParaCalliasReport:
    """Pointwise para-Callias condition for a skew potential.

    The margin matrix is ``(i Psi)^2 + sigma Psi'``, the zeroth-order part of
    ``(i Psi)^2 + i [D, Psi]_+`` with the anticommutator; its Hermitian part
    is diagonalized per sample and the residual skewness reported.
    """
    x = np.asarray(x_grid, dtype=float)
    Psi = np.asarray(Psi, dtype=complex)
    skewness = np.max(np.abs(Psi + np.conj(np.transpose(Psi, (0, 2, 1)))))
    if skewness > 1e-12 * max(1.0, np.abs(Psi).max()):
        raise ValueError(f"Psi samples not skew-Hermitian (defect {skewness:.2e})")
    iPsi = 1j * Psi
    M = np.einsum("xab,xbc->xac", iPsi, iPsi) + \
        np.einsum("ab,xbc->xac", np.asarray(sigma, complex), _centered_derivative(x, Psi))
    margins, skew = _hermitian_margin(M)
    outside = (x < K[0]) | (x > K[1])
    if not np.any(outside):
        raise ValueError("K covers the whole sampled domain")
    return ParaCalliasReport(
        verdict=bool(np.all(margins[outside] >= Lambda)),
        margins=margins,
        margin_outside=float(margins[outside].min()),
        skew_defect=skew,
    )


def strongly_para_profile(x_grid, sigma, Psi, R_list: Sequence[float]):
    """Minimal symmetric windows ``K_R`` with the pointwise bound >= R outside.

    Returns one entry per R: a pair ``(-r, r)`` of grid-aligned endpoints, an
    empty window ``None`` when the bound already holds everywhere, or the
    string ``"unbounded"`` when even the extreme samples fail.  The windows
    are nondecreasing in R by construction.
    """
    x = np.asarray(x_grid, dtype=float)
    if np.any(np.diff(np.asarray(R_list)) <= 0):
        raise ValueError("R_list must be strictly increasing")
    rep = para_callias_check(x, sigma, Psi, (x[0] - 1.0, x[0] - 0.5), np.finfo(float).tiny)
    margins = rep.margins
    out = []
    for R in R_list:
        ok = margins >= R
        if np.all(ok):
            out.append(None)
            continue
        if not (ok[0] and ok[-1]):
            out.append("unbounded")
            continue
        bad = np.abs(x[~ok])
        r = float(bad.max())
        out.append((-r, r))
    return out


@dataclass(frozen=True, eq=False)
class DiscretenessReport:
    truncations: list
    eigenvalues: list            # per truncation: m eigenvalues nearest zero
    max_drift: list              # per refinement step: worst nearest-match distance
    stabilized: bool
    counting: list               # eigenvalue count below the common window


def discreteness_proxy(
    a_builder: Callable[[int], np.ndarray],
    psi_builder: Optional[Callable[[int], np.ndarray]],
    trunc_list: Sequence[int],
    m: int = 10,
    tol: float = 1e-6,
) -> DiscretenessReport:
    """Truncation-stabilization proxy for discreteness of ``A + i Psi``.

    ``A + i Psi`` with skew ``Psi`` is Hermitian; its lowest ``m``
    eigenvalues by magnitude are tracked across truncations and matched by
    nearest distance.  Stabilization of all of them below ``tol`` is the
    finite-scale stand-in for discrete spectrum; a bounded non-Callias
    potential on a line leaves non-stabilizing clusters instead.
    """
    trunc = list(trunc_list)
    if any(b <= a for a, b in zip(trunc, trunc[1:])):
        raise ValueError("trunc_list must be increasing")
    spectra, lowest = [], []
    for n in trunc:
        H = np.asarray(a_builder(n), dtype=complex)
        if psi_builder is not None:
            H = H + 1j * np.asarray(psi_builder(n), dtype=complex)
        herm = np.max(np.abs(H - H.conj().T))
        if herm > 1e-10 * max(1.0, np.abs(H).max()):
            raise ValueError(f"A + i Psi not Hermitian (defect {herm:.2e})")
        ev = np.linalg.eigvalsh(H)
        spectra.append(ev)
        sel = np.argsort(np.abs(ev), kind="stable")[:m]
        lowest.append(np.sort(ev[sel]))
    drifts = []
    for a, b in zip(lowest, lowest[1:]):
        drifts.append(float(max(np.min(np.abs(b - val)) for val in a)) if a.size else 0.0)
    window = float(np.max(np.abs(lowest[0]))) if lowest[0].size else 0.0
    counting = [int(np.sum(np.abs(ev) <= window + 1e-9)) for ev in spectra]
    return DiscretenessReport(
        truncations=trunc,
        eigenvalues=[l.tolist() for l in lowest],
        max_drift=drifts,
        stabilized=bool(drifts and max(drifts) < tol),
        counting=counting,
    )


# ---------------------------------------------------------------------------
# line Dirac in the Hermite basis


def _ladder(n: int) -> np.ndarray:
    """Annihilation operator truncated to the first n Hermite modes."""
    return np.diag(np.sqrt(np.arange(1, n)), k=1)


def line_dirac(n: int) -> np.ndarray:
    """Hermite truncation of ``-i sigma1 d/dx`` on the line (2n x 2n)."""
    a = _ladder(n)
    ddx = (a - a.T) / math.sqrt(2.0)
    return np.kron(SIGMA1, -1j * ddx)


def line_position(n: int) -> np.ndarray:
    a = _ladder(n)
    return (a + a.T) / math.sqrt(2.0)


def linear_psi(n: int) -> np.ndarray:
    """Skew potential whose Hermitian partner is ``x sigma3`` (linear growth)."""
    return -1j * np.kron(SIGMA3, line_position(n))


def bounded_psi(n: int, profile: Callable[[np.ndarray], np.ndarray] = np.tanh) -> np.ndarray:
    """Skew potential ``-i f(x) sigma3`` with bounded f, via the position matrix."""
    x = line_position(n)
    ev, V = np.linalg.eigh(x)
    fx = (V * profile(ev)) @ V.conj().T
    return -1j * np.kron(SIGMA3, fx)


# ---------------------------------------------------------------------------
# half-norm multiplier bound on the circle


@dataclass(frozen=True, eq=False)
class MultiplierReport:
    operator_norm: float
    epsilon: float
    bound_without_constant: float    # ||chi||^1/2 (||chi|| + C^2 ||chi'||)^1/2
    admissible_constant: float       # smallest C' making the bound true
    sup_chi: float
    sup_dchi: float
    sampled_max_ratio: float


def multiplier_halfnorm_check(
    spec: CircleDiracSpec,
    chi,
    epsilon: float = DEFAULT_EPSILON,
    symbol_constant: float = 1.0,
    n_samples: int = 50,
    rng: np.random.Generator | None = None,
) -> MultiplierReport:
    """Half-norm bound for multiplication by a smooth cutoff on the circle.

    Builds the Fourier convolution matrix of ``chi`` from a refined sample
    grid, measures its operator norm between weighted half-scale norms (the
    weights come from the potential-free shifted operator, for which the
    Fourier basis is the eigenbasis), and reports the smallest universal
    constant that makes
    ``||chi y|| <= C' ||chi||^1/2 (||chi|| + C^2 ||chi'||)^1/2 ||y||`` hold.
    """
    rng = rng or np.random.default_rng(0)
    sys = circle_dirac(CircleDiracSpec(spec.N, spec.shift))
    fine = 8 * spec.N + 1
    theta = 2.0 * math.pi * np.arange(fine) / fine
    if isinstance(chi, str):
        chi = parse_expression(chi)
    vals = np.asarray(chi(theta), dtype=float) if callable(chi) else np.asarray(chi, dtype=float)
    if vals.shape != theta.shape:
        raise ValueError("chi samples must match the refined grid")
    chat = np.fft.fft(vals) / fine
    freqs = np.fft.fftfreq(fine, d=1.0 / fine).astype(int)
    coeff = dict(zip(freqs, chat))
    k = spec.modes
    n = k.size
    # for V = 0 the Fourier basis is the (ascending) eigenbasis, so the
    # convolution matrix acts directly on coefficients
    Mc = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            Mc[i, j] = coeff.get(int(k[i] - k[j]), 0.0)
    w = frac_weights(sys, 0.5, epsilon)
    opnorm = float(np.linalg.norm((w[:, None] * Mc) / w[None, :], 2))
    dvals = _centered_derivative(theta, vals)
    sup_chi = float(np.abs(vals).max())
    sup_dchi = float(np.abs(dvals).max())
    bound = math.sqrt(sup_chi) * math.sqrt(sup_chi + symbol_constant**2 * sup_dchi)
    best_ratio = 0.0
    for _ in range(n_samples):
        c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        best_ratio = max(best_ratio,
                         float(np.linalg.norm(w * (Mc @ c)) / np.linalg.norm(w * c)))
    return MultiplierReport(
        operator_norm=opnorm,
        epsilon=epsilon,
        bound_without_constant=bound,
        admissible_constant=opnorm / bound if bound > 0 else math.inf,
        sup_chi=sup_chi,
        sup_dchi=sup_dchi,
        sampled_max_ratio=best_ratio,
    )

"""Hybrid boundary spaces: H-check, H-hat, their pairing and shift behaviour.

The check space puts the strictly negative spectral part on the ``H^{1/2}``
scale and the nonnegative part (kernel included) on its dual; the hat space
is the check space of ``-A``, taken literally, so the kernel sits on the
dual side of both.  With the default shift ``epsilon = 1`` the two possible
kernel conventions give the same norm, and the coefficient pairing recovers
each norm from the other exactly.  Kernel indices are surfaced in reports
rather than silently absorbed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import DEFAULT_EPSILON, EigenSystem, frac_norm, dual_norm, frac_weights


def czech_weights(sys: EigenSystem, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Per-eigendirection weights of the check norm."""
    half = frac_weights(sys, 0.5, epsilon)
    return np.where(sys.minus_mask, half, 1.0 / half)


def hat_weights(sys: EigenSystem, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Per-eigendirection weights of the hat norm (check norm of ``-A``)."""
    half = frac_weights(sys, 0.5, epsilon)
    strictly_pos = sys.eigenvalues > 0.0
    return np.where(strictly_pos, half, 1.0 / half)


def czech_norm(sys: EigenSystem, coeffs, epsilon: float = DEFAULT_EPSILON) -> float:
    """Root-sum-square of the H^{1/2} part (negative modes) and dual part."""
    c = np.asarray(coeffs)
    return float(np.linalg.norm(czech_weights(sys, epsilon) * c))


def hat_norm(sys: EigenSystem, coeffs, epsilon: float = DEFAULT_EPSILON) -> float:
    """Check norm with the sign roles of the spectrum swapped."""
    c = np.asarray(coeffs)
    return float(np.linalg.norm(hat_weights(sys, epsilon) * c))


@dataclass(frozen=True, eq=False)
class CzechDatum:
    """Boundary datum split into its spectral parts.

    ``neg_part`` and ``pos_part`` are coefficient vectors supported on the
    negative and nonnegative eigenindices respectively (disjoint support).
    ``side`` is "czech" or "hat" and fixes which norm the datum carries.
    """

    base: EigenSystem
    neg_part: np.ndarray
    pos_part: np.ndarray
    epsilon: float = DEFAULT_EPSILON
    side: str = "czech"

    def __post_init__(self):
        neg = np.asarray(self.neg_part, dtype=complex)
        pos = np.asarray(self.pos_part, dtype=complex)
        n = self.base.dimension
        if neg.shape != (n,) or pos.shape != (n,):
            raise ValueError("parts must have the base dimension")
        if self.side not in ("czech", "hat"):
            raise ValueError("side must be 'czech' or 'hat'")
        mask = self.base.minus_mask if self.side == "czech" else (self.base.eigenvalues > 0.0)
        if np.linalg.norm(neg[~mask]) > 1e-12 * max(1.0, np.linalg.norm(neg)):
            raise ValueError("neg_part not supported on its spectral side")
        if np.linalg.norm(pos[mask]) > 1e-12 * max(1.0, np.linalg.norm(pos)):
            raise ValueError("pos_part not supported on its spectral side")
        object.__setattr__(self, "neg_part", neg)
        object.__setattr__(self, "pos_part", pos)

    @classmethod
    def from_coefficients(cls, sys: EigenSystem, coeffs, epsilon: float = DEFAULT_EPSILON,
                          side: str = "czech") -> "CzechDatum":
        c = np.asarray(coeffs, dtype=complex)
        mask = sys.minus_mask if side == "czech" else (sys.eigenvalues > 0.0)
        return cls(sys, np.where(mask, c, 0.0), np.where(mask, 0.0, c), epsilon, side)

    @property
    def coefficients(self) -> np.ndarray:
        return self.neg_part + self.pos_part

    def norm(self) -> float:
        if self.side == "czech":
            return float(np.hypot(
                frac_norm(self.base, 0.5, self.epsilon, self.neg_part),
                dual_norm(self.base, 0.5, self.epsilon, self.pos_part),
            ))
        return hat_norm(self.base, self.coefficients, self.epsilon)

    def kernel_indices(self) -> list:
        return [int(j) for j in np.flatnonzero(self.base.kernel_mask)]


def pairing(sys: EigenSystem, u: CzechDatum, v: CzechDatum) -> complex:
    """Coefficient inner product ``<u, v> = sum conj(u_j) v_j``.

    This is the extension of the boundary L^2 product to the check/hat pair;
    ``|pairing| <= czech_norm(u) * hat_norm(v)`` at ``epsilon = 1``, with
    per-eigendirection equality.
    """
    if u.base is not sys and not _same_base(u.base, sys):
        raise ValueError("u has a different base system")
    if v.base is not sys and not _same_base(v.base, sys):
        raise ValueError("v has a different base system")
    if u.side == v.side:
        raise ValueError("pairing takes one czech and one hat datum")
    return complex(np.vdot(u.coefficients, v.coefficients))


def _same_base(a: EigenSystem, b: EigenSystem) -> bool:
    return a.dimension == b.dimension and np.array_equal(a.eigenvalues, b.eigenvalues) \
        and np.array_equal(a.eigenvectors, b.eigenvectors)


def dual_recovery(sys: EigenSystem, coeffs, epsilon: float = DEFAULT_EPSILON) -> float:
    """Closed-form supremum of ``|<u, v>| / hat_norm(u)`` over u.

    The supremum per eigendirection is attained at ``u_j = v_j / w_j^2``
    (hat weights w); it reproduces the check norm of ``v`` when
    ``epsilon = 1``.
    """
    c = np.asarray(coeffs)
    w = hat_weights(sys, epsilon)
    return float(np.linalg.norm(c / w))


@dataclass(frozen=True, eq=False)
class ShiftReport:
    r: float
    epsilon: float
    projector_identity: bool        # chi^-(A - r) == chi_(-inf, r)(A) exactly
    band_decomposition: bool        # chi^-(A - r) == chi^-(A) + chi_[0, r)(A)
    ratio_min: float                # empirical czech(A-r)/czech(A) bounds
    ratio_max: float
    predicted_max: float            # per-eigendirection sup of the ratio
    predicted_min: float
    band_indices: list
    kernel_indices: list


def shift_compare(
    sys: EigenSystem,
    r: float,
    samples: int = 100,
    epsilon: float = DEFAULT_EPSILON,
    rng: np.random.Generator | None = None,
) -> ShiftReport:
    """Compare the check space of ``A`` and of ``A - r``.

    The underlying coefficient space is identical; the report carries the
    exact projector identities and two-sided norm-ratio bounds.  The ratio
    on the band ``[0, r)`` is ``sqrt((r - lam + eps)(lam + eps))`` per
    eigendirection, which is how the reported constants grow with ``r``.
    """
    from .spectral import BorelInterval, spectral_projector, NEGATIVE_AXIS

    rng = rng or np.random.default_rng(0)
    shifted = sys.shifted(r)
    P_shift = spectral_projector(shifted, NEGATIVE_AXIS)
    P_band = spectral_projector(sys, BorelInterval(-np.inf, r, closed_hi=False))
    projector_identity = np.array_equal(P_shift.mask, P_band.mask)

    band_ok = True
    if r > 0:
        P_minus = spectral_projector(sys, NEGATIVE_AXIS)
        P_mid = spectral_projector(sys, BorelInterval(0.0, r, closed_lo=True, closed_hi=False))
        band_ok = np.array_equal(P_shift.mask, P_minus.mask | P_mid.mask) and \
            not np.any(P_minus.mask & P_mid.mask)

    w0 = czech_weights(sys, epsilon)
    w1 = czech_weights(shifted, epsilon)
    per_dir = w1 / w0
    ratios = []
    for _ in range(samples):
        c = rng.standard_normal(sys.dimension) + 1j * rng.standard_normal(sys.dimension)
        ratios.append(np.linalg.norm(w1 * c) / np.linalg.norm(w0 * c))
    ratios = np.array(ratios)
    band_idx = [int(j) for j in np.flatnonzero((sys.eigenvalues >= 0) & (sys.eigenvalues < r))] \
        if r > 0 else []
    return ShiftReport(
        r=r,
        epsilon=epsilon,
        projector_identity=bool(projector_identity),
        band_decomposition=bool(band_ok),
        ratio_min=float(ratios.min()),
        ratio_max=float(ratios.max()),
        predicted_max=float(per_dir.max()),
        predicted_min=float(per_dir.min()),
        band_indices=band_idx,
        kernel_indices=[int(j) for j in np.flatnonzero(sys.kernel_mask)],
    )

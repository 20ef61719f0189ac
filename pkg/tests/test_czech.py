import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halfcyl.czech import (
    CzechDatum,
    czech_norm,
    dual_recovery,
    hat_norm,
    pairing,
    shift_compare,
)
from halfcyl.spectral import EigenSystem, frac_norm, dual_norm


def diag(*eigs):
    return EigenSystem.from_eigenvalues(list(eigs))


class TestCzechNorm:
    def test_negative_mode(self):
        assert czech_norm(diag(-3.0), [1.0], 1.0) == pytest.approx(2.0)

    def test_positive_mode(self):
        assert czech_norm(diag(3.0), [1.0], 1.0) == pytest.approx(0.5)

    def test_mixed_root_sum_square(self):
        assert czech_norm(diag(-3.0, 3.0), [1.0, 1.0], 1.0) == pytest.approx(math.sqrt(4.25))

    def test_pure_sign_agreement(self):
        sys = diag(-4.0, -1.0, 2.0, 5.0)
        v_neg = np.array([1.0, 2.0, 0.0, 0.0])
        v_pos = np.array([0.0, 0.0, 3.0, 1.0])
        assert czech_norm(sys, v_neg, 1.0) == pytest.approx(frac_norm(sys, 0.5, 1.0, v_neg))
        assert czech_norm(sys, v_pos, 1.0) == pytest.approx(dual_norm(sys, 0.5, 1.0, v_pos))


class TestHatNorm:
    def test_sign_swap(self):
        assert hat_norm(diag(-3.0), [1.0], 1.0) == pytest.approx(0.5)
        assert hat_norm(diag(3.0), [1.0], 1.0) == pytest.approx(2.0)

    def test_kernel_mode(self):
        # kernel stays on the dual side of both spaces; at eps = 1 the two
        # conventions coincide and the norm is 1
        assert hat_norm(diag(0.0), [1.0], 1.0) == pytest.approx(1.0)
        assert czech_norm(diag(0.0), [1.0], 1.0) == pytest.approx(1.0)


class TestCzechDatum:
    def test_split_and_norm(self):
        sys = diag(-2.0, 0.0, 3.0)
        d = CzechDatum.from_coefficients(sys, [1.0, 1.0, 1.0], 1.0)
        npt.assert_allclose(d.neg_part, [1.0, 0.0, 0.0])
        npt.assert_allclose(d.pos_part, [0.0, 1.0, 1.0])
        assert d.norm() == pytest.approx(czech_norm(sys, [1.0, 1.0, 1.0], 1.0))
        assert d.kernel_indices() == [1]

    def test_support_enforced(self):
        sys = diag(-1.0, 1.0)
        with pytest.raises(ValueError, match="support"):
            CzechDatum(sys, np.array([0.0, 1.0]), np.array([0.0, 0.0]), 1.0)


class TestPairing:
    def test_orthogonal_modes(self):
        sys = diag(-1.0, 2.0)
        u = CzechDatum.from_coefficients(sys, [1.0, 0.0], side="czech")
        v = CzechDatum.from_coefficients(sys, [0.0, 1.0], side="hat")
        assert pairing(sys, u, v) == 0.0

    def test_unit_diagonal(self):
        sys = diag(-1.0, 2.0)
        u = CzechDatum.from_coefficients(sys, [1.0, 0.0], side="czech")
        v = CzechDatum.from_coefficients(sys, [1.0, 0.0], side="hat")
        assert pairing(sys, u, v) == pytest.approx(1.0)

    def test_base_mismatch(self):
        u = CzechDatum.from_coefficients(diag(-1.0), [1.0], side="czech")
        v = CzechDatum.from_coefficients(diag(-2.0), [1.0], side="hat")
        with pytest.raises(ValueError, match="base"):
            pairing(diag(-1.0), u, v)

    def test_bound_and_recovery(self):
        rng = np.random.default_rng(4)
        sys = EigenSystem.from_matrix(
            (lambda m: 0.5 * (m + m.T))(rng.standard_normal((6, 6))))
        cu = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        u = CzechDatum.from_coefficients(sys, cu, side="czech")
        # closed-form sup over v of |<u,v>| / hat_norm(v) equals czech norm at eps=1
        assert dual_recovery(sys, cu, 1.0) == pytest.approx(czech_norm(sys, cu, 1.0), rel=1e-8)
        for _ in range(40):
            cv = rng.standard_normal(6) + 1j * rng.standard_normal(6)
            v = CzechDatum.from_coefficients(sys, cv, side="hat")
            assert abs(pairing(sys, u, v)) <= \
                czech_norm(sys, cu, 1.0) * hat_norm(sys, cv, 1.0) * (1 + 1e-10)

    def test_perfectness(self):
        sys = diag(-2.0, 0.0, 1.0)
        for j in range(3):
            cu = np.eye(3)[j]
            u = CzechDatum.from_coefficients(sys, cu, side="czech")
            v = CzechDatum.from_coefficients(sys, cu, side="hat")
            assert abs(pairing(sys, u, v)) > 0


class TestGradedVector:
    def test_scale_dispatch(self):
        from halfcyl.spectral import GradedVector

        sys = diag(-3.0, 3.0)
        v = np.array([1.0, 1.0])
        assert GradedVector(sys, v, ("frac", 0.5)).norm() == pytest.approx(
            frac_norm(sys, 0.5, 1.0, v))
        assert GradedVector(sys, v, ("dual", 0.5)).norm() == pytest.approx(
            dual_norm(sys, 0.5, 1.0, v))
        assert GradedVector(sys, v, "czech").norm() == pytest.approx(math.sqrt(4.25))
        assert GradedVector(sys, v, "hat").norm() == pytest.approx(math.sqrt(4.25))

    def test_length_enforced(self):
        from halfcyl.spectral import GradedVector

        with pytest.raises(ValueError):
            GradedVector(diag(1.0), np.ones(2), "czech")


class TestShiftCompare:
    def test_r_zero_trivial(self):
        sys = diag(-1.0, 2.0)
        rep = shift_compare(sys, 0.0, samples=20)
        assert rep.projector_identity
        assert rep.ratio_min == pytest.approx(1.0)
        assert rep.ratio_max == pytest.approx(1.0)

    def test_projector_coordinates(self):
        rep = shift_compare(diag(-2.0, 1.0, 3.0), 2.0, samples=10)
        assert rep.projector_identity and rep.band_decomposition
        assert rep.band_indices == [1]

    def test_band_oracle(self):
        # eigenvalues -5..5, r = 2: predicted max from per-eigendirection scan
        sys = diag(*np.arange(-5.0, 6.0))
        rep = shift_compare(sys, 2.0, samples=100)
        eps = 1.0

        def one_dir(lam):
            if lam < 0:
                return math.sqrt((abs(lam) + 2.0 + eps) / (abs(lam) + eps))
            if lam >= 2.0:
                return math.sqrt((lam + eps) / (lam - 2.0 + eps))
            return math.sqrt((2.0 - lam + eps) * (lam + eps))

        per_dir = np.array([one_dir(lam) for lam in sys.eigenvalues])
        assert rep.predicted_max == pytest.approx(per_dir.max())
        assert rep.ratio_max <= rep.predicted_max * (1 + 1e-10)
        assert rep.ratio_min >= rep.predicted_min * (1 - 1e-10)
        assert np.isfinite(rep.ratio_max) and np.isfinite(rep.ratio_min)

    def test_constants_grow_with_r(self):
        sys = diag(*np.arange(-5.0, 6.0))
        maxes = [shift_compare(sys, r, samples=10).predicted_max for r in (1.0, 2.0, 4.0)]
        assert maxes[0] < maxes[1] < maxes[2]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=2, max_size=8),
       st.integers(0, 2**32 - 1))
def test_czech_norm_axioms(eigs, seed):
    sys = EigenSystem.from_eigenvalues(eigs)
    rng = np.random.default_rng(seed)
    n = sys.dimension
    u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    s = complex(rng.standard_normal() + 1j * rng.standard_normal())
    assert czech_norm(sys, u + v) <= czech_norm(sys, u) + czech_norm(sys, v) + 1e-12
    assert czech_norm(sys, s * u) == pytest.approx(abs(s) * czech_norm(sys, u), rel=1e-10, abs=1e-12)
    if np.linalg.norm(u) > 1e-9:
        assert czech_norm(sys, u) > 0

import math

import numpy as np
import numpy.testing as npt
import pytest

from halfcyl.dirac import (
    SIGMA1,
    SIGMA3,
    CalliasSpec,
    CircleDiracSpec,
    bounded_psi,
    callias_check,
    circle_dirac,
    circle_dirac_realspace_oracle,
    discreteness_proxy,
    line_dirac,
    linear_psi,
    multiplier_halfnorm_check,
    para_callias_check,
    parse_expression,
    potential_from_csv,
    strongly_para_profile,
)


class TestExpressionParser:
    @pytest.mark.parametrize("text,x,expected", [
        ("2 + 3*x", 2.0, 8.0),
        ("sin(pi/2)", 0.0, 1.0),
        ("2*cos(theta)", 0.0, 2.0),
        ("tanh(1)*sech(0)", 0.0, math.tanh(1.0)),
        ("-x^2", 3.0, -9.0),
        ("2^-x", 1.0, 0.5),
        ("exp(-x)*(1 + x)", 1.0, 2.0 / math.e),
    ])
    def test_values(self, text, x, expected):
        f = parse_expression(text)
        assert f(np.array([x]))[0] == pytest.approx(expected)

    def test_vectorized(self):
        f = parse_expression("x^2 - 1")
        npt.assert_allclose(f(np.array([0.0, 1.0, 2.0])), [-1.0, 0.0, 3.0])

    def test_errors(self):
        with pytest.raises(ValueError):
            parse_expression("sin 3")
        with pytest.raises(ValueError):
            parse_expression("2 +")
        with pytest.raises(ValueError):
            parse_expression("foo(3)")

    def test_csv_roundtrip(self, tmp_path):
        path = tmp_path / "pot.csv"
        x = np.linspace(0, 1, 5)
        np.savetxt(path, np.column_stack([x, x**2]), delimiter=",")
        grid, vals = potential_from_csv(path)
        npt.assert_allclose(grid, x)
        npt.assert_allclose(vals, x**2)


class TestCircleDirac:
    def test_free_spectrum(self):
        sys = circle_dirac(CircleDiracSpec(2))
        npt.assert_allclose(sys.eigenvalues, [-2, -1, 0, 1, 2], atol=1e-12)

    def test_shift_no_kernel(self):
        sys = circle_dirac(CircleDiracSpec(3, shift=-0.5))
        npt.assert_allclose(sys.eigenvalues, np.arange(-3, 4) - 0.5, atol=1e-12)
        assert not np.any(sys.kernel_mask)

    def test_shift_is_exact_matrix_identity(self):
        a = circle_dirac(CircleDiracSpec(4, shift=0.0))
        b = circle_dirac(CircleDiracSpec(4, shift=0.7))
        npt.assert_allclose(b.eigenvalues, a.eigenvalues + 0.7, atol=1e-12)

    def test_cosine_potential_matches_realspace(self):
        spec = CircleDiracSpec(8, potential="2*cos(theta)")
        sys = circle_dirac(spec)
        dense = circle_dirac_realspace_oracle(spec, 4 * spec.N)
        # compare the central window; truncation leakage decays factorially
        # with the distance to the mode cutoff
        mid = sys.eigenvalues[6:-6]
        matched = [dense[np.argmin(np.abs(dense - ev))] for ev in mid]
        npt.assert_allclose(mid, matched, atol=1e-4)

    def test_complex_potential_rejected(self):
        with pytest.raises(ValueError, match="real"):
            spec = CircleDiracSpec(2, potential=np.array([1j, 0, 0, 0, 0]))
            circle_dirac(spec)

    def test_aliasing_rejected(self):
        # mode N is beyond the N/2 band limit
        spec = CircleDiracSpec(4, potential="cos(4*theta)")
        with pytest.raises(ValueError, match="beyond N/2"):
            circle_dirac(spec)

    def test_hermitian_with_potential(self):
        spec = CircleDiracSpec(6, shift=0.25, potential="cos(theta) + 0.5*sin(2*theta)")
        sys = circle_dirac(spec)  # construction validates Hermitian-ness
        assert sys.dimension == 13


class TestCalliasCheck:
    def _grid(self):
        return np.linspace(-6.0, 6.0, 241)

    def test_constant_mass(self):
        x = self._grid()
        m = 1.5
        Phi = np.broadcast_to(m * np.eye(2), (x.size, 2, 2)).copy()
        spec = CalliasSpec(x, Phi, K=(0.0, 0.0), Lambda=m * m * 0.99)
        rep = callias_check(spec)
        assert rep.verdict and rep.plus_passes and rep.minus_passes
        assert rep.margin_outside == pytest.approx(m * m, rel=1e-10)

    def test_zero_potential_fails(self):
        x = self._grid()
        spec = CalliasSpec(x, np.zeros((x.size, 2, 2)), K=(-1.0, 1.0), Lambda=0.5)
        assert not callias_check(spec).verdict

    def test_tanh_kink_margins(self):
        # Phi = m tanh(x) sigma3 with the aligned symbol sigma3:
        # i[D, Phi] = m sech^2(x) I, margin m^2 tanh^2 +- m sech^2
        x = self._grid()
        m = 2.0
        Phi = m * np.tanh(x)[:, None, None] * SIGMA3[None, :, :]
        spec = CalliasSpec(x, Phi, K=(-2.0, 2.0), Lambda=1.0, sigma=SIGMA3)
        rep = callias_check(spec)
        assert rep.skew_defect < 1e-10
        # pointwise 2x2 oracle at the first sample beyond the kink window
        i_edge = int(np.argmax(x > 2.0))
        oracle_plus = float(np.linalg.eigvalsh(
            m * m * math.tanh(x[i_edge]) ** 2 * np.eye(2)
            + m / np.cosh(x[i_edge]) ** 2 * np.eye(2))[0])
        oracle_minus = float(np.linalg.eigvalsh(
            m * m * math.tanh(x[i_edge]) ** 2 * np.eye(2)
            - m / np.cosh(x[i_edge]) ** 2 * np.eye(2))[0])
        # centered differences reproduce sech^2 to second order in the step
        assert rep.margins[i_edge] == pytest.approx(oracle_plus, rel=1e-3)
        spec_m = CalliasSpec(x, -Phi, K=(-2.0, 2.0), Lambda=1.0, sigma=SIGMA3)
        rep_m = callias_check(spec_m)
        assert rep_m.margin_outside == pytest.approx(oracle_minus, rel=1e-3)
        # verdict true for Lambda below the margin
        assert callias_check(CalliasSpec(x, Phi, K=(-2.0, 2.0),
                                         Lambda=0.9 * rep.margin_outside,
                                         sigma=SIGMA3)).verdict

    def test_classical_condition_sign_symmetry(self):
        # when the classical bound holds, both signs pass
        x = self._grid()
        m = 2.0
        Phi = m * np.tanh(x)[:, None, None] * SIGMA3[None, :, :]
        lam = 0.5 * (m * m * math.tanh(2.0) ** 2 - m / math.cosh(2.0) ** 2)
        rep = callias_check(CalliasSpec(x, Phi, K=(-2.0, 2.0), Lambda=lam, sigma=SIGMA3))
        assert rep.classical_holds
        assert rep.plus_passes and rep.minus_passes

    def test_k_covering_domain_rejected(self):
        x = np.linspace(-1, 1, 11)
        spec = CalliasSpec(x, np.zeros((11, 2, 2)), K=(-2.0, 2.0), Lambda=1.0)
        with pytest.raises(ValueError, match="K covers"):
            callias_check(spec)

    def test_non_hermitian_rejected(self):
        x = np.linspace(-1, 1, 11)
        Phi = np.broadcast_to(np.array([[0.0, 1.0], [0.0, 0.0]]), (11, 2, 2)).copy()
        with pytest.raises(ValueError, match="Hermitian"):
            CalliasSpec(x, Phi)


class TestParaCallias:
    def test_constant_skew_scalar(self):
        x = np.linspace(-5, 5, 101)
        c = 1.3
        Psi = np.broadcast_to(1j * c * np.eye(2), (x.size, 2, 2)).copy()
        rep = para_callias_check(x, SIGMA1, Psi, K=(0.0, 0.0), Lambda=c * c * 0.999)
        assert rep.verdict
        assert rep.margin_outside == pytest.approx(c * c, rel=1e-9)

    def test_zero_fails(self):
        x = np.linspace(-5, 5, 101)
        rep = para_callias_check(x, SIGMA1, np.zeros((101, 2, 2)), (0.0, 0.0), 0.1)
        assert not rep.verdict

    def test_skewness_enforced(self):
        x = np.linspace(-1, 1, 11)
        Psi = np.broadcast_to(np.eye(2), (11, 2, 2)).copy()
        with pytest.raises(ValueError, match="skew"):
            para_callias_check(x, SIGMA1, Psi, (0.0, 0.0), 1.0)

    def test_consistency_with_callias_instance(self):
        # a passing constant-mass Callias potential commuting with the
        # symbol induces the skew boundary potential -sigma0 Phi0 (with the
        # skew Dirac symbol -i sigma1), and the para check agrees
        x = np.linspace(-5, 5, 101)
        mass = 1.5
        Phi = np.broadcast_to(mass * np.eye(2), (x.size, 2, 2)).copy()
        cal = callias_check(CalliasSpec(x, Phi, K=(0.0, 0.0), Lambda=mass**2 * 0.99))
        assert cal.verdict
        sigma0 = -1j * SIGMA1
        Psi = -np.einsum("ab,xbc->xac", sigma0, Phi)
        rep = para_callias_check(x, SIGMA1, Psi, K=(0.0, 0.0), Lambda=mass**2 * 0.99)
        assert rep.verdict
        assert rep.margin_outside == pytest.approx(cal.margin_outside, rel=1e-9)

    def test_conjugation_identity_for_anticommuting_symbol(self):
        # A + i s Phi0 = -s^-1 (A - i s Phi0) s when s anticommutes with A
        # and commutes with Phi0; for an isometric s the two perturbed
        # operators are then norm-equivalent with the substitution u -> s u
        rng = np.random.default_rng(2)
        n = 4
        M = rng.standard_normal((n, n))
        A = np.block([[np.zeros((n, n)), M.T], [M, np.zeros((n, n))]])
        s = np.block([[np.eye(n), np.zeros((n, n))], [np.zeros((n, n)), -np.eye(n)]])
        Phi0 = 1.7 * np.eye(2 * n)
        npt.assert_allclose(s @ A + A @ s, 0.0, atol=1e-12)
        plus = A + 1j * s @ Phi0
        minus = A - 1j * s @ Phi0
        npt.assert_allclose(plus, -np.linalg.inv(s) @ minus @ s, atol=1e-12)
        for _ in range(20):
            u = rng.standard_normal(2 * n) + 1j * rng.standard_normal(2 * n)
            assert np.linalg.norm(plus @ u) == pytest.approx(
                np.linalg.norm(minus @ (s @ u)))


class TestStronglyPara:
    def test_linear_growth_sqrt_windows(self):
        x = np.linspace(-30, 30, 1201)
        Psi = -1j * x[:, None, None] * SIGMA3[None, :, :]
        R_list = [4.0, 16.0, 64.0]
        windows = strongly_para_profile(x, SIGMA1, Psi, R_list)
        radii = [w[1] for w in windows]
        # margin x^2 - 1: K_R = [-sqrt(R+1), sqrt(R+1)]
        for R, r in zip(R_list, radii):
            assert r == pytest.approx(math.sqrt(R + 1.0), abs=0.1)
        assert radii[0] < radii[1] < radii[2]

    def test_bounded_potential_unbounded_window(self):
        x = np.linspace(-10, 10, 401)
        Psi = -1j * np.tanh(x)[:, None, None] * SIGMA3[None, :, :]
        windows = strongly_para_profile(x, SIGMA1, Psi, [0.5, 100.0])
        assert windows[-1] == "unbounded"

    def test_large_constant_empty_window(self):
        x = np.linspace(-5, 5, 101)
        Psi = np.broadcast_to(1j * 10.0 * np.eye(2), (101, 2, 2)).copy()
        windows = strongly_para_profile(x, SIGMA1, Psi, [50.0, 100.0])
        assert windows == [None, None]


class TestDiscretenessProxy:
    def test_free_circle_exact(self):
        def builder(n):
            return circle_dirac(CircleDiracSpec(n, shift=-0.5)).matrix

        rep = discreteness_proxy(builder, None, [8, 16], m=6)
        assert rep.stabilized
        assert max(rep.max_drift) < 1e-12

    def test_susy_oscillator_stabilizes(self):
        rep = discreteness_proxy(line_dirac, linear_psi, [200, 400], m=10)
        assert rep.stabilized
        assert max(rep.max_drift) < 1e-6
        # spectrum is +-sqrt(2 n); the truncation adds one edge zero mode
        # beside the true kernel, stable across truncations
        ev = np.sort(np.abs(np.array(rep.eigenvalues[-1])))
        assert ev[0] == pytest.approx(0.0, abs=1e-10)
        assert ev[1] == pytest.approx(0.0, abs=1e-10)
        assert ev[2] == pytest.approx(math.sqrt(2.0), abs=1e-8)

    def test_bounded_negative_control(self):
        rep = discreteness_proxy(line_dirac, bounded_psi, [200, 400], m=10)
        assert not rep.stabilized

    def test_increasing_truncations_required(self):
        with pytest.raises(ValueError):
            discreteness_proxy(line_dirac, None, [4, 4])


class TestMultiplier:
    def test_identity_cutoff(self):
        spec = CircleDiracSpec(8, shift=-0.5)
        rep = multiplier_halfnorm_check(spec, lambda th: np.ones_like(th))
        assert rep.operator_norm == pytest.approx(1.0, rel=1e-10)
        assert rep.admissible_constant >= 1.0 - 1e-12

    def test_bump_constant_tracks_gradient(self):
        spec = CircleDiracSpec(12, shift=-0.5)
        reports = []
        for width in (2.0, 1.0, 0.5):
            def chi(th, w=width):
                s = np.minimum(np.abs(th - math.pi), 2 * math.pi - np.abs(th - math.pi))
                return np.exp(-(s / w) ** 2)
            reports.append(multiplier_halfnorm_check(spec, chi))
        norms = [r.operator_norm for r in reports]
        bounds = [r.bound_without_constant for r in reports]
        assert norms[0] < norms[1] < norms[2]
        assert bounds[0] < bounds[1] < bounds[2]
        # a single universal constant covers the family
        assert max(r.admissible_constant for r in reports) < 3.0

    def test_high_mode_below_bound(self):
        spec = CircleDiracSpec(10, shift=-0.5)

        def chi(th):
            s = np.minimum(np.abs(th - math.pi), 2 * math.pi - np.abs(th - math.pi))
            return np.exp(-(s / 1.0) ** 2)

        rep = multiplier_halfnorm_check(spec, chi)
        sys = circle_dirac(spec)
        from halfcyl.spectral import frac_weights

        # ratio for the top mode stays below the measured operator norm
        n = sys.dimension
        e_top = np.eye(n)[:, -1]
        w = frac_weights(sys, 0.5, 1.0)
        assert rep.sampled_max_ratio <= rep.operator_norm * (1 + 1e-10)

    def test_doubling_stability(self):
        def chi(th):
            s = np.minimum(np.abs(th - math.pi), 2 * math.pi - np.abs(th - math.pi))
            return np.exp(-(s / 1.5) ** 2)

        r1 = multiplier_halfnorm_check(CircleDiracSpec(8, shift=-0.5), chi)
        r2 = multiplier_halfnorm_check(CircleDiracSpec(16, shift=-0.5), chi)
        assert abs(r2.operator_norm - r1.operator_norm) <= 0.15 * r1.operator_norm

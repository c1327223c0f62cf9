import math

import numpy as np
import pytest

from markovline import (
    CellUnions,
    CenteredWindows,
    ComposedWithMap,
    Constant,
    Heaviside,
    LinearCombination,
    Quasiperiodic,
    alternating_cells,
    ave_estimate,
    cell_integrals,
    cell_integrals_exact,
    cesaro_average,
    even_cell_indicator,
    window_average,
)

from .oracles import quad_integral


class TestWindowAverage:
    def test_heaviside_centered_is_half(self):
        for k in (1, 5, 50):
            assert window_average(Heaviside(), -k, k) == pytest.approx(0.5, abs=1e-15)

    def test_wave_over_full_periods_is_zero(self):
        F = Quasiperiodic(beta=2 * math.pi, period=1.0)
        assert abs(window_average(F, 3.0, 8.0)) < 1e-13

    def test_alternating_over_even_cell_count(self):
        F = alternating_cells()
        assert window_average(F, -4.0, 4.0) == pytest.approx(0.5)

    def test_bounded_by_sup_norm(self):
        rng = np.random.default_rng(1)
        F = Quasiperiodic(beta=1.3, period=1.0)
        for _ in range(20):
            lo = rng.uniform(-20, 19)
            hi = lo + rng.uniform(0.5, 10)
            assert abs(window_average(F, lo, hi)) <= F.sup_norm + 1e-12

    def test_linearity(self):
        F = Quasiperiodic(beta=math.pi, period=1.0)
        G = Heaviside()
        combo = LinearCombination(((2.0, F), (-0.5, G)))
        lo, hi = -3.0, 5.0
        direct = 2.0 * window_average(F, lo, hi) - 0.5 * window_average(G, lo, hi)
        assert window_average(combo, lo, hi) == pytest.approx(direct, abs=1e-12)


class TestCellIntegrals:
    def test_heaviside(self):
        vals = cell_integrals(Heaviside(), -3, 3)
        assert vals == [0, 0, 0, 1, 1, 1, 1]
        exact = cell_integrals_exact(Heaviside(), -3, 3)
        assert exact == [0, 0, 0, 1, 1, 1, 1]

    def test_wave_closed_form_matches_quadrature(self):
        gamma = 1.7
        F = Quasiperiodic(beta=gamma, period=1.0)
        for j in (-2, 0, 5):
            closed = F.interval_integral(j, j + 1)
            expected = (np.exp(1j * gamma * (j + 1)) - np.exp(1j * gamma * j)) / (
                1j * gamma
            )
            oracle = quad_integral(F, j, j + 1)
            assert closed == pytest.approx(expected, abs=1e-13)
            assert closed == pytest.approx(oracle, abs=1e-10)

    def test_wave_has_no_exact_rational_integral(self):
        F = Quasiperiodic(beta=1.0, period=1.0)
        assert cell_integrals_exact(F, 0, 1) is None

    def test_even_indicator(self):
        assert cell_integrals_exact(even_cell_indicator(), -2, 1) == [1, 0, 1, 0]


class TestDeclaredAve:
    def test_constant(self):
        assert Constant(3.0).declared_ave == 3.0

    def test_plane_waves(self):
        assert Quasiperiodic(beta=0.0, period=1.0).declared_ave == 1.0
        assert Quasiperiodic(beta=2 * math.pi, period=1.0).declared_ave == 0.0
        assert Quasiperiodic(beta=math.pi, period=1.0).declared_ave == 0.0

    def test_periodic_base_mean(self):
        # period-1 observable with base cos^2(pi x): cell mean 1/2
        F = Quasiperiodic(
            beta=0.0, period=1.0, base=lambda xs: np.cos(math.pi * xs) ** 2
        )
        assert F.declared_ave == pytest.approx(0.5, abs=1e-10)

    def test_heaviside_has_no_uniform_ave(self):
        assert Heaviside().declared_ave is None


class TestAveEstimate:
    def test_wave_estimate_goes_to_zero_with_bound(self):
        gamma = math.pi
        F = Quasiperiodic(beta=gamma, period=1.0)
        est = ave_estimate(F, CellUnions(), sizes=(8, 16, 32, 64, 128))
        assert abs(est.estimate) <= 2.0 / (gamma * 128)
        for size, _, deviation in est.rows:
            assert deviation <= 2.0 / (gamma * size) + 2.0 / (gamma * 128) + 1e-12
        assert est.converged

    def test_constant_exact_at_every_size(self):
        est = ave_estimate(Constant(1.0), CellUnions(), sizes=(4, 8, 16))
        assert est.estimate == 1.0
        assert est.uniformity_residual == 0.0
        assert est.converged

    def test_heaviside_families_disagree(self):
        # over arbitrary cell unions the averages range over {0, 1}:
        # no uniform average exists; over centered windows it is 1/2
        est_all = ave_estimate(Heaviside(), CellUnions(), sizes=(8, 16, 32))
        assert not est_all.converged
        assert est_all.uniformity_residual >= 0.4
        est_centered = ave_estimate(Heaviside(), CenteredWindows(), sizes=(8, 16, 32))
        assert est_centered.converged
        assert est_centered.estimate == pytest.approx(0.5, abs=1e-12)


class TestCesaro:
    def test_periodic_function_is_fixed(self):
        F = Quasiperiodic(beta=2 * math.pi, period=1.0)
        A = cesaro_average(F, 7, 1.0)
        xs = np.linspace(-3, 3, 101)
        assert np.max(np.abs(A(xs) - F(xs))) < 1e-12

    def test_quasiperiodic_geometric_decay(self):
        beta = math.pi / 3
        F = Quasiperiodic(beta=beta, period=1.0)
        xs = np.linspace(-2, 2, 401)
        bound_const = 2.0 / abs(1.0 - np.exp(1j * beta))
        for k in (4, 16, 64):
            expected = abs(sum(np.exp(1j * beta * j) for j in range(k))) / k
            observed = np.max(np.abs(cesaro_average(F, k, 1.0)(xs)))
            assert observed == pytest.approx(expected, abs=1e-12)
            assert observed <= bound_const / k + 1e-12
        assert np.max(np.abs(cesaro_average(F, 64, 1.0)(xs))) < 0.04

    def test_alternating_pattern_averages(self):
        F = alternating_cells()
        A = cesaro_average(F, 2, 1.0)
        # averaging consecutive translates of the alternating 0/1 pattern
        # gives the constant 1/2
        xs = np.linspace(-4.75, 4.75, 39)
        assert np.max(np.abs(A(xs) - 0.5)) < 1e-12

    def test_commutes_with_translation_invariant_maps(self, nonlinear_ql):
        F = Quasiperiodic(beta=math.pi / 2, period=1.0)
        k = 5
        lhs = cesaro_average(ComposedWithMap(F, nonlinear_ql, 1), k, 1.0)
        rhs = ComposedWithMap(cesaro_average(F, k, 1.0), nonlinear_ql, 1)
        rng = np.random.default_rng(3)
        xs = rng.uniform(-20, 20, 1000)
        assert np.max(np.abs(lhs(xs) - rhs(xs))) <= 1e-12


class TestWindowFactorization:
    def test_window_average_equals_shifted_cesaro_mean(self):
        # Leb_V(F) over V = [k, l+1] equals the cell average of the
        # (l-k+1)-fold translate average shifted to the window start
        for beta in (math.pi / 5, 2 * math.pi, 0.9):
            F = Quasiperiodic(beta=beta, period=1.0)
            k, l = -3, 8
            lhs = window_average(F, float(k), float(l + 1))
            A = cesaro_average(F, l - k + 1, 1.0)
            rhs = window_average(A, float(k), float(k + 1))
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_cell_sequence_version(self):
        F = alternating_cells()
        k, l = -2, 5
        lhs = window_average(F, float(k), float(l + 1))
        A = cesaro_average(F, l - k + 1, 1.0)
        rhs = window_average(A, float(k), float(k + 1))
        assert lhs == pytest.approx(rhs, abs=1e-10)

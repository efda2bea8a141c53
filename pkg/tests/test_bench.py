import math

import numpy as np
import pytest

from bergman_heat import (ConfigError, SmoothingOperator, bergman_evaluator,
                          build_grid, comparison_norms, heat_apply,
                          matrix_free_norm, operator_matrix, rate_fit,
                          spectral_norm, sweep_form, uniformity_sweep)
from bergman_heat.bench import (fast_multiplication_matrix,
                                multiplication_matrix,
                                smoothing_operator_matrix)
from bergman_heat.errors import InvalidRunError
from bergman_heat.heat import SphericalHarmonicTransform
from bergman_heat.geometry import VolumeForm, fubini_study_form
from test_bergman import funk_hecke_eigenvalue


@pytest.fixture(scope="module")
def bench_grid():
    return build_grid(56, 112)


@pytest.fixture(scope="module")
def bench_sht(bench_grid):
    return SphericalHarmonicTransform(bench_grid, 16)


class TestOperatorMatrix:
    def test_identity_operator(self, bench_sht):
        mat = operator_matrix(lambda f: f, bench_sht)
        n = bench_sht.n_coeffs
        assert np.abs(mat.matrix - np.eye(n)).max() < 1e-10
        assert mat.tail_residual < 1e-12

    def test_heat_operator_diagonal(self, bench_sht):
        u = 0.01
        mat = operator_matrix(
            lambda f: bench_sht.synthesize(
                heat_apply(bench_sht.analyze(f), u)), bench_sht)
        degs = bench_sht.degrees
        target = np.diag(np.exp(-4 * math.pi * degs * (degs + 1) * u))
        assert np.abs(mat.matrix - target).max() < 1e-10

    def test_smoothing_operator_diagonal_for_metric_form(self, bench_grid,
                                                         bench_sht):
        p = 8
        form = fubini_study_form(bench_grid)
        op = SmoothingOperator(bergman_evaluator(p, form, bench_grid))
        mat = smoothing_operator_matrix(op, bench_sht)
        degs = bench_sht.degrees
        target = np.diag([funk_hecke_eigenvalue(p, l) for l in degs])
        assert np.abs(mat.matrix - target).max() < 1e-8

    def test_fast_paths_match_generic(self, bench_grid, bench_sht):
        form = VolumeForm(bench_grid, {(1, 0): -0.3, (2, 2): 0.1}, "mix")
        op = SmoothingOperator(bergman_evaluator(10, form, bench_grid))
        fast = smoothing_operator_matrix(op, bench_sht)
        slow = operator_matrix(op.apply, bench_sht)
        assert np.abs(fast.matrix - slow.matrix).max() < 1e-12
        assert np.abs(fast.column_norm_sq - slow.column_norm_sq).max() < 1e-12
        mf = fast_multiplication_matrix(form.eta, bench_sht)
        ms = multiplication_matrix(form.eta, bench_sht)
        assert np.abs(mf.matrix - ms.matrix).max() < 1e-12

    def test_q_range_is_band_limited_to_p(self, bench_grid, bench_sht):
        # products of degree-p sections span harmonics of degree <= p, so
        # the smoothing operator cannot leak once l_max >= p
        form = VolumeForm(bench_grid, {(1, 0): -0.3, (1, 1): 0.2}, "strong")
        op = SmoothingOperator(bergman_evaluator(8, form, bench_grid))
        tiny = SphericalHarmonicTransform(bench_grid, 8)
        mat = smoothing_operator_matrix(op, tiny)
        assert mat.tail_residual < 1e-12

    def test_tail_bound_flags_invalid_run(self, bench_grid):
        # p above the truncation forces heat-side leakage past l_max
        form = VolumeForm(bench_grid, {(1, 0): -0.3, (1, 1): 0.2}, "strong")
        tiny = SphericalHarmonicTransform(bench_grid, 8)
        with pytest.raises(InvalidRunError):
            comparison_norms(32, form, tiny, tail_bound=1e-9)


class TestSpectralNorm:
    def test_matches_dense_svd(self, rng):
        a = rng.normal(size=(80, 80))
        assert spectral_norm(a) == pytest.approx(np.linalg.norm(a, 2),
                                                 rel=1e-12)

    def test_large_path_with_degenerate_top(self):
        vals = np.repeat([3.0, 2.0, 1.0], [23, 300, 478])
        d = np.diag(vals)
        assert spectral_norm(d, dense_cutoff=10) == pytest.approx(3.0,
                                                                  rel=1e-12)


class TestComparisonNorms:
    def test_metric_form_closed_form(self, bench_grid, bench_sht):
        p = 8
        form = fubini_study_form(bench_grid)
        res = comparison_norms(p, form, bench_sht)
        ls = np.arange(bench_sht.l_max + 1)
        lam = np.array([funk_hecke_eigenvalue(p, l) for l in ls])
        heat = np.exp(-ls * (ls + 1.0) / p)
        assert res.norm1 == pytest.approx(np.abs(lam - heat).max(), rel=1e-8)
        scaled = 4 * math.pi * ls * (ls + 1.0) / p * np.abs(lam - heat)
        assert res.norm2 == pytest.approx(scaled.max(), rel=1e-8)

    def test_norm_shrinks_with_p(self, bench_grid, bench_sht):
        form = fubini_study_form(bench_grid)
        n8 = comparison_norms(8, form, bench_sht).norm1
        n32 = comparison_norms(32, form, bench_sht).norm1
        assert n32 < 0.3 * n8

    def test_argmax_mode_matches_diagonal_oracle(self, bench_grid, bench_sht):
        p = 8
        form = fubini_study_form(bench_grid)
        res = comparison_norms(p, form, bench_sht)
        ls = np.arange(bench_sht.l_max + 1)
        lam = np.array([funk_hecke_eigenvalue(p, l) for l in ls])
        gaps = np.abs(lam - np.exp(-ls * (ls + 1.0) / p))
        assert res.argmax_degree == int(np.argmax(gaps))

    def test_truncation_stability(self, bench_grid):
        form = VolumeForm(bench_grid, {(1, 0): -0.3}, "zonal-full")
        lo = SphericalHarmonicTransform(bench_grid, 14)
        hi = SphericalHarmonicTransform(bench_grid, 20)
        a = comparison_norms(16, form, lo)
        b = comparison_norms(16, form, hi)
        assert a.tail_residual < 1e-4
        assert abs(a.norm1 - b.norm1) < 1e-6
        assert abs(a.norm2 - b.norm2) < 1e-6

    def test_matrix_free_cross_check(self, bench_grid, bench_sht):
        for coeffs in ({}, {(1, 0): -0.3}):
            form = VolumeForm(bench_grid, coeffs, "probe")
            res = comparison_norms(16, form, bench_sht)
            est = matrix_free_norm(16, form, bench_sht)
            assert est == pytest.approx(res.norm1, rel=1e-5)


class TestRateFit:
    def test_exact_inverse_p(self):
        ps = [8, 16, 32, 64]
        slope, c_hat = rate_fit(ps, [1.0 / p for p in ps])
        assert slope == pytest.approx(-1.0, abs=1e-12)
        assert c_hat == pytest.approx(1.0, abs=1e-12)

    def test_exact_inverse_sqrt(self):
        ps = [8, 16, 32, 64]
        slope, _ = rate_fit(ps, [p ** -0.5 for p in ps])
        assert slope == pytest.approx(-0.5, abs=1e-12)

    def test_rejects_short_or_nonpositive(self):
        with pytest.raises(ConfigError):
            rate_fit([8, 16, 32], [1, 1, 1])
        with pytest.raises(ConfigError):
            rate_fit([8, 16, 32, 64], [1, 1, 0, 1])

    def test_measured_metric_form_slope(self, bench_grid, bench_sht):
        form = fubini_study_form(bench_grid)
        rep = sweep_form(form, [8, 16, 24, 32], bench_sht)
        assert rep.slope1 <= -0.75


class TestUniformity:
    def test_singleton_family_matches_single_fit(self, bench_grid, bench_sht):
        form = fubini_study_form(bench_grid)
        reports, summary = uniformity_sweep([form], [8, 16, 24, 32],
                                            bench_sht)
        single = sweep_form(form, [8, 16, 24, 32], bench_sht)
        assert reports[0].c_hat1 == pytest.approx(single.c_hat1, rel=1e-12)
        assert summary["ratio1"] == 1.0

    def test_amplitude_continuity(self, bench_grid, bench_sht):
        # shrinking the family amplitude pulls the constant to the baseline
        base = sweep_form(fubini_study_form(bench_grid), [8, 16, 24, 32],
                          bench_sht).c_hat1
        c_hats = []
        for amp in (0.2, 0.05):
            form = VolumeForm(bench_grid, {(1, 0): -amp}, f"z{amp}")
            c_hats.append(sweep_form(form, [8, 16, 24, 32],
                                     bench_sht).c_hat1)
        assert abs(c_hats[1] - base) < abs(c_hats[0] - base)
        assert abs(c_hats[1] - base) < 0.25 * abs(base)

    def test_density_floor_enforced(self, bench_grid, bench_sht):
        form = VolumeForm(bench_grid, {(1, 0): -1.5}, "deep")
        with pytest.raises(ConfigError):
            uniformity_sweep([form], [8, 16, 24, 32], bench_sht,
                             density_floor=0.5)

import math

import numpy as np
import pytest

from bergman_heat import (RADIUS, ConfigError, DensityKernel,
                          SmoothingOperator, SpherePoint, bergman_evaluator,
                          near_diagonal_residual, off_diagonal_sup,
                          rank_ratio, weight_change_residuals)


def funk_hecke_eigenvalue(p, l):
    """Zonal-kernel eigenvalue of the smoothing operator, exact product form."""
    out = 1.0
    for j in range(1, l + 1):
        out *= (p + 1.0 - j) / (p + 1.0 + j)
    return out


class TestRankRatio:
    def test_metric_form_value(self, grid, fs_form):
        assert rank_ratio(7, fs_form) == pytest.approx(8.0, abs=1e-12)

    def test_definition_inverts(self, grid, zonal_form):
        for p in (3, 12):
            assert rank_ratio(p, zonal_form) * zonal_form.volume \
                == pytest.approx(p + 1, abs=1e-12)

    def test_large_p_asymptotics(self, grid, zonal_form):
        # R_p / p -> 1/Vol with residual exactly (1/p)/Vol
        for p in (8, 32, 128):
            resid = rank_ratio(p, zonal_form) / p - 1.0 / zonal_form.volume
            assert resid * p == pytest.approx(1.0 / zonal_form.volume,
                                              abs=1e-12)


class TestSmoothingOperator:
    def test_constant_is_fixed_for_metric_form(self, grid, fs_form):
        op = SmoothingOperator(bergman_evaluator(8, fs_form, grid))
        ones = np.ones((grid.n_theta, grid.n_phi))
        assert np.abs(op.apply(ones) - 1.0).max() < 1e-8

    @pytest.mark.parametrize("l,m", [(1, 0), (2, 1), (4, -3)])
    def test_funk_hecke_eigenfunctions(self, grid, fs_form, sht, l, m):
        p = 8
        op = SmoothingOperator(bergman_evaluator(p, fs_form, grid))
        f = sht.basis_function(l, m)
        expected = funk_hecke_eigenvalue(p, l)
        assert np.abs(op.apply(f) - expected * f).max() < 1e-8

    def test_first_eigenvalue_value(self):
        assert funk_hecke_eigenvalue(8, 1) == pytest.approx(8.0 / 10.0)

    def test_positivity(self, grid, tilted_form, rng):
        op = SmoothingOperator(bergman_evaluator(6, tilted_form, grid))
        f = np.abs(rng.normal(size=(grid.n_theta, grid.n_phi)))
        assert op.apply(f).min() > -1e-10

    def test_self_adjoint_under_reference_form(self, grid, tilted_form, sht,
                                               rng):
        op = SmoothingOperator(bergman_evaluator(6, tilted_form, grid))
        c1 = rng.normal(size=sht.n_coeffs) / (1.0 + sht.degrees) ** 2
        c2 = rng.normal(size=sht.n_coeffs) / (1.0 + sht.degrees) ** 2
        f = sht.synthesize(sht.analyze(np.zeros_like(op.form.density)).copy_with(c1))
        g = sht.synthesize(sht.analyze(np.zeros_like(op.form.density)).copy_with(c2))
        w_nu = grid.node_weights * tilted_form.density
        lhs = np.sum(w_nu * op.apply(f) * g)
        rhs = np.sum(w_nu * f * op.apply(g))
        assert lhs == pytest.approx(rhs, abs=1e-8)

    def test_unit_image_matches_kernel_diagonal(self, grid, zonal_form):
        # reproducing property: R * Q(1) equals the kernel diagonal
        p = 6
        ev = bergman_evaluator(p, zonal_form, grid)
        op = SmoothingOperator(ev)
        image = op.apply(np.ones((grid.n_theta, grid.n_phi))) * op.rank_ratio
        assert np.abs(image - ev.diagonal_on_grid()).max() < 1e-8

    def test_density_kernel_accessor(self, grid, zonal_form):
        ev = bergman_evaluator(4, zonal_form, grid)
        kernel = DensityKernel(ev)
        t = np.array([0.5, 1.5])
        ph = np.array([0.3, 2.0])
        vals = kernel(t, ph, t, ph)
        assert np.all(vals >= 0)
        assert np.abs(vals - vals.T).max() < 1e-10
        assert np.abs(np.diag(vals)
                      - ev.kernel_modulus(t, ph, t, ph).diagonal() ** 2).max() < 1e-10


class TestOffDiagonal:
    def test_closed_form_at_achieved_distance(self, grid, fs_form):
        p = 8
        ev = bergman_evaluator(p, fs_form, grid)
        probe = off_diagonal_sup(ev, 0.2, theta_stride=2, phi_stride=2)
        q = (1.0 + math.cos(probe.min_distance / RADIUS)) / 2.0
        expected = (p + 1) / p * q ** (p / 2.0)
        assert probe.sup == pytest.approx(expected, rel=1e-10)

    def test_decreasing_in_p(self, grid, fs_form):
        sups = []
        for p in (8, 16):
            ev = bergman_evaluator(p, fs_form, grid)
            sups.append(off_diagonal_sup(ev, 0.2, 2, 2).sup)
        assert sups[1] < sups[0]

    def test_decreasing_in_eps(self, grid, fs_form):
        ev = bergman_evaluator(8, fs_form, grid)
        a = off_diagonal_sup(ev, 0.2, 2, 2).sup
        b = off_diagonal_sup(ev, 0.4, 2, 2).sup
        assert b < a

    def test_log_linear_decay_in_p(self, grid, fs_form):
        ps = [8, 12, 16, 20]
        vals = [off_diagonal_sup(bergman_evaluator(p, fs_form, grid),
                                 0.3, 2, 2).sup for p in ps]
        logs = np.log(vals)
        slope, intercept = np.polyfit(ps, logs, 1)
        assert slope < 0
        fitted = slope * np.asarray(ps) + intercept
        assert np.abs(fitted - logs).max() < 0.05

    def test_rejects_bad_eps(self, grid, fs_form):
        ev = bergman_evaluator(4, fs_form, grid)
        with pytest.raises(ConfigError):
            off_diagonal_sup(ev, 0.0)
        with pytest.raises(ConfigError):
            off_diagonal_sup(ev, 1.0)


class TestNearDiagonal:
    def test_center_residual_is_inverse_p(self, grid, fs_form):
        for p in (8, 16):
            ev = bergman_evaluator(p, fs_form, grid)
            probe = near_diagonal_residual(ev, SpherePoint(1.05, 0.4),
                                           window_constant=2.0)
            assert probe.center_residual == pytest.approx(1.0 / p, abs=1e-10)

    def test_gaussian_matches_model_kernel_modulus(self):
        # the comparison Gaussian is the rescaled flat-kernel modulus
        from bergman_heat import bargmann_kernel
        p = 16
        z = 0.21 + 0.13j
        lhs = abs(bargmann_kernel(math.sqrt(p) * z, 0.0))
        rhs = math.exp(-0.5 * math.pi * p * abs(z) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-14)

    def test_rejects_window_beyond_injectivity(self, grid, fs_form):
        ev = bergman_evaluator(8, fs_form, grid)
        with pytest.raises(ConfigError):
            near_diagonal_residual(ev, SpherePoint(1.0, 0.0),
                                   window_constant=3.0)


class TestWeightChange:
    @pytest.mark.parametrize("p", [4, 8, 16])
    def test_identities_all_forms(self, grid, fs_form, zonal_form,
                                  tilted_form, p):
        for form in (fs_form, zonal_form, tilted_form):
            res = weight_change_residuals(
                bergman_evaluator(p, form, grid), n_probe_functions=2)
            for key, value in res.items():
                assert value < 1e-8, f"{form.form_id}/{key} = {value}"

"""Derived kernels and the normalized smoothing operator.

The central object is the Markov-like smoothing operator

    (Q f)(x) = (1/R) * integral of K(x, y) f(y) d nu(y),

with K the squared Bergman kernel modulus and R the section count divided
by the reference volume.  Applications are implemented through the
metric-volume factorization (eta prefactor outside, metric-volume weights
inside), which collapses to colatitude quadratures of longitude modes and
keeps the cost quadratic in the section count.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fourier import (diagonal_modes, grid_to_modes, modes_to_grid,
                      padded_profile_products)
from .geometry import INJECTIVITY_RADIUS, exp_map, pairwise_distances, unit_vectors


@dataclass(frozen=True)
class DensityKernel:
    """Accessor bundle for the nonnegative smoothing density K(x, y)."""

    evaluator: object

    @property
    def p(self):
        return self.evaluator.p

    @property
    def form(self):
        return self.evaluator.form

    def __call__(self, theta_x, phi_x, theta_y, phi_y):
        return self.evaluator.density(theta_x, phi_x, theta_y, phi_y)

    def diagonal_on_grid(self):
        return self.evaluator.diagonal_on_grid() ** 2


def rank_ratio(p, form):
    """Section count over reference volume: (p+1) / Vol(nu)."""
    return (p + 1) / form.volume


class SmoothingOperator:
    """Normalized kernel smoothing operator bound to a Bergman evaluator."""

    def __init__(self, evaluator, mode_tol=1e-16):
        self.evaluator = evaluator
        self.grid = evaluator.grid
        self.form = evaluator.form
        self.p = evaluator.p
        self.rank_ratio = rank_ratio(self.p, self.form)
        self.mode_tol = mode_tol
        self._profiles = evaluator.basis.theta_profiles(self.grid.theta)
        self._mu_cap = min(self.p, self.grid.n_phi // 2 - 1)
        self._products = padded_profile_products(self._profiles, self._mu_cap)

    def _moment_matrix(self, weighted):
        """T[k, k'] = sum_nodes w * weighted * conj(s_k) s_k', via modes."""
        p = self.p
        grid = self.grid
        modes = grid_to_modes(weighted, grid.n_phi // 2)
        mags = np.abs(modes).max(axis=0)
        cut = self.mode_tol * mags.max() if mags.max() > 0 else 0.0
        T = np.zeros((p + 1, p + 1), dtype=complex)
        idx_all = np.arange(p + 1)
        for d in range(0, min(p, grid.n_phi // 2) + 1):
            if mags[d] <= cut and d > 0:
                continue
            weights = self.grid.w_theta * modes[:, d]
            diag = np.einsum("i,ik,ik->k", weights,
                             self._profiles[:, d:], self._profiles[:, :p + 1 - d])
            idx = idx_all[:p + 1 - d]
            T[idx + d, idx] = diag
            if d > 0:
                T[idx, idx + d] = np.conj(diag)
        return T

    def apply(self, values):
        """Apply the operator to real grid values; returns real grid values.

        Uses the factorized route: the density and the input are folded into
        a section moment matrix, conjugated by the inverse Gram, and the
        resulting quadratic form is synthesized back through its longitude
        modes.
        """
        values = np.asarray(values, dtype=float)
        if values.shape != (self.grid.n_theta, self.grid.n_phi):
            raise ConfigError("input values do not match the grid")
        T = self._moment_matrix(self.form.density * values)
        M = self.evaluator.kernel_matrix
        A = M @ T @ M
        modes = diagonal_modes(A, self._profiles, self._mu_cap,
                               products=self._products)
        return modes_to_grid(modes, self.grid.n_phi) / self.rank_ratio

    def apply_pointwise_direct(self, values, max_nodes=6000):
        """Reference route: quadrature of the density accessor against d nu.

        O(N^2) in grid nodes; intended for identity checks on small grids.
        """
        return self._apply_pointwise(values, factored=False, max_nodes=max_nodes)

    def apply_pointwise_factored(self, values, max_nodes=6000):
        """Reference route through the metric-volume factorization:
        eta(x) prefactor outside, metric-convention density against dv_X."""
        return self._apply_pointwise(values, factored=True, max_nodes=max_nodes)

    def _apply_pointwise(self, values, factored, max_nodes):
        grid = self.grid
        n_nodes = grid.n_theta * grid.n_phi
        if n_nodes > max_nodes:
            raise ConfigError(
                f"pointwise route limited to {max_nodes} nodes, grid has {n_nodes}")
        tt = grid.theta_mesh.ravel()
        pp = grid.phi_mesh.ravel()
        f = np.asarray(values, dtype=float).ravel()
        if factored:
            kernel = self.evaluator.omega_density(tt, pp, tt, pp)
            w = grid.node_weights.ravel()
            eta_x = self.form.eta.ravel()
            out = eta_x * (kernel @ (w * f)) / self.rank_ratio
        else:
            kernel = self.evaluator.density(tt, pp, tt, pp)
            w_nu = (grid.node_weights * self.form.density).ravel()
            out = (kernel @ (w_nu * f)) / self.rank_ratio
        return out.reshape(grid.n_theta, grid.n_phi)


@dataclass
class DecayProbe:
    """Result of the off-diagonal supremum scan."""

    sup: float
    min_distance: float
    n_pairs: int


def off_diagonal_sup(evaluator, eps, theta_stride=1, phi_stride=1,
                     block=1024):
    """Supremum over decimated node pairs at geodesic distance >= eps of

        p^{-1} * eta(x) eta(y) * sqrt(K_metric(x, y)),

    the metric-convention kernel modulus made dimensionless.  Decreasing in
    eps.  Also reports the smallest distance actually achieved, so closed
    forms can be evaluated at the same argument.
    """
    if not 0.0 < eps < INJECTIVITY_RADIUS:
        raise ConfigError(f"eps must lie in (0, {INJECTIVITY_RADIUS:.6f})")
    grid = evaluator.grid
    theta = grid.theta[::theta_stride]
    phi = grid.phi[::phi_stride]
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    tt = tt.ravel()
    pp = pp.ravel()
    vecs = unit_vectors(tt, pp)
    eta = evaluator.form.eta_at(tt, pp)
    sigma = evaluator.section_matrix(tt, pp)
    half = sigma @ evaluator.kernel_matrix
    sup = 0.0
    min_dist = math.inf
    n_pairs = 0
    for start in range(0, len(tt), block):
        stop = min(start + block, len(tt))
        dist = pairwise_distances(vecs[start:stop], vecs)
        mask = dist >= eps
        if not mask.any():
            continue
        mod = np.abs(half[start:stop] @ sigma.conj().T)
        vals = mod * np.sqrt(np.outer(eta[start:stop], eta))
        sup = max(sup, float(vals[mask].max() / evaluator.p))
        min_dist = min(min_dist, float(dist[mask].min()))
        n_pairs += int(mask.sum())
    if n_pairs == 0:
        raise ConfigError("no node pairs at the requested separation")
    return DecayProbe(sup=sup, min_distance=min_dist, n_pairs=n_pairs)


@dataclass
class NearDiagonalProbe:
    """Gaussian comparison of the rescaled kernel in normal coordinates."""

    sup_residual: float
    center_residual: float
    window: float
    n_samples: int


def tangent_window(radius, n_radial=17, n_angular=17):
    """Polar sample of tangent vectors in a disc, shape (n, 2); includes 0."""
    radii = np.linspace(0.0, radius, n_radial)
    angles = 2.0 * np.pi * np.arange(n_angular) / n_angular
    pts = [np.array([0.0, 0.0])]
    for r in radii[1:]:
        for a in angles:
            pts.append(np.array([r * math.cos(a), r * math.sin(a)]))
    return np.array(pts)


def near_diagonal_residual(evaluator, x0, window_constant=3.0,
                           n_radial=17, n_angular=17):
    """Sup over a tangent window of the rescaled-kernel/Gaussian mismatch.

    Both points run over ``|Z| <= window_constant / sqrt(p)`` in normal
    coordinates at x0; the comparison is between ``p^{-1}`` times the
    metric-convention kernel modulus and the flat Gaussian
    ``exp(-(pi/2) p |Z - Z'|^2)``.  Moduli only; no phase comparison.
    """
    p = evaluator.p
    radius = window_constant / math.sqrt(p)
    if radius >= INJECTIVITY_RADIUS:
        raise ConfigError(
            f"window {radius:.4f} reaches the injectivity radius; raise p")
    Z = tangent_window(radius, n_radial, n_angular)
    points = [exp_map(x0, z) for z in Z]
    theta = np.array([pt.theta for pt in points])
    phi = np.array([pt.phi for pt in points])
    mod = evaluator.omega_modulus(theta, phi, theta, phi)
    diff = Z[:, None, :] - Z[None, :, :]
    gauss = np.exp(-0.5 * math.pi * p * np.sum(diff * diff, axis=-1))
    resid = np.abs(mod / p - gauss)
    return NearDiagonalProbe(
        sup_residual=float(resid.max()),
        center_residual=float(resid[0, 0]),
        window=radius,
        n_samples=len(Z),
    )


def weight_change_residuals(evaluator, n_probe_functions=4, block=768,
                            seed=20240811):
    """Max residuals of the reference/metric convention identities.

    One blocked pass over all node pairs of the full grid feeds every check:

    - ``kernel_eta``:   | |P_ref(x,y)| - eta(y) |P_metric(x,y)| | over all pairs
    - ``density_eta``:  | K(x,y) - eta(x) eta(y) K_metric(x,y) | over all pairs
    - ``metric_symmetry``: | K_metric(x,y) - K_metric(y,x) | (frame factors cancel)
    - ``frame_factor``: | |P_metric|^2 - |P_metric_coef|^2 * eta(y)/eta(x) |
    - ``hermitian_symmetry``: | P(x,y) - conj(P(y,x)) | over all pairs
    - ``operator_factorization``: direct vs eta-factored vs fast smoothing
      application on random band-limited probes
    - ``reproducing``: full-grid quadrature reproduction of basis sections
    - ``projection_trace``: | quadrature of |P(x,x)| d nu - (p+1) |
    """
    grid = evaluator.grid
    form = evaluator.form
    tt = grid.theta_mesh.ravel()
    pp = grid.phi_mesh.ravel()
    eta = form.eta.ravel()
    rho = form.density.ravel()
    w = grid.node_weights.ravel()
    sigma = evaluator.section_matrix(tt, pp)
    half = sigma @ evaluator.kernel_matrix
    op = SmoothingOperator(evaluator)
    rng = np.random.default_rng(seed)
    probes = np.stack([_random_band_limited(grid, rng, l_max=6).ravel()
                       for _ in range(n_probe_functions)], axis=1)
    direct = np.empty_like(probes)
    factored = np.empty_like(probes)
    out = {"kernel_eta": 0.0, "density_eta": 0.0, "metric_symmetry": 0.0,
           "frame_factor": 0.0, "hermitian_symmetry": 0.0}
    for start in range(0, len(tt), block):
        stop = min(start + block, len(tt))
        rows = slice(start, stop)
        coef = half[rows] @ sigma.conj().T
        coef_t = (half @ sigma[rows].conj().T).T
        mod_ref = np.abs(coef)
        omega_coef = coef * rho[None, :]
        gauge_sq = eta[None, :] / eta[rows, None]
        k_metric = np.abs(omega_coef) ** 2 * gauge_sq
        out["kernel_eta"] = max(out["kernel_eta"], float(
            np.abs(mod_ref - eta[None, :] * np.abs(omega_coef)).max()))
        out["density_eta"] = max(out["density_eta"], float(
            np.abs(mod_ref ** 2
                   - eta[rows, None] * eta[None, :] * k_metric).max()))
        swapped = np.abs(coef_t * rho[rows, None]) ** 2 / gauge_sq
        out["metric_symmetry"] = max(out["metric_symmetry"], float(
            np.abs(k_metric - swapped).max()))
        mod_metric_sq = (np.abs(omega_coef) * np.sqrt(gauge_sq)) ** 2
        out["frame_factor"] = max(out["frame_factor"], float(
            np.abs(mod_metric_sq - np.abs(omega_coef) ** 2 * gauge_sq).max()))
        out["hermitian_symmetry"] = max(out["hermitian_symmetry"], float(
            np.abs(coef - np.conj(coef_t)).max()))
        # the two quadrature routes of the smoothing operator share the blocks
        direct[rows] = (mod_ref ** 2) @ (w[:, None] * rho[:, None] * probes)
        factored[rows] = eta[rows, None] * (k_metric @ (w[:, None] * probes))
    direct /= op.rank_ratio
    factored /= op.rank_ratio
    resid = float(np.abs(direct - factored).max())
    for j in range(n_probe_functions):
        fast = op.apply(probes[:, j].reshape(grid.n_theta, grid.n_phi))
        resid = max(resid, float(np.abs(direct[:, j] - fast.ravel()).max()))
    out["operator_factorization"] = resid
    repro = evaluator.reproduce_sections(tt[::97], pp[::97])
    target = evaluator.section_matrix(tt[::97], pp[::97])
    out["reproducing"] = float(np.abs(repro - target).max())
    diag = evaluator.diagonal_on_grid()
    trace = np.sum(grid.node_weights * form.density * diag).item()
    out["projection_trace"] = abs(trace - (evaluator.p + 1))
    return out


def _random_band_limited(grid, rng, l_max=6):
    from .harmonics import real_sph_harm
    values = np.zeros((grid.n_theta, grid.n_phi))
    for l in range(l_max + 1):
        for m in range(-l, l + 1):
            values += rng.normal(scale=1.0 / (1 + l)) * real_sph_harm(
                l, m, grid.theta_mesh, grid.phi_mesh)
    return values

"""Operator-norm benchmark: smoothing operator vs damped heat flow.

Both sides of the comparison are assembled as matrices on the truncated
real-harmonic basis (columns are transforms of the operator applied to each
basis function).  The top singular value of the difference is a lower bound
of the true L2 operator norm; per-matrix tail residuals record how much
column mass escapes the truncation, normalized by the largest column so
that structurally-zero columns cannot poison the validity flag.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .bergman import SmoothingOperator
from .errors import ConfigError, InvalidRunError
from .fourier import set_batch_diagonal
from .heat import heat_apply
from .sections import bergman_evaluator


@dataclass
class OperatorMatrix:
    """Matrix of an operator on the truncated harmonic basis."""

    l_max: int
    matrix: np.ndarray
    tail_residual: float
    column_norm_sq: np.ndarray
    column_kept_sq: np.ndarray


def _tail_residual(column_norm_sq, column_kept_sq, floor=1e-300):
    leak = np.maximum(column_norm_sq - column_kept_sq, 0.0)
    scale = max(float(column_norm_sq.max(initial=0.0)), floor)
    return float(leak.max(initial=0.0) / scale)


def operator_matrix(op, sht, tail_bound=None):
    """Assemble columns ``analyze(op(Y_lm))`` with Parseval tail tracking.

    ``op`` maps real grid values to real grid values.  If ``tail_bound`` is
    given, a tail residual above it raises (invalid run: raise l_max).
    """
    n = sht.n_coeffs
    matrix = np.zeros((n, n))
    col_norm = np.zeros(n)
    col_kept = np.zeros(n)
    idx = 0
    for l in range(sht.l_max + 1):
        for m in range(-l, l + 1):
            values = op(sht.basis_function(l, m))
            coeffs = sht.analyze(values)
            matrix[:, idx] = coeffs.values
            col_norm[idx] = sht.grid_norm_sq(values)
            col_kept[idx] = coeffs.norm_sq()
            idx += 1
    tail = _tail_residual(col_norm, col_kept)
    if tail_bound is not None and tail > tail_bound:
        raise InvalidRunError(
            f"tail residual {tail:.3e} exceeds bound {tail_bound:.3e}; "
            "raise l_max")
    return OperatorMatrix(sht.l_max, matrix, tail, col_norm, col_kept)


def multiplication_matrix(values, sht, tail_bound=None):
    """Matrix of pointwise multiplication by a fixed grid function."""
    return operator_matrix(lambda f: values * f, sht, tail_bound=tail_bound)


def _column_input_modes(sht, mode_table, chunk_lm, d_count):
    """Longitude modes of (grid function) * Y_lm for a chunk of basis columns.

    ``mode_table`` holds the function's full DFT modes per colatitude node.
    Output shape (n_cols, n_theta, d_count); mode d of a grid product is the
    wrapped convolution of the table with the two harmonic modes.
    """
    grid = sht.grid
    n_phi = grid.n_phi
    out = np.empty((len(chunk_lm), grid.n_theta, d_count), dtype=complex)
    ds = np.arange(d_count)
    for row, (l, m) in enumerate(chunk_lm):
        prof = sht.tables[abs(m)][l - abs(m)]
        if m == 0:
            modes = mode_table[:, ds % n_phi]
        else:
            plus = mode_table[:, (ds - abs(m)) % n_phi]
            minus = mode_table[:, (ds + abs(m)) % n_phi]
            if m > 0:
                modes = (plus + minus) / math.sqrt(2.0)
            else:
                modes = (-1j * plus + 1j * minus) / math.sqrt(2.0)
        out[row] = prof[:, None] * modes
    return out


def _modes_to_coeff_block(sht, dmodes, mu_weight_nyquist=False):
    """Harmonic coefficients and quadrature norms of mode-space columns.

    ``dmodes`` has shape (n_cols, n_theta, n_modes) holding the nonnegative
    longitude modes of real functions.  Returns ``(block, norm_sq)`` with
    the coefficient block of shape (n_coeffs, n_cols).
    """
    grid = sht.grid
    w = grid.w_theta
    n_cols, _, n_modes = dmodes.shape
    mode_sq = np.abs(dmodes) ** 2
    weights = np.full(n_modes, 2.0)
    weights[0] = 1.0
    if mu_weight_nyquist and n_modes - 1 == grid.n_phi // 2 \
            and grid.n_phi % 2 == 0:
        weights[-1] = 1.0
    norm_sq = w @ (mode_sq @ weights).T
    block = np.zeros((sht.n_coeffs, n_cols))
    ls = np.arange(sht.l_max + 1)
    block[ls * (ls + 1), :] = sht.tables[0] @ (w[:, None] * dmodes[:, :, 0].real.T)
    top = min(sht.l_max, n_modes - 1)
    for m in range(1, top + 1):
        ls = np.arange(m, sht.l_max + 1)
        wd = w[:, None] * dmodes[:, :, m].T
        block[ls * (ls + 1) + m, :] = math.sqrt(2.0) * (sht.tables[m] @ wd.real)
        block[ls * (ls + 1) - m, :] = -math.sqrt(2.0) * (sht.tables[m] @ wd.imag)
    return block, norm_sq


def _lm_chunks(l_max, chunk):
    lm_list = [(l, m) for l in range(l_max + 1) for m in range(-l, l + 1)]
    for start in range(0, len(lm_list), chunk):
        yield start, lm_list[start:start + chunk]


def smoothing_operator_matrix(smoother, sht, tail_bound=None, chunk=96,
                              mode_tol=1e-16):
    """Batched equivalent of ``operator_matrix(smoother.apply, sht)``.

    Assembles whole chunks of basis columns at once so the per-column small
    matrix products run as batched BLAS calls; works in longitude-mode space
    throughout (no per-column grids).  Matches the generic path to roundoff.
    """
    grid = sht.grid
    if grid is not smoother.grid:
        raise ConfigError("transform and smoother live on different grids")
    p = smoother.p
    profiles = smoother._profiles
    M = smoother.evaluator.kernel_matrix
    w = grid.w_theta
    d_count = min(p, grid.n_phi // 2) + 1
    mu_cap = smoother._mu_cap
    products = [profiles[:, d:] * profiles[:, :p + 1 - d]
                for d in range(max(d_count, mu_cap + 1))]
    # padded stack SP[mu, k, i] for the batched diagonal contraction
    padded = np.zeros((mu_cap + 1, p + 1, grid.n_theta))
    for mu in range(mu_cap + 1):
        padded[mu, :p + 1 - mu, :] = products[mu].T
    n = sht.n_coeffs
    matrix = np.zeros((n, n))
    col_norm = np.zeros(n)
    col_kept = np.zeros(n)
    for start, chunk_lm in _lm_chunks(sht.l_max, chunk):
        stop = start + len(chunk_lm)
        n_cols = len(chunk_lm)
        hmodes = _column_input_modes(sht, smoother.form.density_modes,
                                     chunk_lm, d_count)
        mags = np.abs(hmodes).max(axis=(0, 1))
        cut = mode_tol * mags.max() if mags.max() > 0 else 0.0
        T = np.zeros((n_cols, p + 1, p + 1), dtype=complex)
        for d in range(d_count):
            if d > 0 and mags[d] <= cut:
                continue
            weighted = hmodes[:, :, d] * w[None, :]
            diag = weighted.real @ products[d] + 1j * (weighted.imag @ products[d])
            set_batch_diagonal(T, d, diag)
            if d > 0:
                set_batch_diagonal(T, d, np.conj(diag), upper=True)
        T /= smoother.rank_ratio
        A = np.matmul(np.matmul(M, T), M)
        diags = np.zeros((mu_cap + 1, n_cols, p + 1), dtype=complex)
        for mu in range(mu_cap + 1):
            diags[mu, :, :p + 1 - mu] = np.diagonal(A, offset=-mu,
                                                    axis1=1, axis2=2)
        stacked = (np.matmul(np.ascontiguousarray(diags.real), padded)
                   + 1j * np.matmul(np.ascontiguousarray(diags.imag), padded))
        dmodes = stacked.transpose(1, 2, 0)
        block, norms = _modes_to_coeff_block(sht, dmodes)
        matrix[:, start:stop] = block
        col_norm[start:stop] = norms
        col_kept[start:stop] = np.sum(block ** 2, axis=0)
    tail = _tail_residual(col_norm, col_kept)
    if tail_bound is not None and tail > tail_bound:
        raise InvalidRunError(
            f"tail residual {tail:.3e} exceeds bound {tail_bound:.3e}; "
            "raise l_max")
    return OperatorMatrix(sht.l_max, matrix, tail, col_norm, col_kept)


def fast_multiplication_matrix(values, sht, tail_bound=None, chunk=256):
    """Batched multiplication-operator matrix via longitude-mode convolution.

    Matches ``multiplication_matrix`` to roundoff at a fraction of the cost.
    """
    grid = sht.grid
    mode_table = np.fft.fft(np.asarray(values, dtype=float), axis=1) / grid.n_phi
    d_count = grid.n_phi // 2 + 1
    n = sht.n_coeffs
    matrix = np.zeros((n, n))
    col_norm = np.zeros(n)
    col_kept = np.zeros(n)
    for start, chunk_lm in _lm_chunks(sht.l_max, chunk):
        stop = start + len(chunk_lm)
        dmodes = _column_input_modes(sht, mode_table, chunk_lm, d_count)
        block, norms = _modes_to_coeff_block(sht, dmodes,
                                             mu_weight_nyquist=True)
        matrix[:, start:stop] = block
        col_norm[start:stop] = norms
        col_kept[start:stop] = np.sum(block ** 2, axis=0)
    tail = _tail_residual(col_norm, col_kept)
    if tail_bound is not None and tail > tail_bound:
        raise InvalidRunError(
            f"tail residual {tail:.3e} exceeds bound {tail_bound:.3e}; "
            "raise l_max")
    return OperatorMatrix(sht.l_max, matrix, tail, col_norm, col_kept)


def spectral_norm(matrix, dense_cutoff=600):
    """Largest singular value.

    Small matrices go through the full SVD; larger ones through the top
    eigenvalue of the normal matrix (LAPACK subset driver), which stays
    robust when the top singular value is degenerate, as happens for
    rotation-invariant data.
    """
    n = matrix.shape[0]
    if n <= dense_cutoff:
        return float(np.linalg.norm(matrix, 2))
    normal = matrix.T @ matrix
    top = eigh(normal, subset_by_index=[n - 1, n - 1], eigvals_only=True,
               driver="evr")
    return float(math.sqrt(max(top[0], 0.0)))


def spectral_norm_with_mode(matrix):
    """Largest singular value and the index carrying the top singular vector.

    The index locates the dominant entry of the top right singular vector,
    i.e. the input slot where the operator-norm bound is attained.
    """
    n = matrix.shape[0]
    normal = matrix.T @ matrix
    vals, vecs = eigh(normal, subset_by_index=[n - 1, n - 1], driver="evr")
    return (float(math.sqrt(max(vals[0], 0.0))),
            int(np.argmax(np.abs(vecs[:, 0]))))


@dataclass
class ComparisonResult:
    """Both operator-norm gaps of the benchmark at a single (p, form) cell."""

    p: int
    form_id: str
    norm1: float
    norm2: float
    tail_smoothing: float
    tail_heat: float
    argmax_degree: int

    @property
    def tail_residual(self):
        return max(self.tail_smoothing, self.tail_heat)


def heat_side_matrix(mult, sht, p):
    """Matrix of f -> eta * heat(f, 1/(4 pi p)) from a multiplication matrix.

    Smoothing acts first (column scaling), then the pointwise factor; the
    composed tail reuses the multiplication columns' Parseval data.
    """
    degs = sht.degrees
    factors = np.exp(-degs * (degs + 1.0) / p)
    matrix = mult.matrix * factors[None, :]
    col_norm = mult.column_norm_sq * factors ** 2
    col_kept = mult.column_kept_sq * factors ** 2
    tail = _tail_residual(col_norm, col_kept)
    return OperatorMatrix(sht.l_max, matrix, tail, col_norm, col_kept)


def comparison_norms(p, form, sht, mult=None, tail_bound=1e-3,
                     cond_limit=1e12):
    """Operator norms of the two benchmark differences at one (p, form) cell.

    norm1 gauges ``Q - (Vol ratio) * eta * heat``; norm2 left-composes the
    difference with ``Laplacian / p``.  The multiplication-by-eta matrix may
    be passed in (it is p-independent and reusable across a sweep).
    """
    grid = sht.grid
    evaluator = bergman_evaluator(p, form, grid, cond_limit=cond_limit)
    smoother = SmoothingOperator(evaluator)
    q_mat = smoothing_operator_matrix(smoother, sht, tail_bound=tail_bound)
    if mult is None:
        mult = fast_multiplication_matrix(form.eta, sht)
    h_mat = heat_side_matrix(mult, sht, p)
    if h_mat.tail_residual > tail_bound:
        raise InvalidRunError(
            f"heat-side tail residual {h_mat.tail_residual:.3e} exceeds "
            f"{tail_bound:.3e}; raise l_max")
    ratio = form.volume
    diff = q_mat.matrix - ratio * h_mat.matrix
    norm1, mode = spectral_norm_with_mode(diff)
    lam_over_p = sht.eigenvalues / p
    norm2 = spectral_norm(lam_over_p[:, None] * diff)
    return ComparisonResult(p=p, form_id=form.form_id, norm1=norm1,
                            norm2=norm2, tail_smoothing=q_mat.tail_residual,
                            tail_heat=h_mat.tail_residual,
                            argmax_degree=int(sht.degrees[mode]))


def rate_fit(p_values, norms):
    """Least-squares slope of log(norm) vs log(p) plus the bound constant.

    Returns ``(slope, c_hat)`` with ``c_hat = max_p p * norm``.  Requires at
    least four points and positive norms.
    """
    p_values = np.asarray(p_values, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if len(p_values) < 4:
        raise ConfigError("rate fit needs at least 4 values of p")
    if np.any(norms <= 0.0):
        raise ConfigError("rate fit requires positive norms")
    slope = float(np.polyfit(np.log(p_values), np.log(norms), 1)[0])
    c_hat = float(np.max(p_values * norms))
    return slope, c_hat


@dataclass
class SweepCell:
    p: int
    result: ComparisonResult


@dataclass
class FormReport:
    """Rate report of one volume form over the p grid."""

    form_id: str
    p_values: list
    norms1: list
    norms2: list
    tails: list
    argmax_degrees: list
    slope1: float = field(default=math.nan)
    slope2: float = field(default=math.nan)
    c_hat1: float = field(default=math.nan)
    c_hat2: float = field(default=math.nan)

    def finalize(self):
        self.slope1, self.c_hat1 = rate_fit(self.p_values, self.norms1)
        self.slope2, self.c_hat2 = rate_fit(self.p_values, self.norms2)
        return self

    def bounded_ratio(self, norms):
        scaled = np.asarray(self.p_values, dtype=float) * np.asarray(norms)
        return float(scaled.max() / np.median(scaled))


def sweep_form(form, p_values, sht, tail_bound=1e-3):
    """Run the benchmark over a p grid for one form; reuses the eta matrix."""
    mult = fast_multiplication_matrix(form.eta, sht)
    report = FormReport(form_id=form.form_id, p_values=list(p_values),
                        norms1=[], norms2=[], tails=[], argmax_degrees=[])
    for p in p_values:
        cell = comparison_norms(p, form, sht, mult=mult, tail_bound=tail_bound)
        report.norms1.append(cell.norm1)
        report.norms2.append(cell.norm2)
        report.tails.append(cell.tail_residual)
        report.argmax_degrees.append(cell.argmax_degree)
    return report.finalize()


def uniformity_sweep(forms, p_values, sht, tail_bound=1e-3,
                     density_floor=0.0):
    """Benchmark a family of volume forms and summarize bound constants.

    Rejects family members whose density dips below ``density_floor``.
    Returns ``(reports, summary)`` where the summary holds the max/min
    ratios of the fitted constants across the family.
    """
    reports = []
    for form in forms:
        if form.density_inf < density_floor:
            raise ConfigError(
                f"form {form.form_id} density {form.density_inf:.3e} below "
                f"floor {density_floor:.3e}")
        reports.append(sweep_form(form, p_values, sht, tail_bound=tail_bound))
    c1 = [r.c_hat1 for r in reports]
    c2 = [r.c_hat2 for r in reports]
    summary = {
        "c_hat1": c1,
        "c_hat2": c2,
        "ratio1": max(c1) / min(c1),
        "ratio2": max(c2) / min(c2),
    }
    return reports, summary


def matrix_free_norm(p, form, sht, n_iter=300, tol=1e-12):
    """Power-iteration estimate of norm1 without assembling matrices.

    The difference operator acts on grid functions; its adjoint for the
    metric-volume inner product follows from self-adjointness of both sides
    under the reference form: ``D*(g) = rho * D(eta * g)``.  Deterministic
    start vector; intended as a cross-check at small p.
    """
    grid = sht.grid
    evaluator = bergman_evaluator(p, form, grid)
    smoother = SmoothingOperator(evaluator)
    ratio = form.volume
    u_time = 1.0 / (4.0 * math.pi * p)

    def apply_diff(f):
        heat_part = sht.synthesize(heat_apply(sht.analyze(f), u_time))
        return smoother.apply(f) - ratio * form.eta * heat_part

    def apply_adjoint(g):
        return form.density * apply_diff(form.eta * g)

    weights = grid.node_weights
    u = sht.basis_function(1, 0) + 0.5 * sht.basis_function(2, 1) \
        + 0.25 * sht.basis_function(3, -2) + 1.0
    u /= math.sqrt(float(np.sum(weights * u * u)))
    sigma = 0.0
    for _ in range(n_iter):
        du = apply_diff(u)
        new_sigma = math.sqrt(float(np.sum(weights * du * du)))
        v = apply_adjoint(du)
        norm_v = math.sqrt(float(np.sum(weights * v * v)))
        if norm_v == 0.0:
            return 0.0
        u = v / norm_v
        if abs(new_sigma - sigma) <= tol * max(new_sigma, 1.0):
            sigma = new_sigma
            break
        sigma = new_sigma
    return sigma

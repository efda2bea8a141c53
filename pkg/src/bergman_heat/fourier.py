"""Longitude-Fourier helpers shared by the kernel and operator machinery.

Functions on the product grid are handled as colatitude profiles of their
longitude modes; quadratic section expressions reduce to sums along the
diagonals of a coefficient matrix.
"""

import numpy as np

from .errors import InvalidRunError


def modes_to_grid(modes, n_phi):
    """Real grid values of ``sum_mu d_mu exp(i mu phi)`` with Hermitian modes.

    ``modes[:, mu]`` holds d_mu for mu >= 0; d_{-mu} is its conjugate.
    """
    n_half = n_phi // 2 + 1
    buf = np.zeros((modes.shape[0], n_half), dtype=complex)
    cols = min(modes.shape[1], n_half)
    buf[:, :cols] = modes[:, :cols] * n_phi
    return np.fft.irfft(buf, n=n_phi, axis=1)


def grid_to_modes(values, n_modes):
    """Longitude DFT modes (1/n) sum_j f exp(-i m phi_j), columns 0..n_modes."""
    f = np.fft.rfft(np.asarray(values, dtype=float), axis=1)
    n_phi = values.shape[1]
    return f[:, :n_modes + 1] / n_phi


def padded_profile_products(profiles, mu_cap):
    """Stack SP[mu, i, k] = a_{k+mu}(theta_i) a_k(theta_i), zero padded.

    Shape (mu_cap+1, n_theta, dim); entries with k+mu >= dim are zero.
    """
    n_theta, dim = profiles.shape
    out = np.zeros((mu_cap + 1, n_theta, dim))
    for mu in range(mu_cap + 1):
        out[mu, :, :dim - mu] = profiles[:, mu:] * profiles[:, :dim - mu]
    return out


def set_batch_diagonal(T, d, values, upper=False):
    """Write ``values`` onto diagonal d of every matrix in a (n, P, P) batch.

    Lower diagonal holds entries [k+d, k]; ``upper`` writes [k, k+d].  Uses
    flat strided views, which beats advanced indexing for many small writes.
    """
    n, P, _ = T.shape
    flat = T.reshape(n, P * P)
    start = d if upper else d * P
    flat[:, start::P + 1][:, :P - d] = values


def padded_diagonals(matrix, mu_cap):
    """D[mu, k] = matrix[k+mu, k], zero padded to a rectangular stack."""
    dim = matrix.shape[0]
    out = np.zeros((mu_cap + 1, dim), dtype=matrix.dtype)
    for mu in range(mu_cap + 1):
        out[mu, :dim - mu] = np.diagonal(matrix, offset=-mu)
    return out


def diagonal_modes(matrix, profiles, mu_cap, products=None, clip_tol=1e-8):
    """Longitude modes of x -> sigma(x)^T @ matrix @ conj(sigma(x)).

    Returns d with shape (n_theta, mu_cap+1); the mu < 0 modes are the
    conjugates because the matrix is Hermitian.  Raises if diagonals beyond
    ``mu_cap`` carry non-negligible weight (the longitude grid would alias).
    """
    dim = matrix.shape[0]
    if mu_cap < dim - 1:
        tail = max(np.max(np.abs(np.diagonal(matrix, offset=-mu)))
                   for mu in range(mu_cap + 1, dim))
        scale = np.max(np.abs(matrix))
        if scale > 0 and tail > clip_tol * scale:
            raise InvalidRunError(
                f"longitude modes beyond {mu_cap} carry relative weight "
                f"{tail / scale:.2e}; raise n_phi")
    if products is None:
        products = padded_profile_products(profiles, mu_cap)
    diags = padded_diagonals(matrix, mu_cap)
    real = np.matmul(products, diags.real[:, :, None]).squeeze(-1)
    imag = np.matmul(products, diags.imag[:, :, None]).squeeze(-1)
    return (real + 1j * imag).T

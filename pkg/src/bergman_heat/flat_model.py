"""Flat-space model objects: the Bargmann-Fock reproducing kernel on the
complex plane, the Landau-type operator annihilating it, and the Gaussian
Laplacian closed form used by the rescaling analysis.

Differentiation of closed-form test functions is available symbolically
(exact); arbitrary callables go through fourth-order central differences
with a Richardson residual estimate.
"""

import math
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .errors import ConfigError, DifferentiationError


@dataclass(frozen=True)
class FlatPoint:
    """Point of the real plane carrying the complex coordinate z = Z1 + i Z2."""

    Z1: float
    Z2: float

    @classmethod
    def from_complex(cls, z):
        z = complex(z)
        return cls(z.real, z.imag)

    @property
    def z(self):
        return complex(self.Z1, self.Z2)

    def norm_sq(self):
        return self.Z1 ** 2 + self.Z2 ** 2


def bargmann_kernel(z, w):
    """Reproducing kernel exp(-(pi/2)(|z|^2 + |w|^2 - 2 z conj(w))).

    Hermitian in (z, w); its squared modulus is exp(-pi |z - w|^2).
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    expo = -0.5 * math.pi * (np.abs(z) ** 2 + np.abs(w) ** 2
                             - 2.0 * z * np.conj(w))
    return np.exp(expo)


def bargmann_kernel_expr(w):
    """Sympy expression of the kernel z -> K(z, w) in real symbols (x, y)."""
    x, y = sp.symbols("x y", real=True)
    w = complex(w)
    wc = sp.Float(w.real, 17) - sp.I * sp.Float(w.imag, 17)
    z = x + sp.I * y
    expo = -sp.pi / 2 * (x ** 2 + y ** 2 + sp.Float(abs(w) ** 2, 17) - 2 * z * wc)
    return sp.exp(expo), (x, y)


def landau_operator_symbolic(expr, x, y):
    """Exact application of (-2 d_z + pi conj(z)) (2 d_zbar + pi z).

    ``expr`` is a sympy expression in the real symbols x, y with z = x + i y.
    """
    z = x + sp.I * y
    zbar = x - sp.I * y
    dz = (sp.diff(expr, x) - sp.I * sp.diff(expr, y)) / 2
    dzbar = (sp.diff(expr, x) + sp.I * sp.diff(expr, y)) / 2
    inner = 2 * dzbar + sp.pi * z * expr
    dz_inner = (sp.diff(inner, x) - sp.I * sp.diff(inner, y)) / 2
    return -2 * dz_inner + sp.pi * zbar * inner


_D1_STENCIL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2_STENCIL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _fd_parts(f, z, h):
    """Fourth-order f_x, f_y, f_xx, f_yy at complex points z."""
    z = np.asarray(z, dtype=complex)
    offsets = np.arange(-2, 3)
    fx = sum(c * f(z + k * h) for k, c in zip(offsets, _D1_STENCIL)) / h
    fy = sum(c * f(z + 1j * k * h) for k, c in zip(offsets, _D1_STENCIL)) / h
    fxx = sum(c * f(z + k * h) for k, c in zip(offsets, _D2_STENCIL)) / h ** 2
    fyy = sum(c * f(z + 1j * k * h) for k, c in zip(offsets, _D2_STENCIL)) / h ** 2
    return fx, fy, fxx, fyy


def _landau_fd(f, z, h):
    z = np.asarray(z, dtype=complex)
    fx, fy, fxx, fyy = _fd_parts(f, z, h)
    x, y = z.real, z.imag
    return (-(fxx + fyy) - 2.0 * math.pi * f(z)
            - 2.0 * math.pi * 1j * (y * fx - x * fy)
            + math.pi ** 2 * (x * x + y * y) * f(z))


def landau_operator_apply(f, z, h=1e-3, tol=None):
    """Numeric application of the model operator to a callable f at points z.

    Uses fourth-order stencils; a step-halving comparison estimates the
    differentiation residual, and ``tol`` (if given) turns an excessive
    estimate into an error.
    Returns ``(values, residual_estimate)``.
    """
    coarse = _landau_fd(f, z, h)
    fine = _landau_fd(f, z, 0.5 * h)
    # fourth-order: halving shrinks truncation 16x
    residual = float(np.max(np.abs(coarse - fine)) * 16.0 / 15.0)
    if tol is not None and residual > tol:
        raise DifferentiationError(
            f"differentiation residual {residual:.3e} exceeds {tol:.3e}")
    return fine, residual


def reproducing_residual(z, w, quad_order=48):
    """|integral of K(z, .) K(., w) - K(z, w)| by Gauss-Hermite quadrature."""
    if quad_order < 40:
        raise ConfigError("Gauss-Hermite order must be at least 40")
    nodes, weights = np.polynomial.hermite.hermgauss(quad_order)
    # substitute u = sqrt(pi) * Re(v), etc.: the plane integral becomes
    # (1/pi) * double Gauss-Hermite sum of the Gaussian-free factor
    pts = nodes / math.sqrt(math.pi)
    vv = pts[:, None] + 1j * pts[None, :]
    z = complex(z)
    w = complex(w)
    integrand = np.exp(math.pi * (z * np.conj(vv) + vv * np.conj(w))
                       - 0.5 * math.pi * (abs(z) ** 2 + abs(w) ** 2))
    total = weights @ integrand @ weights / math.pi
    return float(abs(total - bargmann_kernel(z, w)))


def gaussian_laplacian_identity(p, w, h=None):
    """Positive flat Laplacian of exp(-pi p |Z - Z'|^2) at Z = 0.

    Returns ``(computed, closed_form)`` where the computed value comes from
    fourth-order second differences and the closed form is
    ``4 pi p (1 - pi p |Z'|^2) exp(-pi p |Z'|^2)`` (complex dimension one).
    """
    if p < 1:
        raise ConfigError("p must be at least 1")
    w = complex(w)
    if h is None:
        h = 2e-3 / math.sqrt(p)

    def f(z):
        z = np.asarray(z, dtype=complex)
        return np.exp(-math.pi * p * np.abs(z - w) ** 2)

    offsets = np.arange(-2, 3)
    fxx = sum(c * f(k * h) for k, c in zip(offsets, _D2_STENCIL)) / h ** 2
    fyy = sum(c * f(1j * k * h) for k, c in zip(offsets, _D2_STENCIL)) / h ** 2
    computed = float((-(fxx + fyy)).real)
    closed = 4.0 * math.pi * p * (1.0 - math.pi * p * abs(w) ** 2) \
        * math.exp(-math.pi * p * abs(w) ** 2)
    return computed, closed

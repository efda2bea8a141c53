"""Real spherical harmonics orthonormal for the unit-mass round measure.

The ambient measure is the metric volume form with total mass 1, so the
harmonics here carry an extra sqrt(4*pi) against the usual unit-sphere
normalization: Y_{0,0} = 1 and Y_{1,0} = sqrt(3) cos(theta).
"""

import numpy as np
from scipy.special import gammaln, lpmv


def legendre_norm(l, m):
    """sqrt((2l+1) (l-m)!/(l+m)!), computed in log space for stability."""
    return float(np.exp(0.5 * (np.log(2.0 * l + 1.0)
                               + gammaln(l - m + 1) - gammaln(l + m + 1))))


def legendre_profile(l, m, x):
    """Normalized associated Legendre function with ``int_{-1}^{1} P^2 dx = 2``.

    Includes the Condon-Shortley sign carried by ``scipy.special.lpmv``.
    """
    m = abs(m)
    if m > l:
        return np.zeros_like(np.asarray(x, dtype=float))
    return legendre_norm(l, m) * lpmv(m, l, np.asarray(x, dtype=float))


def real_sph_harm(l, m, theta, phi):
    """Real spherical harmonic with unit L2 norm against the mass-1 measure.

    Positive m pairs with cos(m*phi), negative m with sin(|m|*phi).
    ``theta`` and ``phi`` must broadcast against each other.
    """
    base = legendre_profile(l, m, np.cos(np.asarray(theta, dtype=float)))
    if m == 0:
        return base * np.ones_like(np.asarray(phi, dtype=float))
    if m > 0:
        return np.sqrt(2.0) * base * np.cos(m * np.asarray(phi, dtype=float))
    return np.sqrt(2.0) * base * np.sin(-m * np.asarray(phi, dtype=float))

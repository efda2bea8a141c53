"""Model geometry: the projective line with its prequantum normalization.

The Kaehler form integrates to 1 over the manifold (degree-one bundle), so
the underlying Riemannian surface is the round two-sphere of radius
``1/(2 sqrt(pi))`` with unit total area.  Laplace eigenvalues are then
``4*pi*l*(l+1)``.  This module provides points, quadrature grids with a
declared polynomial exactness degree, geodesic geometry in normal
coordinates, and strictly positive reference volume forms.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .harmonics import real_sph_harm

#: Sphere radius forced by unit total area.
RADIUS = 1.0 / (2.0 * math.sqrt(math.pi))

#: Injectivity radius (half the great-circle length).
INJECTIVITY_RADIUS = math.pi * RADIUS


@dataclass(frozen=True)
class SpherePoint:
    """Point on the sphere: colatitude ``theta`` in [0, pi], longitude ``phi``.

    ``phi`` is normalized into [0, 2*pi).  The affine chart coordinate is
    ``z = tan(theta/2) * exp(i*phi)`` (the chart excludes the south pole).
    """

    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ConfigError(f"colatitude out of range: {self.theta}")
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * math.pi))

    @classmethod
    def from_affine(cls, z):
        """Inverse chart map; ``z`` is a complex affine coordinate."""
        z = complex(z)
        return cls(2.0 * math.atan(abs(z)), math.atan2(z.imag, z.real))

    def to_affine(self):
        if self.theta >= math.pi:
            raise ConfigError("south pole is not in the affine chart")
        return math.tan(0.5 * self.theta) * complex(math.cos(self.phi),
                                                    math.sin(self.phi))

    def unit_vector(self):
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi),
                         st * math.sin(self.phi),
                         math.cos(self.theta)])


def unit_vectors(theta, phi):
    """Cartesian unit vectors for colatitude/longitude arrays, shape (..., 3)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)],
                    axis=-1)


def geodesic_distance(x, y):
    """Great-circle distance on the radius ``RADIUS`` sphere."""
    dot = float(np.dot(x.unit_vector(), y.unit_vector()))
    return RADIUS * math.acos(min(1.0, max(-1.0, dot)))


def pairwise_distances(u, v):
    """Geodesic distances between unit-vector arrays u (n,3) and v (m,3)."""
    dots = np.clip(u @ v.T, -1.0, 1.0)
    return RADIUS * np.arccos(dots)


def _tangent_frame(point):
    """Orthonormal tangent frame (e1, e2) at a point.

    Away from the poles: e1 along increasing theta, e2 along increasing phi.
    At the poles the coordinate frame degenerates; a fixed Cartesian
    convention is used there instead.
    """
    st = math.sin(point.theta)
    if st < 1e-13:
        sign = 1.0 if point.theta < 0.5 * math.pi else -1.0
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, sign, 0.0])
    ct = math.cos(point.theta)
    cp, sp = math.cos(point.phi), math.sin(point.phi)
    e_theta = np.array([ct * cp, ct * sp, -st])
    e_phi = np.array([-sp, cp, 0.0])
    return e_theta, e_phi


def _point_from_unit_vector(v):
    theta = math.acos(min(1.0, max(-1.0, float(v[2]))))
    phi = math.atan2(float(v[1]), float(v[0]))
    return SpherePoint(theta, phi)


def exp_map(x0, Z):
    """Geodesic exponential; ``Z`` is a length-2 tangent vector at ``x0``.

    Rejects |Z| at or beyond the injectivity radius.
    """
    Z = np.asarray(Z, dtype=float)
    r = float(np.hypot(Z[0], Z[1]))
    if r >= INJECTIVITY_RADIUS:
        raise ConfigError(f"tangent vector length {r} >= injectivity radius")
    if r == 0.0:
        return x0
    e1, e2 = _tangent_frame(x0)
    direction = (Z[0] * e1 + Z[1] * e2) / r
    t = r / RADIUS
    v = math.cos(t) * x0.unit_vector() + math.sin(t) * direction
    return _point_from_unit_vector(v)


def log_map(x0, x):
    """Inverse of :func:`exp_map`; undefined at the antipode of ``x0``."""
    n0 = x0.unit_vector()
    n1 = x.unit_vector()
    c = min(1.0, max(-1.0, float(np.dot(n0, n1))))
    gamma = math.acos(c)
    if gamma >= math.pi - 1e-12:
        raise ConfigError("antipodal point: logarithm undefined")
    if gamma == 0.0:
        return np.zeros(2)
    tang = n1 - c * n0
    tang /= np.linalg.norm(tang)
    e1, e2 = _tangent_frame(x0)
    r = RADIUS * gamma
    return np.array([r * float(np.dot(tang, e1)), r * float(np.dot(tang, e2))])


def normal_volume_density(x0, Z):
    """Ratio of the metric volume form to the flat tangent one at ``exp(Z)``.

    Depends only on |Z| on the round sphere: ``sin(r/R) / (r/R)``.
    """
    Z = np.asarray(Z, dtype=float)
    r = np.sqrt(np.sum(np.square(Z), axis=-1))
    if np.any(r >= INJECTIVITY_RADIUS):
        raise ConfigError("tangent vector beyond the injectivity radius")
    t = r / RADIUS
    return np.where(t < 1e-8, 1.0 - t * t / 6.0, np.sin(np.maximum(t, 1e-300)) / np.maximum(t, 1e-300))


class QuadratureGrid:
    """Gauss-Legendre x uniform-longitude product quadrature.

    Integrates spherical polynomials of degree up to ``exactness_degree``
    exactly against the mass-1 round measure; weights sum to 1.
    """

    def __init__(self, n_theta, n_phi):
        if n_theta < 2 or n_phi < 2:
            raise ConfigError("need at least 2 nodes per direction")
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        x, w = np.polynomial.legendre.leggauss(self.n_theta)
        self.cos_theta = x
        self.theta = np.arccos(x)
        # w sums to 2; w_theta sums to 1 = total mass
        self.w_theta = 0.5 * w
        self.phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        self.exactness_degree = min(2 * self.n_theta - 1, self.n_phi - 1)
        self.node_weights = np.repeat(self.w_theta[:, None] / self.n_phi,
                                      self.n_phi, axis=1)

    @property
    def theta_mesh(self):
        return np.broadcast_to(self.theta[:, None],
                               (self.n_theta, self.n_phi))

    @property
    def phi_mesh(self):
        return np.broadcast_to(self.phi[None, :], (self.n_theta, self.n_phi))

    def node(self, i, j):
        return SpherePoint(float(self.theta[i]), float(self.phi[j]))

    def unit_vector_table(self, theta_stride=1, phi_stride=1):
        """Flattened unit vectors of a (possibly decimated) node set."""
        th = self.theta[::theta_stride]
        ph = self.phi[::phi_stride]
        tt, pp = np.meshgrid(th, ph, indexing="ij")
        return unit_vectors(tt.ravel(), pp.ravel())


def build_grid(n_theta, n_phi):
    """Construct a quadrature grid; rejects node counts below 2."""
    return QuadratureGrid(n_theta, n_phi)


def integrate(f, grid, form=None):
    """Quadrature of ``f`` against ``dv_X`` or, if given, a volume form.

    ``f`` may be a 2-D node-value array or a callable of (theta, phi)
    broadcastable meshes.  Exact for band-limited integrands within the
    grid's exactness degree; linear and monotone for positive forms.
    """
    values = f(grid.theta_mesh, grid.phi_mesh) if callable(f) else np.asarray(f)
    weights = grid.node_weights if form is None else grid.node_weights * form.density
    return np.sum(weights * values).item()


class VolumeForm:
    """Strictly positive reference volume form ``d nu = rho * dv_X``.

    The density is ``exp`` of a real, low-degree spherical-harmonic
    combination, so positivity is automatic and the longitude Fourier
    content stays narrow.  ``eta = 1/rho`` is the derived density of
    ``dv_X`` against ``d nu``.
    """

    def __init__(self, grid, coefficients=None, form_id="custom"):
        self.grid = grid
        self.form_id = str(form_id)
        self.coefficients = {(int(l), int(m)): float(c)
                             for (l, m), c in (coefficients or {}).items()}
        for (l, m), _ in self.coefficients.items():
            if l < 0 or abs(m) > l:
                raise ConfigError(f"bad harmonic index ({l},{m})")
        if self.coefficients:
            u = self.log_density_at(grid.theta_mesh, grid.phi_mesh)
            self.density = np.exp(u)
        else:
            self.density = np.ones((grid.n_theta, grid.n_phi))
        self.eta = 1.0 / self.density
        self.volume = np.sum(grid.node_weights * self.density).item()
        # longitude Fourier modes of the density, one row per theta node
        self.density_modes = np.fft.fft(self.density, axis=1) / grid.n_phi
        self.phi_band = self._measure_phi_band()
        self.density_inf = float(self.density.min())
        self.density_sup = float(self.density.max())
        self.c_s_bound = self._derivative_bounds()

    def _measure_phi_band(self):
        mags = np.abs(self.density_modes).max(axis=0)
        cut = 1e-13 * mags[0] if mags[0] > 0 else 0.0
        band = 0
        for m in range(1, self.grid.n_phi // 2 + 1):
            lo = mags[m]
            hi = mags[-m] if m < self.grid.n_phi else 0.0
            if max(lo, hi) > cut:
                band = m
        return band

    def _derivative_bounds(self):
        # sup-norm bounds for rho and two derivatives, from the explicit
        # log-density expansion (upper bounds, not tight sups)
        sums = [sum(abs(c) * math.sqrt(2.0 * l + 1.0)
                    * (4.0 * math.pi * l * (l + 1.0)) ** (0.5 * s)
                    for (l, m), c in self.coefficients.items())
                for s in range(3)]
        sup = math.exp(sums[0])
        return (sup, sup * sums[1], sup * (sums[2] + sums[1] ** 2))

    def log_density_at(self, theta, phi):
        out = np.zeros(np.broadcast(np.asarray(theta, dtype=float),
                                    np.asarray(phi, dtype=float)).shape)
        for (l, m), c in sorted(self.coefficients.items()):
            out = out + c * real_sph_harm(l, m, theta, phi)
        return out

    def density_at(self, theta, phi):
        return np.exp(self.log_density_at(theta, phi))

    def eta_at(self, theta, phi):
        """Pointwise ``dv_X / d nu`` off the grid, from the closed form."""
        return np.exp(-self.log_density_at(theta, phi))


def fubini_study_form(grid):
    """The metric volume form itself (density identically 1)."""
    return VolumeForm(grid, {}, form_id="fs")


def load_grid_config(path):
    """Read grid sizes and volume-form coefficients from a config file.

    Accepts JSON (``{"n_theta": ..., "n_phi": ..., "volume_form": {"l,m": c}}``)
    or plain ``key = value`` lines where coefficient keys look like
    ``coeff:l,m``.  Returns ``(n_theta, n_phi, coefficients)``.
    """
    text = open(path).read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        coeffs = {_parse_lm(k): float(v)
                  for k, v in (data.get("volume_form") or {}).items()}
        try:
            return int(data["n_theta"]), int(data["n_phi"]), coeffs
        except KeyError as exc:
            raise ConfigError(f"missing grid field {exc}") from exc
    n_theta = n_phi = None
    coeffs = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"cannot parse config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "n_theta":
            n_theta = int(value)
        elif key == "n_phi":
            n_phi = int(value)
        elif key.startswith("coeff:"):
            coeffs[_parse_lm(key[len("coeff:"):])] = float(value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if n_theta is None or n_phi is None:
        raise ConfigError("config must set n_theta and n_phi")
    return n_theta, n_phi, coeffs


def _parse_lm(key):
    try:
        l_str, m_str = str(key).split(",")
        return int(l_str), int(m_str)
    except ValueError as exc:
        raise ConfigError(f"bad harmonic key {key!r}, expected 'l,m'") from exc

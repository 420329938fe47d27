"""The geometry module evaluates the differential geometry of a parametrized surface \\( \\vec{r}(q_1, q_2) \\)
and of its thin normal neighbourhood

$$
\\vec{R}(q_1, q_2, q_3) = \\vec{r}(q_1, q_2) + q_3 \\hat{n}(q_1, q_2).
$$

A surface is described by a `SurfaceChart`, which holds the embedding, its first and second derivatives
(analytic closures, or a `FiniteDifference` provider for user supplied and tabulated surfaces), the rectangular
parameter domain and the periodicity of both coordinates. The builtin charts are the sphere \\( (\\theta, \\phi) \\),
the cylinder \\( (\\theta, y) \\), the torus \\( (\\theta, \\phi) \\) and the flat plane \\( (x, y) \\).

At a single point `geometry_at` returns a `GeometryPoint`, holding the surface metric \\( g_{ab} = \\partial_a \\vec{r} \\cdot \\partial_b \\vec{r} \\),
the second fundamental form \\( h_{ab} = -\\partial_a \\hat{n} \\cdot \\partial_b \\vec{r} \\) and the Weingarten matrix

$$
\\alpha_a^{\\ b} = -h_{ac} g^{cb}.
$$

The mean and Gaussian curvature follow as \\( M = \\frac{1}{2} \\mathrm{Tr}\\, \\alpha \\) and \\( K = \\det \\alpha \\). Confining a particle
to the surface with a steep normal potential produces the attractive geometric potential

$$
V_g = -\\frac{\\hbar^2}{2m}(M^2 - K),
$$

see `geometric_potential_at`. The metric of the neighbourhood is block diagonal,

$$
G_{ab} = g_{ab} + [\\alpha g + (\\alpha g)^T]_{ab} q_3 + (\\alpha g \\alpha^T)_{ab} q_3^2, \\quad G_{a3} = 0, \\quad G_{33} = 1,
$$

with \\( \\det G = f^2 \\det g \\) and \\( f = 1 + \\mathrm{Tr}(\\alpha) q_3 + \\det(\\alpha) q_3^2 \\), see `bulk_metric_at`. The function
`limit_relations_check` verifies numerically that the contracted Christoffel symbols of the neighbourhood tend to their
surface counterparts when \\( q_3 \\rightarrow 0 \\).

The unit normal is always \\( \\hat{n} = \\partial_1 \\vec{r} \\times \\partial_2 \\vec{r} / |\\partial_1 \\vec{r} \\times \\partial_2 \\vec{r}| \\)
in the native parameter order of the chart. Flipping the orientation flips \\( M \\) but leaves \\( V_g \\) unchanged.
All quantities are dimensionless, with \\( \\hbar = m = 1 \\) unless specified otherwise.
"""

__pdoc__ = {}
__pdoc__['Periodicity.__str__'] = False
__pdoc__['SurfaceChart.__str__'] = False

from enum import IntEnum
from math import pi

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import logging

EPS_DEGENERATE = 1e-12
"""Default tolerance on \\( \\det g \\) below which a point is considered a coordinate singularity."""

class DegenerateMetricError(ArithmeticError):
    """Raised when \\( \\det g \\) drops below the degeneracy tolerance, for example at the poles of the sphere."""
    pass

class FanCollapseError(ArithmeticError):
    """Raised when the normal fan self intersects, i.e. \\( f \\leq 0 \\) at the requested \\( q_3 \\)."""
    pass

class ChartError(ValueError):
    """Raised when a chart is constructed from invalid parameters or from a malformed table."""
    pass


class Periodicity(IntEnum):
    """Periodicity of a single chart coordinate."""
    BOUNDED = 0
    PERIODIC = 1

    def __str__(self):
        if self == Periodicity.BOUNDED:
            return 'bounded'
        elif self == Periodicity.PERIODIC:
            return 'periodic'

        raise RuntimeError('Periodicity not understood in __str__ method')

    def is_periodic(self):
        return self == Periodicity.PERIODIC


class FiniteDifference:
    """Central finite differences with a single Richardson extrapolation step. The functions to differentiate
    take the coordinates as separate (broadcastable) arguments and may return arrays of any trailing shape.

    Parameters
    ----------
    step: float
        Step used for first derivatives.
    second_step: float
        Step used for second derivatives. The round off error of a second difference scales as \\( \\epsilon/h^2 \\),
        which is why a larger step is used than for first derivatives.
    richardson: bool
        Whether to combine the steps \\( h \\) and \\( h/2 \\) to cancel the leading error term."""

    def __init__(self, step=1e-5, second_step=1e-3, richardson=True):
        assert step > 0 and second_step > 0
        self.step = step
        self.second_step = second_step
        self.richardson = richardson

    def _shift(self, q, axis, h):
        shifted = list(q)
        shifted[axis] = shifted[axis] + h
        return shifted

    def _combine(self, estimate, h):
        if not self.richardson:
            return estimate(h)
        return (4*estimate(h/2) - estimate(h))/3

    def first(self, f, q, axis):
        """Derivative of `f` with respect to coordinate number `axis`, evaluated at the coordinates `q`."""
        q = [np.asarray(qi, dtype=np.float64) for qi in q]

        def estimate(h):
            return (np.asarray(f(*self._shift(q, axis, h))) - np.asarray(f(*self._shift(q, axis, -h))))/(2*h)

        return self._combine(estimate, self.step)

    def second(self, f, q, a, b):
        """Second derivative of `f` with respect to coordinates `a` and `b`."""
        q = [np.asarray(qi, dtype=np.float64) for qi in q]

        if a == b:
            center = np.asarray(f(*q))

            def estimate(h):
                return (np.asarray(f(*self._shift(q, a, h))) - 2*center + np.asarray(f(*self._shift(q, a, -h))))/h**2
        else:
            def estimate(h):
                pp = f(*self._shift(self._shift(q, a, h), b, h))
                pm = f(*self._shift(self._shift(q, a, h), b, -h))
                mp = f(*self._shift(self._shift(q, a, -h), b, h))
                mm = f(*self._shift(self._shift(q, a, -h), b, -h))
                return (np.asarray(pp) - np.asarray(pm) - np.asarray(mp) + np.asarray(mm))/(4*h**2)

        return self._combine(estimate, self.second_step)

    def gradient(self, f, q):
        """Stack of first derivatives with respect to every coordinate in `q`, on a new last axis."""
        return np.stack([self.first(f, q, i) for i in range(len(q))], axis=-1)


def _vec(x, y, z):
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)

class SurfaceChart:
    """A parametrization \\( (q_1, q_2) \\rightarrow \\vec{r}(q_1, q_2) \\) of a surface on the rectangular domain
    \\( [q_1^{min}, q_1^{max}] \\times [q_2^{min}, q_2^{max}] \\).

    Parameters
    ----------
    name: str
        Identifier of the chart, used in reports and to select the closed form spinor rotations of the builtin charts.
    embedding: callable
        Function of (q1, q2) returning an array of shape (..., 3).
    domain: tuple
        ((q1_min, q1_max), (q2_min, q2_max)).
    periodicity: tuple of `Periodicity`
        Periodicity of both coordinates. The period of a periodic coordinate is the length of its domain.
    tangents: callable, optional
        Function of (q1, q2) returning \\( \\partial_a \\vec{r} \\) with shape (..., 2, 3). When omitted, finite differences are used.
    second_derivatives: callable, optional
        Function of (q1, q2) returning \\( \\partial_a \\partial_b \\vec{r} \\) with shape (..., 2, 2, 3).
    poles: tuple of bool
        Whether the bounded ends of a coordinate are pole type coordinate singularities (where \\( \\det g = 0 \\)).
    parameters: dict
        Numeric parameters of the chart (radius etc.), kept for reports."""

    def __init__(self, name, embedding, domain, periodicity, tangents=None, second_derivatives=None,
            poles=(False, False), parameters=None, derivatives=None):

        if not (len(domain) == 2 and all(len(d) == 2 and d[1] > d[0] for d in domain)):
            raise ChartError(f'Domain of chart {name} should be two increasing intervals, got {domain}')
        if not (len(periodicity) == 2 and all(isinstance(p, Periodicity) for p in periodicity)):
            raise ChartError(f'Periodicity of chart {name} should be two Periodicity values')
        if any(pole and p.is_periodic() for pole, p in zip(poles, periodicity)):
            raise ChartError(f'Chart {name}: a periodic coordinate cannot end in a pole')

        self.name = name
        self.embedding = embedding
        self.domain = tuple(tuple(float(x) for x in d) for d in domain)
        self.periodicity = tuple(periodicity)
        self.poles = tuple(poles)
        self.parameters = dict(parameters) if parameters is not None else {}
        self.derivatives = derivatives if derivatives is not None else FiniteDifference()
        self._tangents = tangents
        self._second_derivatives = second_derivatives

    def __str__(self):
        params = ', '.join(f'{k}={v}' for k, v in self.parameters.items())
        return f'<SurfacePauli SurfaceChart {self.name} ({params}), periodicity {str(self.periodicity[0])}/{str(self.periodicity[1])}>'

    def has_analytic_derivatives(self):
        return self._tangents is not None and self._second_derivatives is not None

    def position(self, q1, q2):
        return np.asarray(self.embedding(q1, q2), dtype=np.float64)

    def tangents(self, q1, q2):
        if self._tangents is not None:
            return np.asarray(self._tangents(q1, q2), dtype=np.float64)

        d = self.derivatives
        return np.stack([d.first(self.embedding, (q1, q2), 0), d.first(self.embedding, (q1, q2), 1)], axis=-2)

    def second_derivatives(self, q1, q2):
        if self._second_derivatives is not None:
            return np.asarray(self._second_derivatives(q1, q2), dtype=np.float64)

        d = self.derivatives
        r11 = d.second(self.embedding, (q1, q2), 0, 0)
        r12 = d.second(self.embedding, (q1, q2), 0, 1)
        r22 = d.second(self.embedding, (q1, q2), 1, 1)
        return np.stack([np.stack([r11, r12], axis=-2), np.stack([r12, r22], axis=-2)], axis=-3)

    def period(self, axis):
        assert self.periodicity[axis].is_periodic(), f"Coordinate {axis+1} of chart {self.name} is not periodic"
        lo, hi = self.domain[axis]
        return hi - lo

    def is_periodic(self, axis):
        return self.periodicity[axis].is_periodic()

    def contains(self, q1, q2):
        """Whether (q1, q2) lies in the closed domain. Periodic coordinates are always accepted."""
        for axis, q in enumerate([q1, q2]):
            lo, hi = self.domain[axis]
            if not self.is_periodic(axis) and not (lo <= q <= hi):
                return False
        return True


def sphere(r=1.0):
    """Sphere of radius `r` in coordinates \\( (\\theta, \\phi) \\). The poles \\( \\theta = 0, \\pi \\) are coordinate singularities."""
    if not r > 0:
        raise ChartError(f'Radius of the sphere should be positive, got r={r}')

    def embedding(t, p):
        return r*_vec(np.sin(t)*np.cos(p), np.sin(t)*np.sin(p), np.cos(t))

    def tangents(t, p):
        s, c, sp, cp = np.sin(t), np.cos(t), np.sin(p), np.cos(p)
        return r*np.stack([_vec(c*cp, c*sp, -s), _vec(-s*sp, s*cp, 0.)], axis=-2)

    def second_derivatives(t, p):
        s, c, sp, cp = np.sin(t), np.cos(t), np.sin(p), np.cos(p)
        r_tt = _vec(-s*cp, -s*sp, -c)
        r_tp = _vec(-c*sp, c*cp, 0.)
        r_pp = _vec(-s*cp, -s*sp, 0.)
        return r*np.stack([np.stack([r_tt, r_tp], axis=-2), np.stack([r_tp, r_pp], axis=-2)], axis=-3)

    return SurfaceChart('sphere', embedding, ((0., pi), (0., 2*pi)), (Periodicity.BOUNDED, Periodicity.PERIODIC),
        tangents=tangents, second_derivatives=second_derivatives, poles=(True, False), parameters=dict(r=r))

def cylinder(r=1.0, L=2*pi, y_periodic=True):
    """Cylinder of radius `r` in coordinates \\( (\\theta, y) \\), with the axis along \\( y \\) and
    \\( \\vec{r} = (r\\sin\\theta, y, r\\cos\\theta) \\). The \\( y \\) coordinate runs over \\( [0, L] \\) and is either periodic
    or closed by a box."""
    if not (r > 0 and L > 0):
        raise ChartError(f'Cylinder needs a positive radius and length, got r={r}, L={L}')

    def embedding(t, y):
        return _vec(r*np.sin(t), y, r*np.cos(t))

    def tangents(t, y):
        s, c = np.sin(t), np.cos(t)
        zero = np.zeros_like(s*np.asarray(y, dtype=np.float64))
        return np.stack([_vec(r*c + zero, zero, -r*s + zero), _vec(zero, 1. + zero, zero)], axis=-2)

    def second_derivatives(t, y):
        s, c = np.sin(t), np.cos(t)
        zero = np.zeros_like(s*np.asarray(y, dtype=np.float64))
        r_tt = _vec(-r*s + zero, zero, -r*c + zero)
        null = _vec(zero, zero, zero)
        return np.stack([np.stack([r_tt, null], axis=-2), np.stack([null, null], axis=-2)], axis=-3)

    y_periodicity = Periodicity.PERIODIC if y_periodic else Periodicity.BOUNDED

    return SurfaceChart('cylinder', embedding, ((0., 2*pi), (0., L)), (Periodicity.PERIODIC, y_periodicity),
        tangents=tangents, second_derivatives=second_derivatives, parameters=dict(r=r, L=L, y_periodic=y_periodic))

def torus(R0=2.0, r=1.0):
    """Torus with tube radius `r` at distance `R0` from the symmetry axis, in coordinates \\( (\\theta, \\phi) \\)
    with \\( \\vec{r} = (R\\cos\\phi, R\\sin\\phi, r\\cos\\theta) \\) and \\( R = R_0 + r\\sin\\theta \\)."""
    if not R0 > r > 0:
        raise ChartError(f'Torus should satisfy R0 > r > 0, got R0={R0}, r={r}')

    def embedding(t, p):
        R = R0 + r*np.sin(t)
        return _vec(R*np.cos(p), R*np.sin(p), r*np.cos(t))

    def tangents(t, p):
        s, c, sp, cp = np.sin(t), np.cos(t), np.sin(p), np.cos(p)
        R = R0 + r*s
        return np.stack([_vec(r*c*cp, r*c*sp, -r*s), _vec(-R*sp, R*cp, 0.)], axis=-2)

    def second_derivatives(t, p):
        s, c, sp, cp = np.sin(t), np.cos(t), np.sin(p), np.cos(p)
        R = R0 + r*s
        r_tt = _vec(-r*s*cp, -r*s*sp, -r*c)
        r_tp = _vec(-r*c*sp, r*c*cp, 0.)
        r_pp = _vec(-R*cp, -R*sp, 0.)
        return np.stack([np.stack([r_tt, r_tp], axis=-2), np.stack([r_tp, r_pp], axis=-2)], axis=-3)

    return SurfaceChart('torus', embedding, ((0., 2*pi), (0., 2*pi)), (Periodicity.PERIODIC, Periodicity.PERIODIC),
        tangents=tangents, second_derivatives=second_derivatives, parameters=dict(R0=R0, r=r))

def plane(Lx=1.0, Ly=1.0, periodic=(False, False)):
    """Flat rectangle \\( [0, L_x] \\times [0, L_y] \\) in the \\( z = 0 \\) plane."""
    if not (Lx > 0 and Ly > 0):
        raise ChartError(f'Plane needs positive side lengths, got Lx={Lx}, Ly={Ly}')

    def embedding(x, y):
        return _vec(x, y, np.zeros_like(np.asarray(x, dtype=np.float64)*np.asarray(y, dtype=np.float64)))

    def tangents(x, y):
        zero = np.zeros_like(np.asarray(x, dtype=np.float64)*np.asarray(y, dtype=np.float64))
        return np.stack([_vec(1. + zero, zero, zero), _vec(zero, 1. + zero, zero)], axis=-2)

    def second_derivatives(x, y):
        zero = np.zeros_like(np.asarray(x, dtype=np.float64)*np.asarray(y, dtype=np.float64))
        return np.zeros(zero.shape + (2, 2, 3))

    periodicity = tuple(Periodicity.PERIODIC if p else Periodicity.BOUNDED for p in periodic)
    return SurfaceChart('plane', embedding, ((0., Lx), (0., Ly)), periodicity,
        tangents=tangents, second_derivatives=second_derivatives, parameters=dict(Lx=Lx, Ly=Ly))

def tabulated(filename, periodic=(False, False), name='tabulated'):
    """Load a user chart from a CSV file with the columns q1, q2, x, y, z sampled on a uniform grid (a header line is allowed).
    The embedding is interpolated by bicubic splines and all derivatives are taken by `FiniteDifference`.
    For a periodic coordinate the table should not repeat the first row at the end, the period then equals the number of
    samples times the spacing.

    Raises
    ------
    ChartError
        When the table does not have five numeric columns on a full, uniform grid of at least four samples per coordinate."""
    try:
        data = np.genfromtxt(filename, delimiter=',', comments='#', skip_header=_header_lines(filename))
    except ValueError as e:
        raise ChartError(f'Could not read tabulated chart {filename}: {e}')

    if data.ndim != 2 or data.shape[1] != 5:
        raise ChartError(f'Tabulated chart {filename} should have the five columns q1, q2, x, y, z')

    return tabulated_from_array(data, periodic=periodic, name=name)

def _header_lines(filename):
    with open(filename) as f:
        first = f.readline()
    try:
        [float(x) for x in first.split(',')]
        return 0
    except ValueError:
        return 1

def tabulated_from_array(data, periodic=(False, False), name='tabulated'):
    """Build a tabulated chart from an array with rows (q1, q2, x, y, z), see `tabulated`."""
    data = np.asarray(data, dtype=np.float64)

    if data.ndim != 2 or data.shape[1] != 5:
        raise ChartError('Tabulated chart should have the five columns q1, q2, x, y, z')
    if not np.all(np.isfinite(data)):
        raise ChartError('Tabulated chart contains missing or non numeric values')

    q1 = np.unique(data[:, 0])
    q2 = np.unique(data[:, 1])

    if len(q1)*len(q2) != len(data):
        raise ChartError('Tabulated chart should be sampled on a full rectangular grid')
    if len(q1) < 4 or len(q2) < 4:
        raise ChartError('Tabulated chart needs at least four samples per coordinate')

    for q in [q1, q2]:
        spacing = np.diff(q)
        if not np.allclose(spacing, spacing[0], rtol=1e-6):
            raise ChartError('Tabulated chart should be sampled on a uniform grid')

    order = np.lexsort((data[:, 1], data[:, 0]))
    xyz = data[order, 2:].reshape(len(q1), len(q2), 3)

    domain = []
    nodes = [q1, q2]
    pad = 3

    for axis, q in enumerate(nodes):
        h = q[1] - q[0]

        if periodic[axis]:
            # Wrap a few samples around so the spline is smooth across the seam.
            n = len(q)
            xyz = np.concatenate([xyz.take(range(n-pad, n), axis=axis), xyz, xyz.take(range(pad), axis=axis)], axis=axis)
            nodes[axis] = np.concatenate([q[-pad:] - n*h, q, q[:pad] + n*h])
            domain.append((q[0], q[0] + n*h))
        else:
            domain.append((q[0], q[-1]))

    splines = [RectBivariateSpline(nodes[0], nodes[1], xyz[..., i], kx=3, ky=3, s=0) for i in range(3)]

    def embedding(a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))

        for axis, q in enumerate([a, b]):
            if periodic[axis]:
                lo, hi = domain[axis]
                q = lo + np.mod(q - lo, hi - lo)
            if axis == 0:
                a = q
            else:
                b = q

        return np.stack([s(a, b, grid=False) for s in splines], axis=-1)

    periodicity = tuple(Periodicity.PERIODIC if p else Periodicity.BOUNDED for p in periodic)
    return SurfaceChart(name, embedding, tuple(domain), periodicity, parameters=dict(samples=(len(q1), len(q2))))

CHARTS = {
    'sphere': sphere,
    'cylinder': cylinder,
    'torus': torus,
    'plane': plane
}
"""Registry of the builtin charts, keyed by name."""

def make_chart(name, **parameters):
    """Construct a builtin chart by name, passing the numeric parameters along."""
    if name not in CHARTS:
        raise ChartError(f"Unknown chart '{name}', choose one of {', '.join(CHARTS.keys())}")
    return CHARTS[name](**parameters)


class GeometryPoint:
    """Differential geometric data of a surface at a point. All fields are numpy arrays; when produced by
    `geometry_on` the fields carry the leading shape of the coordinate arrays.

    Attributes
    ----------
    q: coordinates (q1, q2)
    position: \\( \\vec{r} \\), shape (..., 3)
    tangents: \\( \\partial_a \\vec{r} \\), shape (..., 2, 3)
    g, g_inv: covariant metric and its inverse, shape (..., 2, 2)
    sqrt_g: \\( \\sqrt{\\det g} \\)
    normal: unit normal \\( \\hat{n} \\), shape (..., 3)
    normal_derivatives: \\( \\partial_a \\hat{n} \\), shape (..., 2, 3)
    h: second fundamental form \\( h_{ab} \\)
    alpha: Weingarten matrix \\( \\alpha_a^{\\ b} \\) with the row index \\( a \\)
    M, K: mean and Gaussian curvature
    gamma2: Christoffel symbols \\( \\gamma^c_{ab} \\) indexed [..., c, a, b]
    frame: orthonormal triad with rows \\( (\\hat{n}_1, \\hat{n}_2, \\hat{n}_3) \\), shape (..., 3, 3)"""

    def __init__(self, **fields):
        for k, v in fields.items():
            setattr(self, k, v)

    def __str__(self):
        return f'<SurfacePauli GeometryPoint at q={self.q}, M={self.M}, K={self.K}>'

    def geometric_potential(self, hbar=1.0, mass=1.0):
        return -hbar**2/(2*mass)*(self.M**2 - self.K)

    def mean_curvature_squared_minus_gaussian(self):
        return self.M**2 - self.K

def _inverse_2x2(m):
    det = m[..., 0, 0]*m[..., 1, 1] - m[..., 0, 1]*m[..., 1, 0]
    inv = np.empty_like(m)
    inv[..., 0, 0] = m[..., 1, 1]
    inv[..., 1, 1] = m[..., 0, 0]
    inv[..., 0, 1] = -m[..., 0, 1]
    inv[..., 1, 0] = -m[..., 1, 0]
    return inv/det[..., np.newaxis, np.newaxis], det

def geometry_on(chart, q1, q2, eps=EPS_DEGENERATE):
    """Vectorized version of `geometry_at`: q1 and q2 are broadcast against each other and the resulting
    `GeometryPoint` carries the broadcast shape as leading axes.

    Raises
    ------
    DegenerateMetricError
        If \\( \\det g \\leq \\) `eps` at any of the points."""
    q1, q2 = np.broadcast_arrays(np.asarray(q1, dtype=np.float64), np.asarray(q2, dtype=np.float64))

    r_a = chart.tangents(q1, q2)
    r_ab = chart.second_derivatives(q1, q2)

    g = np.einsum('...ai,...bi->...ab', r_a, r_a)
    g_inv, det_g = _inverse_2x2(g)

    if np.any(~(det_g > eps)):
        index = np.unravel_index(np.argmin(np.where(np.isnan(det_g), -np.inf, det_g)), det_g.shape) if det_g.ndim else ()
        raise DegenerateMetricError(f'Degenerate metric on chart {chart.name} at q=({q1[index]:.6g}, {q2[index]:.6g}): '
            f'det g = {det_g[index]:.3e} <= {eps:.1e} (coordinate singularity)')

    sqrt_g = np.sqrt(det_g)

    c = np.cross(r_a[..., 0, :], r_a[..., 1, :])
    c_norm = np.linalg.norm(c, axis=-1)
    normal = c/c_norm[..., np.newaxis]

    # Derivative of the unit normal through the derivative of the cross product.
    c_a = np.cross(r_ab[..., :, 0, :], r_a[..., np.newaxis, 1, :]) + np.cross(r_a[..., np.newaxis, 0, :], r_ab[..., :, 1, :])
    c_dot = np.einsum('...i,...ai->...a', c, c_a)
    n_a = c_a/c_norm[..., np.newaxis, np.newaxis] - c[..., np.newaxis, :]*(c_dot/c_norm[..., np.newaxis]**3)[..., np.newaxis]

    h = -np.einsum('...ai,...ci->...ac', n_a, r_a)
    alpha = -np.einsum('...ac,...cb->...ab', h, g_inv)

    M = 0.5*(alpha[..., 0, 0] + alpha[..., 1, 1])
    K = alpha[..., 0, 0]*alpha[..., 1, 1] - alpha[..., 0, 1]*alpha[..., 1, 0]

    gamma2 = np.einsum('...cd,...di,...abi->...cab', g_inv, r_a, r_ab)

    n1 = r_a[..., 0, :]/np.linalg.norm(r_a[..., 0, :], axis=-1)[..., np.newaxis]
    u2 = r_a[..., 1, :] - np.einsum('...i,...i->...', r_a[..., 1, :], n1)[..., np.newaxis]*n1
    n2 = u2/np.linalg.norm(u2, axis=-1)[..., np.newaxis]
    n3 = np.cross(n1, n2)
    frame = np.stack([n1, n2, n3], axis=-2)

    return GeometryPoint(q=(q1, q2), position=chart.position(q1, q2), tangents=r_a, second_derivatives=r_ab,
        g=g, g_inv=g_inv, det_g=det_g, sqrt_g=sqrt_g, normal=normal, normal_derivatives=n_a,
        h=h, alpha=alpha, M=M, K=K, gamma2=gamma2, frame=frame)

def geometry_at(chart, q1, q2, eps=EPS_DEGENERATE):
    """Evaluate the surface geometry at a single parameter point.

    Parameters
    ----------
    chart: `SurfaceChart`
    q1, q2: float
        Coordinates, which should lie in the interior of the chart domain.
    eps: float
        Degeneracy tolerance on \\( \\det g \\).

    Returns
    -------
    `GeometryPoint`"""
    assert np.ndim(q1) == 0 and np.ndim(q2) == 0, "geometry_at expects scalar coordinates, use geometry_on for arrays"
    return geometry_on(chart, float(q1), float(q2), eps=eps)

def geometric_potential_at(chart, q1, q2, hbar=1.0, mass=1.0, eps=EPS_DEGENERATE):
    """The geometric potential \\( V_g = -\\frac{\\hbar^2}{2m}(M^2 - K) \\) at a point. Independent of the orientation of the normal."""
    return float(geometry_at(chart, q1, q2, eps=eps).geometric_potential(hbar, mass))

def christoffel_2d(chart, q1, q2, eps=EPS_DEGENERATE):
    """Christoffel symbols \\( \\gamma^c_{ab} \\) of the surface metric, returned as an array indexed [c, a, b]."""
    return geometry_at(chart, q1, q2, eps=eps).gamma2


class BulkMetric:
    """Metric of the thin neighbourhood at \\( (q_1, q_2, q_3) \\).

    Attributes
    ----------
    G: 3x3 covariant metric
    f: \\( 1 + \\mathrm{Tr}(\\alpha) q_3 + \\det(\\alpha) q_3^2 \\)
    det_G: \\( \\det G \\)
    Gamma3: Christoffel symbols \\( \\Gamma^k_{ij} \\), indexed [k, i, j]
    surface: the `GeometryPoint` at \\( q_3 = 0 \\)"""

    def __init__(self, q3, G, f, Gamma3, surface):
        self.q3 = q3
        self.G = G
        self.f = f
        self.det_G = np.linalg.det(G)
        self.G_inv = np.linalg.inv(G)
        self.Gamma3 = Gamma3
        self.surface = surface

    def __str__(self):
        return f'<SurfacePauli BulkMetric q3={self.q3}, f={self.f:.6g}, det G={self.det_G:.6g}>'

    def determinant_identity_residual(self):
        """\\( |\\det G - f^2 \\det g| \\) relative to \\( \\max(1, |\\det G|) \\)."""
        return abs(self.det_G - self.f**2*self.surface.det_g)/max(1.0, abs(self.det_G))

def _normal_derivatives(chart, q1, q2):
    return geometry_on(chart, q1, q2, eps=0.).normal_derivatives

def bulk_metric_at(chart, q1, q2, q3, eps=EPS_DEGENERATE):
    """Metric and Christoffel symbols of the neighbourhood \\( \\vec{R} = \\vec{r} + q_3 \\hat{n} \\).

    The Christoffel symbols are computed from \\( \\Gamma^k_{ij} = G^{kl} \\partial_l \\vec{R} \\cdot \\partial_i \\partial_j \\vec{R} \\),
    where the second derivatives of the normal are taken by finite differences of the analytic first derivatives.

    Raises
    ------
    FanCollapseError
        When \\( f \\leq 0 \\), the normal lines starting at different surface points intersect.
    DegenerateMetricError
        When the surface metric is degenerate at (q1, q2)."""
    geom = geometry_at(chart, q1, q2, eps=eps)
    alpha, g = geom.alpha, geom.g

    f = 1 + np.trace(alpha)*q3 + np.linalg.det(alpha)*q3**2

    if not f > 0:
        raise FanCollapseError(f'Normal fan collapses on chart {chart.name} at q=({q1:.6g}, {q2:.6g}, {q3:.6g}): f = {f:.3e}')

    ag = alpha @ g
    G2 = g + (ag + ag.T)*q3 + (alpha @ g @ alpha.T)*q3**2

    G = np.zeros((3, 3))
    G[:2, :2] = G2
    G[2, 2] = 1.0

    d = FiniteDifference(step=chart.derivatives.step)
    n_a = geom.normal_derivatives
    n_ab = np.stack([d.first(lambda a, b: _normal_derivatives(chart, a, b), (q1, q2), axis) for axis in range(2)], axis=-2)
    # n_ab[a, b] = d/dq_b of n_a; symmetrize to remove the finite difference noise.
    n_ab = 0.5*(n_ab + np.swapaxes(n_ab, 0, 1))

    R_i = np.zeros((3, 3))
    R_i[:2] = geom.tangents + q3*n_a
    R_i[2] = geom.normal

    R_ij = np.zeros((3, 3, 3))
    R_ij[:2, :2] = geom.second_derivatives + q3*n_ab
    R_ij[:2, 2] = n_a
    R_ij[2, :2] = n_a

    Gamma3 = np.einsum('kl,lx,ijx->kij', np.linalg.inv(G), R_i, R_ij)

    return BulkMetric(q3, G, f, Gamma3, geom)

def christoffel_3d(chart, q1, q2, q3, eps=EPS_DEGENERATE):
    """Christoffel symbols \\( \\Gamma^k_{ij} \\) of the neighbourhood metric, indexed [k, i, j]."""
    return bulk_metric_at(chart, q1, q2, q3, eps=eps).Gamma3

def log_sqrt_G(chart, q1, q2, q3):
    """\\( \\ln \\sqrt{G} = \\ln f + \\ln \\sqrt{g} \\), used to verify the trace identity \\( \\Gamma^i_{ij} = \\partial_j \\ln \\sqrt{G} \\)."""
    geom = geometry_on(chart, q1, q2)
    alpha = geom.alpha
    f = 1 + (alpha[..., 0, 0] + alpha[..., 1, 1])*q3 + geom.K*q3**2
    return np.log(np.abs(f)) + np.log(geom.sqrt_g)


class LimitRelationsReport:
    """Result of `limit_relations_check`.

    Attributes
    ----------
    q3: the sequence of normal offsets
    values: rows \\( (G^{ab}\\Gamma^1_{ab}, G^{ab}\\Gamma^2_{ab}, G^{ab}\\Gamma^3_{ab}) \\) for every offset
    targets: \\( (g^{ab}\\gamma^1_{ab}, g^{ab}\\gamma^2_{ab}, -\\mathrm{Tr}\\,\\alpha) \\)
    extrapolated: polynomial extrapolation of the values to \\( q_3 = 0 \\)
    deviation: largest absolute difference between extrapolated values and targets
    order: observed convergence order of the raw values (None when the values are exact)
    converged: whether the deviation is below the tolerance"""

    def __init__(self, q3, values, targets, extrapolated, deviation, order, converged, tolerance):
        self.q3 = q3
        self.values = values
        self.targets = targets
        self.extrapolated = extrapolated
        self.deviation = deviation
        self.order = order
        self.converged = converged
        self.tolerance = tolerance

    def __str__(self):
        order = 'exact' if self.order is None else f'{self.order:.2f}'
        return f'<SurfacePauli LimitRelationsReport deviation={self.deviation:.2e}, order={order}, converged={self.converged}>'

def limit_relations_check(chart, q1, q2, q3_sequence, tolerance=1e-6):
    """Check that \\( G^{ab}\\Gamma^c_{ab} \\rightarrow g^{ab}\\gamma^c_{ab} \\) and \\( G^{ab}\\Gamma^3_{ab} \\rightarrow -\\mathrm{Tr}\\,\\alpha \\)
    when \\( q_3 \\rightarrow 0 \\). The values along the (decreasing) sequence of offsets are extrapolated to zero with a polynomial
    fit. A failure to converge is reported and logged, never raised.

    Returns
    -------
    `LimitRelationsReport`"""
    q3_sequence = np.asarray(q3_sequence, dtype=np.float64)
    assert len(q3_sequence) >= 2, "At least two offsets are needed to extrapolate"
    assert np.all(q3_sequence != 0.0) and np.all(np.diff(np.abs(q3_sequence)) < 0), "Offsets should decrease towards zero"

    geom = geometry_at(chart, q1, q2)
    targets = np.array([
        np.einsum('ab,ab->', geom.g_inv, geom.gamma2[0]),
        np.einsum('ab,ab->', geom.g_inv, geom.gamma2[1]),
        -np.trace(geom.alpha)])

    values = []
    for q3 in q3_sequence:
        bulk = bulk_metric_at(chart, q1, q2, q3)
        G_inv = bulk.G_inv[:2, :2]
        values.append([np.einsum('ab,ab->', G_inv, bulk.Gamma3[k, :2, :2]) for k in range(3)])
    values = np.array(values)

    degree = min(len(q3_sequence) - 1, 3)
    extrapolated = np.array([np.polyfit(q3_sequence, values[:, k], degree)[-1] for k in range(3)])
    deviation = float(np.max(np.abs(extrapolated - targets)))

    errors = np.max(np.abs(values - targets), axis=1)
    scale = max(1.0, float(np.max(np.abs(targets))))

    if np.all(errors < 1e-12*scale):
        order = None
    else:
        mask = errors > 1e-13*scale
        order = float(np.polyfit(np.log(np.abs(q3_sequence[mask])), np.log(errors[mask]), 1)[0]) if np.sum(mask) >= 2 else None

    converged = deviation <= tolerance*scale

    if not converged:
        logging.log_warning(f'Limit relations on chart {chart.name} at q=({q1:.4g}, {q2:.4g}) did not converge: deviation {deviation:.2e}')

    return LimitRelationsReport(q3_sequence, values, targets, extrapolated, deviation, order, converged, tolerance)

def metric_derivatives(chart, q1, q2):
    """\\( \\partial_c g_{ab} = \\partial_c\\partial_a \\vec{r} \\cdot \\partial_b \\vec{r} + \\partial_a \\vec{r} \\cdot \\partial_c \\partial_b \\vec{r} \\),
    indexed [..., c, a, b]."""
    r_a = chart.tangents(q1, q2)
    r_ab = chart.second_derivatives(q1, q2)
    d = np.einsum('...cai,...bi->...cab', r_ab, r_a)
    return d + np.swapaxes(d, -1, -2)

def gaussian_curvature_intrinsic(chart, q1, q2):
    """Gaussian curvature from the metric alone (Brioschi formula), with the second derivatives of the metric taken
    by finite differences. Agrees with \\( \\det \\alpha \\) on smooth charts (Gauss' theorem)."""
    geom = geometry_at(chart, q1, q2)
    E, F, Gc = geom.g[0, 0], geom.g[0, 1], geom.g[1, 1]

    dg = metric_derivatives(chart, q1, q2)
    E_u, E_v = dg[0, 0, 0], dg[1, 0, 0]
    F_u, F_v = dg[0, 0, 1], dg[1, 0, 1]
    G_u, G_v = dg[0, 1, 1], dg[1, 1, 1]

    d = FiniteDifference(step=chart.derivatives.step)
    E_vv = d.first(lambda a, b: metric_derivatives(chart, a, b)[..., 1, 0, 0], (q1, q2), 1)
    G_uu = d.first(lambda a, b: metric_derivatives(chart, a, b)[..., 0, 1, 1], (q1, q2), 0)
    F_uv = d.first(lambda a, b: metric_derivatives(chart, a, b)[..., 0, 0, 1], (q1, q2), 1)

    A = np.array([
        [-0.5*E_vv + F_uv - 0.5*G_uu, 0.5*E_u, F_u - 0.5*E_v],
        [F_v - 0.5*G_u, E, F],
        [0.5*G_v, F, Gc]])
    B = np.array([
        [0., 0.5*E_v, 0.5*G_u],
        [0.5*E_v, E, F],
        [0.5*G_u, F, Gc]])

    return float((np.linalg.det(A) - np.linalg.det(B))/(E*Gc - F**2)**2)

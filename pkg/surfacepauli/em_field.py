"""The em_field module represents static electromagnetic potentials in the curvilinear coordinates \\( (q_1, q_2, q_3) \\)
of the thin neighbourhood of a surface. The vector potential is given by its covariant components \\( A_i \\), the electric
potential \\( \\phi_e \\) is a function on the surface.

A gauge transformation with the scalar function \\( \\gamma \\) acts as

$$
A_i' = A_i + \\partial_i \\gamma, \\quad \\psi' = \\psi e^{-ie\\gamma/\\hbar},
$$

which leaves the covariant derivative \\( D_i = \\partial_i + \\frac{ie}{\\hbar} A_i \\) covariant. The thin-layer gauge

$$
\\gamma(q_1, q_2, q_3) = -\\int_0^{q_3} A_3(q_1, q_2, z) \\, dz
$$

removes the normal component of the vector potential so that the surface and normal dynamics decouple
(`thin_layer_gauge`). The magnetic field follows from the curl \\( \\xi^i = \\frac{1}{\\sqrt{G}} \\epsilon^{ijk} \\partial_j A_k \\).

Fields are normally built from one of the presets (`sphere_uniform`, `cylinder_mixed`, `torus_mixed`, `zero_field`)
or from expressions in the coordinates, parsed by `Expression`:

```
field = custom_field(['0', '0.5*sin(q1)^2', '0'], phi_e='0.1*cos(q1)')
```
"""

__pdoc__ = {}
__pdoc__['EMField.__str__'] = False
__pdoc__['Expression.__str__'] = False

import ast
from math import pi

import numpy as np
from scipy.integrate import quad_vec

from . import geometry as G
from . import logging
from .spin import levi_civita

class ExpressionError(ValueError):
    """Raised when an expression string cannot be parsed or uses unsupported constructs."""
    pass

class FieldError(ValueError):
    """Raised for an unknown field preset, a preset on the wrong chart or an incomplete custom field."""
    pass


class Expression:
    """A small arithmetic expression over named coordinates. Supported are numbers, the constant `pi`, the operators
    `+ - * /` and `^` (or `**`) for exponentiation, and the functions `sin`, `cos` and `exp`. Evaluation is vectorized.

    Parameters
    ----------
    text: str or float
        The expression, a plain number is accepted as a constant.
    variables: tuple of str
        Names of the arguments, in call order."""

    functions = {'sin': np.sin, 'cos': np.cos, 'exp': np.exp}

    def __init__(self, text, variables=('q1', 'q2')):
        self.variables = tuple(variables)

        if isinstance(text, (int, float)) and not isinstance(text, bool):
            text = repr(float(text))

        if not isinstance(text, str):
            raise ExpressionError(f'Expression should be a string or a number, got {type(text).__name__}')

        self.text = text

        try:
            tree = ast.parse(text.replace('^', '**'), mode='eval')
        except SyntaxError as e:
            raise ExpressionError(f"Could not parse expression '{text}': {e.msg}")

        self._check(tree.body)
        self._tree = tree.body

    def __str__(self):
        return f"<SurfacePauli Expression '{self.text}' over ({', '.join(self.variables)})>"

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if not isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)):
                raise ExpressionError(f"Operator {type(node.op).__name__} not supported in '{self.text}'")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ExpressionError(f"Unary operator {type(node.op).__name__} not supported in '{self.text}'")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in self.functions:
                raise ExpressionError(f"Only the functions {', '.join(self.functions)} are supported in '{self.text}'")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"Function {node.func.id} takes exactly one argument in '{self.text}'")
            self._check(node.args[0])
        elif isinstance(node, ast.Name):
            if node.id not in self.variables and node.id != 'pi':
                raise ExpressionError(f"Unknown variable '{node.id}' in '{self.text}', allowed are {', '.join(self.variables)}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"Constant {node.value!r} not supported in '{self.text}'")
        else:
            raise ExpressionError(f"Construct {type(node).__name__} not supported in '{self.text}'")

    def _evaluate(self, node, values):
        if isinstance(node, ast.BinOp):
            l = self._evaluate(node.left, values)
            r = self._evaluate(node.right, values)

            if isinstance(node.op, ast.Add):
                return l + r
            elif isinstance(node.op, ast.Sub):
                return l - r
            elif isinstance(node.op, ast.Mult):
                return l * r
            elif isinstance(node.op, ast.Div):
                return l / r
            else:
                return l ** r
        elif isinstance(node, ast.UnaryOp):
            v = self._evaluate(node.operand, values)
            return -v if isinstance(node.op, ast.USub) else v
        elif isinstance(node, ast.Call):
            return self.functions[node.func.id](self._evaluate(node.args[0], values))
        elif isinstance(node, ast.Name):
            return pi if node.id == 'pi' else values[node.id]
        else:
            return float(node.value)

    def __call__(self, *args):
        assert len(args) == len(self.variables), f"Expression expects {len(self.variables)} arguments"
        arrays = np.broadcast_arrays(*[np.asarray(a, dtype=np.float64) for a in args])
        result = self._evaluate(self._tree, dict(zip(self.variables, arrays)))
        return np.broadcast_to(np.asarray(result, dtype=np.float64), arrays[0].shape).copy()

    def is_constant(self):
        return not any(isinstance(n, ast.Name) and n.id != 'pi' for n in ast.walk(self._tree))


class EMField:
    """Static electromagnetic field on the neighbourhood of a surface.

    Parameters
    ----------
    A: callable
        Function of (q1, q2, q3) returning the covariant components \\( (A_1, A_2, A_3) \\), shape (..., 3).
    phi_e: callable, optional
        Function of (q1, q2) returning the electric potential. None means zero.
    e_charge: float
        Coupling constant \\( e \\).
    name: str
        Preset name, used in reports.
    parameters: dict
        Field strengths etc., used in reports and by the closed form oracles."""

    def __init__(self, A, phi_e=None, e_charge=1.0, name='custom', parameters=None, thin_layer=False, gauge_tag='preset'):
        self.A = A
        self.phi_e = phi_e
        self.e_charge = e_charge
        self.name = name
        self.parameters = dict(parameters) if parameters is not None else {}
        self.thin_layer = thin_layer
        self.gauge_tag = gauge_tag

    def __str__(self):
        params = ', '.join(f'{k}={v}' for k, v in self.parameters.items())
        return f'<SurfacePauli EMField {self.name} ({params}), e={self.e_charge}, gauge={self.gauge_tag}>'

    def potential(self, q1, q2, q3=0.0):
        """Covariant components \\( A_i \\) at the given points, shape (..., 3)."""
        q1, q2, q3 = np.broadcast_arrays(*[np.asarray(q, dtype=np.float64) for q in (q1, q2, q3)])
        return np.asarray(self.A(q1, q2, q3), dtype=np.float64)

    def scalar_potential(self, q1, q2):
        q1, q2 = np.broadcast_arrays(np.asarray(q1, dtype=np.float64), np.asarray(q2, dtype=np.float64))

        if self.phi_e is None:
            return np.zeros(q1.shape)

        return np.asarray(self.phi_e(q1, q2), dtype=np.float64)

    def potential_derivatives(self, q1, q2, q3=0.0):
        """\\( \\partial_j A_k \\) indexed [..., j, k], by finite differences."""
        d = G.FiniteDifference()
        return np.stack([d.first(self.A, (q1, q2, q3), j) for j in range(3)], axis=-2)

    def with_parameters(self, **kwargs):
        """Copy of the field with the same potentials and updated report parameters."""
        parameters = dict(self.parameters)
        parameters.update(kwargs)
        return EMField(self.A, self.phi_e, self.e_charge, self.name, parameters, self.thin_layer, self.gauge_tag)


class GaugeFunction:
    """A static gauge function \\( \\gamma(q_1, q_2, q_3) \\).

    Parameters
    ----------
    gamma: callable
        Function of (q1, q2, q3).
    gradient: callable, optional
        Analytic gradient, returning shape (..., 3). Finite differences are used when omitted."""

    def __init__(self, gamma, gradient=None, name='custom'):
        self.gamma = gamma
        self._gradient = gradient
        self.name = name

    def __call__(self, q1, q2, q3=0.0):
        q1, q2, q3 = np.broadcast_arrays(*[np.asarray(q, dtype=np.float64) for q in (q1, q2, q3)])
        return np.asarray(self.gamma(q1, q2, q3), dtype=np.float64)

    def gradient(self, q1, q2, q3=0.0):
        q1, q2, q3 = np.broadcast_arrays(*[np.asarray(q, dtype=np.float64) for q in (q1, q2, q3)])

        if self._gradient is not None:
            return np.asarray(self._gradient(q1, q2, q3), dtype=np.float64)

        d = G.FiniteDifference()
        return np.stack([d.first(self.gamma, (q1, q2, q3), j) for j in range(3)], axis=-1)

    def phase(self, q1, q2, q3=0.0, e_charge=1.0, hbar=1.0):
        """The factor \\( e^{-ie\\gamma/\\hbar} \\) multiplying the wavefunction."""
        return np.exp(-1j*e_charge*self(q1, q2, q3)/hbar)

def gauge_transform(field, gauge):
    """Apply \\( A_i' = A_i + \\partial_i \\gamma \\). The companion rule for wavefunctions is `GaugeFunction.phase`
    (see also `gauge_transform_spinor`)."""

    def A(q1, q2, q3):
        return field.potential(q1, q2, q3) + gauge.gradient(q1, q2, q3)

    return EMField(A, field.phi_e, field.e_charge, field.name, field.parameters,
        thin_layer=False, gauge_tag=f'{field.gauge_tag}+{gauge.name}')

def gauge_transform_spinor(values, gauge, q1, q2, e_charge=1.0, hbar=1.0):
    """Multiply spinor grid values of shape (n1, n2, components) by \\( e^{-ie\\gamma/\\hbar} \\) evaluated on the surface."""
    return values*gauge.phase(q1, q2, 0.0, e_charge, hbar)[..., np.newaxis]

def thin_layer_gauge(field, tolerance=1e-10):
    """Transform the field to the gauge in which \\( A_3 \\equiv 0 \\), using
    \\( \\gamma = -\\int_0^{q_3} A_3 \\, dz = -q_3 \\int_0^1 A_3(q_1, q_2, t q_3) \\, dt \\).
    The integral is evaluated adaptively; an estimated error above `tolerance` is logged as a warning.
    The surface components \\( A_a(q_1, q_2, 0) \\) are left unchanged. Applying the gauge twice is the same as applying it once."""
    if field.thin_layer:
        return field

    def gamma(q1, q2, q3):
        q1, q2, q3 = np.broadcast_arrays(*[np.asarray(q, dtype=np.float64) for q in (q1, q2, q3)])
        result, error = quad_vec(lambda t: -q3*field.potential(q1, q2, t*q3)[..., 2], 0., 1., epsabs=tolerance)

        if np.max(error) > tolerance*max(1.0, np.max(np.abs(result))):
            logging.log_warning(f'Thin layer gauge integral of field {field.name} has estimated error {np.max(error):.2e}')

        return result

    gauge = GaugeFunction(gamma, name='thin_layer')
    d = G.FiniteDifference()

    def potential(q1, q2, q3):
        A = field.potential(q1, q2, q3).copy()
        for a in range(2):
            A[..., a] += d.first(gamma, (q1, q2, q3), a)
        A[..., 2] = 0.0
        return A

    transformed = EMField(potential, field.phi_e, field.e_charge, field.name, field.parameters,
        thin_layer=True, gauge_tag=field.gauge_tag)
    transformed.gauge = gauge
    return transformed

def normal_component_on_surface(field, q1, q2):
    """Largest \\( |A_3| \\) on the surface at the given points."""
    return float(np.max(np.abs(field.potential(q1, q2, 0.0)[..., 2])))

def magnetic_field_at(field, chart, q1, q2, q3=0.0):
    """Contravariant components of the curl \\( \\xi^i = \\frac{1}{\\sqrt{G}} \\epsilon^{ijk} \\partial_j A_k \\) with
    \\( \\sqrt{G} = f \\sqrt{g} \\).

    Raises
    ------
    `surfacepauli.geometry.DegenerateMetricError`"""
    geom = G.geometry_on(chart, q1, q2)
    f = 1 + 2*geom.M*q3 + geom.K*q3**2
    dA = field.potential_derivatives(q1, q2, q3)
    return np.einsum('ijk,...jk->...i', levi_civita(3), dA)/(f*geom.sqrt_g)[..., np.newaxis]

def _bulk_tangents(geom, q3):
    R_a = geom.tangents + q3*geom.normal_derivatives
    return np.concatenate([R_a, geom.normal[..., np.newaxis, :]], axis=-2)

def magnetic_field_cartesian(field, chart, q1, q2, q3=0.0):
    """Cartesian magnetic field \\( \\vec{B} = \\xi^i \\partial_i \\vec{R} \\)."""
    geom = G.geometry_on(chart, q1, q2)
    xi = magnetic_field_at(field, chart, q1, q2, q3)
    return np.einsum('...i,...ix->...x', xi, _bulk_tangents(geom, q3))

def cartesian_to_covariant(A_cartesian, chart, phi_e=None, e_charge=1.0, name='cartesian'):
    """Build a field from a Cartesian vector potential, a function of (x, y, z) returning shape (..., 3), through
    \\( A_i = \\vec{A} \\cdot \\partial_i \\vec{R} \\)."""

    def A(q1, q2, q3):
        geom = G.geometry_on(chart, q1, q2)
        R = geom.position + q3[..., np.newaxis]*geom.normal
        vector = np.asarray(A_cartesian(R[..., 0], R[..., 1], R[..., 2]), dtype=np.float64)
        return np.einsum('...x,...ix->...i', vector, _bulk_tangents(geom, q3[..., np.newaxis, np.newaxis]))

    return EMField(A, phi_e, e_charge, name)

def lorentz_gauge_residual(field, chart, q1, q2, q3=0.0):
    """\\( g^{ab} \\partial_a A_b + \\partial_3 A_3 \\) for a static field, with \\( g^{ab} \\) the surface metric."""
    geom = G.geometry_on(chart, q1, q2)
    dA = field.potential_derivatives(q1, q2, q3)
    return np.einsum('...ab,...ab->...', geom.g_inv, dA[..., :2, :2]) + dA[..., 2, 2]

def line_integral(field, start, end, order=8):
    """\\( \\int A_a \\, dq^a \\) along the straight segment from `start` to `end` in the surface coordinates,
    using Gauss-Legendre quadrature. `start` and `end` are pairs of (broadcastable) coordinate arrays."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    s1, s2 = [np.asarray(s, dtype=np.float64) for s in start]
    e1, e2 = [np.asarray(e, dtype=np.float64) for e in end]
    d1, d2 = e1 - s1, e2 - s2

    total = 0.0
    for t, w in zip(0.5*(nodes + 1), 0.5*weights):
        A = field.potential(s1 + t*d1, s2 + t*d2, 0.0)
        total = total + w*(A[..., 0]*d1 + A[..., 1]*d2)

    return total


def zero_field(e_charge=1.0, phi_e=None):
    """Vanishing vector potential."""
    return EMField(lambda q1, q2, q3: np.zeros(np.shape(q1) + (3,)), phi_e, e_charge, 'zero', thin_layer=True)

def sphere_uniform(B, r=1.0, e_charge=1.0, phi_e=None):
    """Uniform field \\( B \\) along the polar axis of a sphere of radius \\( r \\):
    \\( (A_\\theta, A_\\phi, A_\\rho) = (0, \\frac{1}{2} B \\rho^2 \\sin^2\\theta, 0) \\) with \\( \\rho = r + q_3 \\)."""

    def A(t, p, q3):
        rho = r + q3
        zero = np.zeros_like(t*p*q3)
        return np.stack([zero, 0.5*B*rho**2*np.sin(t)**2 + zero, zero], axis=-1)

    return EMField(A, phi_e, e_charge, 'sphere_uniform', dict(B=B, r=r), thin_layer=True)

def cylinder_mixed(B0, B1, r=1.0, e_charge=1.0, phi_e=None):
    """Field \\( B_0 \\) along the cylinder axis plus a transverse field \\( B_1 \\):
    \\( (A_\\theta, A_y, A_\\rho) = (\\frac{1}{2}\\rho^2 B_0, \\rho B_1 \\sin\\theta, 0) \\) with \\( \\rho = r + q_3 \\)."""

    def A(t, y, q3):
        rho = r + q3
        zero = np.zeros_like(t*y*q3)
        return np.stack([0.5*rho**2*B0 + zero, rho*B1*np.sin(t) + zero, zero], axis=-1)

    return EMField(A, phi_e, e_charge, 'cylinder_mixed', dict(B0=B0, B1=B1, r=r), thin_layer=True)

def torus_mixed(B0, B1, R0=2.0, r=1.0, e_charge=1.0, phi_e=None):
    """Field \\( B_0 \\) along the symmetry axis of the torus plus a transverse field \\( B_1 \\):

    $$
    A_\\theta = \\frac{1}{2} B_1 \\rho \\sin\\phi (R_0 \\sin\\theta + \\rho), \\quad
    A_\\phi = \\frac{1}{2} R (B_0 R - B_1 \\rho \\cos\\theta \\cos\\phi), \\quad A_\\rho = 0,
    $$

    with \\( \\rho = r + q_3 \\) and \\( R = R_0 + \\rho\\sin\\theta \\)."""

    def A(t, p, q3):
        rho = r + q3
        R = R0 + rho*np.sin(t)
        A_t = 0.5*B1*rho*np.sin(p)*(R0*np.sin(t) + rho)
        A_p = 0.5*R*(B0*R - B1*rho*np.cos(t)*np.cos(p))
        return np.stack(np.broadcast_arrays(A_t, A_p, np.zeros_like(A_t)), axis=-1)

    return EMField(A, phi_e, e_charge, 'torus_mixed', dict(B0=B0, B1=B1, R0=R0, r=r), thin_layer=True)

def custom_field(A, phi_e=None, e_charge=1.0):
    """Field from three expression strings for \\( (A_1, A_2, A_3) \\) over q1, q2, q3 and an optional
    expression (or number) for \\( \\phi_e \\) over q1, q2."""
    if len(A) != 3:
        raise FieldError(f'Custom field needs three components, got {len(A)}')
    components = [Expression(a, ('q1', 'q2', 'q3')) for a in A]

    def potential(q1, q2, q3):
        return np.stack([c(q1, q2, q3) for c in components], axis=-1)

    thin = components[2].is_constant() and float(components[2](0., 0., 0.)) == 0.0
    field = EMField(potential, scalar_potential(phi_e), e_charge, 'custom', dict(A=[c.text for c in components]), thin_layer=thin)
    return field

def scalar_potential(phi_e):
    """Electric potential from None, a number or an expression string over q1, q2."""
    if phi_e is None:
        return None

    return Expression(phi_e, ('q1', 'q2'))

PRESETS = {
    'sphere_uniform': ('sphere', sphere_uniform),
    'cylinder_mixed': ('cylinder', cylinder_mixed),
    'torus_mixed': ('torus', torus_mixed)
}
"""Presets with the chart they belong to."""

def make_field(chart, preset, B=0.0, B0=0.0, B1=0.0, phi_e=None, e_charge=1.0, A=None):
    """Construct a field for a chart from a preset name ('sphere_uniform', 'cylinder_mixed', 'torus_mixed', 'zero' or 'custom').

    Raises
    ------
    FieldError
        For an unknown preset, a preset belonging to another chart or a custom field without components."""
    phi = scalar_potential(phi_e)

    if preset == 'zero':
        return zero_field(e_charge, phi)
    elif preset == 'custom':
        if A is None:
            raise FieldError('Custom field requires the three components A')
        return custom_field(A, phi_e, e_charge)

    if preset not in PRESETS:
        raise FieldError(f"Unknown field preset '{preset}', choose one of zero, custom, {', '.join(PRESETS)}")

    chart_name, constructor = PRESETS[preset]
    if chart.name != chart_name:
        raise FieldError(f"Field preset '{preset}' requires the {chart_name} chart, got {chart.name}")

    if preset == 'sphere_uniform':
        return sphere_uniform(B, chart.parameters['r'], e_charge, phi)
    elif preset == 'cylinder_mixed':
        return cylinder_mixed(B0, B1, chart.parameters['r'], e_charge, phi)
    else:
        return torus_mixed(B0, B1, chart.parameters['R0'], chart.parameters['r'], e_charge, phi)

def random_surface_gauge(chart, seed=0, modes=2, amplitude=0.5):
    """A smooth random gauge function \\( \\gamma(q_1, q_2) \\) with analytic gradient. Along periodic coordinates it is a
    sum of Fourier modes commensurate with the period, so that it is single valued on the surface."""
    rng = np.random.default_rng(seed)
    coefficients = amplitude*rng.normal(size=(modes + 1, modes + 1, 2, 2))

    wavenumbers = []
    for axis in range(2):
        lo, hi = chart.domain[axis]
        wavenumbers.append((2*pi if chart.is_periodic(axis) else pi)/(hi - lo))

    def basis(q, axis, n):
        k = n*wavenumbers[axis]
        lo = chart.domain[axis][0]
        return np.cos(k*(q - lo)), np.sin(k*(q - lo)), -k*np.sin(k*(q - lo)), k*np.cos(k*(q - lo))

    def evaluate(q1, q2):
        value = 0.0
        d1 = 0.0
        d2 = 0.0

        for n in range(modes + 1):
            c1, s1, dc1, ds1 = basis(q1, 0, n)
            for m in range(modes + 1):
                c2, s2, dc2, ds2 = basis(q2, 1, m)
                a = coefficients[n, m]
                f1, df1 = [c1, s1], [dc1, ds1]
                f2, df2 = [c2, s2], [dc2, ds2]

                for i in range(2):
                    for j in range(2):
                        value = value + a[i, j]*f1[i]*f2[j]
                        d1 = d1 + a[i, j]*df1[i]*f2[j]
                        d2 = d2 + a[i, j]*f1[i]*df2[j]

        return value, d1, d2

    def gamma(q1, q2, q3):
        return evaluate(q1, q2)[0] + 0*q3

    def gradient(q1, q2, q3):
        _, d1, d2 = evaluate(q1, q2)
        return np.stack(np.broadcast_arrays(d1, d2, 0*q3), axis=-1)

    return GaugeFunction(gamma, gradient, name=f'random{seed}')

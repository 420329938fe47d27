"""The hamiltonian module assembles the surface Pauli operator of a charged spin-1/2 particle confined to a surface.
In the thin-layer gauge the surface dynamics of the primed spinor \\( \\chi' = U \\chi_s \\) is governed by

$$
H = -\\frac{1}{2m} \\Big\\{ \\frac{\\hbar^2}{\\sqrt{g}} \\mathcal{D}_a \\sqrt{g} g^{ab} \\mathcal{D}_b
- \\frac{e\\hbar}{\\sqrt{g}} \\epsilon^{ab} (\\partial_a A_b) \\sigma_3
- \\frac{e\\hbar}{\\sqrt{g}} \\epsilon^{ab} (\\partial_b A_3) \\sigma_a \\Big\\} + V_g - e\\phi_e,
$$

with \\( \\mathcal{D}_a = \\partial_a + \\Omega_a + \\frac{ie}{\\hbar} A_a \\) and \\( \\Omega_a = U \\partial_a U^{-1} \\) the spin connection of the
spinor rotation. Expanding the covariant derivatives gives the terms, each identified by a tag:

- `kinetic`: the Laplace-Beltrami operator \\( -\\frac{\\hbar^2}{2m} \\frac{1}{\\sqrt{g}} \\partial_a \\sqrt{g} g^{ab} \\partial_b \\)
- `spin_connection`: all terms containing \\( \\Omega_a \\)
- `paramagnetic`: \\( -\\frac{ie\\hbar}{m} g^{ab} A_a \\partial_b \\)
- `divergence`: \\( -\\frac{ie\\hbar}{2m} \\frac{1}{\\sqrt{g}} \\partial_a (\\sqrt{g} g^{ab} A_b) \\)
- `diamagnetic`: \\( \\frac{e^2}{2m} g^{ab} A_a A_b \\)
- `zeeman` and `zeeman_tangential`: the two Pauli matrix couplings to the magnetic field
- `geometric_potential`: \\( V_g = -\\frac{\\hbar^2}{2m}(M^2 - K) \\)
- `electric_potential`: \\( -e\\phi_e \\)

`assemble_surface_operator` evaluates the coefficients on a grid for discretization by `surfacepauli.solver.discretize`. The
spin connection is never written out there: derivatives act through the rotation on the links of the grid. The continuous
coefficients of every term are available through `SurfacePauliOperator.normal_form`, which is what `compare_operators` uses to
check the assembly term by term against the closed form operators of the sphere, cylinder and torus (`closed_form_oracle`).
Some closed form terms disagree with the general operator; these are listed in `KNOWN_DISCREPANCIES` and reported as
INFO together with a check of the corrected term.
"""

__pdoc__ = {}
__pdoc__['SurfacePauliOperator.__str__'] = False
__pdoc__['ComparisonReport.__str__'] = False
__pdoc__['NormalFormTerm.__str__'] = False

from math import pi

import numpy as np

from . import geometry as G
from . import spin as S
from . import em_field as E
from . import solver
from . import logging
from . import util

TERM_TAGS = ['kinetic', 'spin_connection', 'paramagnetic', 'divergence', 'diamagnetic',
    'zeeman', 'zeeman_tangential', 'geometric_potential', 'electric_potential']

class GaugePreconditionError(ValueError):
    """Raised when the field has a normal component on the surface; apply `surfacepauli.em_field.thin_layer_gauge` first."""
    pass

class GridMismatchError(ValueError):
    """Raised when operators on different charts, fields or grids are compared, or an oracle is requested for an unsupported
    chart and field combination."""
    pass


class NormalFormTerm:
    """A differential operator \\( C_2^{ab} \\partial_a \\partial_b + C_1^a \\partial_a + C_0 \\) with matrix valued coefficients
    sampled on grid nodes. Missing coefficients are zero.

    Parameters
    ----------
    tag: str
    C2: array of shape (n1, n2, 2, 2, c, c)
    C1: array of shape (n1, n2, 2, c, c)
    C0: array of shape (n1, n2, c, c)
    source: str
        Human readable origin of the term."""

    def __init__(self, tag, C2=None, C1=None, C0=None, source=''):
        self.tag = tag
        self.C2 = C2
        self.C1 = C1
        self.C0 = C0
        self.source = source

    def __str__(self):
        orders = [name for name, C in [('C2', self.C2), ('C1', self.C1), ('C0', self.C0)] if C is not None]
        return f"<SurfacePauli NormalFormTerm {self.tag} ({', '.join(orders)})>"

    def apply(self, psi, dpsi, d2psi):
        """Apply to a field given with its analytic derivatives, shapes (n1, n2, c), (n1, n2, 2, c) and (n1, n2, 2, 2, c)."""
        result = np.zeros(psi.shape, dtype=np.complex128)

        if self.C2 is not None:
            result += np.einsum('...abij,...abj->...i', self.C2, d2psi)
        if self.C1 is not None:
            result += np.einsum('...aij,...aj->...i', self.C1, dpsi)
        if self.C0 is not None:
            result += np.einsum('...ij,...j->...i', self.C0, psi)

        return result

    def scaled(self, factor):
        return NormalFormTerm(self.tag, *[None if C is None else factor*C for C in (self.C2, self.C1, self.C0)], source=self.source)

    def __add__(self, other):
        def add(a, b):
            if a is None:
                return b
            if b is None:
                return a
            return a + b

        return NormalFormTerm(self.tag, add(self.C2, other.C2), add(self.C1, other.C1), add(self.C0, other.C0),
            source='; '.join(s for s in [self.source, other.source] if s))


class SurfacePauliOperator:
    """The surface Pauli operator evaluated on a grid. Assembled operators (`source == 'assembled'`) carry the coefficient
    data needed by `surfacepauli.solver.discretize`:

    - `sqrt_g`: \\( \\sqrt{g} \\) at the nodes
    - `flux`: \\( \\sqrt{g} g^{aa} \\) at the n + 1 cell faces along each coordinate
    - `cross`: \\( \\sqrt{g} g^{12} \\) at the nodes, or None for orthogonal charts
    - `link_phase`: \\( \\int A_a dq^a \\) from every node to its successor along each coordinate
    - `link_phase_diagonal`: the same along the diagonals (i+1, j+1) and (i+1, j-1), when `cross` is used
    - `U`: the spinor rotation at the nodes
    - `potential`: local matrix terms \\( V_g - e\\phi_e \\) plus the Zeeman couplings, shape (n1, n2, c, c)

    Oracle operators (`source == 'oracle'`) only carry tagged `NormalFormTerm` objects and cannot be discretized."""

    def __init__(self, chart, field, grid, hbar=1.0, mass=1.0, components=2, representation='primed', source='assembled'):
        self.chart = chart
        self.field = field
        self.grid = grid
        self.hbar = hbar
        self.mass = mass
        self.e_charge = field.e_charge
        self.components = components
        self.representation = representation
        self.source = source
        self.options = {}

        self.sqrt_g = None
        self.flux = None
        self.cross = None
        self.link_phase = None
        self.link_phase_diagonal = None
        self.U = None
        self.potential = None
        self.local_terms = {}
        self.terms = None

    def __str__(self):
        return f'<SurfacePauli SurfacePauliOperator ({self.source}) on {self.chart.name}, field {self.field.name}, ' \
            f'{self.grid.n[0]}x{self.grid.n[1]}, {self.components} component(s), {self.representation} representation>'

    @property
    def spin(self):
        return self.components == 2

    def normal_form(self):
        """Tagged `NormalFormTerm` objects of the operator at the grid nodes."""
        if self.terms is None:
            self.terms = _assembled_normal_form(self)
        return self.terms

    def discretize(self):
        """Shortcut for `surfacepauli.solver.discretize`."""
        return solver.discretize(self)

    def zero_like(self):
        """Operator with the same grid and structure but all coefficients zero."""
        op = SurfacePauliOperator(self.chart, self.field, self.grid, self.hbar, self.mass, self.components, self.representation)
        op.e_charge = 0.0
        op.sqrt_g = self.sqrt_g
        op.flux = tuple(np.zeros_like(f) for f in self.flux)
        op.link_phase = tuple(np.zeros_like(p) for p in self.link_phase)
        op.U = self.U
        op.potential = np.zeros_like(self.potential)
        return op

    def matrix_pauli_coefficients(self):
        """Pauli basis coefficients \\( (c_0, c_1, c_2, c_3) \\) of the field coupling matrix terms (`zeeman` plus
        `zeeman_tangential`) at every node, shape (n1, n2, 4)."""
        assert self.spin, "Spinless operators have no matrix part"
        return S.pauli_decomposition(self.local_terms['zeeman'] + self.local_terms['zeeman_tangential'])

    def metadata(self):
        return dict(chart=self.chart.name, chart_parameters=_plain(self.chart.parameters),
            field=self.field.name, field_parameters=_plain(self.field.parameters), gauge=self.field.gauge_tag,
            grid=list(self.grid.n), boundaries=[str(b) for b in self.grid.boundaries],
            components=self.components, representation=self.representation,
            hbar=self.hbar, mass=self.mass, e_charge=self.e_charge, options=_plain(self.options))

def _plain(d):
    result = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        elif isinstance(v, tuple):
            v = list(v)
        result[k] = v
    return result

def _collect_rows(f, n):
    return np.concatenate(util.split_collect(f, np.arange(n)), axis=0)

def check_thin_layer_gauge(field, grid, tolerance=1e-12):
    """Raise `GaugePreconditionError` when \\( A_3 \\neq 0 \\) on the surface at the grid nodes."""
    Q1, Q2 = grid.meshgrid()
    A3 = E.normal_component_on_surface(field, Q1, Q2)

    if A3 > tolerance:
        raise GaugePreconditionError(f'Field {field.name} has a normal component |A3| = {A3:.3e} on the surface, '
            'apply em_field.thin_layer_gauge before assembling the surface operator')

def spinor_rotation_on_grid(chart, grid):
    """Spinor rotation at the grid nodes: the closed form for builtin charts, otherwise the lifts propagated by continuity."""
    Q1, Q2 = grid.meshgrid()
    U = S.closed_form_rotation(chart.name, Q1, Q2)

    if U is None:
        U = S.propagate_spinor_branch(chart, grid.nodes(0), grid.nodes(1)).U

    return U

def assemble_surface_operator(chart, field, grid=None, n1=None, n2=None, hbar=1.0, mass=1.0, spin=True,
        representation='primed', geometric_potential=True, quadrature_order=8):
    """Assemble the surface Pauli operator of a chart and field on a grid.

    Parameters
    ----------
    chart: `surfacepauli.geometry.SurfaceChart`
    field: `surfacepauli.em_field.EMField`
        Should be in the thin-layer gauge.
    grid: `surfacepauli.solver.GridSpec`, optional
        When omitted, `surfacepauli.solver.grid_for_chart` is used with `n1` by `n2` nodes.
    hbar, mass: float
    spin: bool
        False gives the spinless surface Schrödinger operator with a single component.
    representation: str
        'primed' for \\( \\chi' = U\\chi_s \\) (rotated spinors, antiperiodic where the rotation changes sign) or 'lab' for the
        ordinary spinor components.
    geometric_potential: bool
        Whether to include \\( V_g \\).
    quadrature_order: int
        Number of Gauss-Legendre nodes for the link phase integrals.

    Returns
    -------
    `SurfacePauliOperator`

    Raises
    ------
    GaugePreconditionError
        If the field has a normal component on the surface."""
    assert representation in ['primed', 'lab'], "Representation should be 'primed' or 'lab'"

    if grid is None:
        assert n1 is not None and n2 is not None, "Either a grid or the numbers of nodes should be given"
        provisional = solver.grid_for_chart(chart, n1, n2, spin=False)
        U_nodes = spinor_rotation_on_grid(chart, provisional) if spin else None
        grid = solver.grid_for_chart(chart, n1, n2, spin=spin, representation=representation, U_nodes=U_nodes)

    check_thin_layer_gauge(field, grid)

    components = 2 if spin else 1
    op = SurfacePauliOperator(chart, field, grid, hbar, mass, components, representation)
    op.options = dict(spin=spin, geometric_potential=geometric_potential, quadrature_order=quadrature_order)

    with util.Timer('assembly'):
        q1, q2 = grid.nodes(0), grid.nodes(1)
        Q1, Q2 = grid.meshgrid()
        h1, h2 = grid.spacing(0), grid.spacing(1)

        geom = G.geometry_on(chart, Q1, Q2)
        op.sqrt_g = geom.sqrt_g

        if spin:
            op.U = spinor_rotation_on_grid(chart, grid)
        else:
            op.U = np.ones(grid.shape + (1, 1), dtype=np.complex128)

        op.flux = (_face_flux(chart, grid, 0), _face_flux(chart, grid, 1))

        cross = geom.sqrt_g*geom.g_inv[..., 0, 1]
        scale = max(np.max(np.abs(op.flux[0])), np.max(np.abs(op.flux[1])))
        op.cross = cross if np.max(np.abs(cross)) > 1e-14*scale else None

        def links(rows):
            a, b = q1[rows][:, np.newaxis], q2[np.newaxis, :]
            zero = np.zeros((len(rows), len(q2)))
            result = [E.line_integral(field, (a + zero, b + zero), (a + h1 + zero, b + zero), quadrature_order),
                      E.line_integral(field, (a + zero, b + zero), (a + zero, b + h2 + zero), quadrature_order)]

            if op.cross is not None:
                result.append(E.line_integral(field, (a + zero, b + zero), (a + h1 + zero, b + h2 + zero), quadrature_order))
                result.append(E.line_integral(field, (a + zero, b + zero), (a + h1 + zero, b - h2 + zero), quadrature_order))

            return np.stack(result, axis=-1)

        phases = _collect_rows(links, grid.n[0])
        op.link_phase = (phases[..., 0], phases[..., 1])
        if op.cross is not None:
            op.link_phase_diagonal = (phases[..., 2], phases[..., 3])

        c = components
        identity = np.eye(c, dtype=np.complex128)

        V_g = geom.geometric_potential(hbar, mass) if geometric_potential else np.zeros(grid.shape)
        electric = -field.e_charge*field.scalar_potential(Q1, Q2)

        op.local_terms['geometric_potential'] = V_g[..., np.newaxis, np.newaxis]*identity
        op.local_terms['electric_potential'] = electric[..., np.newaxis, np.newaxis]*identity

        if spin:
            zeeman, tangential = _zeeman_matrices(op, geom, Q1, Q2)
            op.local_terms['zeeman'] = zeeman
            op.local_terms['zeeman_tangential'] = tangential

        op.potential = sum(op.local_terms.values())

    logging.log_debug(f'Assembled {op}')
    return op

def _face_flux(chart, grid, axis):
    """\\( \\sqrt{g} g^{aa} \\) at the faces along `axis`; zero at pole faces."""
    faces = grid.faces(axis)
    other = grid.nodes(1 - axis)
    n = grid.n[axis]

    if grid.boundaries[axis] == solver.BoundaryType.POLE_REGULAR:
        index = np.arange(1, n)
    else:
        index = np.arange(0, n + 1)

    if axis == 0:
        Q1, Q2 = np.meshgrid(faces[index], other, indexing='ij')
    else:
        Q1, Q2 = np.meshgrid(other, faces[index], indexing='ij')

    geom = G.geometry_on(chart, Q1, Q2)
    values = geom.sqrt_g*geom.g_inv[..., axis, axis]

    shape = list(grid.shape)
    shape[axis] = n + 1
    flux = np.zeros(shape)

    if axis == 0:
        flux[index] = values
    else:
        flux[:, index] = values

    return flux

def _lowered_transformed(op, geom):
    """Tangential matrices \\( \\sigma_a \\) with a lower index in the representation of the operator."""
    Sigma_lower = S.lowered_pauli_at(geom)
    if op.representation == 'primed':
        return S.transform_induced(op.U, Sigma_lower)
    return Sigma_lower

def _normal_matrix(op, geom):
    if op.representation == 'primed':
        return np.broadcast_to(S.SIGMA_3, geom.sqrt_g.shape + (2, 2))
    return S.pauli_dot(geom.normal)

def _zeeman_matrices(op, geom, Q1, Q2):
    field = op.field
    dA = field.potential_derivatives(Q1, Q2, 0.0)
    factor = field.e_charge*op.hbar/(2*op.mass)/geom.sqrt_g

    curl = dA[..., 0, 1] - dA[..., 1, 0]
    zeeman = (factor*curl)[..., np.newaxis, np.newaxis]*_normal_matrix(op, geom)

    sigma_lower = _lowered_transformed(op, geom)
    tangential = (factor*dA[..., 1, 2])[..., np.newaxis, np.newaxis]*sigma_lower[..., 0, :, :] \
        - (factor*dA[..., 0, 2])[..., np.newaxis, np.newaxis]*sigma_lower[..., 1, :, :]

    return zeeman, tangential


def _rotation_derivatives(op, Q1, Q2):
    """First and second derivatives of the spinor rotation at the nodes, by finite differences with a step suited for
    differentiating twice."""
    U = op.U
    chart = op.chart
    d = G.FiniteDifference(step=1e-3, second_step=1e-3)

    def rotation(a, b):
        return S.spinor_rotation(chart, a, b, branch_hint=U)

    dU = np.stack([d.first(rotation, (Q1, Q2), a) for a in range(2)], axis=-3)
    d2U = np.stack([np.stack([d.second(rotation, (Q1, Q2), a, b) for b in range(2)], axis=-3) for a in range(2)], axis=-4)
    return dU, d2U

def _assembled_normal_form(op):
    grid = op.grid
    Q1, Q2 = grid.meshgrid()
    geom = G.geometry_on(op.chart, Q1, Q2)
    field = op.field
    c = op.components
    hbar, m, e = op.hbar, op.mass, op.e_charge
    k = -hbar**2/(2*m)
    I = np.eye(c, dtype=np.complex128)

    g_inv = geom.g_inv
    b = -np.einsum('...ab,...cab->...c', g_inv, geom.gamma2)
    A = field.potential(Q1, Q2, 0.0)[..., :2]
    dA = field.potential_derivatives(Q1, Q2, 0.0)[..., :2, :2]

    def scalar(x):
        return np.asarray(x)[..., np.newaxis, np.newaxis]*I

    terms = {}

    terms['kinetic'] = NormalFormTerm('kinetic',
        C2=k*np.einsum('...ab,ij->...abij', g_inv, I), C1=k*np.einsum('...a,ij->...aij', b, I),
        source='Laplace-Beltrami operator')

    gA = np.einsum('...ab,...a->...b', g_inv, A)
    terms['paramagnetic'] = NormalFormTerm('paramagnetic', C1=np.einsum('...b,ij->...bij', -1j*e*hbar/m*gA, I),
        source='-(i e hbar/m) g^ab A_a d_b')

    divergence = np.einsum('...ab,...ab->...', g_inv, dA) + np.einsum('...b,...b->...', b, A)
    terms['divergence'] = NormalFormTerm('divergence', C0=scalar(-1j*e*hbar/(2*m)*divergence),
        source='-(i e hbar/2m) div A')

    terms['diamagnetic'] = NormalFormTerm('diamagnetic', C0=scalar(e**2/(2*m)*np.einsum('...a,...a->...', gA, A)),
        source='(e^2/2m) g^ab A_a A_b')

    for tag in ['geometric_potential', 'electric_potential', 'zeeman', 'zeeman_tangential']:
        if tag in op.local_terms:
            terms[tag] = NormalFormTerm(tag, C0=op.local_terms[tag], source='local term')

    if op.spin and op.representation == 'primed':
        U = op.U
        dU, d2U = _rotation_derivatives(op, Q1, Q2)
        Ud = S.dagger(U)[..., np.newaxis, :, :]
        Omega = -dU @ Ud
        # dOmega[a, b] is the derivative along a of Omega_b.
        dOmega = -(d2U @ Ud[..., np.newaxis, :, :] + dU[..., np.newaxis, :, :, :] @ S.dagger(dU)[..., :, np.newaxis, :, :])

        div_Omega = np.einsum('...b,...bij->...ij', b, Omega) + np.einsum('...ab,...abij->...ij', g_inv, dOmega)
        square = np.einsum('...ab,...aij,...bjk->...ik', g_inv, Omega, Omega)
        coupling = np.einsum('...b,...bij->...ij', gA, Omega)

        terms['spin_connection'] = NormalFormTerm('spin_connection',
            C1=2*k*np.einsum('...ab,...aij->...bij', g_inv, Omega),
            C0=k*(div_Omega + square) + k*2j*e/hbar*coupling,
            source='derivatives acting through the spinor rotation')

    return terms


def _field_strengths(field):
    p = field.parameters
    return p.get('B', 0.0), p.get('B0', 0.0), p.get('B1', 0.0)

def _matrix_term(x, matrix):
    return np.asarray(x)[..., np.newaxis, np.newaxis]*matrix

ORACLE_FIELDS = {
    'sphere': ['sphere_uniform', 'zero'],
    'cylinder': ['cylinder_mixed', 'zero'],
    'torus': ['torus_mixed', 'zero']
}

def closed_form_oracle(chart, field, grid, hbar=1.0, mass=1.0, corrupt=None):
    """The closed form surface Pauli operators of the sphere, cylinder and torus in their field presets, transcribed term for
    term and tagged like the assembled operator. All terms act on the primed spinor.

    Parameters
    ----------
    corrupt: str, optional
        Tag of a term whose sign is flipped, to exercise the failure path of `compare_operators`.

    Raises
    ------
    GridMismatchError
        For charts or fields without a closed form."""
    if chart.name not in ORACLE_FIELDS or field.name not in ORACLE_FIELDS[chart.name]:
        raise GridMismatchError(f'No closed form operator for chart {chart.name} with field {field.name}')

    Q1, Q2 = grid.meshgrid()
    e = field.e_charge
    k = -1/(2*mass)
    I = S.SIGMA_0
    s3 = S.SIGMA_3
    s, c = np.sin(Q1), np.cos(Q1)
    B, B0, B1 = _field_strengths(field)
    phi_e = field.scalar_potential(Q1, Q2)
    zero = np.zeros(grid.shape + (2, 2), dtype=np.complex128)

    def C2(**entries):
        C = np.zeros(grid.shape + (2, 2, 2, 2), dtype=np.complex128)
        for key, value in entries.items():
            a, b = int(key[1]) - 1, int(key[2]) - 1
            C[..., a, b, :, :] = value
        return C

    def C1(**entries):
        C = np.zeros(grid.shape + (2, 2, 2), dtype=np.complex128)
        for key, value in entries.items():
            C[..., int(key[1]) - 1, :, :] = value
        return C

    terms = {}

    if chart.name == 'sphere':
        r = chart.parameters['r']

        terms['kinetic'] = NormalFormTerm('kinetic',
            C2=k*C2(d11=_matrix_term(hbar**2/r**2 + 0*s, I), d22=_matrix_term(hbar**2/(r**2*s**2), I)),
            C1=k*C1(d1=_matrix_term(hbar**2*c/(r**2*s), I)),
            source='hbar^2/r^2 d_theta^2 + hbar^2 cos/(r^2 sin) d_theta + hbar^2/(r^2 sin^2) d_phi^2')
        terms['spin_connection'] = NormalFormTerm('spin_connection',
            C1=k*C1(d2=_matrix_term(-1j*hbar**2/(r**2*s**2), s3)),
            C0=k*(_matrix_term(-0.5*e*hbar*B + 0*s, s3) + _matrix_term(-hbar**2/(4*r**2*s**2), I)),
            source='-(i hbar^2/(r^2 sin^2)) sigma_rho d_phi - e hbar B/2 sigma_rho - hbar^2/(4 r^2 sin^2)')
        terms['paramagnetic'] = NormalFormTerm('paramagnetic', C1=k*C1(d2=_matrix_term(1j*e*hbar*B + 0*s, I)),
            source='i e hbar B d_phi')
        terms['diamagnetic'] = NormalFormTerm('diamagnetic', C0=k*_matrix_term(-0.25*e**2*B**2*r**2*s**2, I),
            source='-e^2 B^2 r^2 sin^2/4')
        terms['zeeman'] = NormalFormTerm('zeeman', C0=k*_matrix_term(-e*hbar*B*c, s3),
            source='-e hbar B cos(theta) sigma_rho')
        terms['electric_potential'] = NormalFormTerm('electric_potential', C0=k*_matrix_term(-e*phi_e, I),
            source='-e phi_e inside the bracket')

    elif chart.name == 'cylinder':
        r = chart.parameters['r']

        terms['kinetic'] = NormalFormTerm('kinetic',
            C2=k*C2(d11=_matrix_term(hbar**2/r**2 + 0*s, I), d22=_matrix_term(hbar**2 + 0*s, I)),
            source='hbar^2/r^2 d_theta^2 + hbar^2 d_y^2')
        terms['paramagnetic'] = NormalFormTerm('paramagnetic',
            C1=k*C1(d1=_matrix_term(1j*e*hbar*B0 + 0*s, I), d2=_matrix_term(2j*e*hbar*r*B1*s, I)),
            source='i e hbar B0 d_theta + 2 i e hbar r B1 sin d_y')
        terms['diamagnetic'] = NormalFormTerm('diamagnetic',
            C0=k*_matrix_term(-(0.25*e**2*r**2*B0**2 + e**2*r**2*B1**2*s**2), I),
            source='-(e^2 r^2 B0^2/4 + e^2 r^2 B1^2 sin^2)')
        terms['zeeman'] = NormalFormTerm('zeeman', C0=k*_matrix_term(-e*hbar*B1*c, s3),
            source='-e hbar B1 cos(theta) sigma_rho')
        terms['spin_connection'] = NormalFormTerm('spin_connection', C0=k*_matrix_term(-hbar**2/(4*r**2) + 0*s, I),
            source='-hbar^2/(4 r^2)')

    else:
        R0, r = chart.parameters['R0'], chart.parameters['r']
        R = R0 + r*s
        sp, cp = np.sin(Q2), np.cos(Q2)
        A_phi_factor = B0*R - B1*r*c*cp

        terms['kinetic'] = NormalFormTerm('kinetic',
            C2=k*C2(d11=_matrix_term(hbar**2/r**2 + 0*s, I), d22=_matrix_term(hbar**2/R**2, I)),
            C1=k*C1(d1=_matrix_term(hbar**2*c/(r*R), I)),
            source='hbar^2/r^2 d_theta^2 + hbar^2 cos/(r R) d_theta + hbar^2/R^2 d_phi^2')
        terms['spin_connection'] = NormalFormTerm('spin_connection',
            C1=k*C1(d2=_matrix_term(-1j*hbar**2/R**2, s3)),
            C0=k*(_matrix_term(-hbar**2/(4*R**2), I) + _matrix_term(e*hbar/(2*R)*A_phi_factor, s3)),
            source='-hbar^2/(4R^2) - (i hbar^2/R^2) sigma_rho d_phi + (e hbar/2R)(B0 R - B1 r cos cos) sigma_rho')
        terms['paramagnetic'] = NormalFormTerm('paramagnetic',
            C1=k*C1(d1=_matrix_term(1j*e*hbar/r*B1*(R0*s + r)*sp, I), d2=_matrix_term(1j*e*hbar/R*A_phi_factor, I)),
            source='(i e hbar/r) B1 (R0 sin + r) sin(phi) d_theta + (i e hbar/R)(B0 R - B1 r cos cos) d_phi')
        terms['divergence'] = NormalFormTerm('divergence',
            C0=k*_matrix_term(((R0**2 + r**2 + 2*r*R0*s)/(2*r*R) + r/(2*R))*1j*e*hbar*B1*c*sp, I),
            source='two i e hbar B1 cos(theta) sin(phi) terms, combined')
        terms['diamagnetic'] = NormalFormTerm('diamagnetic',
            C0=k*_matrix_term(-0.25*e**2*(B1**2*sp**2*(R0*s + r)**2 + A_phi_factor**2), I),
            source='-(e^2/4)[B1^2 sin^2(phi)(R0 sin + r)^2 + (B0 R - B1 r cos cos)^2]')
        terms['zeeman'] = NormalFormTerm('zeeman', C0=k*_matrix_term(-e*hbar*(B0 + r/R*B1*c*cp)*c, s3),
            source='-e hbar (B0 + (r/R) B1 cos cos) cos(theta) sigma_rho')
        terms['geometric_potential'] = NormalFormTerm('geometric_potential', C0=k*_matrix_term(hbar*R0**2/(2*r*R)**2, I),
            source='hbar R0^2/(2rR)^2')

    if corrupt is not None:
        assert corrupt in terms, f"Cannot corrupt term '{corrupt}', the closed form has the terms {', '.join(terms)}"
        terms[corrupt] = terms[corrupt].scaled(-1)
        terms[corrupt].source += ' (sign flipped)'

    op = SurfacePauliOperator(chart, field, grid, hbar, mass, components=2, representation='primed', source='oracle')
    op.terms = terms
    return op


def _exact_connection(chart, field, Q1, Q2, hbar, mass):
    """Spin connection terms of the builtin charts, derived from \\( \\Omega_a \\) of the closed form rotations."""
    e = field.e_charge
    k = -1/(2*mass)
    s, c = np.sin(Q1), np.cos(Q1)
    s1, s2, s3 = S.SIGMA_1, S.SIGMA_2, S.SIGMA_3
    tau = _matrix_term(c, s3) - _matrix_term(s, s1)
    A = field.potential(Q1, Q2, 0.0)
    shape = Q1.shape

    C1 = np.zeros(shape + (2, 2, 2), dtype=np.complex128)

    if chart.name == 'cylinder':
        r = chart.parameters['r']
        C1[..., 0, :, :] = -1j*hbar**2/r**2*s2
        C0 = _matrix_term(-hbar**2/(4*r**2) + 0*s, S.SIGMA_0) + _matrix_term(e*hbar/r**2*A[..., 0], s2)
    else:
        if chart.name == 'sphere':
            r = chart.parameters['r']
            g_tt, g_pp = r**2 + 0*s, r**2*s**2
            half_div = c/(2*r**2*s)
        else:
            R0, r = chart.parameters['R0'], chart.parameters['r']
            R = R0 + r*s
            g_tt, g_pp = r**2 + 0*s, R**2
            half_div = c/(2*r*R)

        C1[..., 0, :, :] = _matrix_term(-1j*hbar**2/g_tt, s2)
        C1[..., 1, :, :] = (-1j*hbar**2/g_pp)[..., np.newaxis, np.newaxis]*tau
        C0 = _matrix_term(-1j*hbar**2*half_div, s2) + _matrix_term(-hbar**2/(4*g_tt) - hbar**2/(4*g_pp), S.SIGMA_0) \
            + _matrix_term(e*hbar/g_tt*A[..., 0], s2) + (e*hbar/g_pp*A[..., 1])[..., np.newaxis, np.newaxis]*tau

    return NormalFormTerm('spin_connection', C1=k*C1, C0=k*C0, source='exact spin connection of the closed form rotation')

def _alternative_terms(chart, field, grid, hbar, mass):
    Q1, Q2 = grid.meshgrid()
    e = field.e_charge
    I = S.SIGMA_0
    s, c = np.sin(Q1), np.cos(Q1)
    electric = NormalFormTerm('electric_potential', C0=_matrix_term(-e*field.scalar_potential(Q1, Q2), I), source='-e phi_e')
    alternatives = dict(spin_connection=_exact_connection(chart, field, Q1, Q2, hbar, mass), electric_potential=electric)

    if chart.name == 'cylinder':
        r = chart.parameters['r']
        alternatives['geometric_potential'] = NormalFormTerm('geometric_potential',
            C0=_matrix_term(-hbar**2/(8*mass*r**2) + 0*s, I), source='-hbar^2/(8 m r^2)')
    elif chart.name == 'torus':
        R0, r = chart.parameters['R0'], chart.parameters['r']
        R = R0 + r*s
        B, B0, B1 = _field_strengths(field)
        alternatives['geometric_potential'] = NormalFormTerm('geometric_potential',
            C0=_matrix_term(-hbar**2*R0**2/(8*mass*r**2*R**2), I), source='-hbar^2 R0^2/(8 m r^2 R^2)')
        alternatives['zeeman'] = NormalFormTerm('zeeman',
            C0=_matrix_term(e*hbar/(2*mass)*(B0 - r/R*B1*c*np.cos(Q2))*c, S.SIGMA_3),
            source='(e hbar/2m)(B0 - (r/R) B1 cos cos) cos(theta) sigma_rho')

    return alternatives

KNOWN_DISCREPANCIES = {
    'sphere': {
        'spin_connection': 'closed form keeps only the sigma_rho part of the connection and drops the theta rotation terms',
        'electric_potential': 'closed form places e phi_e inside the -1/2m bracket',
    },
    'cylinder': {
        'spin_connection': 'closed form keeps only the constant -hbar^2/(4r^2) of the connection',
        'geometric_potential': 'closed form omits V_g = -hbar^2/(8 m r^2)',
        'electric_potential': 'closed form has no electric potential',
    },
    'torus': {
        'spin_connection': 'closed form keeps only the sigma_rho part of the connection and drops the theta rotation terms',
        'zeeman': 'closed form has the opposite sign of the B1 part of the curl of its vector potential',
        'geometric_potential': 'closed form carries hbar to the first power',
        'electric_potential': 'closed form has no electric potential',
    }
}
"""Documented differences between the closed form operators and the general surface operator, per chart and tag."""


def trial_fields(grid, components=2, count=6, seed=0):
    """Analytic trial spinors on the grid nodes together with their exact derivatives: alternately localized Gaussian wave
    packets and plane waves with random spinor amplitudes.

    Returns
    -------
    List of (psi, dpsi, d2psi) with shapes (n1, n2, c), (n1, n2, 2, c) and (n1, n2, 2, 2, c)."""
    rng = np.random.default_rng(seed)
    Q1, Q2 = grid.meshgrid()
    Q = [Q1, Q2]
    lengths = np.array([grid.length(0), grid.length(1)])
    trials = []

    for t in range(count):
        amplitude = rng.normal(size=components) + 1j*rng.normal(size=components)
        wavenumber = rng.integers(-3, 4, size=2)*2*pi/lengths

        if t % 2 == 0:
            center = [rng.choice(grid.nodes(a)[len(grid.nodes(a))//4: 3*len(grid.nodes(a))//4]) for a in range(2)]
            width = 0.15*lengths
            exponent = sum(-(Q[a] - center[a])**2/(2*width[a]**2) + 1j*wavenumber[a]*Q[a] for a in range(2))
            first = [-(Q[a] - center[a])/width[a]**2 + 1j*wavenumber[a] for a in range(2)]
            second = np.diag(-1/width**2)
        else:
            exponent = sum(1j*wavenumber[a]*Q[a] for a in range(2))
            first = [1j*wavenumber[a] + 0*Q[a] for a in range(2)]
            second = np.zeros((2, 2))

        f = np.exp(exponent)
        psi = f[..., np.newaxis]*amplitude
        dpsi = np.stack([(first[a]*f)[..., np.newaxis]*amplitude for a in range(2)], axis=-2)
        d2psi = np.stack([np.stack([((first[a]*first[b] + second[a, b])*f)[..., np.newaxis]*amplitude for b in range(2)], axis=-2)
            for a in range(2)], axis=-3)
        trials.append((psi, dpsi, d2psi))

    return trials


class ComparisonReport:
    """Term by term comparison of two operators.

    Every entry is a dict with the keys `tag`, `status` ('PASS', 'INFO' or 'FAIL'), `residual` (largest relative difference
    over the trial fields), `alternative_residual` (for allowlisted terms, the difference with the corrected term) and `note`."""

    def __init__(self, chart_name, entries, tolerance):
        self.chart_name = chart_name
        self.entries = entries
        self.tolerance = tolerance

    def __str__(self):
        counts = {status: sum(e['status'] == status for e in self.entries) for status in ['PASS', 'INFO', 'FAIL']}
        return f"<SurfacePauli ComparisonReport {self.chart_name}: {counts['PASS']} PASS, {counts['INFO']} INFO, {counts['FAIL']} FAIL>"

    def passed(self):
        return all(e['status'] != 'FAIL' for e in self.entries)

    def failures(self):
        return [e['tag'] for e in self.entries if e['status'] == 'FAIL']

    def entry(self, tag):
        for e in self.entries:
            if e['tag'] == tag:
                return e
        raise KeyError(tag)

    def max_residual(self):
        return max([e['residual'] for e in self.entries], default=0.0)

    def lines(self):
        result = []
        for e in self.entries:
            alternative = '' if e['alternative_residual'] is None else f", corrected {e['alternative_residual']:.2e}"
            note = f" ({e['note']})" if e['note'] else ''
            result.append(f"{e['status']:4} {e['tag']:20} residual {e['residual']:.2e}{alternative}{note}")
        return result

def _check_comparable(a, b):
    if a.chart.name != b.chart.name or a.chart.parameters != b.chart.parameters:
        raise GridMismatchError(f'Cannot compare operators on charts {a.chart} and {b.chart}')
    if a.grid != b.grid:
        raise GridMismatchError(f'Cannot compare operators on grids {a.grid} and {b.grid}')
    if a.field.name != b.field.name or a.field.parameters != b.field.parameters:
        raise GridMismatchError(f'Cannot compare operators with fields {a.field} and {b.field}')
    if a.components != b.components:
        raise GridMismatchError('Cannot compare spinless and spin operators')

def compare_operators(assembled, oracle, trials=None, tolerance=1e-8):
    """Compare two operators term by term on trial spinors. When an assembled operator is compared with a closed form oracle,
    the terms listed in `KNOWN_DISCREPANCIES` are reported as INFO, provided the assembled term agrees with the corrected form.

    Returns
    -------
    `ComparisonReport`

    Raises
    ------
    GridMismatchError
        If the operators live on different charts, grids or fields."""
    _check_comparable(assembled, oracle)

    if trials is None:
        trials = trial_fields(assembled.grid, assembled.components)

    first = assembled.normal_form()
    second = oracle.normal_form()
    tags = [t for t in TERM_TAGS if t in first or t in second]

    use_allowlist = assembled.source == 'assembled' and oracle.source == 'oracle'
    allowlist = KNOWN_DISCREPANCIES.get(assembled.chart.name, {}) if use_allowlist else {}
    alternatives = _alternative_terms(assembled.chart, assembled.field, assembled.grid, assembled.hbar, assembled.mass) if allowlist else {}

    def applied(terms, tag, trial):
        return terms[tag].apply(*trial) if tag in terms else np.zeros(trial[0].shape, dtype=np.complex128)

    scales = []
    for trial in trials:
        scales.append(max([1.0] + [np.max(np.abs(applied(terms, tag, trial))) for terms in (first, second) for tag in tags]))

    def residual(x, y, tag):
        return max(np.max(np.abs(applied(x, tag, trial) - applied(y, tag, trial)))/scale for trial, scale in zip(trials, scales))

    entries = []
    for tag in tags:
        r = float(residual(first, second, tag))
        entry = dict(tag=tag, residual=r, alternative_residual=None, note='', source=second[tag].source if tag in second else '')

        if tag in allowlist:
            entry['note'] = allowlist[tag]
            entry['alternative_residual'] = float(residual(first, {tag: alternatives[tag]}, tag))
            entry['status'] = 'INFO' if entry['alternative_residual'] <= tolerance else 'FAIL'
            logging.log_warning_once(f'{assembled.chart.name}:{tag}', f'Closed form {assembled.chart.name} operator, term {tag}: {allowlist[tag]}')
        else:
            entry['status'] = 'PASS' if r <= tolerance else 'FAIL'

        entries.append(entry)

    return ComparisonReport(assembled.chart.name, entries, tolerance)


NORMAL_MODELS = ['none', 'hard_wall', 'harmonic']

def normal_mode_report(model='none', width=1.0, omega=1.0, levels=4, hbar=1.0, mass=1.0):
    """Text describing the normal dynamics, which decouples from the surface as a one dimensional problem in \\( q_3 \\)
    and never enters the surface solve. The hard wall model of width \\( w \\) has the levels
    \\( \\hbar^2 \\pi^2 n^2 / 2 m w^2 \\), the harmonic model \\( \\hbar\\omega(n + \\frac{1}{2}) \\); both are illustrative only."""
    assert model in NORMAL_MODELS, f"Unknown normal model '{model}', choose one of {', '.join(NORMAL_MODELS)}"

    lines = ['In the thin-layer gauge the normal dynamics decouples from the surface: the normal component obeys a',
        'one dimensional equation in q3 with the confining potential only, and does not couple into the surface operator.']

    if model == 'hard_wall':
        assert width > 0
        lines.append(f'Hard wall confinement of width {width:.6g}, levels hbar^2 pi^2 n^2 / (2 m w^2):')
        lines += [f'  n = {n}: {hbar**2*pi**2*n**2/(2*mass*width**2):.10g}' for n in range(1, levels + 1)]
    elif model == 'harmonic':
        assert omega > 0
        lines.append(f'Harmonic confinement with frequency {omega:.6g}, levels hbar omega (n + 1/2):')
        lines += [f'  n = {n}: {hbar*omega*(n + 0.5):.10g}' for n in range(levels)]

    return '\n'.join(lines)

def export_matrix(op, filename):
    """Discretize an operator and write it as 'row col re im' triplets."""
    discrete = solver.discretize(op)
    discrete.write_triplets(filename)
    return discrete

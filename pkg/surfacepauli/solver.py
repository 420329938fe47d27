"""The solver module discretizes surface operators on structured grids in the parameter domain and computes their
low lying spectra.

## Discretization

The kinetic part of the surface operator is written in flux form,

$$
-\\frac{\\hbar^2}{2m} \\frac{1}{\\sqrt{g}} D_a \\sqrt{g} g^{ab} D_b, \\quad D_a = \\partial_a + \\frac{ie}{\\hbar} A_a,
$$

and discretized by second order centered differences. The flux coefficients \\( \\sqrt{g} g^{aa} \\) are evaluated at the cell
faces, the mixed coefficient \\( \\sqrt{g} g^{12} \\) (absent for orthogonal charts) uses a symmetric four point stencil. The vector
potential enters through the link factors

$$
W_{pq} = \\exp\\left( \\frac{ie}{\\hbar} \\int_p^q A_a \\, dq^a \\right),
$$

so that the discrete operator transforms exactly covariantly under a gauge transformation. In the primed representation every
link additionally carries the spinor rotations \\( U_p U_q^{\\dagger} \\) of its end points, from which all spin connection terms
emerge without being written out.

Multiplying by \\( \\sqrt{g} \\) makes the operator symmetric. The matrix returned by `discretize` is the Hermitian form
\\( S = w^{1/2} H w^{-1/2} \\) with the cell measures \\( w = \\sqrt{g} \\Delta q_1 \\Delta q_2 \\); its eigenvectors are mapped back to
fields normalized as \\( \\sum w |\\chi|^2 = 1 \\).

## Boundaries

Every coordinate has one of the `BoundaryType` closures. Periodic coordinates wrap around (with a sign flip for
`BoundaryType.ANTIPERIODIC`, required when the spinor rotation changes sign along the loop). The link rotation of a wrapped hop
uses the rotation continued around the loop, so that primed and lab spectra coincide. At pole type coordinate
singularities the grid is staggered by half a step, \\( \\theta_j = (j + \\frac{1}{2}) \\pi / n \\), and no flux passes the
pole. Bounded coordinates use a box (Dirichlet) closure.

## Eigensolver

Up to `DENSE_LIMIT` unknowns the matrix is diagonalized densely, above that the shift-invert Lanczos method of ARPACK is used,
started from a seeded random vector so that results are reproducible.
"""

__pdoc__ = {}
__pdoc__['BoundaryType.__str__'] = False
__pdoc__['GridSpec.__str__'] = False
__pdoc__['SpectrumResult.__str__'] = False
__pdoc__['SpinorField.__str__'] = False

import json
from enum import IntEnum

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.sparse.linalg import eigsh, ArpackNoConvergence

from . import geometry as G
from . import spin as S
from . import logging
from . import util

DENSE_LIMIT = 4096
"""Largest matrix dimension solved with the dense eigensolver."""

MULTIPLET_TOLERANCE = 1e-6
"""Eigenvalues closer than this (relative to \\( \\max(1, |E|) \\)) are grouped into one multiplet."""

FORMAT_VERSION = 1

class BoundaryError(ValueError):
    """Raised when the boundary closures of a grid are inconsistent with the chart or the spinor representation."""
    pass


class BoundaryType(IntEnum):
    """Closure of a grid coordinate."""
    PERIODIC = 0
    ANTIPERIODIC = 1
    POLE_REGULAR = 2
    BOX = 3

    def __str__(self):
        if self == BoundaryType.PERIODIC:
            return 'periodic'
        elif self == BoundaryType.ANTIPERIODIC:
            return 'antiperiodic'
        elif self == BoundaryType.POLE_REGULAR:
            return 'pole-regular'
        elif self == BoundaryType.BOX:
            return 'box'

        raise RuntimeError('BoundaryType not understood in __str__ method')

    def is_periodic(self):
        return self in [BoundaryType.PERIODIC, BoundaryType.ANTIPERIODIC]

    def wrap_sign(self):
        return -1. if self == BoundaryType.ANTIPERIODIC else 1.

    @staticmethod
    def from_string(name):
        for b in BoundaryType:
            if str(b) == name:
                return b
        raise BoundaryError(f"Unknown boundary type '{name}'")


class GridSpec:
    """Structured grid on the rectangular parameter domain.

    Parameters
    ----------
    n1, n2: int
        Number of nodes per coordinate, at least 8.
    domain: tuple
        ((q1_min, q1_max), (q2_min, q2_max)).
    boundaries: tuple of `BoundaryType`"""

    def __init__(self, n1, n2, domain, boundaries):
        assert n1 >= 8 and n2 >= 8, "Grid should have at least 8 nodes along each coordinate"
        assert len(boundaries) == 2 and all(isinstance(b, BoundaryType) for b in boundaries)

        self.n = (int(n1), int(n2))
        self.domain = tuple(tuple(float(x) for x in d) for d in domain)
        self.boundaries = tuple(boundaries)

    def __str__(self):
        return f'<SurfacePauli GridSpec {self.n[0]}x{self.n[1]}, boundaries {str(self.boundaries[0])}/{str(self.boundaries[1])}>'

    def __eq__(self, other):
        return isinstance(other, GridSpec) and self.n == other.n and self.boundaries == other.boundaries \
            and np.allclose(self.domain, other.domain)

    @property
    def shape(self):
        return self.n

    @property
    def size(self):
        return self.n[0]*self.n[1]

    def length(self, axis):
        lo, hi = self.domain[axis]
        return hi - lo

    def spacing(self, axis):
        if self.boundaries[axis] == BoundaryType.BOX:
            return self.length(axis)/(self.n[axis] + 1)
        return self.length(axis)/self.n[axis]

    def nodes(self, axis):
        lo = self.domain[axis][0]
        h = self.spacing(axis)
        i = np.arange(self.n[axis])

        if self.boundaries[axis] == BoundaryType.POLE_REGULAR:
            return lo + (i + 0.5)*h
        elif self.boundaries[axis] == BoundaryType.BOX:
            return lo + (i + 1)*h

        return lo + i*h

    def faces(self, axis):
        """Positions of the n + 1 cell faces along a coordinate, face k lying between node k-1 and node k."""
        h = self.spacing(axis)
        return self.nodes(axis)[0] - h/2 + h*np.arange(self.n[axis] + 1)

    def meshgrid(self):
        return np.meshgrid(self.nodes(0), self.nodes(1), indexing='ij')

    def cell_area(self):
        return self.spacing(0)*self.spacing(1)

    def dimension(self, components=2):
        return components*self.size

    def cell_measures(self, sqrt_g):
        """Measures \\( \\sqrt{g} \\Delta q_1 \\Delta q_2 \\) of all cells, which should be positive."""
        measures = np.asarray(sqrt_g)*self.cell_area()
        assert np.all(measures > 0), "Cell measures should be positive at all retained points"
        return measures

    def extended(self, axis, factor=2):
        """Grid covering `factor` times the domain along a periodic coordinate at the same spacing."""
        assert self.boundaries[axis].is_periodic(), "Only periodic coordinates can be extended"
        n = list(self.n)
        domain = [list(d) for d in self.domain]
        n[axis] *= factor
        domain[axis][1] = domain[axis][0] + factor*self.length(axis)
        return GridSpec(n[0], n[1], domain, self.boundaries)

    def with_boundaries(self, boundaries):
        return GridSpec(self.n[0], self.n[1], self.domain, boundaries)

def rotation_holonomy(chart, grid, axis, U_nodes=None):
    """Sign acquired by the spinor rotation along a periodic grid coordinate, comparing the rotation one spacing past the
    last node with the rotation at the first node. For charts without closed form rotation `U_nodes` (the propagated lifts
    on the grid) is used."""
    Q1, Q2 = grid.meshgrid()
    h = grid.spacing(axis)

    if axis == 0:
        q_end, q_other = Q1[-1] + h, Q2[-1]
        args = (q_end, q_other)
    else:
        q_end, q_other = Q2[:, -1] + h, Q1[:, -1]
        args = (q_other, q_end)

    U_end = S.closed_form_rotation(chart.name, *args)

    if U_end is None:
        assert U_nodes is not None, "Lifts on the grid are needed for charts without closed form rotation"
        U_last = U_nodes[-1] if axis == 0 else U_nodes[:, -1]
        U_end = S.spinor_lift(S.frame_rotation_at(G.geometry_on(chart, *args)), U_last)
        U_first = U_nodes[0] if axis == 0 else U_nodes[:, 0]
    else:
        U_first = S.closed_form_rotation(chart.name, Q1[0], Q2[0]) if axis == 0 else S.closed_form_rotation(chart.name, Q1[:, 0], Q2[:, 0])

    overlap = np.real(np.trace(U_end @ S.dagger(U_first), axis1=-2, axis2=-1))/2
    signs = np.where(overlap < 0, -1, 1)

    if not np.all(signs == signs[0]):
        raise BoundaryError(f'Spinor rotation on chart {chart.name} has no uniform holonomy along coordinate {axis+1}')

    return int(signs[0])

def grid_for_chart(chart, n1, n2, spin=True, representation='primed', U_nodes=None):
    """Grid covering the chart domain with the closures implied by the chart: periodic coordinates wrap (antiperiodic when
    the spinor rotation changes sign around the loop in the primed representation), poles are closed regularly and
    other bounded coordinates by a box."""
    assert representation in ['primed', 'lab']
    boundaries = []

    for axis in range(2):
        if chart.is_periodic(axis):
            boundaries.append(BoundaryType.PERIODIC)
        elif chart.poles[axis]:
            boundaries.append(BoundaryType.POLE_REGULAR)
        else:
            boundaries.append(BoundaryType.BOX)

    grid = GridSpec(n1, n2, chart.domain, boundaries)

    if spin and representation == 'primed':
        for axis in range(2):
            if chart.is_periodic(axis) and rotation_holonomy(chart, grid, axis, U_nodes) < 0:
                boundaries[axis] = BoundaryType.ANTIPERIODIC

    return grid.with_boundaries(boundaries)

def validate_grid(chart, grid, spin=True, representation='primed', U_nodes=None):
    """Check the closures of a grid against the chart and the spinor representation.

    Raises
    ------
    BoundaryError"""
    for axis in range(2):
        b = grid.boundaries[axis]

        if b.is_periodic():
            if not chart.is_periodic(axis):
                raise BoundaryError(f'Coordinate {axis+1} of chart {chart.name} is not periodic, cannot use {str(b)} closure')

            multiple = grid.length(axis)/chart.period(axis)
            if not np.isclose(multiple, round(multiple)) or round(multiple) < 1:
                raise BoundaryError(f'Grid length along coordinate {axis+1} should be a multiple of the period {chart.period(axis):.6g}')

            expected = 1
            if spin and representation == 'primed':
                expected = rotation_holonomy(chart, grid, axis, U_nodes)

            if b.wrap_sign() != expected:
                raise BoundaryError(f'Coordinate {axis+1} of chart {chart.name} requires a '
                    f'{"antiperiodic" if expected < 0 else "periodic"} closure in the {representation} representation')
        elif b == BoundaryType.POLE_REGULAR:
            if not chart.poles[axis]:
                raise BoundaryError(f'Coordinate {axis+1} of chart {chart.name} does not end in a pole')
            if not np.allclose(grid.domain[axis], chart.domain[axis]):
                raise BoundaryError('A pole regular closure needs the full chart domain')
        else:
            if chart.poles[axis]:
                raise BoundaryError(f'Coordinate {axis+1} of chart {chart.name} ends in a pole, use the pole-regular closure')
            if chart.is_periodic(axis):
                raise BoundaryError(f'Coordinate {axis+1} of chart {chart.name} is periodic, cannot use a box closure')


class SpinorField:
    """Spinor values on a grid.

    Parameters
    ----------
    values: complex array of shape (n1, n2, components)
    grid: `GridSpec`
    representation: 'lab' for the ordinary spinor \\( \\chi_s \\), 'primed' for \\( \\chi' = U \\chi_s \\)
    weights: cell measures \\( \\sqrt{g} \\Delta q_1 \\Delta q_2 \\), shape (n1, n2)
    U: spinor rotation on the grid, shape (n1, n2, 2, 2), needed for conversions
    chart: the `surfacepauli.geometry.SurfaceChart`, needed for lab frame observables"""

    def __init__(self, values, grid, representation, weights, U=None, chart=None):
        assert representation in ['lab', 'primed']
        values = np.asarray(values, dtype=np.complex128)
        assert values.shape[:2] == grid.shape, "Spinor values do not match the grid"

        self.values = values
        self.grid = grid
        self.representation = representation
        self.weights = weights
        self.U = U
        self.chart = chart

    def __str__(self):
        return f'<SurfacePauli SpinorField {self.representation}, {self.components} component(s) on {self.grid.n[0]}x{self.grid.n[1]}>'

    @property
    def components(self):
        return self.values.shape[2]

    def norm(self):
        return float(np.sqrt(np.sum(self.weights[..., np.newaxis]*np.abs(self.values)**2)))

    def normalized(self):
        return self._with_values(self.values/self.norm(), self.representation)

    def inner(self, other):
        """Weighted inner product \\( \\sum w \\, \\chi^{\\dagger} \\psi \\)."""
        return complex(np.sum(self.weights[..., np.newaxis]*np.conj(self.values)*other.values))

    def density(self):
        return np.sum(np.abs(self.values)**2, axis=-1)

    def _with_values(self, values, representation):
        return SpinorField(values, self.grid, representation, self.weights, self.U, self.chart)

    def to_primed(self):
        if self.representation == 'primed' or self.components == 1:
            return self._with_values(self.values, 'primed')
        assert self.U is not None, "Spinor rotation needed to convert to the primed representation"
        return self._with_values(np.einsum('...ab,...b->...a', self.U, self.values), 'primed')

    def to_lab(self):
        if self.representation == 'lab' or self.components == 1:
            return self._with_values(self.values, 'lab')
        assert self.U is not None, "Spinor rotation needed to convert to the lab representation"
        return self._with_values(np.einsum('...ba,...b->...a', np.conj(self.U), self.values), 'lab')

    def normal_spin_density(self):
        """Pointwise \\( \\chi^{\\dagger} \\sigma_\\rho \\chi \\), with \\( \\sigma_\\rho = \\sigma^3 \\) in the primed representation."""
        if self.components == 1:
            return np.zeros(self.grid.shape)

        primed = self.to_primed()
        return np.real(np.einsum('...a,ab,...b->...', np.conj(primed.values), S.SIGMA_3, primed.values))


class DiscreteOperator:
    """A discretized surface operator.

    Attributes
    ----------
    matrix: Hermitian `scipy.sparse.csr_matrix` \\( S = w^{1/2} H w^{-1/2} \\)
    weights: cell measures \\( w \\), shape (n1, n2)
    grid: `GridSpec`
    components: 1 (spinless) or 2
    representation: 'primed' or 'lab'
    U: spinor rotation on the grid
    chart: the chart the operator lives on"""

    def __init__(self, matrix, weights, grid, components, representation, U, chart):
        self.matrix = matrix
        self.weights = weights
        self.grid = grid
        self.components = components
        self.representation = representation
        self.U = U
        self.chart = chart

    def __str__(self):
        return f'<SurfacePauli DiscreteOperator dimension {self.matrix.shape[0]}, {self.matrix.nnz} nonzeros>'

    def hermiticity_residual(self):
        """\\( \\| S - S^{\\dagger} \\| / \\| S \\| \\) in the max norm."""
        difference = abs(self.matrix - self.matrix.conj().T)
        scale = max(abs(self.matrix).max(), 1e-300)
        return float(difference.max()/scale) if difference.nnz else 0.0

    def apply(self, field):
        """Apply the operator \\( H \\) to a `SpinorField`, returning a new field."""
        w = np.repeat(np.sqrt(self.weights).ravel(), self.components)
        x = field.values.ravel()*w
        y = (self.matrix @ x)/w
        return SpinorField(y.reshape(field.values.shape), self.grid, field.representation, self.weights, self.U, self.chart)

    def field(self, vector):
        """Map an eigenvector of the symmetric matrix back to a normalized `SpinorField`."""
        w = np.repeat(np.sqrt(self.weights).ravel(), self.components)
        values = (np.asarray(vector)/w).reshape(self.grid.shape + (self.components,))
        return SpinorField(values, self.grid, self.representation, self.weights, self.U, self.chart)

    def norm_estimate(self):
        return float(abs(self.matrix).sum(axis=1).max()) if self.matrix.nnz else 0.0

    def write_triplets(self, filename):
        """Write the matrix as text lines 'row col re im' (zero based, sorted by row)."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        data = np.column_stack([coo.row[order], coo.col[order], coo.data.real[order], coo.data.imag[order]])
        np.savetxt(filename, data, fmt=['%d', '%d', '%.17g', '%.17g'],
            header=f'dimension {self.matrix.shape[0]}, nonzeros {coo.nnz}; columns: row col re im')


def _neighbours(grid, d1, d2):
    """Flat index of the node at offset (d1, d2) of every node, the validity mask and the wrap sign."""
    index = np.arange(grid.size).reshape(grid.shape)
    targets = [np.arange(grid.n[0])[:, np.newaxis] + d1 + np.zeros(grid.shape, dtype=int),
               np.arange(grid.n[1])[np.newaxis, :] + d2 + np.zeros(grid.shape, dtype=int)]
    valid = np.ones(grid.shape, dtype=bool)
    sign = np.ones(grid.shape)

    for axis in range(2):
        t = targets[axis]
        n = grid.n[axis]
        outside = (t < 0) | (t >= n)

        if grid.boundaries[axis].is_periodic():
            sign = np.where(outside, sign*grid.boundaries[axis].wrap_sign(), sign)
            targets[axis] = np.mod(t, n)
        else:
            valid &= ~outside
            targets[axis] = np.clip(t, 0, n - 1)

    return index[targets[0], targets[1]], valid, sign

def _hop_blocks(op, src, dst, coefficient, sign):
    """Link blocks \\( c \\, U_p U_q^{\\dagger} \\) for the hops src -> dst (flat node indices). Across a wrap the rotation of
    the destination is continued around the loop, which multiplies it by the holonomy (equal to the wrap sign)."""
    c = op.components
    U = op.U.reshape(-1, c, c)

    if op.representation == 'primed' and c == 2:
        blocks = U[src] @ S.dagger(sign[:, np.newaxis, np.newaxis]*U[dst])
    else:
        blocks = np.broadcast_to(np.eye(c, dtype=np.complex128), (len(src), c, c))

    return coefficient[:, np.newaxis, np.newaxis]*blocks

def _block_coo(src, dst, blocks, c):
    rows = (src[:, np.newaxis, np.newaxis]*c + np.arange(c)[np.newaxis, :, np.newaxis]) + np.zeros((1, c, c), dtype=int)
    cols = (dst[:, np.newaxis, np.newaxis]*c + np.arange(c)[np.newaxis, np.newaxis, :]) + np.zeros((1, c, c), dtype=int)
    return rows.ravel(), cols.ravel(), blocks.ravel()

def discretize(op):
    """Discretize an assembled `surfacepauli.hamiltonian.SurfacePauliOperator` on its grid.

    Returns
    -------
    `DiscreteOperator`, whose matrix is Hermitian to machine precision.

    Raises
    ------
    BoundaryError
        If the grid closures are inconsistent with the chart or the representation."""
    assert getattr(op, 'source', 'assembled') == 'assembled', "Only assembled operators can be discretized"
    grid = op.grid
    validate_grid(op.chart, grid, spin=op.components == 2, representation=op.representation, U_nodes=op.U)

    with util.Timer('discretization'):
        c = op.components
        kinetic = op.hbar**2/(2*op.mass)
        sqrt_g = op.sqrt_g.ravel()
        weights = grid.cell_measures(op.sqrt_g)

        rows, cols, data = [], [], []
        diagonal = np.zeros(grid.size)

        for axis in range(2):
            h = grid.spacing(axis)
            flux = op.flux[axis]
            F_minus = np.take(flux, range(grid.n[axis]), axis=axis)
            F_plus = np.take(flux, range(1, grid.n[axis] + 1), axis=axis)
            diagonal += (kinetic*(F_minus + F_plus)/h**2).ravel()/sqrt_g

            offset = (1, 0) if axis == 0 else (0, 1)
            dst, valid, sign = _neighbours(grid, *offset)
            coefficient = -kinetic*F_plus/h**2*np.exp(1j*op.e_charge*op.link_phase[axis]/op.hbar)*sign

            src = np.arange(grid.size).reshape(grid.shape)[valid]
            dst = dst[valid]
            coefficient = coefficient[valid]/np.sqrt(sqrt_g[src]*sqrt_g[dst])
            r, cl, d = _block_coo(src, dst, _hop_blocks(op, src, dst, coefficient, sign[valid]), c)
            rows.append(r); cols.append(cl); data.append(d)

        if op.cross is not None:
            h1, h2 = grid.spacing(0), grid.spacing(1)
            cross = op.cross

            for d2, phase in [(1, op.link_phase_diagonal[0]), (-1, op.link_phase_diagonal[1])]:
                dst, valid, sign = _neighbours(grid, 1, d2)
                right, _, _ = _neighbours(grid, 1, 0)
                side, _, _ = _neighbours(grid, 0, d2)
                weight = cross.ravel()[right] + cross.ravel()[side]
                coefficient = -d2*kinetic*weight/(4*h1*h2)*np.exp(1j*op.e_charge*phase/op.hbar)*sign

                src = np.arange(grid.size).reshape(grid.shape)[valid]
                dst = dst[valid]
                coefficient = coefficient[valid]/np.sqrt(sqrt_g[src]*sqrt_g[dst])
                r, cl, d = _block_coo(src, dst, _hop_blocks(op, src, dst, coefficient, sign[valid]), c)
                rows.append(r); cols.append(cl); data.append(d)

        dimension = grid.dimension(c)
        hops = sparse.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(dimension, dimension)).tocsr()

        local = op.potential.reshape(-1, c, c) + diagonal[:, np.newaxis, np.newaxis]*np.eye(c)
        index = np.arange(grid.size)
        r, cl, d = _block_coo(index, index, local, c)
        onsite = sparse.coo_matrix((d, (r, cl)), shape=(dimension, dimension)).tocsr()

        matrix = (onsite + hops + hops.conj().T).tocsr()
        matrix.eliminate_zeros()

    return DiscreteOperator(matrix, weights, grid, c, op.representation, op.U, op.chart)


class SpectrumResult:
    """Low lying eigenpairs of a discretized operator.

    Attributes
    ----------
    eigenvalues: ascending energies
    eigenfields: list of normalized `SpinorField`
    residuals: \\( \\| H\\psi - E\\psi \\| \\) of every pair (in the symmetric form)
    flags: list of strings, 'not_converged' when residuals exceed the tolerance
    metadata: dict describing chart, field, grid and gauge"""

    def __init__(self, eigenvalues, eigenfields, residuals, flags, metadata, tolerance):
        self.eigenvalues = np.asarray(eigenvalues)
        self.eigenfields = eigenfields
        self.residuals = np.asarray(residuals)
        self.flags = list(flags)
        self.metadata = dict(metadata)
        self.tolerance = tolerance

    def __str__(self):
        return f'<SurfacePauli SpectrumResult {len(self.eigenvalues)} eigenvalues, lowest {self.eigenvalues[0]:.6g}, flags {self.flags}>'

    def converged(self):
        return 'not_converged' not in self.flags

    def multiplets(self, tolerance=MULTIPLET_TOLERANCE):
        return multiplets(self.eigenvalues, tolerance)

    def to_dict(self, config=None):
        groups = self.multiplets()
        result = dict(
            format='surfacepauli-spectrum',
            version=FORMAT_VERSION,
            params=self.metadata,
            eigenvalues=[float(e) for e in self.eigenvalues],
            multiplets=[float(e) for e, _ in groups],
            degeneracies=[int(d) for _, d in groups],
            residuals=[float(r) for r in self.residuals],
            tolerance=float(self.tolerance),
            flags=self.flags)

        if config is not None:
            result['config'] = config

        return result

    def write_json(self, filename, config=None, extra=None):
        data = self.to_dict(config)
        if extra is not None:
            data.update(extra)

        with open(filename, 'w') as f:
            json.dump(data, f, indent=2, sort_keys=True)

    def write_csv(self, filename, index=0):
        """Write the eigenfield `index` as CSV with columns q1, q2, |chi+|^2, |chi-|^2, <sigma_rho>."""
        field = self.eigenfields[index]
        Q1, Q2 = field.grid.meshgrid()
        density = np.abs(field.to_primed().values)**2
        minus = density[..., 1] if field.components == 2 else np.zeros(field.grid.shape)
        data = np.column_stack([Q1.ravel(), Q2.ravel(), density[..., 0].ravel(), minus.ravel(), field.normal_spin_density().ravel()])
        np.savetxt(filename, data, delimiter=',', header='q1,q2,chi_plus_sq,chi_minus_sq,sigma_rho', comments='', fmt='%.12g')

def multiplets(eigenvalues, tolerance=MULTIPLET_TOLERANCE):
    """Group ascending eigenvalues closer than `tolerance` (relative to \\( \\max(1, |E|) \\)) into (mean energy, degeneracy) pairs."""
    groups = []

    for e in np.sort(np.asarray(eigenvalues)):
        if groups and abs(e - groups[-1][-1]) <= tolerance*max(1.0, abs(e)):
            groups[-1].append(e)
        else:
            groups.append([e])

    return [(float(np.mean(g)), len(g)) for g in groups]

def gershgorin_lower_bound(matrix):
    diagonal = np.real(matrix.diagonal())
    radius = np.asarray(abs(matrix).sum(axis=1)).ravel() - np.abs(diagonal)
    return float(np.min(diagonal - radius))

def eigensolve(discrete, k=10, tol=None, seed=0, dense_limit=DENSE_LIMIT, maxiter=None, metadata=None):
    """Compute the `k` lowest eigenpairs of a `DiscreteOperator`.

    Parameters
    ----------
    discrete: `DiscreteOperator`
    k: int
        Number of eigenpairs, at most a quarter of the dimension.
    tol: float
        Residual tolerance, by default \\( 10^{-8} \\| H \\| \\).
    seed: int
        Seed of the random starting vector of the iterative solver.
    dense_limit: int
        Largest dimension solved densely.

    Returns
    -------
    `SpectrumResult`. Non convergence of the iterative solver does not raise, the partial result is flagged instead."""
    matrix = discrete.matrix
    N = matrix.shape[0]
    assert 1 <= k <= max(1, N//4), f"Number of eigenpairs should lie between 1 and a quarter of the dimension ({N//4})"

    norm = discrete.norm_estimate()
    if tol is None:
        tol = 1e-8*max(norm, 1.0)

    flags = []

    with util.Timer('eigensolve'):
        if N <= dense_limit:
            values, vectors = scipy.linalg.eigh(matrix.toarray(), subset_by_index=[0, k-1])
        else:
            rng = np.random.default_rng(seed)
            v0 = rng.normal(size=N) + 1j*rng.normal(size=N)
            shift = gershgorin_lower_bound(matrix) - 1e-3*max(norm, 1.0)
            logging.log_debug(f'Shift-invert Lanczos with shift {shift:.6g}, dimension {N}')

            try:
                values, vectors = eigsh(matrix.tocsc(), k=k, sigma=shift, which='LM', v0=v0,
                    tol=tol/max(norm, 1.0), maxiter=maxiter)
            except ArpackNoConvergence as e:
                logging.log_warning(f'Eigensolver did not converge, keeping {len(e.eigenvalues)} of {k} eigenpairs')
                values, vectors = e.eigenvalues, e.eigenvectors
                flags.append('not_converged')

    order = np.argsort(values)
    values = np.real(values[order])
    vectors = vectors[:, order]

    residuals = np.linalg.norm(matrix @ vectors - vectors*values[np.newaxis, :], axis=0) if len(values) else np.zeros(0)

    if np.any(residuals > tol) and 'not_converged' not in flags:
        logging.log_warning(f'Largest eigenpair residual {np.max(residuals):.2e} exceeds the tolerance {tol:.2e}')
        flags.append('not_converged')

    fields = [discrete.field(vectors[:, i]) for i in range(vectors.shape[1])]
    return SpectrumResult(values, fields, residuals, flags, metadata or {}, tol)


OBSERVABLES = ['sigma_rho', 'sigma_1', 'sigma_2', 'q1', 'q2', 'q1^2', 'q2^2', 'V_g']

def expectation(field, observable, hbar=1.0, mass=1.0):
    """Expectation value of an observable in a normalized `SpinorField` in the weighted inner product.

    The spin observables act in the primed representation (where \\( \\sigma_\\rho = \\sigma^3 \\)). The position moments use the
    grid coordinates, `V_g` evaluates the geometric potential of the field's chart.

    Raises
    ------
    ValueError
        If the field is not normalized."""
    assert observable in OBSERVABLES, f"Unknown observable '{observable}', choose one of {', '.join(OBSERVABLES)}"

    if not np.isclose(field.norm(), 1.0, atol=1e-8):
        raise ValueError(f'Expectation values require a normalized field (norm {field.norm():.6g}), call normalized() first')

    w = field.weights

    if observable.startswith('sigma'):
        if field.components == 1:
            return 0.0
        matrix = {'sigma_rho': S.SIGMA_3, 'sigma_1': S.SIGMA_1, 'sigma_2': S.SIGMA_2}[observable]
        values = field.to_primed().values
        density = np.einsum('...a,ab,...b->...', np.conj(values), matrix, values)
    else:
        Q1, Q2 = field.grid.meshgrid()

        if observable == 'V_g':
            assert field.chart is not None, "The chart of the field is needed for the geometric potential"
            scalar = G.geometry_on(field.chart, Q1, Q2).geometric_potential(hbar, mass)
        else:
            scalar = {'q1': Q1, 'q2': Q2, 'q1^2': Q1**2, 'q2^2': Q2**2}[observable]

        density = scalar*field.density()

    value = np.sum(w*density)
    assert abs(np.imag(value)) <= 1e-10*max(1.0, abs(value)), "Expectation value of a Hermitian observable should be real"
    return float(np.real(value))

def convergence_order(errors, ratio=2.0):
    """Observed orders \\( \\log(e_h / e_{h/r}) / \\log r \\) for a sequence of errors under successive refinement by `ratio`."""
    errors = np.abs(np.asarray(errors, dtype=np.float64))
    assert len(errors) >= 2
    return np.log(errors[:-1]/errors[1:])/np.log(ratio)

import io
import json
import os
import tempfile
import unittest
from math import pi

import numpy as np

import surfacepauli.geometry as G
import surfacepauli.em_field as E
import surfacepauli.hamiltonian as H
import surfacepauli.solver as S
import surfacepauli.logging as logging

logging.set_log_level(logging.LogLevel.SILENT)

def dirichlet_levels(n, L):
    h = L/(n + 1)
    return (2/h**2)*(1 - np.cos(np.arange(1, n + 1)*pi*h/L))

def periodic_levels(n, L):
    h = L/n
    modes = np.arange(-(n//2), n - n//2)
    return (2/h**2)*(1 - np.cos(2*pi*modes*h/L))

class TestGrid(unittest.TestCase):

    def test_nodes(self):
        grid = S.GridSpec(8, 9, ((0, pi), (0, 1)), (S.BoundaryType.POLE_REGULAR, S.BoundaryType.BOX))
        assert np.allclose(grid.nodes(0), (np.arange(8) + 0.5)*pi/8)
        assert np.allclose(grid.nodes(1), (np.arange(9) + 1)/10)
        assert np.allclose(grid.faces(0), np.arange(9)*pi/8)
        assert grid.size == 72 and grid.dimension(2) == 144

    def test_periodic_nodes(self):
        grid = S.GridSpec(10, 8, ((0, 2*pi), (0, 1)), (S.BoundaryType.PERIODIC, S.BoundaryType.BOX))
        assert np.allclose(grid.nodes(0), np.arange(10)*2*pi/10)
        extended = grid.extended(0)
        assert extended.n == (20, 8)
        assert np.isclose(extended.length(0), 4*pi)
        assert np.isclose(extended.spacing(0), grid.spacing(0))

    def test_minimum_size(self):
        with self.assertRaises(AssertionError):
            S.GridSpec(4, 8, ((0, 1), (0, 1)), (S.BoundaryType.BOX, S.BoundaryType.BOX))

    def test_boundary_strings(self):
        for b in S.BoundaryType:
            assert S.BoundaryType.from_string(str(b)) == b
        with self.assertRaises(S.BoundaryError):
            S.BoundaryType.from_string('reflecting')

    def test_grid_for_chart(self):
        P, A = S.BoundaryType.PERIODIC, S.BoundaryType.ANTIPERIODIC
        assert S.grid_for_chart(G.sphere(), 8, 16).boundaries == (S.BoundaryType.POLE_REGULAR, A)
        assert S.grid_for_chart(G.sphere(), 8, 16, representation='lab').boundaries == (S.BoundaryType.POLE_REGULAR, P)
        assert S.grid_for_chart(G.cylinder(), 8, 8).boundaries == (A, P)
        assert S.grid_for_chart(G.cylinder(y_periodic=False), 8, 8).boundaries == (A, S.BoundaryType.BOX)
        assert S.grid_for_chart(G.torus(), 8, 8).boundaries == (A, A)
        assert S.grid_for_chart(G.torus(), 8, 8, spin=False).boundaries == (P, P)

    def test_validate_grid(self):
        chart = G.cylinder()
        P, A = S.BoundaryType.PERIODIC, S.BoundaryType.ANTIPERIODIC

        with self.assertRaises(S.BoundaryError):
            S.validate_grid(chart, S.GridSpec(8, 8, chart.domain, (P, P)), spin=True, representation='primed')
        with self.assertRaises(S.BoundaryError):
            S.validate_grid(chart, S.GridSpec(8, 8, chart.domain, (A, P)), spin=True, representation='lab')
        with self.assertRaises(S.BoundaryError):
            S.validate_grid(chart, S.GridSpec(8, 8, chart.domain, (A, S.BoundaryType.POLE_REGULAR)))

        S.validate_grid(chart, S.GridSpec(8, 8, chart.domain, (A, P)), spin=True, representation='primed')
        S.validate_grid(chart, S.GridSpec(8, 8, chart.domain, (P, P)), spin=False)

    def test_validate_sphere(self):
        chart = G.sphere()
        with self.assertRaises(S.BoundaryError):
            S.validate_grid(chart, S.GridSpec(8, 16, chart.domain, (S.BoundaryType.BOX, S.BoundaryType.ANTIPERIODIC)))
        with self.assertRaises(S.BoundaryError):
            S.validate_grid(chart, S.GridSpec(8, 16, chart.domain, (S.BoundaryType.PERIODIC, S.BoundaryType.ANTIPERIODIC)))

class TestSpectra(unittest.TestCase):

    def test_plane_box(self):
        n1, n2, Lx, Ly = 15, 11, 1.0, 0.8
        op = H.assemble_surface_operator(G.plane(Lx, Ly), E.zero_field(), n1=n1, n2=n2, spin=False)
        result = S.eigensolve(op.discretize(), k=6)

        exact = np.sort((dirichlet_levels(n1, Lx)[:, np.newaxis] + dirichlet_levels(n2, Ly)[np.newaxis, :]).ravel()/2)[:6]
        assert np.allclose(result.eigenvalues, exact, rtol=1e-10)
        assert np.isclose(result.eigenvalues[0], pi**2*(1/Lx**2 + 1/Ly**2)/2, rtol=1e-2)
        assert result.converged()

    def test_plane_sparse_solver(self):
        op = H.assemble_surface_operator(G.plane(), E.zero_field(), n1=15, n2=15, spin=False)
        discrete = op.discretize()
        dense = S.eigensolve(discrete, k=5)
        sparse = S.eigensolve(discrete, k=5, dense_limit=0, seed=3)
        assert np.allclose(dense.eigenvalues, sparse.eigenvalues, rtol=1e-8)
        assert len(sparse.eigenvalues) == 5

    def test_cylinder_spinless(self):
        r, n1, n2 = 1.0, 24, 24
        op = H.assemble_surface_operator(G.cylinder(r), E.zero_field(), n1=n1, n2=n2, spin=False)
        result = S.eigensolve(op.discretize(), k=10)

        levels = periodic_levels(n1, 2*pi)[:, np.newaxis]/r**2 + periodic_levels(n2, 2*pi)[np.newaxis, :]
        exact = np.sort(levels.ravel())[:10]/2 - 1/(8*r**2)
        assert np.allclose(result.eigenvalues, exact, atol=1e-9)
        assert np.isclose(result.eigenvalues[0], -1/8)

    def test_spinful_zero_field_doubles(self):
        chart = G.cylinder(1.0)
        spinless = S.eigensolve(H.assemble_surface_operator(chart, E.zero_field(), n1=16, n2=16, spin=False).discretize(), k=8)
        primed = S.eigensolve(H.assemble_surface_operator(chart, E.zero_field(), n1=16, n2=16).discretize(), k=16)
        assert np.allclose(primed.eigenvalues, np.repeat(spinless.eigenvalues, 2), atol=1e-9)

    def test_sphere_ladder(self):
        op = H.assemble_surface_operator(G.sphere(1.0), E.zero_field(), n1=32, n2=64, spin=False)
        result = S.eigensolve(op.discretize(), k=4)
        assert np.isclose(result.eigenvalues[0], 0.0, atol=1e-10)
        assert np.allclose(result.eigenvalues[1:4], 1.0, rtol=5e-2)

    def test_hermitian(self):
        chart = G.torus(2.0, 1.0)
        op = H.assemble_surface_operator(chart, E.torus_mixed(0.4, 0.2), n1=12, n2=16)
        discrete = op.discretize()
        assert discrete.hermiticity_residual() < 1e-12
        assert discrete.matrix.shape == (2*12*16, 2*12*16)

    def test_apply_eigenfield(self):
        op = H.assemble_surface_operator(G.cylinder(1.0), E.cylinder_mixed(0.5, 0.3), n1=12, n2=12)
        discrete = op.discretize()
        result = S.eigensolve(discrete, k=3)
        field = result.eigenfields[1]
        applied = discrete.apply(field)
        assert np.allclose(applied.values, result.eigenvalues[1]*field.values, atol=1e-8)
        assert np.isclose(field.norm(), 1.0)

    def test_too_many_eigenpairs(self):
        op = H.assemble_surface_operator(G.plane(), E.zero_field(), n1=8, n2=8, spin=False)
        with self.assertRaises(AssertionError):
            S.eigensolve(op.discretize(), k=17)

class TestObservables(unittest.TestCase):

    def setUp(self):
        self.op = H.assemble_surface_operator(G.cylinder(1.0), E.zero_field(), n1=8, n2=8)
        self.discrete = self.op.discretize()

    def constant(self, spinor):
        values = np.broadcast_to(np.asarray(spinor, dtype=complex), self.op.grid.shape + (2,))
        d = self.discrete
        return S.SpinorField(values, d.grid, 'primed', d.weights, d.U, d.chart).normalized()

    def test_sigma_rho(self):
        assert np.isclose(S.expectation(self.constant([1, 0]), 'sigma_rho'), 1.0)
        assert np.isclose(S.expectation(self.constant([0, 1]), 'sigma_rho'), -1.0)
        assert np.isclose(S.expectation(self.constant([1, 1]), 'sigma_rho'), 0.0)
        assert np.isclose(S.expectation(self.constant([1, 1]), 'sigma_1'), 1.0)

    def test_geometric_potential(self):
        assert np.isclose(S.expectation(self.constant([1, 0]), 'V_g'), -1/8)

    def test_unnormalized(self):
        d = self.discrete
        field = S.SpinorField(2*np.ones(self.op.grid.shape + (2,)), d.grid, 'primed', d.weights, d.U, d.chart)
        with self.assertRaises(ValueError):
            S.expectation(field, 'sigma_rho')

    def test_spinless_sigma(self):
        op = H.assemble_surface_operator(G.cylinder(1.0), E.zero_field(), n1=8, n2=8, spin=False)
        result = S.eigensolve(op.discretize(), k=1)
        assert S.expectation(result.eigenfields[0], 'sigma_rho') == 0.0

    def test_lab_conversion(self):
        field = self.constant([1, 0])
        lab = field.to_lab()
        assert lab.representation == 'lab'
        assert np.isclose(lab.norm(), 1.0)
        assert np.allclose(lab.normal_spin_density(), field.normal_spin_density())

class TestResults(unittest.TestCase):

    def test_multiplets(self):
        groups = S.multiplets([3.0, 1.0, 1.0 + 1e-9, 2.0, 3.0])
        assert [d for _, d in groups] == [2, 1, 2]
        assert np.allclose([e for e, _ in groups], [1.0, 2.0, 3.0])

    def test_convergence_order(self):
        assert np.allclose(S.convergence_order([4e-2, 1e-2, 2.5e-3]), [2.0, 2.0])

    def test_outputs(self):
        op = H.assemble_surface_operator(G.cylinder(1.0), E.zero_field(), n1=8, n2=8)
        discrete = op.discretize()
        result = S.eigensolve(discrete, k=4, metadata=op.metadata())

        data = result.to_dict()
        assert data['format'] == 'surfacepauli-spectrum'
        assert sum(data['degeneracies']) == 4
        assert data['params']['chart'] == 'cylinder'
        assert data['params']['boundaries'] == ['antiperiodic', 'periodic']

        buf = io.StringIO()
        result.write_csv(buf, 0)
        lines = buf.getvalue().strip().split('\n')
        assert lines[0] == 'q1,q2,chi_plus_sq,chi_minus_sq,sigma_rho'
        assert len(lines) == 1 + 64

        with tempfile.TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'spectrum.json')
            result.write_json(filename)
            with open(filename) as f:
                assert np.allclose(json.load(f)['eigenvalues'], result.eigenvalues)

    def test_triplets(self):
        op = H.assemble_surface_operator(G.plane(), E.zero_field(), n1=8, n2=8, spin=False)
        discrete = op.discretize()
        buf = io.StringIO()
        discrete.write_triplets(buf)

        lines = buf.getvalue().strip().split('\n')
        assert lines[0].startswith('# dimension 64')
        rows = np.loadtxt(io.StringIO(buf.getvalue()))
        assert len(rows) == discrete.matrix.nnz
        assert np.all(np.diff(rows[:, 0]) >= 0)

if __name__ == '__main__':
    unittest.main()

import unittest
from math import pi

import numpy as np

import surfacepauli.geometry as G
import surfacepauli.em_field as E
import surfacepauli.hamiltonian as H
import surfacepauli.solver as solver
import surfacepauli.checks as C
import surfacepauli.logging as logging

logging.set_log_level(logging.LogLevel.SILENT)

class TestResults(unittest.TestCase):

    def test_from_value(self):
        assert C.CheckResult.from_value('a', 1e-13, 1e-12).status == 'PASS'
        assert C.CheckResult.from_value('a', 1e-11, 1e-12).status == 'FAIL'

        with self.assertRaises(AssertionError):
            C.CheckResult('a', 'WARN', 0.0, 1.0)

    def test_report(self):
        report = C.CheckReport([C.CheckResult('first', 'PASS', 0.0, 1.0), C.CheckResult('second', 'INFO', 0.5, 1.0, 'known')])
        assert report.passed()
        report.extend([C.CheckResult('third', 'FAIL', 2.0, 1.0)])

        assert not report.passed()
        assert [r.name for r in report.failures()] == ['third']
        assert report.result('second').detail == 'known'
        assert report.lines()[2].startswith('FAIL third')
        assert report.to_dict()['passed'] is False

        with self.assertRaises(KeyError):
            report.result('fourth')

class TestPointwise(unittest.TestCase):

    def test_spin_identities(self):
        for name in C.BUILTIN_CHARTS:
            results = C.spin_identity_checks(G.make_chart(name), points=20)
            assert all(r.status == 'PASS' for r in results), [r.line() for r in results]

    def test_geometric_potential(self):
        for name in C.BUILTIN_CHARTS:
            result, = C.geometric_potential_checks(G.make_chart(name), points=200)
            assert result.status == 'PASS', result.line()

    def test_closed_form_geometric_potential(self):
        assert np.isclose(C.closed_form_geometric_potential(G.cylinder(2.0), 0.3, 0.1), -1/32)
        assert np.isclose(C.closed_form_geometric_potential(G.torus(2.0, 1.0), np.pi/2, 0.1), -1/18)

        with self.assertRaises(ValueError):
            C.closed_form_geometric_potential(G.plane(), 0.3, 0.1)

    def test_limit_relations(self):
        result, = C.limit_relation_checks(G.torus(2.0, 1.0))
        assert result.status == 'PASS', result.line()

class TestOperatorChecks(unittest.TestCase):

    def test_hermiticity(self):
        chart = G.torus(2.0, 1.0)
        op = H.assemble_surface_operator(chart, C.field_for(chart), n1=8, n2=12)
        results = C.hermiticity_checks(op)
        assert [r.name for r in results] == ['torus: hermiticity (inner product)', 'torus: hermiticity (matrix)']
        assert all(r.status == 'PASS' for r in results)

    def test_gauge_invariance(self):
        chart = G.cylinder(1.0)
        field = C.field_for(chart)
        op = H.assemble_surface_operator(chart, field, n1=12, n2=12)
        result = C.gauge_invariance_check(chart, field, op.grid, gauges=3, k=4)
        assert result.status == 'PASS', result.line()
        assert result.name == 'cylinder: gauge invariance (3 gauges)'

    def test_gauge_invariance_sphere(self):
        chart = G.sphere(1.0)
        field = C.field_for(chart, 'sphere_uniform', B=1.2)
        op = H.assemble_surface_operator(chart, field, n1=10, n2=20)
        result = C.gauge_invariance_check(chart, field, op.grid, gauges=2, k=4, seed=5)
        assert result.status == 'PASS', result.line()

    def test_representations(self):
        chart = G.cylinder(1.0)
        result = C.representation_consistency_check(chart, C.field_for(chart), 12, 12, k=4)
        assert result.status == 'PASS', result.line()

    def test_cylinder_spectrum(self):
        chart = G.cylinder(1.0)
        op = H.assemble_surface_operator(chart, E.zero_field(), n1=12, n2=12, representation='primed')
        eigenvalues = solver.eigensolve(op.discretize(), k=10).eigenvalues

        # (m^2/r^2 + k^2)/2 - 1/(8 r^2) with integer m and k, every level twice
        continuum = np.array([-1/8]*2 + [3/8]*8)
        assert np.allclose(eigenvalues, continuum, atol=0.02)
        assert np.allclose(eigenvalues[:2], -1/8, atol=1e-10)

        lab_grid = solver.grid_for_chart(chart, 12, 12, representation='lab')
        assert np.allclose(C.cylinder_levels(lab_grid, 1.0, continuum=True)[:10], continuum)
        assert np.allclose(eigenvalues, C.cylinder_levels(lab_grid, 1.0)[:10], atol=1e-9)

    def test_cylinder_levels(self):
        grid = solver.grid_for_chart(G.cylinder(2.0, L=3.0, y_periodic=False), 8, 10, representation='lab')
        levels = C.cylinder_levels(grid, 2.0, hbar=2.0, mass=0.5, components=1, continuum=True)
        assert np.isclose(levels[0], 4.0*(pi/3)**2 - 4.0/(4*4.0))
        assert np.allclose(C.cylinder_levels(grid, 2.0)[::2], C.cylinder_levels(grid, 2.0)[1::2])

    def test_cylinder_spectrum_check(self):
        chart = G.cylinder(1.5, L=3.0, y_periodic=False)
        exact, continuum = C.cylinder_spectrum_check(chart, 12, 10, k=6, hbar=0.8, mass=2.0)
        assert exact.status == 'PASS', exact.line()
        assert continuum.status == 'INFO'
        assert 0 < continuum.value < 0.1

    def test_only_sigma_rho(self):
        chart = G.sphere(1.0)
        op = H.assemble_surface_operator(chart, C.field_for(chart), n1=8, n2=16)
        assert C.only_sigma_rho_check(op).status == 'PASS'

    def test_oracle_checks(self):
        chart = G.cylinder(1.0)
        field = C.field_for(chart)
        grid = H.assemble_surface_operator(chart, field, n1=12, n2=12).grid
        results = C.oracle_checks(chart, field, grid)
        statuses = {r.name: r.status for r in results}

        assert statuses['cylinder: oracle term kinetic'] == 'PASS'
        assert statuses['cylinder: oracle term spin_connection'] == 'INFO'
        assert 'FAIL' not in statuses.values()

class TestSuite(unittest.TestCase):

    def test_suite_cylinder(self):
        report = C.run_suite([G.cylinder(1.0)], points=10, gauges=2, n1=12, n2=12, k=4)
        assert report.passed(), [r.line() for r in report.failures()]
        report.result('cylinder: primed spectrum within doubled period lab spectrum')
        assert report.result('cylinder: primed spectrum versus discrete levels').status == 'PASS'
        assert report.result('cylinder: primed spectrum versus continuum levels').status == 'INFO'
        report.result('cylinder: thin-layer limit relations')

    def test_corrupt(self):
        report = C.run_suite([G.cylinder(1.0)], points=10, gauges=1, n1=12, n2=12, k=4, corrupt='kinetic')
        assert [r.name for r in report.failures()] == ['cylinder: oracle term kinetic']

    def test_corrupt_absent_term(self):
        # The cylinder closed form has no divergence term.
        report = C.run_suite([G.cylinder(1.0)], points=10, gauges=1, n1=12, n2=12, k=4, corrupt='divergence')
        assert report.passed()

    def test_custom_chart_pointwise_only(self):
        chart = G.torus(2.5, 1.0)
        chart.name = 'custom_torus'
        report = C.run_suite([chart], points=10, gauges=1)
        names = [r.name for r in report.results]
        assert all(n.startswith('custom_torus: spin') or n == 'custom_torus: thin-layer limit relations' for n in names)
        assert report.passed()

if __name__ == '__main__':
    unittest.main()

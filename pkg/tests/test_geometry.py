import os
import tempfile
import unittest
from math import pi

import numpy as np

import surfacepauli.geometry as G
import surfacepauli.logging as logging

logging.set_log_level(logging.LogLevel.SILENT)

class TestCharts(unittest.TestCase):

    def test_sphere_equator(self):
        geom = G.geometry_at(G.sphere(1.0), pi/2, 0.3)
        assert np.isclose(abs(geom.M), 1.0)
        assert np.isclose(geom.K, 1.0)
        assert np.isclose(geom.geometric_potential(), 0.0, atol=1e-14)
        assert np.allclose(geom.normal, geom.position)

    def test_sphere_radius(self):
        r = 2.5
        geom = G.geometry_at(G.sphere(r), 1.1, 4.0)
        assert np.isclose(abs(geom.M), 1/r)
        assert np.isclose(geom.K, 1/r**2)
        assert np.allclose(geom.g, [[r**2, 0], [0, r**2*np.sin(1.1)**2]])

    def test_sphere_christoffel(self):
        t = 0.7
        gamma = G.christoffel_2d(G.sphere(1.0), t, 1.0)
        assert np.isclose(gamma[0, 1, 1], -np.sin(t)*np.cos(t))
        assert np.isclose(gamma[1, 0, 1], np.cos(t)/np.sin(t))
        assert np.isclose(gamma[1, 1, 0], np.cos(t)/np.sin(t))
        assert np.isclose(gamma[0, 0, 0], 0.0)

    def test_sphere_pole_degenerate(self):
        with self.assertRaises(G.DegenerateMetricError):
            G.geometry_at(G.sphere(1.0), 0.0, 1.0)

    def test_cylinder(self):
        r = 2.0
        geom = G.geometry_at(G.cylinder(r), 0.4, 1.0)
        assert np.isclose(abs(np.trace(geom.alpha)), 1/r)
        assert np.isclose(geom.K, 0.0)
        assert np.isclose(G.geometric_potential_at(G.cylinder(r), 0.4, 1.0), -1/(8*r**2))
        assert np.allclose(geom.normal, [np.sin(0.4), 0., np.cos(0.4)])

    def test_torus_curvature(self):
        chart = G.torus(R0=3.0, r=1.0)
        geom = G.geometry_at(chart, pi/2, 0.2)
        assert np.isclose(abs(geom.K), 1/4)

        t = 0.9
        R = 3.0 + np.sin(t)
        assert np.isclose(G.geometry_at(chart, t, 1.0).K, np.sin(t)/R)

    def test_torus_geometric_potential(self):
        chart = G.torus(R0=2.0, r=1.0)
        assert np.isclose(G.geometric_potential_at(chart, pi/2, 0.0), -1/18)

        t = 2.0
        R = 2.0 + np.sin(t)
        assert np.isclose(G.geometric_potential_at(chart, t, 1.3, hbar=2.0, mass=3.0), -4.0*4.0/(8*3.0*R**2))

    def test_torus_rejects_bad_radii(self):
        with self.assertRaises(G.ChartError):
            G.torus(R0=1.0, r=1.0)

    def test_invalid_parameters(self):
        for build in [lambda: G.sphere(0.0), lambda: G.cylinder(-1.0), lambda: G.cylinder(1.0, L=0.0),
                lambda: G.plane(1.0, -2.0), lambda: G.torus(2.0, -0.5)]:
            with self.assertRaises(ValueError):
                build()

    def test_invalid_chart_structure(self):
        embedding = G.plane().embedding
        P, B = G.Periodicity.PERIODIC, G.Periodicity.BOUNDED

        with self.assertRaises(G.ChartError):
            G.SurfaceChart('flat', embedding, ((0., 1.), (1., 0.)), (B, B))
        with self.assertRaises(G.ChartError):
            G.SurfaceChart('flat', embedding, ((0., 1.), (0., 1.)), (B, 'periodic'))
        with self.assertRaises(G.ChartError):
            G.SurfaceChart('flat', embedding, ((0., 1.), (0., 1.)), (P, B), poles=(True, False))

    def test_plane_flat(self):
        geom = G.geometry_at(G.plane(2.0, 3.0), 0.5, 0.5)
        assert np.allclose(geom.g, np.eye(2))
        assert np.isclose(geom.M, 0.0) and np.isclose(geom.K, 0.0)
        assert np.allclose(geom.frame, np.eye(3))

    def test_vectorized_matches_scalar(self):
        chart = G.torus(2.0, 1.0)
        q1 = np.array([0.3, 1.4, 5.0])
        q2 = np.array([2.0, 0.1, 3.3])
        vec = G.geometry_on(chart, q1, q2)

        for i in range(3):
            single = G.geometry_at(chart, q1[i], q2[i])
            assert np.isclose(vec.M[i], single.M)
            assert np.allclose(vec.alpha[i], single.alpha)
            assert np.allclose(vec.frame[i], single.frame)

    def test_normal_derivatives_on_arrays(self):
        r = 1.5
        chart = G.sphere(r)
        q1, q2 = np.linspace(0.3, 2.8, 5), np.linspace(0.0, 6.0, 5)
        geom = G.geometry_on(chart, q1, q2)

        assert geom.normal.shape == (5, 3)
        assert geom.normal_derivatives.shape == (5, 2, 3)
        assert geom.alpha.shape == (5, 2, 2) and geom.gamma2.shape == (5, 2, 2, 2)
        # The unit normal of a sphere is the position over the radius.
        assert np.allclose(geom.normal_derivatives, geom.tangents/r)
        assert np.allclose(geom.M, 1/r) and np.allclose(geom.K, 1/r**2)

    def test_geometry_on_grid(self):
        chart = G.torus(2.0, 1.0)
        Q1, Q2 = np.meshgrid(np.linspace(0.1, 6.0, 4), np.linspace(0.2, 6.1, 6), indexing='ij')
        geom = G.geometry_on(chart, Q1, Q2)

        assert geom.M.shape == (4, 6)
        assert geom.normal_derivatives.shape == (4, 6, 2, 3)
        assert geom.frame.shape == (4, 6, 3, 3)

        for i, j in [(0, 0), (2, 3), (3, 5)]:
            single = G.geometry_at(chart, Q1[i, j], Q2[i, j])
            assert np.allclose(geom.normal_derivatives[i, j], single.normal_derivatives)
            assert np.allclose(geom.h[i, j], single.h)
            assert np.isclose(geom.K[i, j], single.K)

    def test_frame_right_handed(self):
        geom = G.geometry_on(G.torus(2.0, 1.0), np.linspace(0.1, 6, 7), np.linspace(0.2, 6, 7))
        assert np.allclose(np.linalg.det(geom.frame), 1.0)
        assert np.allclose(geom.frame[..., 2, :], geom.normal)

    def test_gauss_theorem(self):
        chart = G.torus(2.0, 1.0)
        assert np.isclose(G.gaussian_curvature_intrinsic(chart, 0.8, 1.0), G.geometry_at(chart, 0.8, 1.0).K, atol=1e-5)

    def test_make_chart(self):
        chart = G.make_chart('cylinder', r=1.5, L=3.0, y_periodic=False)
        assert chart.name == 'cylinder'
        assert chart.is_periodic(0) and not chart.is_periodic(1)
        assert np.isclose(chart.period(0), 2*pi)

        with self.assertRaises(G.ChartError):
            G.make_chart('cone')

class TestTabulated(unittest.TestCase):

    def test_tabulated_cylinder(self):
        n1, n2 = 256, 16
        t = np.arange(n1)*2*pi/n1
        y = np.linspace(0., 2., n2)
        T, Y = np.meshgrid(t, y, indexing='ij')
        data = np.column_stack([T.ravel(), Y.ravel(), np.sin(T).ravel(), Y.ravel(), np.cos(T).ravel()])

        chart = G.tabulated_from_array(data, periodic=(True, False))
        assert np.isclose(chart.period(0), 2*pi)

        geom = G.geometry_at(chart, 1.0, 1.0)
        assert np.isclose(geom.geometric_potential(), -1/8, rtol=1e-3)
        assert np.isclose(geom.K, 0.0, atol=1e-3)

    def grid_table(self, n1=6, n2=5):
        Q1, Q2 = np.meshgrid(np.arange(n1)*0.2, np.arange(n2)*0.3, indexing='ij')
        return np.column_stack([Q1.ravel(), Q2.ravel(), Q1.ravel(), Q2.ravel(), 0*Q1.ravel()])

    def test_malformed_tables(self):
        table = self.grid_table()
        irregular = table.copy()
        irregular[irregular[:, 0] == irregular[-1, 0], 0] += 0.05
        missing = table.copy()
        missing[3, 4] = np.nan

        for data in [table[:, :4], table[:-1], self.grid_table(3, 5), irregular, missing]:
            with self.assertRaises(G.ChartError):
                G.tabulated_from_array(data)

        G.tabulated_from_array(table)

    def test_malformed_file(self):
        with tempfile.TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'chart.csv')
            np.savetxt(filename, self.grid_table()[:, :4], delimiter=',', header='q1,q2,x,y', comments='')

            with self.assertRaises(G.ChartError):
                G.tabulated(filename)

class TestBulkMetric(unittest.TestCase):

    def test_determinant_identity(self):
        chart = G.torus(2.0, 1.0)
        bulk = G.bulk_metric_at(chart, 0.7, 1.9, 0.05)
        assert bulk.determinant_identity_residual() < 1e-12
        assert np.isclose(bulk.G[2, 2], 1.0)
        assert np.allclose(bulk.G[:2, 2], 0.0)

    def test_sphere_bulk_metric(self):
        r, q3, t = 1.0, 0.1, 1.2
        bulk = G.bulk_metric_at(G.sphere(r), t, 0.5, q3)
        rho = r + q3
        assert np.allclose(bulk.G[:2, :2], [[rho**2, 0], [0, rho**2*np.sin(t)**2]])
        assert np.isclose(bulk.f, (rho/r)**2)

    def test_fan_collapse(self):
        chart = G.cylinder(1.0)
        # The normal points outwards, so the fan collapses on the axis.
        with self.assertRaises(G.FanCollapseError):
            G.bulk_metric_at(chart, 0.5, 1.0, -1.5)

    def test_limit_relations(self):
        for chart, point in [(G.sphere(1.0), (1.0, 2.0)), (G.cylinder(1.5), (0.3, 1.0)), (G.torus(2.0, 1.0), (0.8, 2.5))]:
            report = G.limit_relations_check(chart, *point, [4e-3, 2e-3, 1e-3, 5e-4])
            assert report.converged, str(report)

    def test_limit_relation_targets(self):
        report = G.limit_relations_check(G.cylinder(2.0), 0.3, 1.0, [4e-3, 2e-3, 1e-3])
        assert np.isclose(abs(report.targets[2]), 1/2)
        assert np.allclose(report.targets[:2], 0.0)

    def test_trace_identity(self):
        chart = G.torus(2.0, 1.0)
        q1, q2, q3 = 0.6, 1.1, 0.02
        Gamma = G.christoffel_3d(chart, q1, q2, q3)
        d = G.FiniteDifference(step=1e-5)
        log_G = d.first(lambda a, b: G.log_sqrt_G(chart, a, b, q3), (q1, q2), 0)
        assert np.isclose(np.einsum('iij->j', Gamma)[0], log_G, atol=1e-6)

class TestFiniteDifference(unittest.TestCase):

    def test_first_and_second(self):
        d = G.FiniteDifference()
        f = lambda a, b: np.sin(a)*np.exp(b)
        assert np.isclose(d.first(f, (0.4, 0.2), 0), np.cos(0.4)*np.exp(0.2))
        assert np.isclose(d.second(f, (0.4, 0.2), 0, 1), np.cos(0.4)*np.exp(0.2), rtol=1e-6)
        assert np.isclose(d.second(f, (0.4, 0.2), 1, 1), np.sin(0.4)*np.exp(0.2), rtol=1e-6)

    def test_periodicity_string(self):
        assert str(G.Periodicity.PERIODIC) == 'periodic'
        assert G.Periodicity.PERIODIC.is_periodic()
        assert not G.Periodicity.BOUNDED.is_periodic()

if __name__ == '__main__':
    unittest.main()

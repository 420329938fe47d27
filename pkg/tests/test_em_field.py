import unittest
from math import pi

import numpy as np

import surfacepauli.geometry as G
import surfacepauli.em_field as E
import surfacepauli.logging as logging

logging.set_log_level(logging.LogLevel.SILENT)

class TestExpression(unittest.TestCase):

    def test_evaluate(self):
        e = E.Expression('0.5*sin(q1)^2 + exp(-q2)/2 - pi')
        q1, q2 = np.array([0.3, 1.0]), np.array([0.0, 2.0])
        assert np.allclose(e(q1, q2), 0.5*np.sin(q1)**2 + np.exp(-q2)/2 - pi)
        assert not e.is_constant()

    def test_constant(self):
        e = E.Expression(1.5)
        assert e.is_constant()
        assert np.allclose(e(np.zeros(3), np.zeros(3)), 1.5)

    def test_rejected(self):
        for text in ['__import__("os")', 'q3 + 1', 'q1 if q2 else 0', 'sin(q1, q2)', 'tan(q1)', 'q1 % 2', '1 +']:
            with self.assertRaises(E.ExpressionError):
                E.Expression(text)

        with self.assertRaises(E.ExpressionError):
            E.Expression(None)

class TestPresets(unittest.TestCase):

    def test_sphere_uniform_curl(self):
        chart = G.sphere(1.0)
        field = E.sphere_uniform(0.7)
        q1, q2 = np.array([0.4, 1.2, 2.5]), np.array([0.1, 3.0, 5.5])

        for q3 in [0.0, 0.1]:
            B = E.magnetic_field_cartesian(field, chart, q1, q2, q3)
            assert np.allclose(B, [0, 0, 0.7], atol=1e-7)

    def test_cylinder_mixed_curl(self):
        chart = G.cylinder(1.5)
        field = E.cylinder_mixed(0.5, 0.3, r=1.5)
        q1, q2 = np.array([0.2, 2.0, 4.0]), np.array([0.5, 1.0, 3.0])

        for q3 in [0.0, 0.2]:
            B = E.magnetic_field_cartesian(field, chart, q1, q2, q3)
            assert np.allclose(B, [0, 0.5, 0.3], atol=1e-7)

    def test_torus_axial_curl(self):
        chart = G.torus(2.0, 1.0)
        field = E.torus_mixed(0.4, 0.0)
        B = E.magnetic_field_cartesian(field, chart, np.array([0.3, 2.0]), np.array([1.0, 4.0]), 0.1)
        assert np.allclose(B, [0, 0, 0.4], atol=1e-7)

    def test_presets_in_thin_layer_gauge(self):
        for field in [E.sphere_uniform(1.0), E.cylinder_mixed(1.0, 1.0), E.torus_mixed(1.0, 1.0), E.zero_field()]:
            assert field.thin_layer
            assert E.normal_component_on_surface(field, np.linspace(0.1, 3, 5), np.linspace(0, 6, 5)) == 0.0

    def test_make_field(self):
        chart = G.cylinder(2.0)
        field = E.make_field(chart, 'cylinder_mixed', B0=0.5, B1=0.1, phi_e='0.1*cos(q1)')
        assert field.parameters['r'] == 2.0
        assert np.isclose(field.scalar_potential(0.0, 0.0), 0.1)

        with self.assertRaises(E.FieldError):
            E.make_field(chart, 'sphere_uniform', B=1.0)

    def test_invalid_fields(self):
        chart = G.cylinder(1.0)

        for preset, arguments in [('dipole', {}), ('custom', {}), ('custom', dict(A=['q1', 'q2']))]:
            with self.assertRaises(E.FieldError):
                E.make_field(chart, preset, **arguments)

        assert issubclass(E.FieldError, ValueError)

class TestGauge(unittest.TestCase):

    def test_thin_layer_gauge(self):
        field = E.custom_field(['cos(q2)', 'q1', 'sin(q1) + q3'])
        assert not field.thin_layer

        thin = E.thin_layer_gauge(field)
        assert thin.thin_layer
        assert E.thin_layer_gauge(thin) is thin

        q1, q2 = np.array([0.4, 1.3]), np.array([0.2, 2.0])
        assert np.allclose(thin.potential(q1, q2, 0.0), [[np.cos(q2[i]), q1[i], 0.0] for i in range(2)], atol=1e-8)

        A = thin.potential(q1, q2, 0.1)
        assert np.allclose(A[..., 0], np.cos(q2) - 0.1*np.cos(q1), atol=1e-7)
        assert np.allclose(A[..., 2], 0.0)

    def test_gauge_keeps_curl(self):
        chart = G.torus(2.0, 1.0)
        field = E.torus_mixed(0.4, 0.2)
        gauge = E.random_surface_gauge(chart, seed=4)
        transformed = E.gauge_transform(field, gauge)

        q1, q2 = np.array([0.5, 2.0, 4.5]), np.array([1.0, 3.0, 0.2])
        assert np.allclose(E.magnetic_field_at(field, chart, q1, q2), E.magnetic_field_at(transformed, chart, q1, q2), atol=1e-6)
        assert not np.allclose(field.potential(q1, q2), transformed.potential(q1, q2))

    def test_random_gauge_periodic(self):
        chart = G.torus(2.0, 1.0)
        gauge = E.random_surface_gauge(chart, seed=1)
        assert np.isclose(gauge(0.3, 0.7), gauge(0.3 + 2*pi, 0.7))
        assert np.isclose(gauge(0.3, 0.7), gauge(0.3, 0.7 + 2*pi))

    def test_spinor_phase(self):
        chart = G.cylinder(1.0)
        gauge = E.random_surface_gauge(chart, seed=2)
        values = np.ones((3, 4, 2), dtype=complex)
        Q1, Q2 = np.meshgrid(np.linspace(0, 1, 3), np.linspace(0, 1, 4), indexing='ij')
        transformed = E.gauge_transform_spinor(values, gauge, Q1, Q2, e_charge=2.0)
        assert np.allclose(np.abs(transformed), 1.0)
        assert np.allclose(transformed[..., 0], np.exp(-2j*gauge(Q1, Q2)))

class TestConversions(unittest.TestCase):

    def test_cartesian_uniform_field(self):
        chart = G.sphere(1.0)
        B = 0.7
        field = E.cartesian_to_covariant(lambda x, y, z: np.stack([-0.5*B*y, 0.5*B*x, 0*z], axis=-1), chart)
        preset = E.sphere_uniform(B)

        q1, q2 = np.array([0.5, 1.5]), np.array([0.3, 4.0])
        for q3 in [0.0, 0.05]:
            assert np.allclose(field.potential(q1, q2, q3), preset.potential(q1, q2, q3))

    def test_line_integral(self):
        field = E.custom_field(['2', 'q1', '0'])
        # A_1 dq1 + A_2 dq2 along (0, 0) -> (1, 1): 2 + 1/2.
        assert np.isclose(E.line_integral(field, (0., 0.), (1., 1.)), 2.5)

    def test_lorentz_residual(self):
        chart = G.plane(1.0, 1.0)
        field = E.custom_field(['q1', '-q2', '0'])
        assert np.allclose(E.lorentz_gauge_residual(field, chart, np.array([0.2, 0.5]), np.array([0.3, 0.6])), 0.0, atol=1e-8)

if __name__ == '__main__':
    unittest.main()

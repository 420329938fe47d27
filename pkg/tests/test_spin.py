import unittest
from math import pi

import numpy as np
from scipy.spatial.transform import Rotation

import surfacepauli.geometry as G
import surfacepauli.spin as S
import surfacepauli.logging as logging

logging.set_log_level(logging.LogLevel.SILENT)

class TestPauliAlgebra(unittest.TestCase):

    def test_product_rule(self):
        algebra = S.PauliAlgebra()
        assert algebra.product_residual() < 1e-15
        assert algebra.vector_identity_residual(np.array([0.3, -1.0, 2.0]), np.array([1.5, 0.2, -0.7])) < 1e-14

    def test_decomposition(self):
        v = np.array([0.4, -1.2, 0.9])
        m = 0.5*S.SIGMA_0 + S.pauli_dot(v)
        assert np.allclose(S.pauli_decomposition(m), [0.5, *v])

    def test_exp_pauli(self):
        assert np.allclose(S.exp_pauli(2*pi, 3), -S.SIGMA_0)
        assert np.allclose(S.exp_pauli(pi, 2), 1j*S.SIGMA_2)
        U = S.exp_pauli(np.array([0.1, 0.5]), 1)
        assert U.shape == (2, 2, 2)
        assert np.allclose(U @ S.dagger(U), S.SIGMA_0)

    def test_levi_civita(self):
        eps = S.levi_civita(3)
        assert eps[0, 1, 2] == 1 and eps[1, 0, 2] == -1 and eps[0, 0, 1] == 0
        assert np.allclose(S.levi_civita(2), [[0, 1], [-1, 0]])

class TestLift(unittest.TestCase):

    def test_lift_realizes_rotation(self):
        rotations = Rotation.random(10, random_state=3).as_matrix()
        U = S.spinor_lift(rotations)
        assert np.allclose(S.adjoint_rotation(U), rotations)
        assert np.allclose(np.linalg.det(U), 1.0)

    def test_branch_hint(self):
        rotation = Rotation.from_rotvec([0.2, 0.1, -0.4]).as_matrix()
        U = S.spinor_lift(rotation)
        assert np.real(np.trace(U)) >= 0
        assert np.allclose(S.spinor_lift(rotation, branch_hint=-U), -U)

    def test_closed_form_matches_frame(self):
        for chart in [G.sphere(1.3), G.cylinder(0.8), G.torus(2.0, 1.0)]:
            q1, q2 = S.random_interior_points(chart, 20, seed=1)
            geom = G.geometry_on(chart, q1, q2)
            U = S.closed_form_rotation(chart.name, q1, q2)
            assert np.allclose(S.adjoint_rotation(U), S.frame_rotation_at(geom)), chart.name

    def test_unknown_chart_has_no_closed_form(self):
        assert S.closed_form_rotation('tabulated', 0.1, 0.2) is None
        assert np.allclose(S.closed_form_rotation('plane', 0.1, 0.2), S.SIGMA_0)

class TestInducedMatrices(unittest.TestCase):

    def test_cylinder_transformed(self):
        r = 2.0
        frame = S.spin_frame_at(G.cylinder(r), 0.7, 1.0)
        assert frame.branch == 'closed_form'
        assert np.allclose(frame.sigma_transformed[0], S.SIGMA_1/r)
        assert np.allclose(frame.sigma_transformed[1], S.SIGMA_2)
        assert np.allclose(frame.sigma_transformed[2], S.SIGMA_3)

    def test_sphere_transformed(self):
        t = 1.1
        frame = S.spin_frame_at(G.sphere(1.0), t, 2.0)
        assert np.allclose(frame.sigma_transformed[0], S.SIGMA_1)
        assert np.allclose(frame.sigma_transformed[1], S.SIGMA_2/np.sin(t))
        assert np.allclose(frame.sigma_transformed[2], S.SIGMA_3)

    def test_induced_anticommutator(self):
        chart = G.torus(2.0, 1.0)
        geom = G.geometry_at(chart, 0.4, 2.2)
        Sigma = S.induced_pauli_at(geom)
        for a in range(2):
            for b in range(2):
                anti = Sigma[a] @ Sigma[b] + Sigma[b] @ Sigma[a]
                assert np.allclose(anti, 2*geom.g_inv[a, b]*S.SIGMA_0)

    def test_spin_identities(self):
        for chart in [G.sphere(1.0), G.cylinder(1.0), G.torus(2.0, 1.0), G.plane()]:
            report = S.check_spin_identities(chart, points=50, seed=2)
            assert report.passed(1e-12), str(report.deviations)

class TestHolonomy(unittest.TestCase):

    def test_closed_form_holonomy(self):
        assert S.closed_form_holonomy(G.sphere()) == (None, -1)
        assert S.closed_form_holonomy(G.cylinder()) == (-1, 1)
        assert S.closed_form_holonomy(G.torus()) == (-1, -1)
        assert S.closed_form_holonomy(G.plane()) == (None, None)

    def test_propagated_holonomy(self):
        chart = G.torus(2.0, 1.0)
        chart.name = 'generic_torus'
        nodes = np.arange(16)*2*pi/16
        result = S.propagate_spinor_branch(chart, nodes, nodes)

        assert result.holonomy == (-1, -1)
        assert result.max_jump < 0.5
        assert np.allclose(np.linalg.det(result.U), 1.0)

class TestConnection(unittest.TestCase):

    def test_cylinder_connection(self):
        r = 2.0
        Omega, omega, potential = S.connection_at(G.cylinder(r), 0.3, 1.0)
        assert np.allclose(omega[0], [0, 1, 0], atol=1e-8)
        assert np.allclose(omega[1], 0.0, atol=1e-8)
        assert np.allclose(Omega[0], -0.5j*S.SIGMA_2, atol=1e-8)
        assert np.isclose(potential, 1/(8*r**2))

    def test_sphere_potential(self):
        t = 1.0
        potential = S.spin_connection_potential_at(G.sphere(1.0), t, 0.5)
        assert np.isclose(potential, (1 + 1/np.sin(t)**2)/8)

    def test_connection_antihermitian(self):
        Omega, _, _ = S.connection_at(G.torus(2.0, 1.0), 0.9, 4.0)
        assert np.allclose(Omega, -S.dagger(Omega), atol=1e-9)

if __name__ == '__main__':
    unittest.main()

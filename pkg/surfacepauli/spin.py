"""The spin module constructs the spin algebra of a surface. Contracting the constant Pauli matrices with the
gradients of the curvilinear coordinates gives the induced matrices

$$
\\Sigma^a = g^{ab} \\, \\partial_b \\vec{r} \\cdot \\vec{\\sigma}, \\quad \\Sigma^3 = \\hat{n} \\cdot \\vec{\\sigma},
$$

which obey \\( \\{\\Sigma^a, \\Sigma^b\\} = 2 g^{ab} \\) but depend on the position. The rotation \\( \\mathcal{R}(q) \\) maps the
local orthonormal triad \\( (\\hat{n}_1, \\hat{n}_2, \\hat{n}_3) \\) onto the Cartesian axes. Its SU(2) lift \\( U(q) \\) satisfies

$$
U (\\vec{v} \\cdot \\vec{\\sigma}) U^{\\dagger} = (\\mathcal{R} \\vec{v}) \\cdot \\vec{\\sigma},
$$

so that the transformed matrices \\( \\sigma^a(q) = U \\Sigma^a U^{\\dagger} \\) only contain \\( \\sigma^1 \\) and \\( \\sigma^2 \\) while
the normal matrix becomes the constant \\( \\sigma^3 \\). A spinor transforms as \\( \\chi' = U \\chi \\).

The lift is only defined up to a sign. For the builtin sphere, cylinder and torus charts the closed forms

$$
U_{sphere} = U_{torus} = e^{i\\theta\\sigma^2/2} e^{i\\phi\\sigma^3/2}, \\quad U_{cylinder} = e^{i\\theta\\sigma^2/2}
$$

are used. For other charts the sign is fixed by continuity, see `propagate_spinor_branch`. Going around a
non-contractible loop the lift may return with a sign flip (holonomy \\( -1 \\)), in which case fields in the primed
representation are antiperiodic along that loop.

Derivatives acting through \\( U \\) produce the connection \\( \\Omega_a = U \\partial_a U^{-1} = -\\frac{i}{2} \\vec{\\omega}_a \\cdot \\vec{\\sigma} \\),
see `connection_at`.
"""

__pdoc__ = {}
__pdoc__['PauliAlgebra.__str__'] = False
__pdoc__['SpinFrame.__str__'] = False

import numpy as np
from scipy.spatial.transform import Rotation

from . import geometry as G
from . import logging

SIGMA_0 = np.eye(2, dtype=np.complex128)
SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=np.complex128)

PAULI = np.array([SIGMA_1, SIGMA_2, SIGMA_3])
"""The three Pauli matrices, shape (3, 2, 2)."""

PAULI_BASIS = np.array([SIGMA_0, SIGMA_1, SIGMA_2, SIGMA_3])
"""Identity followed by the Pauli matrices, shape (4, 2, 2)."""

def levi_civita(dimension=3):
    """Fully antisymmetric symbol in two or three dimensions, with \\( \\epsilon^{12} = \\epsilon^{123} = 1 \\)."""
    assert dimension in [2, 3]

    if dimension == 2:
        return np.array([[0., 1.], [-1., 0.]])

    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.
    return eps

class PauliAlgebra:
    """The constant Pauli matrices together with the Levi-Civita symbol that determines their products,
    \\( \\sigma^i \\sigma^j = \\delta^{ij} I + i \\epsilon^{ijk} \\sigma^k \\)."""

    def __init__(self):
        self.sigma1 = SIGMA_1
        self.sigma2 = SIGMA_2
        self.sigma3 = SIGMA_3
        self.levi_civita = levi_civita(3)

    def __str__(self):
        return '<SurfacePauli PauliAlgebra>'

    def matrices(self):
        return np.array([self.sigma1, self.sigma2, self.sigma3])

    def product_residual(self):
        """Largest deviation from \\( \\sigma^i \\sigma^j = \\delta^{ij} I + i \\epsilon^{ijk} \\sigma^k \\) over all i, j."""
        s = self.matrices()
        lhs = np.einsum('iab,jbc->ijac', s, s)
        rhs = np.einsum('ij,ac->ijac', np.eye(3), SIGMA_0) + 1j*np.einsum('ijk,kac->ijac', self.levi_civita, s)
        return float(np.max(np.abs(lhs - rhs)))

    def vector_identity_residual(self, a, b):
        """Deviation from \\( (\\vec{\\sigma}\\cdot\\vec{a})(\\vec{\\sigma}\\cdot\\vec{b}) = \\vec{a}\\cdot\\vec{b} + i\\vec{\\sigma}\\cdot(\\vec{a}\\times\\vec{b}) \\)."""
        lhs = pauli_dot(a) @ pauli_dot(b)
        rhs = np.dot(a, b)*SIGMA_0 + 1j*pauli_dot(np.cross(a, b))
        return float(np.max(np.abs(lhs - rhs)))

def pauli_dot(v):
    """\\( \\vec{v} \\cdot \\vec{\\sigma} \\) for vectors of shape (..., 3), giving matrices of shape (..., 2, 2)."""
    return np.einsum('...i,iab->...ab', np.asarray(v), PAULI)

def pauli_decomposition(m):
    """Coefficients \\( (c_0, c_1, c_2, c_3) \\) with \\( m = c_0 I + \\sum_k c_k \\sigma^k \\), for matrices of shape (..., 2, 2)."""
    return 0.5*np.einsum('kab,...ba->...k', PAULI_BASIS, np.asarray(m))

def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))

def exp_pauli(angle, k):
    """\\( e^{i \\, \\mathrm{angle} \\, \\sigma^k / 2} \\) for the Pauli matrix number k (1, 2 or 3), vectorized over the angle."""
    angle = np.asarray(angle, dtype=np.float64)
    return np.cos(angle/2)[..., np.newaxis, np.newaxis]*SIGMA_0 + 1j*np.sin(angle/2)[..., np.newaxis, np.newaxis]*PAULI[k-1]


class SpinFrame:
    """Spin data at a surface point.

    Attributes
    ----------
    Sigma: induced matrices \\( (\\Sigma^1, \\Sigma^2, \\Sigma^3) \\), shape (..., 3, 2, 2)
    rotation: the rotation \\( \\mathcal{R} \\) with \\( \\mathcal{R} \\hat{n}_i = \\vec{e}_i \\)
    U: SU(2) lift of the rotation
    branch: 'closed_form' for the builtin rotations, 'lift' otherwise
    sigma_transformed: \\( (\\sigma^1(q), \\sigma^2(q), \\sigma_n) = U (\\Sigma^1, \\Sigma^2, \\Sigma^3) U^{\\dagger} \\)"""

    def __init__(self, Sigma, rotation, U, branch, sigma_transformed):
        self.Sigma = Sigma
        self.rotation = rotation
        self.U = U
        self.branch = branch
        self.sigma_transformed = sigma_transformed

    def __str__(self):
        return f'<SurfacePauli SpinFrame branch={self.branch}>'

def induced_pauli_at(geom):
    """Induced Pauli matrices \\( \\Sigma^a = g^{ab} \\partial_b \\vec{r} \\cdot \\vec{\\sigma} \\) and \\( \\Sigma^3 = \\hat{n} \\cdot \\vec{\\sigma} \\).

    Parameters
    ----------
    geom: `surfacepauli.geometry.GeometryPoint`

    Returns
    -------
    Array of shape (..., 3, 2, 2)."""
    gradients = np.einsum('...ab,...bi->...ai', geom.g_inv, geom.tangents)
    return np.concatenate([pauli_dot(gradients), pauli_dot(geom.normal)[..., np.newaxis, :, :]], axis=-3)

def lowered_pauli_at(geom):
    """Induced matrices with a lower index, \\( \\Sigma_a = g_{ab} \\Sigma^b = \\partial_a \\vec{r} \\cdot \\vec{\\sigma} \\)."""
    return pauli_dot(geom.tangents)

def frame_rotation_at(geom):
    """The rotation \\( \\mathcal{R}(q) \\) mapping the local triad onto the Cartesian axes. Its rows are the triad vectors."""
    rotation = np.array(geom.frame)
    assert np.all(np.linalg.det(rotation) > 0), "Local frame should be right handed"
    return rotation

def spinor_lift(rotation, branch_hint=None):
    """SU(2) lift \\( U \\) of a rotation (shape (..., 3, 3)) such that \\( U (\\vec{v}\\cdot\\vec{\\sigma}) U^{\\dagger} = (\\mathcal{R}\\vec{v})\\cdot\\vec{\\sigma} \\).

    Of the two lifts \\( \\pm U \\) the one closest to `branch_hint` (in Frobenius norm) is returned. Without a hint,
    the lift with a non-negative real trace is returned."""
    rotation = np.asarray(rotation, dtype=np.float64)
    shape = rotation.shape[:-2]

    quat = Rotation.from_matrix(rotation.reshape(-1, 3, 3)).as_quat().reshape(shape + (4,))
    x, y, z, w = [quat[..., i][..., np.newaxis, np.newaxis] for i in range(4)]
    U = w*SIGMA_0 - 1j*(x*SIGMA_1 + y*SIGMA_2 + z*SIGMA_3)

    if branch_hint is None:
        sign = np.where(np.real(np.trace(U, axis1=-2, axis2=-1)) < 0, -1., 1.)
    else:
        hint = np.broadcast_to(branch_hint, U.shape)
        plus = np.linalg.norm(U - hint, axis=(-2, -1))
        minus = np.linalg.norm(U + hint, axis=(-2, -1))
        sign = np.where(minus < plus, -1., 1.)

    return sign[..., np.newaxis, np.newaxis]*U

def closed_form_rotation(chart_name, q1, q2):
    """The closed form spinor rotation of a builtin chart, or None if the chart has none.
    The plane uses the identity."""
    q1, q2 = np.broadcast_arrays(np.asarray(q1, dtype=np.float64), np.asarray(q2, dtype=np.float64))

    if chart_name in ['sphere', 'torus']:
        return exp_pauli(q1, 2) @ exp_pauli(q2, 3)
    elif chart_name == 'cylinder':
        return exp_pauli(q1, 2)
    elif chart_name == 'plane':
        return np.broadcast_to(SIGMA_0, q1.shape + (2, 2)).copy()

    return None

def spinor_rotation(chart, q1, q2, branch_hint=None):
    """\\( U(q) \\) on a chart: the closed form for builtin charts, otherwise the lift of the frame rotation."""
    U = closed_form_rotation(chart.name, q1, q2)

    if U is not None:
        return U

    geom = G.geometry_on(chart, q1, q2)
    return spinor_lift(frame_rotation_at(geom), branch_hint=branch_hint)

def transform_induced(U, Sigma):
    """\\( \\sigma^a(q) = U \\Sigma^a U^{\\dagger} \\) for every matrix in `Sigma` (shape (..., n, 2, 2))."""
    U = np.asarray(U)[..., np.newaxis, :, :]
    return U @ Sigma @ dagger(U)

def spin_frame_at(chart, q1, q2):
    """Build the complete `SpinFrame` at a point."""
    geom = G.geometry_at(chart, q1, q2)
    Sigma = induced_pauli_at(geom)
    rotation = frame_rotation_at(geom)

    U = closed_form_rotation(chart.name, q1, q2)
    branch = 'closed_form'

    if U is None:
        U = spinor_lift(rotation)
        branch = 'lift'

    return SpinFrame(Sigma, rotation, U, branch, transform_induced(U, Sigma))

def adjoint_rotation(U):
    """The rotation realized by \\( U \\): \\( \\mathcal{R}_{kj} = \\frac{1}{2} \\mathrm{Tr}(\\sigma^k U \\sigma^j U^{\\dagger}) \\)."""
    U = np.asarray(U)
    conj = U[..., np.newaxis, :, :] @ PAULI @ dagger(U)[..., np.newaxis, :, :]
    return np.real(np.moveaxis(pauli_decomposition(conj)[..., 1:], -1, -2))


class BranchPropagation:
    """Result of `propagate_spinor_branch`.

    Attributes
    ----------
    U: lifts on the grid, shape (n1, n2, 2, 2)
    holonomy: tuple with the sign acquired around each coordinate, or None for bounded coordinates
    max_jump: largest Frobenius distance between neighbouring lifts"""

    def __init__(self, U, holonomy, max_jump):
        self.U = U
        self.holonomy = holonomy
        self.max_jump = max_jump

    def __str__(self):
        return f'<SurfacePauli BranchPropagation holonomy={self.holonomy}, max_jump={self.max_jump:.3f}>'

def _holonomy_sign(U_end, U_start):
    overlap = np.real(np.trace(U_end @ dagger(U_start), axis1=-2, axis2=-1))/2
    return np.where(overlap < 0, -1, 1)

def propagate_spinor_branch(chart, q1_nodes, q2_nodes):
    """Fix the sign of the lift on a grid by continuity. The first node gets the lift with a non-negative real trace;
    the sweep then runs down the first column and along every row, each lift taking its predecessor as branch hint.

    For a periodic coordinate the lift is also evaluated one period further along every grid line, and compared with
    the lift at the start of the line to obtain the holonomy (\\( \\pm 1 \\)).

    Returns
    -------
    `BranchPropagation`"""
    q1_nodes = np.asarray(q1_nodes, dtype=np.float64)
    q2_nodes = np.asarray(q2_nodes, dtype=np.float64)
    Q1, Q2 = np.meshgrid(q1_nodes, q2_nodes, indexing='ij')

    rotations = frame_rotation_at(G.geometry_on(chart, Q1, Q2))
    n1, n2 = len(q1_nodes), len(q2_nodes)
    U = np.zeros((n1, n2, 2, 2), dtype=np.complex128)

    U[0, 0] = spinor_lift(rotations[0, 0])
    for i in range(1, n1):
        U[i, 0] = spinor_lift(rotations[i, 0], U[i-1, 0])
    for i in range(n1):
        for j in range(1, n2):
            U[i, j] = spinor_lift(rotations[i, j], U[i, j-1])

    jumps = [0.0]
    if n1 > 1:
        jumps.append(np.max(np.linalg.norm(np.diff(U, axis=0), axis=(-2, -1))))
    if n2 > 1:
        jumps.append(np.max(np.linalg.norm(np.diff(U, axis=1), axis=(-2, -1))))
    max_jump = float(max(jumps))

    holonomy = []
    for axis, nodes in enumerate([q1_nodes, q2_nodes]):
        if not chart.is_periodic(axis):
            holonomy.append(None)
            continue

        period = chart.period(axis)
        last = U[-1] if axis == 0 else U[:, -1]
        first = U[0] if axis == 0 else U[:, 0]

        # Walk the gap between the last node and the first node shifted by one period.
        steps = max(2, int(np.ceil(abs(nodes[0] + period - nodes[-1])/(nodes[1] - nodes[0] if len(nodes) > 1 else period))))
        current = last
        for t in np.linspace(0, 1, steps + 1)[1:]:
            q = nodes[-1] + t*(nodes[0] + period - nodes[-1])
            if axis == 0:
                geom = G.geometry_on(chart, q, q2_nodes)
            else:
                geom = G.geometry_on(chart, q1_nodes, q)
            current = spinor_lift(frame_rotation_at(geom), current)

        signs = _holonomy_sign(current, first)

        if not np.all(signs == signs.flat[0]):
            logging.log_warning(f'Holonomy of the spinor lift on chart {chart.name} differs between grid lines along coordinate {axis+1}')

        holonomy.append(int(signs.flat[len(signs)//2]))

    if max_jump >= 0.5:
        logging.log_warning(f'Spinor lift on chart {chart.name} jumps by {max_jump:.3f} between neighbouring nodes, refine the grid')

    return BranchPropagation(U, tuple(holonomy), max_jump)

def closed_form_holonomy(chart):
    """Holonomy of the closed form rotation of a builtin chart around each periodic coordinate."""
    holonomy = []
    # Domain center, away from the poles of the sphere.
    base = tuple(0.5*(lo + hi) for lo, hi in chart.domain)

    for axis in range(2):
        if not chart.is_periodic(axis):
            holonomy.append(None)
            continue

        shifted = list(base)
        shifted[axis] += chart.period(axis)
        start = closed_form_rotation(chart.name, *base)
        end = closed_form_rotation(chart.name, *shifted)
        holonomy.append(int(_holonomy_sign(end, start)))

    return tuple(holonomy)


def connection_at(chart, q1, q2, hbar=1.0, mass=1.0):
    """Spin connection of the spinor rotation at a point.

    Returns
    -------
    Tuple (Omega, omega, potential) with the anti-Hermitian matrices \\( \\Omega_a = U\\partial_a U^{-1} \\) (shape (2, 2, 2)),
    their rotation vectors \\( \\vec{\\omega}_a \\) with \\( \\Omega_a = -\\frac{i}{2}\\vec{\\omega}_a\\cdot\\vec{\\sigma} \\) (shape (2, 3)) and the scalar
    spin connection potential \\( \\frac{\\hbar^2}{8m} g^{ab} \\vec{\\omega}_a \\cdot \\vec{\\omega}_b \\)."""
    U = spinor_rotation(chart, q1, q2)
    d = G.FiniteDifference(step=1e-5)

    def rotation(a, b):
        return spinor_rotation(chart, a, b, branch_hint=U)

    dU = np.stack([d.first(rotation, (q1, q2), axis) for axis in range(2)])
    Omega = -dU @ dagger(U)
    omega = np.real(1j*np.einsum('aij,kji->ak', Omega, PAULI))

    geom = G.geometry_at(chart, q1, q2)
    potential = hbar**2/(8*mass)*np.einsum('ab,ak,bk->', geom.g_inv, omega, omega)

    return Omega, omega, float(potential)

def spin_connection_potential_at(chart, q1, q2, hbar=1.0, mass=1.0):
    """The scalar spin connection potential \\( \\frac{\\hbar^2}{8m} g^{ab} \\vec{\\omega}_a \\cdot \\vec{\\omega}_b \\), see `connection_at`."""
    return connection_at(chart, q1, q2, hbar=hbar, mass=mass)[2]


class SpinIdentityReport:
    """Largest deviations found by `check_spin_identities`, keyed by identity name."""

    def __init__(self, chart_name, deviations, points):
        self.chart_name = chart_name
        self.deviations = deviations
        self.points = points

    def __str__(self):
        return f'<SurfacePauli SpinIdentityReport {self.chart_name}, worst {self.worst():.2e}>'

    def worst(self):
        return max(self.deviations.values())

    def passed(self, tolerance=1e-10):
        return all(v <= tolerance for v in self.deviations.values())

def random_interior_points(chart, count, seed=0, margin=0.05):
    """Uniform random points in the chart domain, keeping a relative margin from bounded edges."""
    rng = np.random.default_rng(seed)
    q = []

    for axis in range(2):
        lo, hi = chart.domain[axis]
        m = 0.0 if chart.is_periodic(axis) else margin*(hi - lo)
        q.append(rng.uniform(lo + m, hi - m, count))

    return q[0], q[1]

def check_spin_identities(chart, points=100, seed=0):
    """Evaluate the spin algebra identities at random interior points of a chart.

    Reported deviations:

    - `induced_anticommutator`: \\( \\{\\Sigma^a, \\Sigma^b\\} - 2g^{ab} \\)
    - `induced_commutator`: \\( [\\Sigma^1, \\Sigma^2] - \\frac{2i}{\\sqrt{g}}\\Sigma^3 \\) and its two companions with \\( \\Sigma^3 \\)
    - `transformed_anticommutator`: \\( \\{\\sigma^a, \\sigma^b\\} - 2g^{ab} \\)
    - `sigma3_coefficient`: \\( \\sigma^3 \\) component of the transformed tangential matrices
    - `normal_alignment`: \\( U \\Sigma^3 U^{\\dagger} - \\sigma^3 \\)
    - `unitarity`: \\( U U^{\\dagger} - I \\) and \\( \\det U - 1 \\)
    - `lift_adjoint`: rotation realized by \\( U \\) minus \\( \\mathcal{R} \\)
    - `pauli_product`: the product rule of the constant Pauli matrices
    - `pauli_vector_identity`: \\( (\\vec{\\sigma}\\cdot\\vec{a})(\\vec{\\sigma}\\cdot\\vec{b}) - \\vec{a}\\cdot\\vec{b} - i\\vec{\\sigma}\\cdot(\\vec{a}\\times\\vec{b}) \\) for random vectors

    Returns
    -------
    `SpinIdentityReport`"""
    q1, q2 = random_interior_points(chart, points, seed=seed)
    geom = G.geometry_on(chart, q1, q2)

    Sigma = induced_pauli_at(geom)
    rotation = frame_rotation_at(geom)
    U = closed_form_rotation(chart.name, q1, q2)
    if U is None:
        U = spinor_lift(rotation)
    sigma = transform_induced(U, Sigma)

    identity = SIGMA_0
    g_inv = geom.g_inv[..., np.newaxis, np.newaxis]
    sqrt_g = geom.sqrt_g[..., np.newaxis, np.newaxis]

    def anticommutator_deviation(S):
        dev = 0.0
        for a in range(2):
            for b in range(2):
                anti = S[..., a, :, :] @ S[..., b, :, :] + S[..., b, :, :] @ S[..., a, :, :]
                dev = max(dev, np.max(np.abs(anti - 2*g_inv[:, a, b]*identity)))
        return float(dev)

    def commutator(A, B):
        return A @ B - B @ A

    Sigma_lower = lowered_pauli_at(geom)
    commutator_dev = max(
        np.max(np.abs(commutator(Sigma[:, 0], Sigma[:, 1]) - 2j/sqrt_g*Sigma[:, 2])),
        np.max(np.abs(commutator(Sigma[:, 0], Sigma[:, 2]) + 2j/sqrt_g*Sigma_lower[:, 1])),
        np.max(np.abs(commutator(Sigma[:, 1], Sigma[:, 2]) - 2j/sqrt_g*Sigma_lower[:, 0])))

    coefficients = pauli_decomposition(sigma[:, :2])

    rng = np.random.default_rng(seed + 1)
    algebra = PauliAlgebra()
    vector_dev = max(algebra.vector_identity_residual(a, b) for a, b in zip(rng.normal(size=(10, 3)), rng.normal(size=(10, 3))))

    deviations = dict(
        induced_anticommutator=anticommutator_deviation(Sigma[:, :2]),
        induced_commutator=float(commutator_dev),
        transformed_anticommutator=anticommutator_deviation(sigma[:, :2]),
        sigma3_coefficient=float(np.max(np.abs(coefficients[..., 3]))),
        normal_alignment=float(np.max(np.abs(sigma[:, 2] - SIGMA_3))),
        unitarity=float(max(np.max(np.abs(U @ dagger(U) - identity)), np.max(np.abs(np.linalg.det(U) - 1)))),
        lift_adjoint=float(np.max(np.abs(adjoint_rotation(U) - rotation))),
        pauli_product=algebra.product_residual(),
        pauli_vector_identity=vector_dev)

    return SpinIdentityReport(chart.name, deviations, points)

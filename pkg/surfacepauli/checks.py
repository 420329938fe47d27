"""The checks module collects the invariant checks of the surface operator into a suite that can be run from the command
line (`surfacepauli check`) or from tests. Every check returns a `CheckResult` with a status:

- PASS: the measured deviation is below the tolerance
- INFO: a documented difference with a closed form, for which the corrected term was verified
- FAIL: anything else

The suite covers the spin algebra on the curved surface, the thin-layer limit relations of the neighbourhood metric, the
geometric potentials of the builtin charts, Hermiticity of the discretized operator in the weighted inner product, gauge
invariance of the spectrum, agreement of the primed and lab representations, the closed form spectrum of the field
free cylinder, the absence of tangential Pauli matrices in the field couplings of the presets, and the term by term comparison with the closed form operators.
"""

__pdoc__ = {}
__pdoc__['CheckResult.__str__'] = False
__pdoc__['CheckReport.__str__'] = False

import numpy as np

from . import geometry as G
from . import spin as S
from . import em_field as E
from . import hamiltonian as H
from . import solver
from . import logging
from . import util

BUILTIN_CHARTS = ['sphere', 'cylinder', 'torus']

DEFAULT_FIELDS = {
    'sphere': dict(preset='sphere_uniform', B=0.7),
    'cylinder': dict(preset='cylinder_mixed', B0=0.5, B1=0.3),
    'torus': dict(preset='torus_mixed', B0=0.4, B1=0.2)
}
"""Field presets and strengths used by the suite for every builtin chart."""

LIMIT_OFFSETS = [4e-3, 2e-3, 1e-3, 5e-4]

class CheckResult:
    """Outcome of a single check.

    Parameters
    ----------
    name: str
    status: str
        'PASS', 'INFO' or 'FAIL'.
    value: float
        The measured deviation.
    tolerance: float
    detail: str"""

    def __init__(self, name, status, value, tolerance, detail=''):
        assert status in ['PASS', 'INFO', 'FAIL']
        self.name = name
        self.status = status
        self.value = float(value)
        self.tolerance = float(tolerance)
        self.detail = detail

    def __str__(self):
        return f'<SurfacePauli CheckResult {self.name}: {self.status}>'

    @staticmethod
    def from_value(name, value, tolerance, detail=''):
        return CheckResult(name, 'PASS' if value <= tolerance else 'FAIL', value, tolerance, detail)

    def line(self):
        detail = f' ({self.detail})' if self.detail else ''
        return f'{self.status:4} {self.name:45} {self.value:.2e} (tolerance {self.tolerance:.0e}){detail}'

    def to_dict(self):
        return dict(name=self.name, status=self.status, value=self.value, tolerance=self.tolerance, detail=self.detail)


class CheckReport:
    """Ordered collection of `CheckResult`."""

    def __init__(self, results=None):
        self.results = list(results) if results is not None else []

    def __str__(self):
        return f'<SurfacePauli CheckReport {len(self.results)} checks, {len(self.failures())} FAIL>'

    def extend(self, results):
        self.results.extend(results)

    def passed(self):
        return all(r.status != 'FAIL' for r in self.results)

    def failures(self):
        return [r for r in self.results if r.status == 'FAIL']

    def result(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def lines(self):
        return [r.line() for r in self.results]

    def to_dict(self):
        return dict(passed=self.passed(), results=[r.to_dict() for r in self.results])


def field_for(chart, preset=None, **strengths):
    """The suite field of a chart, or a preset with explicit strengths."""
    if preset is None:
        defaults = dict(DEFAULT_FIELDS[chart.name])
        preset = defaults.pop('preset')
        defaults.update(strengths)
        strengths = defaults

    return E.make_field(chart, preset, **strengths)

def spin_identity_checks(chart, points=100, seed=0, tolerance=1e-12):
    report = S.check_spin_identities(chart, points=points, seed=seed)
    return [CheckResult.from_value(f'{chart.name}: spin {name}', value, tolerance)
        for name, value in report.deviations.items()]

def limit_relation_checks(chart, points=4, seed=0, tolerance=1e-6):
    q1, q2 = S.random_interior_points(chart, points, seed=seed, margin=0.15)
    deviation = 0.0

    for a, b in zip(q1, q2):
        r = G.limit_relations_check(chart, a, b, LIMIT_OFFSETS, tolerance=tolerance)
        deviation = max(deviation, r.deviation/max(1.0, float(np.max(np.abs(r.targets)))))

    return [CheckResult.from_value(f'{chart.name}: thin-layer limit relations', deviation, tolerance)]

def closed_form_geometric_potential(chart, q1, q2, hbar=1.0, mass=1.0):
    """\\( V_g \\) of the builtin charts from their curvatures in closed form."""
    if chart.name == 'sphere':
        return np.zeros(np.shape(q1))
    elif chart.name == 'cylinder':
        r = chart.parameters['r']
        logging.log_warning_once('cylinder:V_g', 'Curvatures of the cylinder give V_g = -hbar^2/(8 m r^2), '
            'the positive value hbar^2/(8 m r^2) often quoted has the wrong sign')
        return -hbar**2/(8*mass*r**2) + 0*np.asarray(q1)
    elif chart.name == 'torus':
        R0, r = chart.parameters['R0'], chart.parameters['r']
        R = R0 + r*np.sin(q1)
        return -hbar**2*R0**2/(8*mass*r**2*R**2)

    raise ValueError(f'No closed form geometric potential for chart {chart.name}')

def geometric_potential_checks(chart, points=1000, seed=0, tolerance=1e-10):
    q1, q2 = S.random_interior_points(chart, points, seed=seed)
    V_g = G.geometry_on(chart, q1, q2).geometric_potential()
    exact = closed_form_geometric_potential(chart, q1, q2)

    if chart.name == 'sphere':
        deviation = float(np.max(np.abs(V_g)))
    else:
        deviation = float(np.max(np.abs(V_g/exact - 1)))

    return [CheckResult.from_value(f'{chart.name}: geometric potential', deviation, tolerance)]

def random_field(grid, components, seed=0):
    rng = np.random.default_rng(seed)
    shape = grid.shape + (components,)
    return rng.normal(size=shape) + 1j*rng.normal(size=shape)

def hermiticity_residual(discrete, trials=4, seed=0):
    """Largest relative value of \\( \\langle \\phi, H\\psi \\rangle - \\langle H\\phi, \\psi \\rangle \\) in the weighted inner product
    over random fields."""
    worst = 0.0

    for t in range(trials):
        phi = solver.SpinorField(random_field(discrete.grid, discrete.components, seed + 2*t), discrete.grid,
            discrete.representation, discrete.weights, discrete.U, discrete.chart)
        psi = solver.SpinorField(random_field(discrete.grid, discrete.components, seed + 2*t + 1), discrete.grid,
            discrete.representation, discrete.weights, discrete.U, discrete.chart)

        H_phi, H_psi = discrete.apply(phi), discrete.apply(psi)
        left, right = phi.inner(H_psi), H_phi.inner(psi)
        scale = max(abs(left), abs(right), np.sqrt(abs(H_phi.inner(H_phi))*abs(psi.inner(psi))), 1e-300)
        worst = max(worst, abs(left - right)/scale)

    return float(worst)

def hermiticity_checks(op, seed=0, tolerance=1e-10):
    discrete = solver.discretize(op)
    name = f'{op.chart.name}: hermiticity'

    return [
        CheckResult.from_value(name + ' (inner product)', hermiticity_residual(discrete, seed=seed), tolerance),
        CheckResult.from_value(name + ' (matrix)', discrete.hermiticity_residual(), 1e-12)]

def relative_spectrum_difference(a, b):
    a, b = np.asarray(a), np.asarray(b)
    assert a.shape == b.shape
    return float(np.max(np.abs(a - b)/np.maximum(1.0, np.abs(a))))

def gauge_invariance_check(chart, field, grid, gauges=20, k=8, seed=0, hbar=1.0, mass=1.0, tolerance=1e-8):
    """Compare the spectrum of the assembled operator with the spectra after random surface gauge transformations."""
    base = solver.eigensolve(H.assemble_surface_operator(chart, field, grid, hbar=hbar, mass=mass).discretize(), k=k, seed=seed)
    worst = 0.0

    for i in range(gauges):
        gauge = E.random_surface_gauge(chart, seed=seed + i + 1)
        transformed = E.gauge_transform(field, gauge)
        op = H.assemble_surface_operator(chart, transformed, grid, hbar=hbar, mass=mass)
        result = solver.eigensolve(op.discretize(), k=k, seed=seed)
        worst = max(worst, relative_spectrum_difference(base.eigenvalues, result.eigenvalues))

    logging.log_debug(f'Largest spectrum change over {gauges} gauges on {chart.name}: {worst:.2e}')
    return CheckResult.from_value(f'{chart.name}: gauge invariance ({gauges} gauges)', worst, tolerance)

def representation_consistency_check(chart, field, n1, n2, k=8, seed=0, hbar=1.0, mass=1.0, tolerance=1e-6):
    """Compare the spectrum in the primed representation with the lab representation on a grid covering twice the period of
    every antiperiodic coordinate. Every primed eigenvalue should be found in the doubled lab spectrum."""
    primed = H.assemble_surface_operator(chart, field, n1=n1, n2=n2, hbar=hbar, mass=mass, representation='primed')
    E_primed = solver.eigensolve(primed.discretize(), k=k, seed=seed).eigenvalues

    doubled_grid = solver.grid_for_chart(chart, n1, n2, spin=True, representation='lab')
    for axis in range(2):
        if primed.grid.boundaries[axis] == solver.BoundaryType.ANTIPERIODIC:
            doubled_grid = doubled_grid.extended(axis, 2)

    doubled = H.assemble_surface_operator(chart, field, doubled_grid, hbar=hbar, mass=mass, representation='lab')
    discrete = doubled.discretize()
    count = min(4*k, discrete.matrix.shape[0]//4)
    E_doubled = solver.eigensolve(discrete, k=count, seed=seed).eigenvalues

    contained = [e for e in E_primed if e <= E_doubled[-1]]
    assert len(contained), "Doubled period spectrum does not reach the lowest primed eigenvalue"
    deviation = max(float(np.min(np.abs(E_doubled - e)))/max(1.0, abs(e)) for e in contained)

    return CheckResult.from_value(f'{chart.name}: primed spectrum within doubled period lab spectrum', deviation, tolerance,
        f'{len(contained)} of {len(E_primed)} eigenvalues in range')

def _cylinder_modes(grid, axis):
    # Continuum wavenumbers and the matching eigenvalues of the three point Laplacian.
    n, h, length = grid.n[axis], grid.spacing(axis), grid.length(axis)

    if grid.boundaries[axis] == solver.BoundaryType.BOX:
        q = np.pi*np.arange(1, n + 1)/length
    else:
        assert grid.boundaries[axis] == solver.BoundaryType.PERIODIC, "Closed form levels are computed on the lab grid"
        q = 2*np.pi*np.arange(-(n//2), n - n//2)/length

    return q, (2 - 2*np.cos(q*h))/h**2

def cylinder_levels(grid, r, hbar=1.0, mass=1.0, components=2, continuum=False):
    """Closed form spectrum of the field free surface operator on a cylinder of radius `r`, sorted and with every level
    repeated once per spinor component.

    The levels are \\( \\frac{\\hbar^2}{2m} (m^2/r^2 + k^2) - \\frac{\\hbar^2}{8 m r^2} \\) with integer \\( m \\) and \\( k \\)
    the wavenumbers along the axis allowed by the closure of the grid. Unless `continuum` is set, \\( m^2/r^2 \\) and \\( k^2 \\)
    are replaced by the eigenvalues of the three point Laplacian on `grid`, which the discretized operator reproduces
    up to round off.

    Parameters
    ----------
    grid: `surfacepauli.solver.GridSpec`
        Grid in the lab representation, periodic around the cylinder.
    r: float
    components: int
        1 for a spinless operator, 2 for the Pauli operator."""
    (m, lattice_1), (k, lattice_2) = _cylinder_modes(grid, 0), _cylinder_modes(grid, 1)

    if continuum:
        lattice_1, lattice_2 = m**2, k**2

    levels = hbar**2/(2*mass)*(lattice_1[:, np.newaxis]/r**2 + lattice_2[np.newaxis, :]) - hbar**2/(8*mass*r**2)
    return np.repeat(np.sort(levels.ravel()), components)

def cylinder_spectrum_check(chart, n1, n2, k=8, seed=0, hbar=1.0, mass=1.0, tolerance=1e-8):
    """Compare the lowest eigenvalues of the field free Pauli operator in the primed representation with the closed form
    spectrum of the cylinder. The comparison with the discrete levels is exact, the distance to the continuum levels is the
    discretization error and reported as INFO."""
    assert chart.name == 'cylinder'
    r = chart.parameters['r']

    op = H.assemble_surface_operator(chart, E.zero_field(), n1=n1, n2=n2, hbar=hbar, mass=mass, representation='primed')
    eigenvalues = solver.eigensolve(op.discretize(), k=k, seed=seed).eigenvalues

    lab_grid = solver.grid_for_chart(chart, n1, n2, spin=True, representation='lab')
    exact = cylinder_levels(lab_grid, r, hbar=hbar, mass=mass)[:k]
    continuum = cylinder_levels(lab_grid, r, hbar=hbar, mass=mass, continuum=True)[:k]

    scale = hbar**2/(2*mass*r**2)
    discretization = float(np.max(np.abs(eigenvalues - continuum)))/scale

    return [
        CheckResult.from_value(f'{chart.name}: primed spectrum versus discrete levels', relative_spectrum_difference(exact, eigenvalues), tolerance),
        CheckResult(f'{chart.name}: primed spectrum versus continuum levels', 'INFO', discretization, tolerance,
            f'discretization error on a {n1}x{n2} grid')]

def only_sigma_rho_check(op, tolerance=1e-12):
    """Tangential \\( \\sigma^1, \\sigma^2 \\) coefficients of the field coupling matrices of a primed operator."""
    assert op.representation == 'primed', "The normal Pauli matrix is only constant in the primed representation"
    coefficients = op.matrix_pauli_coefficients()
    tangential = float(np.max(np.abs(coefficients[..., 1:3])))
    return CheckResult.from_value(f'{op.chart.name}: field couplings only along sigma_rho', tangential, tolerance)

def oracle_checks(chart, field, grid, hbar=1.0, mass=1.0, corrupt=None, tolerance=1e-8):
    """Compare the assembled operator with the closed form operator term by term."""
    assembled = H.assemble_surface_operator(chart, field, grid, hbar=hbar, mass=mass)
    oracle = H.closed_form_oracle(chart, field, grid, hbar=hbar, mass=mass, corrupt=corrupt)
    comparison = H.compare_operators(assembled, oracle, tolerance=tolerance)

    results = []
    for e in comparison.entries:
        value = e['alternative_residual'] if e['alternative_residual'] is not None else e['residual']
        results.append(CheckResult(f"{chart.name}: oracle term {e['tag']}", e['status'], value, tolerance, e['note']))

    return results

def run_suite(charts=None, points=100, gauges=20, n1=24, n2=48, k=8, seed=0, corrupt=None, hbar=1.0, mass=1.0):
    """Run every check on the builtin charts with their suite fields.

    Parameters
    ----------
    charts: list of `surfacepauli.geometry.SurfaceChart`, optional
        By default the sphere, cylinder and torus with their default parameters.
    points: int
        Number of random points of the pointwise checks.
    gauges: int
        Number of random gauge transformations.
    n1, n2: int
        Grid size of the operator checks.
    k: int
        Number of eigenvalues compared.
    corrupt: str, optional
        Oracle term whose sign is flipped, so that the comparison reports a failure.

    Returns
    -------
    `CheckReport`"""
    if charts is None:
        charts = [G.make_chart(name) for name in BUILTIN_CHARTS]

    report = CheckReport()

    with util.Timer('check suite'):
        for chart in charts:
            logging.log_info(f'Checking chart {chart.name}')
            report.extend(spin_identity_checks(chart, points=points, seed=seed))
            report.extend(limit_relation_checks(chart, seed=seed))

            if chart.name not in BUILTIN_CHARTS:
                continue

            report.extend(geometric_potential_checks(chart, points=10*points, seed=seed))

            field = field_for(chart)
            op = H.assemble_surface_operator(chart, field, n1=n1, n2=n2, hbar=hbar, mass=mass)
            report.extend(hermiticity_checks(op, seed=seed))
            report.results.append(only_sigma_rho_check(op))
            report.results.append(gauge_invariance_check(chart, field, op.grid, gauges=gauges, k=k, seed=seed, hbar=hbar, mass=mass))

            if chart.name == 'cylinder':
                report.results.append(representation_consistency_check(chart, field, n1, n2, k=k, seed=seed, hbar=hbar, mass=mass))
                report.extend(cylinder_spectrum_check(chart, n1, n2, k=k, seed=seed, hbar=hbar, mass=mass))

            report.extend(oracle_checks(chart, field, op.grid, hbar=hbar, mass=mass,
                corrupt=corrupt if corrupt in _oracle_tags(chart, field, op.grid) else None))

    for r in report.failures():
        logging.log_error(f'Check failed: {r.line()}')

    return report

def _oracle_tags(chart, field, grid):
    return H.closed_form_oracle(chart, field, grid).normal_form().keys()

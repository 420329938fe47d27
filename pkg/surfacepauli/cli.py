"""Command line interface. Every run is described by a single YAML file with the blocks `chart`, `field`, `grid`,
`solver`, `units`, `output` and `check`; unknown keys are rejected before any computation starts. For example

```
chart:
  name: torus
  R0: 2.0
  r: 1.0
field:
  preset: torus_mixed
  B0: 0.4
  B1: 0.2
grid:
  n1: 32
  n2: 64
solver:
  k: 12
```

The subcommands are

- `geometry`: curvatures, geometric potential, spin connection potential and magnetic field on the grid
- `spectrum`: low lying eigenvalues and eigenfields of the surface operator
- `check`: the invariant suite of `surfacepauli.checks`
- `oracle-compare`: term by term comparison with the closed form operator of the chart
- `export-matrix`: the discretized operator as 'row col re im' triplets

Every text output embeds the resolved configuration and a SHA-256 hash of its content, so that rerunning a configuration
reproduces identical files. The exit code is 0 on success, 1 when checks fail, 2 for invalid input (configuration, gauge,
grid or boundary problems) and 3 for numerical errors.
"""

__pdoc__ = {}
__pdoc__['RunConfig.__str__'] = False
__pdoc__['main'] = True

import argparse
import hashlib
import io
import json
import os
import sys
from math import pi

import numpy as np
import meshio
import yaml

from . import geometry as G
from . import spin as S
from . import em_field as E
from . import hamiltonian as H
from . import solver
from . import checks
from . import logging
from . import util

VERSION = '0.1.0'

class ConfigError(ValueError):
    """Raised when a run configuration is invalid: unknown keys, wrong types or values out of range."""
    pass


SCHEMA = {
    'chart': dict(name=str, r=float, R0=float, L=float, y_boundary=str, Lx=float, Ly=float, file=str, periodic=list),
    'field': dict(preset=str, B=float, B0=float, B1=float, phi_e=(float, str), A=list, e_charge=float, cartesian=bool),
    'grid': dict(n1=int, n2=int, spin=bool, representation=str),
    'solver': dict(k=int, tol=float, seed=int, dense_limit=int),
    'units': dict(hbar=float, mass=float),
    'output': dict(directory=str, vtk=bool),
    'check': dict(points=int, gauges=int, corrupt=str)
}
"""Allowed keys of every configuration block with their types."""

CHART_PARAMETERS = {
    'sphere': dict(r=1.0),
    'cylinder': dict(r=1.0, L=2*pi, y_boundary='periodic'),
    'torus': dict(R0=2.0, r=1.0),
    'plane': dict(Lx=1.0, Ly=1.0, periodic=[False, False]),
    'tabulated': dict(file=None, periodic=[False, False])
}

FIELD_PARAMETERS = {
    'zero': [],
    'sphere_uniform': ['B'],
    'cylinder_mixed': ['B0', 'B1'],
    'torus_mixed': ['B0', 'B1'],
    'custom': ['A', 'cartesian']
}

DEFAULTS = {
    'field': dict(preset='zero', e_charge=1.0, phi_e=None),
    'grid': dict(n1=24, n2=48, spin=True, representation='primed'),
    'solver': dict(k=10, tol=None, seed=0, dense_limit=solver.DENSE_LIMIT),
    'units': dict(hbar=1.0, mass=1.0),
    'output': dict(directory='output', vtk=False),
    'check': dict(points=100, gauges=20, corrupt=None)
}

def _coerce(block, key, value):
    expected = SCHEMA[block][key]
    types = expected if isinstance(expected, tuple) else (expected,)

    if value is None and (block, key) in [('solver', 'tol'), ('check', 'corrupt'), ('field', 'phi_e')]:
        return None

    for t in types:
        if t is bool and isinstance(value, bool):
            return value
        if isinstance(value, bool):
            continue
        if t is int and isinstance(value, int):
            return value
        if t is float and isinstance(value, (int, float)):
            return float(value)
        if t in [str, list] and isinstance(value, t):
            return value

    names = ' or '.join(t.__name__ for t in types)
    raise ConfigError(f"Key '{block}.{key}' should be of type {names}, got {value!r}")

def _require(condition, message):
    if not condition:
        raise ConfigError(message)


class RunConfig:
    """A validated run configuration.

    Parameters
    ----------
    data: dict
        The parsed YAML document.
    base_directory: str
        Directory against which relative file names (tabulated charts) are resolved."""

    def __init__(self, data, base_directory='.'):
        if data is None:
            data = {}
        _require(isinstance(data, dict), 'Configuration should be a mapping of blocks')

        for block, values in data.items():
            _require(block in SCHEMA, f"Unknown configuration block '{block}', allowed are {', '.join(SCHEMA)}")
            _require(isinstance(values, dict), f"Configuration block '{block}' should be a mapping")
            for key in values:
                _require(key in SCHEMA[block], f"Unknown key '{key}' in block '{block}', allowed are {', '.join(SCHEMA[block])}")

        self.base_directory = base_directory
        self.resolved = {}

        for block in SCHEMA:
            given = {k: _coerce(block, k, v) for k, v in data.get(block, {}).items()}

            if block == 'chart':
                self.resolved[block] = self._resolve_chart(given)
            elif block == 'field':
                self.resolved[block] = self._resolve_field(given)
            else:
                values = dict(DEFAULTS[block])
                values.update(given)
                self.resolved[block] = values

        self._validate()

    def __str__(self):
        c, f, g = self.resolved['chart'], self.resolved['field'], self.resolved['grid']
        return f"<SurfacePauli RunConfig {c['name']}, field {f['preset']}, grid {g['n1']}x{g['n2']}>"

    @staticmethod
    def from_file(filename):
        """Read and validate a YAML configuration file."""
        try:
            with open(filename) as f:
                data = yaml.safe_load(f)
        except OSError as e:
            raise ConfigError(f'Could not read configuration file {filename}: {e.strerror}')
        except yaml.YAMLError as e:
            raise ConfigError(f'Configuration file {filename} is not valid YAML: {e}')

        return RunConfig(data, os.path.dirname(os.path.abspath(filename)))

    def _resolve_chart(self, given):
        name = given.pop('name', 'sphere')
        _require(name in CHART_PARAMETERS, f"Unknown chart '{name}', choose one of {', '.join(CHART_PARAMETERS)}")

        for key in given:
            _require(key in CHART_PARAMETERS[name], f"Key 'chart.{key}' does not apply to chart {name}")

        values = dict(name=name)
        values.update(CHART_PARAMETERS[name])
        values.update(given)
        return values

    def _resolve_field(self, given):
        values = dict(DEFAULTS['field'])
        values.update(given)
        preset = values['preset']
        _require(preset in FIELD_PARAMETERS, f"Unknown field preset '{preset}', choose one of {', '.join(FIELD_PARAMETERS)}")

        for key in given:
            if key in ['preset', 'e_charge', 'phi_e']:
                continue
            _require(key in FIELD_PARAMETERS[preset], f"Key 'field.{key}' does not apply to field preset {preset}")

        for key in FIELD_PARAMETERS[preset]:
            if key == 'cartesian':
                values.setdefault(key, False)
            elif key != 'A':
                values.setdefault(key, 0.0)

        return values

    def _validate(self):
        chart, field, grid = self.resolved['chart'], self.resolved['field'], self.resolved['grid']
        slv, units, check = self.resolved['solver'], self.resolved['units'], self.resolved['check']

        for key in ['r', 'R0', 'L', 'Lx', 'Ly']:
            if key in chart:
                _require(chart[key] > 0, f"Chart parameter '{key}' should be positive")

        if chart['name'] == 'torus':
            _require(chart['R0'] > chart['r'], 'Torus requires R0 > r')
        if chart['name'] == 'cylinder':
            _require(chart['y_boundary'] in ['box', 'periodic'], "Key 'chart.y_boundary' should be 'box' or 'periodic'")
        if 'periodic' in chart:
            _require(len(chart['periodic']) == 2 and all(isinstance(p, bool) for p in chart['periodic']),
                "Key 'chart.periodic' should be a list of two booleans")
        if chart['name'] == 'tabulated':
            _require(chart['file'] is not None, 'Tabulated chart requires a file')
            path = os.path.join(self.base_directory, chart['file'])
            _require(os.path.isfile(path), f'Tabulated chart file {path} does not exist')

        preset = field['preset']
        if preset in E.PRESETS:
            _require(E.PRESETS[preset][0] == chart['name'], f"Field preset '{preset}' requires the {E.PRESETS[preset][0]} chart")
        if preset == 'custom':
            _require('A' in field and len(field['A']) == 3, "Custom field requires 'field.A' with three components")
            variables = ('x', 'y', 'z') if field['cartesian'] else ('q1', 'q2', 'q3')
            for a in field['A']:
                E.Expression(a, variables)
        if field['phi_e'] is not None:
            E.scalar_potential(field['phi_e'])

        _require(grid['n1'] >= 8 and grid['n2'] >= 8, 'Grid should have at least 8 nodes along each coordinate')
        _require(grid['representation'] in ['primed', 'lab'], "Key 'grid.representation' should be 'primed' or 'lab'")

        dimension = grid['n1']*grid['n2']*(2 if grid['spin'] else 1)
        _require(1 <= slv['k'] <= dimension//4, f"Key 'solver.k' should lie between 1 and {dimension//4} for this grid")
        _require(slv['tol'] is None or slv['tol'] > 0, "Key 'solver.tol' should be positive")
        _require(slv['dense_limit'] >= 0, "Key 'solver.dense_limit' should not be negative")

        _require(units['hbar'] > 0 and units['mass'] > 0, 'Units hbar and mass should be positive')
        _require(check['points'] >= 1 and check['gauges'] >= 0, 'Check points should be positive and gauges not negative')
        _require(check['corrupt'] is None or check['corrupt'] in H.TERM_TAGS,
            f"Key 'check.corrupt' should name one of the terms {', '.join(H.TERM_TAGS)}")

    def override(self, out=None, seed=None):
        """Apply the command line overrides."""
        if out is not None:
            self.resolved['output']['directory'] = out
        if seed is not None:
            self.resolved['solver']['seed'] = seed
        return self

    def hash(self):
        return hashlib.sha256(json.dumps(self.resolved, sort_keys=True).encode()).hexdigest()

    def chart(self):
        c = self.resolved['chart']

        if c['name'] == 'cylinder':
            return G.cylinder(c['r'], c['L'], y_periodic=c['y_boundary'] == 'periodic')
        elif c['name'] == 'plane':
            return G.plane(c['Lx'], c['Ly'], periodic=tuple(c['periodic']))
        elif c['name'] == 'tabulated':
            return G.tabulated(os.path.join(self.base_directory, c['file']), periodic=tuple(c['periodic']))

        return G.make_chart(c['name'], **{k: v for k, v in c.items() if k != 'name'})

    def field(self, chart):
        """The field in the thin-layer gauge."""
        f = self.resolved['field']

        if f['preset'] == 'custom' and f['cartesian']:
            components = [E.Expression(a, ('x', 'y', 'z')) for a in f['A']]

            def A_cartesian(x, y, z):
                return np.stack([c(x, y, z) for c in components], axis=-1)

            field = E.cartesian_to_covariant(A_cartesian, chart, E.scalar_potential(f['phi_e']), f['e_charge'])
            field = field.with_parameters(A=list(f['A']), cartesian=True)
        else:
            strengths = {k: f[k] for k in ['B', 'B0', 'B1'] if k in f}
            field = E.make_field(chart, f['preset'], phi_e=f['phi_e'], e_charge=f['e_charge'], A=f.get('A'), **strengths)

        return E.thin_layer_gauge(field)

    def operator(self, chart=None, field=None):
        chart = chart if chart is not None else self.chart()
        field = field if field is not None else self.field(chart)
        g, u = self.resolved['grid'], self.resolved['units']
        return H.assemble_surface_operator(chart, field, n1=g['n1'], n2=g['n2'], hbar=u['hbar'], mass=u['mass'],
            spin=g['spin'], representation=g['representation'])


def _content_hash(text):
    return hashlib.sha256(text.encode()).hexdigest()

def write_text(filename, body, config):
    """Write a text file preceded by comment lines holding the resolved configuration and the hash of the body."""
    header = [f'# surfacepauli {VERSION}',
        f'# config: {json.dumps(config.resolved, sort_keys=True)}',
        f'# config_sha256: {config.hash()}',
        f'# sha256: {_content_hash(body)}']

    with open(filename, 'w') as f:
        f.write('\n'.join(header) + '\n' + body)

def write_json(filename, data, config):
    """Write a JSON document with the resolved configuration and the hash of its content."""
    data = dict(data)
    data['config'] = config.resolved
    data['config_sha256'] = config.hash()
    data['sha256'] = _content_hash(json.dumps(data, sort_keys=True))

    with open(filename, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)

def _quad_cells(grid):
    n1, n2 = grid.n
    index = np.arange(n1*n2).reshape(n1, n2)
    I, J = np.meshgrid(np.arange(n1 if grid.boundaries[0].is_periodic() else n1 - 1),
        np.arange(n2 if grid.boundaries[1].is_periodic() else n2 - 1), indexing='ij')
    cells = [index[I, J], index[(I + 1) % n1, J], index[(I + 1) % n1, (J + 1) % n2], index[I, (J + 1) % n2]]
    return np.stack(cells, axis=-1).reshape(-1, 4)

def write_vtk(filename, chart, grid, point_data):
    """Export the grid as a quad mesh on the surface together with point data, in any format supported by meshio."""
    Q1, Q2 = grid.meshgrid()
    points = chart.position(Q1, Q2).reshape(-1, 3)
    data = {name: np.ascontiguousarray(np.asarray(v, dtype=np.float64).reshape(grid.size, -1).squeeze()) for name, v in point_data.items()}
    meshio.Mesh(points, [('quad', _quad_cells(grid))], point_data=data).write(filename)

def _file_hash(filename):
    with open(filename, 'rb') as f:
        return hashlib.sha256(f.read()).hexdigest()

def _csv(columns, names):
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack([np.ravel(c) for c in columns]), delimiter=',', header=','.join(names), comments='', fmt='%.12g')
    return buf.getvalue()

def _summary(values):
    values = np.asarray(values)
    return dict(min=float(np.min(values)), max=float(np.max(values)), mean=float(np.mean(values)))

def _output_directory(config):
    directory = config.resolved['output']['directory']
    os.makedirs(directory, exist_ok=True)
    return directory


def cmd_geometry(config):
    """Write geometry.csv with the columns q1, q2, x, y, z, M, K, V_g, V_spin, Bx, By, Bz on the grid nodes and a summary
    in geometry.json."""
    chart = config.chart()
    field = config.field(chart)
    g, u = config.resolved['grid'], config.resolved['units']
    hbar, mass = u['hbar'], u['mass']

    grid = solver.grid_for_chart(chart, g['n1'], g['n2'], spin=False)
    Q1, Q2 = grid.meshgrid()
    geom = G.geometry_on(chart, Q1, Q2)
    V_g = geom.geometric_potential(hbar, mass)

    def spin_potential(rows):
        return np.array([[S.spin_connection_potential_at(chart, Q1[i, j], Q2[i, j], hbar, mass) for j in range(grid.n[1])] for i in rows])

    with util.Timer('spin connection potential'):
        V_spin = np.concatenate(util.split_collect(spin_potential, np.arange(grid.n[0])), axis=0)

    B = E.magnetic_field_cartesian(field, chart, Q1, Q2)
    position = geom.position
    directory = _output_directory(config)

    body = _csv([Q1, Q2, position[..., 0], position[..., 1], position[..., 2], geom.M, geom.K, V_g, V_spin,
        B[..., 0], B[..., 1], B[..., 2]], ['q1', 'q2', 'x', 'y', 'z', 'M', 'K', 'V_g', 'V_spin', 'Bx', 'By', 'Bz'])
    write_text(os.path.join(directory, 'geometry.csv'), body, config)

    summary = dict(format='surfacepauli-geometry', version=solver.FORMAT_VERSION, chart=chart.name, grid=list(grid.n),
        M=_summary(geom.M), K=_summary(geom.K), V_g=_summary(V_g), V_spin=_summary(V_spin),
        B=_summary(np.linalg.norm(B, axis=-1)), normal_dynamics=H.normal_mode_report('none'))

    if config.resolved['output']['vtk']:
        vtk = os.path.join(directory, 'geometry.vtk')
        write_vtk(vtk, chart, grid, dict(M=geom.M, K=geom.K, V_g=V_g, V_spin=V_spin, B=B))
        summary['files'] = {'geometry.vtk': _file_hash(vtk)}

    write_json(os.path.join(directory, 'geometry.json'), summary, config)
    logging.log_info(f'V_g on chart {chart.name} between {summary["V_g"]["min"]:.10g} and {summary["V_g"]["max"]:.10g}')
    return 0

def _flux_shift(config, chart, field):
    """Shift of the angular momentum by the axial flux through a cylinder, \\( e B_0 r^2 / 2\\hbar \\)."""
    if chart.name != 'cylinder' or field.name != 'cylinder_mixed':
        return None
    return field.e_charge*field.parameters['B0']*chart.parameters['r']**2/(2*config.resolved['units']['hbar'])

def cmd_spectrum(config):
    """Write spectrum.json with eigenvalues, multiplets, residuals and expectation values, and eigenfield_<i>.csv for
    every eigenpair."""
    s, u = config.resolved['solver'], config.resolved['units']
    chart = config.chart()
    field = config.field(chart)
    op = config.operator(chart, field)
    discrete = op.discretize()
    result = solver.eigensolve(discrete, k=s['k'], tol=s['tol'], seed=s['seed'], dense_limit=s['dense_limit'], metadata=op.metadata())

    directory = _output_directory(config)
    data = result.to_dict()
    data['expectations'] = [{o: solver.expectation(f, o, u['hbar'], u['mass']) for o in ['sigma_rho', 'sigma_1', 'sigma_2', 'V_g']}
        for f in result.eigenfields]

    shift = _flux_shift(config, chart, field)
    if shift is not None:
        data['flux_shift'] = shift
        logging.log_info(f'Axial flux shifts the angular momentum by {shift:.6g}')

    files = {}
    for i in range(len(result.eigenfields)):
        buf = io.StringIO()
        result.write_csv(buf, i)
        write_text(os.path.join(directory, f'eigenfield_{i}.csv'), buf.getvalue(), config)

        if config.resolved['output']['vtk']:
            field_i = result.eigenfields[i].to_primed()
            density = np.abs(field_i.values)**2
            vtk = os.path.join(directory, f'eigenfield_{i}.vtk')
            point_data = dict(density=field_i.density(), chi_plus_sq=density[..., 0], sigma_rho=field_i.normal_spin_density())
            if field_i.components == 2:
                point_data['chi_minus_sq'] = density[..., 1]
            write_vtk(vtk, chart, op.grid, point_data)
            files[f'eigenfield_{i}.vtk'] = _file_hash(vtk)

    if files:
        data['files'] = files

    write_json(os.path.join(directory, 'spectrum.json'), data, config)

    for energy, degeneracy in result.multiplets():
        logging.log_info(f'E = {energy:.10g} (x{degeneracy})')

    return 0

def cmd_check(config):
    """Run the invariant suite on the builtin charts (and on the configured chart when it is not builtin), write
    check.json and print one line per check."""
    c, g, s, u = [config.resolved[b] for b in ['check', 'grid', 'solver', 'units']]
    charts = [G.make_chart(name) for name in checks.BUILTIN_CHARTS]
    chart = config.chart()

    if chart.name not in checks.BUILTIN_CHARTS:
        charts.append(chart)

    report = checks.run_suite(charts, points=c['points'], gauges=c['gauges'], n1=g['n1'], n2=g['n2'],
        k=min(s['k'], 8), seed=s['seed'], corrupt=c['corrupt'], hbar=u['hbar'], mass=u['mass'])

    for line in report.lines():
        logging.log_info(line)

    directory = _output_directory(config)
    write_json(os.path.join(directory, 'check.json'), report.to_dict(), config)
    return 0 if report.passed() else 1

def cmd_oracle_compare(config):
    """Compare the assembled operator of the configured chart and field with its closed form, write oracle.json."""
    chart = config.chart()
    field = config.field(chart)
    u = config.resolved['units']
    g = config.resolved['grid']

    if g['representation'] != 'primed' or not g['spin']:
        raise H.GridMismatchError('The closed form operators act on primed spinors, use grid.spin: true and grid.representation: primed')

    assembled = config.operator(chart, field)
    oracle = H.closed_form_oracle(chart, field, assembled.grid, u['hbar'], u['mass'], corrupt=config.resolved['check']['corrupt'])
    report = H.compare_operators(assembled, oracle)

    for line in report.lines():
        logging.log_info(line)

    directory = _output_directory(config)
    write_json(os.path.join(directory, 'oracle.json'), dict(chart=chart.name, field=field.name, passed=report.passed(),
        tolerance=report.tolerance, entries=report.entries), config)
    return 0 if report.passed() else 1

def cmd_export_matrix(config):
    """Write the discretized operator to matrix.txt as 'row col re im' triplets."""
    op = config.operator()
    discrete = solver.discretize(op)
    buf = io.StringIO()
    discrete.write_triplets(buf)

    directory = _output_directory(config)
    write_text(os.path.join(directory, 'matrix.txt'), buf.getvalue(), config)
    logging.log_info(f'Exported {discrete}')
    return 0

COMMANDS = {
    'geometry': cmd_geometry,
    'spectrum': cmd_spectrum,
    'check': cmd_check,
    'oracle-compare': cmd_oracle_compare,
    'export-matrix': cmd_export_matrix
}

INPUT_ERRORS = (ConfigError, G.ChartError, E.FieldError, H.GaugePreconditionError, H.GridMismatchError, solver.BoundaryError,
    E.ExpressionError)
NUMERICAL_ERRORS = (ArithmeticError, np.linalg.LinAlgError)

def parse_args(argv=None):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help='YAML run configuration (defaults are used when omitted)')
    common.add_argument('--out', default=None, help='Output directory, overrides output.directory')
    common.add_argument('--seed', type=int, default=None, help='Seed of the eigensolver and random checks, overrides solver.seed')
    common.add_argument('--threads', type=int, default=None, help='Number of worker threads')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--quiet', action='store_true', help='Do not print anything')
    verbosity.add_argument('--verbose', action='store_true', help='Print debug information')

    parser = argparse.ArgumentParser(prog='surfacepauli', description='Surface Pauli operators of charged spin-1/2 particles on curved surfaces')
    subparsers = parser.add_subparsers(dest='command', required=True)

    for name, command in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=command.__doc__.split('\n')[0])

    return parser.parse_args(argv)

def main(argv=None):
    args = parse_args(argv)

    if args.quiet:
        logging.set_log_level(logging.LogLevel.SILENT)
    elif args.verbose:
        logging.set_log_level(logging.LogLevel.DEBUG)

    if args.threads is not None:
        util.set_number_of_threads(args.threads)

    try:
        config = RunConfig.from_file(args.config) if args.config is not None else RunConfig({})
        config.override(out=args.out, seed=args.seed)
        logging.log_debug(f'Running {args.command} with {config}')
        return COMMANDS[args.command](config)
    except INPUT_ERRORS as e:
        logging.log_error(str(e))
        return 2
    except NUMERICAL_ERRORS as e:
        logging.log_error(f'Numerical error: {e}')
        return 3

if __name__ == '__main__':
    sys.exit(main())

import hashlib
import json
import os
import tempfile
import unittest
from math import pi

import numpy as np
import yaml

import surfacepauli.cli as cli
import surfacepauli.logging as logging

logging.set_log_level(logging.LogLevel.SILENT)

def body_of(filename):
    with open(filename) as f:
        lines = f.read().split('\n')
    header = [l for l in lines if l.startswith('#')]
    body = '\n'.join(l for l in lines if not l.startswith('#'))
    return header, body

def read_csv(filename):
    _, body = body_of(filename)
    lines = body.strip().split('\n')
    names = lines[0].split(',')
    data = np.array([[float(x) for x in l.split(',')] for l in lines[1:]])
    return {n: data[:, i] for i, n in enumerate(names)}

class CommandTest(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def path(self, *names):
        return os.path.join(self.directory.name, *names)

    def run_command(self, command, config, out='out', extra=()):
        filename = self.path(f'{out}.yaml')
        with open(filename, 'w') as f:
            yaml.safe_dump(config, f)
        return cli.main([command, '--config', filename, '--out', self.path(out), '--quiet', *extra])

class TestGeometryCommand(CommandTest):

    def test_torus_geometric_potential(self):
        config = dict(chart=dict(name='torus', R0=2.0, r=1.0), grid=dict(n1=8, n2=8))
        assert self.run_command('geometry', config) == 0

        columns = read_csv(self.path('out', 'geometry.csv'))
        assert len(columns['q1']) == 64
        rows = np.isclose(columns['q1'], pi/2)
        assert np.any(rows)
        assert np.allclose(columns['V_g'][rows], -1/18)
        assert np.allclose(columns['V_spin'], (1 + 1/(2 + np.sin(columns['q1']))**2)/8, rtol=1e-6)

        with open(self.path('out', 'geometry.json')) as f:
            summary = json.load(f)
        assert np.isclose(summary['V_g']['min'], -1/2)
        assert np.isclose(summary['V_g']['max'], -1/18)
        assert summary['config']['chart']['R0'] == 2.0

    def test_cylinder_field(self):
        config = dict(chart=dict(name='cylinder', r=1.0), field=dict(preset='cylinder_mixed', B0=0.5, B1=0.2),
            grid=dict(n1=8, n2=8), output=dict(vtk=True))
        assert self.run_command('geometry', config) == 0

        columns = read_csv(self.path('out', 'geometry.csv'))
        assert np.allclose(columns['Bx'], 0.0, atol=1e-7)
        assert np.allclose(columns['By'], 0.5, atol=1e-7)
        assert np.allclose(columns['Bz'], 0.2, atol=1e-7)
        assert np.allclose(columns['V_g'], -1/8)
        assert os.path.isfile(self.path('out', 'geometry.vtk'))

class TestSpectrumCommand(CommandTest):

    config = dict(chart=dict(name='cylinder', r=1.0), field=dict(preset='cylinder_mixed', B0=0.5, B1=0.2),
        grid=dict(n1=8, n2=8), solver=dict(k=4))

    def test_outputs(self):
        assert self.run_command('spectrum', self.config) == 0

        with open(self.path('out', 'spectrum.json')) as f:
            data = json.load(f)

        assert len(data['eigenvalues']) == 4
        assert np.isclose(data['flux_shift'], 0.25)
        assert len(data['expectations']) == 4
        assert all(-1 <= e['sigma_rho'] <= 1 for e in data['expectations'])
        assert data['config']['grid']['n1'] == 8

        for i in range(4):
            header, body = body_of(self.path('out', f'eigenfield_{i}.csv'))
            assert header[0].startswith('# surfacepauli')
            assert header[-1] == '# sha256: ' + hashlib.sha256(body.encode()).hexdigest()

    def test_deterministic(self):
        names = ['spectrum.json', 'eigenfield_0.csv', 'eigenfield_3.csv']
        assert self.run_command('spectrum', self.config) == 0
        first = {}
        for name in names:
            with open(self.path('out', name)) as f:
                first[name] = f.read()

        assert self.run_command('spectrum', self.config) == 0
        for name in names:
            with open(self.path('out', name)) as f:
                assert f.read() == first[name], name

    def test_vtk(self):
        config = dict(self.config, output=dict(vtk=True))
        assert self.run_command('spectrum', config) == 0

        with open(self.path('out', 'spectrum.json')) as f:
            files = json.load(f)['files']
        assert set(files) == {f'eigenfield_{i}.vtk' for i in range(4)}

        with open(self.path('out', 'eigenfield_0.vtk'), 'rb') as f:
            assert files['eigenfield_0.vtk'] == hashlib.sha256(f.read()).hexdigest()

class TestOtherCommands(CommandTest):

    def test_export_matrix(self):
        config = dict(chart=dict(name='sphere'), grid=dict(n1=8, n2=8, spin=False))
        assert self.run_command('export-matrix', config) == 0

        header, body = body_of(self.path('out', 'matrix.txt'))
        assert any(l.startswith('# config_sha256: ') for l in header)
        rows = np.array([[float(x) for x in l.split()] for l in body.strip().split('\n')])
        assert rows.shape[1] == 4 and rows[:, 0].max() == 63

    def test_oracle_compare(self):
        config = dict(chart=dict(name='cylinder'), field=dict(preset='cylinder_mixed', B0=0.5, B1=0.3), grid=dict(n1=12, n2=12))
        assert self.run_command('oracle-compare', config) == 0

        with open(self.path('out', 'oracle.json')) as f:
            data = json.load(f)
        assert data['passed']
        assert {e['tag']: e['status'] for e in data['entries']}['geometric_potential'] == 'INFO'

    def test_oracle_compare_corrupt(self):
        config = dict(chart=dict(name='cylinder'), field=dict(preset='cylinder_mixed', B0=0.5, B1=0.3), grid=dict(n1=12, n2=12),
            check=dict(corrupt='kinetic'))
        assert self.run_command('oracle-compare', config) == 1

    def test_oracle_compare_lab(self):
        config = dict(chart=dict(name='cylinder'), grid=dict(n1=8, n2=8, representation='lab'))
        assert self.run_command('oracle-compare', config) == 2

    def test_check_corrupt(self):
        config = dict(grid=dict(n1=8, n2=8), solver=dict(k=4), check=dict(points=5, gauges=1, corrupt='kinetic'))
        assert self.run_command('check', config) == 1

        with open(self.path('out', 'check.json')) as f:
            data = json.load(f)
        failed = [r['name'] for r in data['results'] if r['status'] == 'FAIL']
        assert failed == [f'{name}: oracle term kinetic' for name in ['sphere', 'cylinder', 'torus']]

class TestInputErrors(CommandTest):

    def test_invalid_configurations(self):
        invalid = [
            dict(chart=dict(name='sphere', R0=2.0)),
            dict(chart=dict(name='torus', R0=1.0, r=2.0)),
            dict(chart=dict(name='sphere'), field=dict(preset='torus_mixed', B0=1.0)),
            dict(grid=dict(n1=8, n2=8), solver=dict(k=40)),
            dict(grid=dict(n1=4, n2=8)),
            dict(field=dict(preset='custom', A=['0', 'import(q1)', '0'])),
            dict(field=dict(phi_e='q4')),
            dict(solver=dict(seed='zero')),
            dict(output=dict(colour=True)),
            dict(plot=dict(show=True)),
        ]

        for i, config in enumerate(invalid):
            assert self.run_command('geometry', config, out=f'invalid{i}') == 2, config

    def test_missing_file(self):
        assert cli.main(['geometry', '--config', self.path('absent.yaml'), '--quiet']) == 2

    def test_malformed_tabulated_chart(self):
        Q1, Q2 = np.meshgrid(np.arange(6)*0.2, np.arange(5)*0.3, indexing='ij')
        table = np.column_stack([Q1.ravel(), Q2.ravel(), Q1.ravel(), Q2.ravel(), 0*Q1.ravel()])
        irregular = table.copy()
        irregular[irregular[:, 1] == irregular[-1, 1], 1] += 0.1

        files = {
            'four_columns.csv': table[:, :4],
            'incomplete.csv': table[:-3],
            'irregular.csv': irregular,
            'too_small.csv': table[:10],
        }

        for i, (name, data) in enumerate(files.items()):
            np.savetxt(self.path(name), data, delimiter=',')
            config = dict(chart=dict(name='tabulated', file=name), grid=dict(n1=8, n2=8))
            assert self.run_command('geometry', config, out=f'tabulated{i}') == 2, name

        with open(self.path('text.csv'), 'w') as f:
            f.write('q1,q2,x,y,z\n0,0,a,b,c\n')
        config = dict(chart=dict(name='tabulated', file='text.csv'), grid=dict(n1=8, n2=8))
        assert self.run_command('geometry', config, out='text') == 2

    def test_malformed_yaml(self):
        filename = self.path('bad.yaml')
        with open(filename, 'w') as f:
            f.write('chart: [unclosed\n')
        assert cli.main(['geometry', '--config', filename, '--quiet']) == 2

class TestRunConfig(unittest.TestCase):

    def test_defaults(self):
        config = cli.RunConfig({})
        assert config.resolved['chart'] == dict(name='sphere', r=1.0)
        assert config.resolved['grid'] == dict(n1=24, n2=48, spin=True, representation='primed')
        assert config.resolved['solver']['k'] == 10

    def test_coercion(self):
        config = cli.RunConfig(dict(chart=dict(name='cylinder', r=2), field=dict(preset='cylinder_mixed', B0=1)))
        assert isinstance(config.resolved['chart']['r'], float)
        assert config.resolved['field']['B1'] == 0.0

        with self.assertRaises(cli.ConfigError):
            cli.RunConfig(dict(grid=dict(spin='yes')))

    def test_hash(self):
        a = cli.RunConfig(dict(chart=dict(name='torus'), grid=dict(n1=16)))
        b = cli.RunConfig(dict(grid=dict(n1=16), chart=dict(name='torus', R0=2.0)))
        c = cli.RunConfig(dict(chart=dict(name='torus'), grid=dict(n1=16)), '.').override(seed=3)
        assert a.hash() == b.hash()
        assert a.hash() != c.hash()
        assert c.resolved['solver']['seed'] == 3

    def test_chart_and_field(self):
        config = cli.RunConfig(dict(chart=dict(name='cylinder', r=1.5, y_boundary='box'),
            field=dict(preset='custom', A=['0', '0', 'q1'])))
        chart = config.chart()
        assert chart.parameters['r'] == 1.5 and not chart.is_periodic(1)

        field = config.field(chart)
        assert field.thin_layer
        assert np.allclose(field.potential(np.array([0.3]), np.array([0.4]), 0.0)[..., 2], 0.0)

    def test_cartesian_field(self):
        config = cli.RunConfig(dict(chart=dict(name='sphere'),
            field=dict(preset='custom', cartesian=True, A=['-0.35*y', '0.35*x', '0'])))
        chart = config.chart()
        field = config.field(chart)
        assert np.allclose(field.potential(np.array([1.0]), np.array([0.5]))[..., 1], 0.35*np.sin(1.0)**2)

if __name__ == '__main__':
    unittest.main()

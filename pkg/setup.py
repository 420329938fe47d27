from setuptools import setup

setup(
    name='surfacepauli',
    version='0.1.0',
    description='Surface Pauli operators and spectra of charged spin-1/2 particles on curved surfaces',
    keywords=['thin-layer quantization', 'geometric potential', 'Pauli equation', 'spin connection', 'curved surface',
        'Laplace-Beltrami', 'finite difference', 'eigenvalue'],
    license='AGPLv3',
    packages=['surfacepauli'],
    long_description = open('README.md').read(),
    long_description_content_type='text/markdown',
    install_requires=['matplotlib', 'numpy', 'scipy', 'meshio', 'pyyaml'],
    entry_points={
        'console_scripts': ['surfacepauli = surfacepauli.cli:main']
    },
    python_requires='>=3.7',
)

"""Welcome!

SurfacePauli computes the surface dynamics of a charged spin-1/2 particle confined to a thin layer around a curved surface
in a static electromagnetic field. In the limit of vanishing layer thickness the particle obeys a two dimensional Pauli
equation on the surface, containing the geometric potential \\( V_g = -\\frac{\\hbar^2}{2m}(M^2 - K) \\), spin connection terms
generated by the rotation of the local spin frame, and couplings of the spin to the magnetic field. The package builds this
operator for any parametrized surface, discretizes it on a structured grid and computes its low lying spectrum.

# Usage

In general, one starts with the `surfacepauli.geometry` module to choose a surface chart (sphere, cylinder, torus, plane or a
tabulated surface). A field is taken from `surfacepauli.em_field`, either a preset or expressions in the coordinates, and
brought into the thin-layer gauge. `surfacepauli.hamiltonian.assemble_surface_operator` then evaluates the surface operator
on a grid, `surfacepauli.solver.discretize` turns it into a sparse Hermitian matrix and `surfacepauli.solver.eigensolve`
computes the spectrum:

```
import surfacepauli.geometry as G
import surfacepauli.em_field as E
import surfacepauli.hamiltonian as H
import surfacepauli.solver as S

chart = G.sphere(r=1.0)
field = E.thin_layer_gauge(E.sphere_uniform(B=0.5))
op = H.assemble_surface_operator(chart, field, n1=32, n2=64)
result = S.eigensolve(op.discretize(), k=8)
print(result.multiplets())
```

The spin algebra on the surface (induced Pauli matrices and the spinor rotation) lives in `surfacepauli.spin`. The closed
form operators of the sphere, cylinder and torus and the term by term comparison with the assembled operator are found in
`surfacepauli.hamiltonian`, the suite of invariant checks in `surfacepauli.checks`. Batch runs from YAML configuration files
are handled by the `surfacepauli` command (`surfacepauli.cli`).

# Validations

Analytically known spectra (the sphere ladder, the cylinder, the flat box) are reproduced by the scripts in the
[/validation](validation) directory, for example:

```bash
    python3 ./validation/sphere_spectrum.py --help
```

# Units

All quantities are dimensionless; \\( \\hbar \\), the mass \\( m \\) and the charge \\( e \\) are parameters (1 by default).
"""

__pdoc__ = {}
__pdoc__['util'] = False
__pdoc__['logging'] = True

import numpy as np

import surfacepauli.geometry as G
import surfacepauli.em_field as E
import surfacepauli.hamiltonian as H
import surfacepauli.solver as S

from validation import Validation

levels = 16

class SphereSpectrum(Validation):

    def __init__(self):
        super().__init__('''Compute the lowest 16 eigenvalues of a spinless particle on the unit sphere without field. The
            surface operator reduces to the Laplace-Beltrami operator (the geometric potential vanishes on a sphere),
            so the eigenvalues are l(l+1)/2 with degeneracies 2l+1. The grid has N polar and 2N azimuthal points.''')

    def create_operator(self, N):
        return H.assemble_surface_operator(G.sphere(1.0), E.zero_field(), n1=N, n2=2*N, spin=False)

    def correct_value_of_interest(self, op):
        return np.concatenate([np.full(2*l + 1, l*(l + 1)/2) for l in range(4)])

    def compute_value_of_interest(self, op):
        result = S.eigensolve(op.discretize(), k=levels, seed=self.args.seed)
        print('Multiplets: ' + ', '.join(f'{e:.6f} (x{d})' for e, d in result.multiplets(tolerance=1e-2)))
        return result.eigenvalues

if __name__ == '__main__':
    SphereSpectrum().run_validation()

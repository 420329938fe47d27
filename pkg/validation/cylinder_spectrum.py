import numpy as np

import surfacepauli.geometry as G
import surfacepauli.em_field as E
import surfacepauli.hamiltonian as H
import surfacepauli.solver as S

from validation import Validation

r = 1.5
levels = 12

class CylinderSpectrum(Validation):

    def __init__(self):
        super().__init__(f'''Compute the lowest {levels} eigenvalues of a spin-1/2 particle on a cylinder of radius {r} and
            period 2 pi without field. The spin connection only shifts the angular momentum by one half, which the
            antiperiodic boundary of the rotated spinor undoes, so every level of
            (m^2/r^2 + k^2)/2 - 1/(8 r^2) appears twice.''')

    def create_operator(self, N):
        return H.assemble_surface_operator(G.cylinder(r), E.zero_field(), n1=N, n2=N)

    def correct_value_of_interest(self, op):
        modes = np.arange(-10, 11)
        spinless = np.sort(((modes[:, np.newaxis]/r)**2 + modes[np.newaxis, :]**2).ravel()/2 - 1/(8*r**2))
        return np.repeat(spinless, 2)[:levels]

    def compute_value_of_interest(self, op):
        return S.eigensolve(op.discretize(), k=levels, seed=self.args.seed).eigenvalues

if __name__ == '__main__':
    CylinderSpectrum().run_validation()

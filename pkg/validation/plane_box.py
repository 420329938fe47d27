from math import pi

import surfacepauli.geometry as G
import surfacepauli.em_field as E
import surfacepauli.hamiltonian as H
import surfacepauli.solver as S

from validation import Validation

Lx = 1.0
Ly = 0.8

class PlaneBox(Validation):

    def __init__(self):
        super().__init__(f'''Compute the ground state energy of a spinless particle in a flat {Lx} x {Ly} box with hard walls,
            which equals pi^2 (1/Lx^2 + 1/Ly^2)/2. The error of the centered differences should decrease with second order.''')

    def create_operator(self, N):
        return H.assemble_surface_operator(G.plane(Lx, Ly), E.zero_field(), n1=N, n2=N, spin=False)

    def correct_value_of_interest(self, op):
        return pi**2*(1/Lx**2 + 1/Ly**2)/2

    def compute_value_of_interest(self, op):
        return S.eigensolve(op.discretize(), k=1, seed=self.args.seed).eigenvalues[0]

    def compute_accuracy(self, computed, correct):
        return abs(computed/correct - 1)

if __name__ == '__main__':
    PlaneBox().run_validation()

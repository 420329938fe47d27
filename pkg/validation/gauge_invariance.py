import surfacepauli.geometry as G
import surfacepauli.hamiltonian as H
import surfacepauli.checks as C

from validation import Validation

gauges = 20

class GaugeInvariance(Validation):

    def __init__(self):
        super().__init__(f'''Apply {gauges} random smooth surface gauge transformations to the suite field of the sphere, the
            cylinder and the torus, and compare the lowest eigenvalues with those of the untransformed operator. The
            link phases make the discrete operators unitarily equivalent, so the error is at round-off level.''')

    def default_sizes(self):
        return [12, 24]

    def create_operator(self, N):
        operators = []
        for name in C.BUILTIN_CHARTS:
            chart = G.make_chart(name)
            n2 = 2*N if name == 'sphere' else N
            operators.append(H.assemble_surface_operator(chart, C.field_for(chart), n1=N, n2=n2))
        return operators

    def dimension(self, operators):
        return sum(op.grid.dimension(op.components) for op in operators)

    def correct_value_of_interest(self, operators):
        return 0.0

    def compute_value_of_interest(self, operators):
        worst = 0.0

        for op in operators:
            result = C.gauge_invariance_check(op.chart, op.field, op.grid, gauges=gauges, seed=self.args.seed)
            print(result.line())
            worst = max(worst, result.value)

        return worst

if __name__ == '__main__':
    GaugeInvariance().run_validation()

import surfacepauli.geometry as G
import surfacepauli.hamiltonian as H
import surfacepauli.checks as C

from validation import Validation

class OracleComparison(Validation):

    def __init__(self):
        super().__init__('''Compare the assembled surface operator of the sphere, the cylinder and the torus term by term with
            the closed form operators. Known errors of the closed forms are reported as INFO when the assembled term agrees
            with the corrected form. The error is the largest residual over the remaining terms.''')

    def default_sizes(self):
        return [12, 24, 48]

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
            oracle = H.closed_form_oracle(op.chart, op.field, op.grid)
            report = H.compare_operators(op, oracle)
            print(report)
            for line in report.lines():
                print('    ' + line)
            worst = max([worst] + [e['residual'] for e in report.entries if e['status'] != 'INFO'])

        return worst

if __name__ == '__main__':
    OracleComparison().run_validation()

import time
import argparse

import numpy as np
import matplotlib.pyplot as plt

import surfacepauli.solver as S
import surfacepauli.logging as logging

def print_info(sizes, dimensions, duration, errors, orders):
    print('\n%-25s %-25s %-25s %-25s %-25s' % ('Grid size', 'Dimension', 'Computation time (ms)', 'Error', 'Observed order'))

    for n, N, d, e, o in zip(sizes, dimensions, duration, errors, orders):
        order = '-' if o is None else '%.2f' % o
        print('%-25s %-25d %-25.1f %-25.2e %-25s' % (n, N, d, e, order))

def print_levels(correct, computed):
    print('\n%-10s %-25s %-25s %-25s' % ('Level', 'Correct value', 'Computed value', 'Difference'))

    for i, (corr, comp) in enumerate(zip(correct, computed)):
        print('%-10d %-25.10f %-25.10f %-25.2e' % (i, corr, comp, comp - corr))

class Validation:
    """Base class of the validation scripts. A validation builds an operator for a grid size `N`, computes a value of
    interest (usually a few eigenvalues) and compares it with a known value. Grid sizes double between refinements,
    so the observed order follows from successive errors."""

    def __init__(self, description=''):
        self.description = description
        self.args = self.parse_args()

    def parse_args(self):
        parser = argparse.ArgumentParser(formatter_class=argparse.RawDescriptionHelpFormatter)

        if self.description != '':
            parser.description = self.description

        parser.add_argument('-N', '--grid-size', dest='N', default=None, type=int, help='Number of grid points along the first coordinate')
        parser.add_argument('--plot-accuracy', action='store_true', help='Plot the error as a function of grid size and computation time')
        parser.add_argument('--seed', type=int, default=0, help='Seed of the random starting vectors and gauges')
        parser.add_argument('--verbose', action='store_true', help='Print debug logging')

        return parser.parse_args()

    def default_sizes(self):
        return [12, 24, 48, 96]

    def measure(self, N):
        st = time.time()
        op = self.create_operator(N)
        computed = self.compute_value_of_interest(op)
        correct = self.correct_value_of_interest(op)
        err = self.compute_accuracy(computed, correct)
        duration = (time.time() - st)*1000
        return op, correct, computed, err, duration

    def plot_accuracy(self, sizes):
        dimensions = []
        times = []
        errors = []

        for n in sizes:
            print('-'*81, f' N={n}')
            op, _, _, err, duration = self.measure(n)
            dimensions.append(self.dimension(op))
            times.append(duration)
            errors.append(err)

        orders = [None] + list(S.convergence_order(errors)) if len(errors) > 1 else [None]
        print_info(sizes, dimensions, times, errors, orders)

        fig, (ax1, ax2) = plt.subplots(1, 2)
        plt.sca(ax1)
        plt.xlabel('Dimension')
        plt.ylabel('Error')
        plt.yscale('log')
        plt.xscale('log')
        plt.plot(dimensions, errors)
        plt.scatter(dimensions, errors)

        plt.sca(ax2)
        plt.plot(times, errors)
        plt.scatter(times, errors)
        plt.xlabel('Computation time (ms)')
        plt.ylabel('Error')
        plt.xscale('log')
        plt.yscale('log')
        plt.show()
        return errors

    def print_accuracy(self, N):
        op, correct, computed, err, duration = self.measure(N)

        if np.ndim(correct) > 0:
            print_levels(np.atleast_1d(correct), np.atleast_1d(computed))

        print_info([N], [self.dimension(op)], [duration], [err], [None])
        return duration, err

    def run_validation(self):
        args = self.args

        if args.verbose:
            logging.set_log_level(logging.LogLevel.DEBUG)

        N = args.N if args.N is not None else self.default_sizes()[-1]

        if args.plot_accuracy:
            self.plot_accuracy(self.default_sizes())
        else:
            self.print_accuracy(N)

    def dimension(self, op):
        return op.grid.dimension(op.components)

    # Should be implemented by each of the validations
    def create_operator(self, N):
        pass

    def compute_value_of_interest(self, op):
        pass

    def correct_value_of_interest(self, op):
        pass

    def compute_accuracy(self, computed, correct):
        return float(np.max(np.abs(np.asarray(computed) - np.asarray(correct))))

"""
Run the finite-difference gradient suite.
"""

import numpy as np

from unitnorm.core.cmdlineparser import non_negative_float, positive_int
from unitnorm.core.commands import BaseCommand, argument
from unitnorm.core.exceptions import CommandError
from unitnorm.models.gradients import run_model_cases
from unitnorm.pipeline.report import write_rows
from unitnorm.tensor.gradcheck import primitive_cases, run_cases
from unitnorm.utils.seeding import derive_seed

GRADCHECK_FIELDS = ('seed', 'name', 'shape', 'max_error', 'checked', 'ok')


class Gradcheck(BaseCommand):
    """
    Management command which compares analytic and numeric gradients of
    every tensor primitive and of the model losses for ``--seeds``
    derived seeds. Results go into CSV ``--out``; any failed check makes
    the command fail.
    """

    name = 'gradcheck'
    help = 'check gradients against finite differences'
    arguments = (
        argument('--seeds', dest='seeds',
                 type=positive_int, default=3,
                 help='number of random seeds'),
        argument('--tolerance', dest='tolerance',
                 type=non_negative_float, default=1e-3,
                 help='maximal relative error'),
        argument('--out', dest='out', required=True,
                 help='output CSV'),
    )

    def command(self):
        base = self.context.config.experiment.seed
        rows = []
        for index in range(self.args.seeds):
            seed = derive_seed(base, 'gradcheck', index)
            rng = np.random.default_rng(seed)
            results = list(run_cases(primitive_cases(rng),
                                     tolerance=self.args.tolerance, rng=rng))
            results.extend(run_model_cases(seed,
                                           tolerance=self.args.tolerance))
            rows.extend((seed, r.name, 'x'.join(str(n) for n in r.shape),
                         '%.3e' % r.max_error, r.checked, r.ok)
                        for r in results)
        write_rows(self.args.out, GRADCHECK_FIELDS, rows)
        failed = sorted(set(row[1] for row in rows if not row[5]))
        if failed:
            raise CommandError("Gradient check failed for %s"
                               % ', '.join(failed))
        self.logger.info("%d gradient checks passed", len(rows))

"""
Run the whole experiment.
"""

import os
import shutil

from unitnorm.core.commands import BaseCommand, argument
from unitnorm.pipeline.recipe import REPORT, Recipe


class RunRecipe(BaseCommand):
    """
    Management command which runs every stage of the experiment in
    ``[experiment] workdir`` (or ``--workdir``), reusing stages finished
    by earlier runs, and writes the metrics report. ``--out`` receives a
    copy of the report.
    """

    name = 'run-recipe'
    help = 'run end-to-end experiment'
    arguments = (
        argument('--workdir', dest='workdir', default=None,
                 help='override [experiment] workdir'),
        argument('--out', dest='out', default=None,
                 help='copy of the metrics report'),
    )

    def command(self):
        recipe = Recipe(self.context, workdir=self.args.workdir)
        report = recipe.run()
        if self.args.out:
            shutil.copyfile(os.path.join(recipe.workdir, REPORT),
                            self.args.out)
        self.logger.info("Report has %d rows of systems %s", len(report),
                         ', '.join(report.systems()))

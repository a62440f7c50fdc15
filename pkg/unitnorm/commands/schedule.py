"""
Dump the noise schedule.
"""

from unitnorm.core.commands import BaseCommand, argument
from unitnorm.models.schedule import build_schedule
from unitnorm.pipeline.report import write_rows

SCHEDULE_FIELDS = ('t', 'beta', 'alpha', 'alpha_bar', 'sqrt_alpha_bar',
                   'sqrt_one_minus_alpha_bar')


class Schedule(BaseCommand):
    """
    Management command which writes the noise schedule configured in
    section ``[schedule]`` as CSV, either into file ``--dump`` or on the
    standard output.
    """

    name = 'schedule'
    help = 'dump noise schedule'
    arguments = (
        argument('--dump', dest='dump', default='-',
                 help="output CSV ('-' is standard output)"),
    )

    def command(self):
        schedule = build_schedule(self.context.config.schedule)
        if self.args.dump == '-':
            self.stdout.write(','.join(SCHEDULE_FIELDS) + '\n')
            for row in schedule.rows():
                self.stdout.write('%d,%s\n' % (
                    row[0], ','.join('%.6f' % value for value in row[1:])))
            self.stdout.flush()
        else:
            write_rows(self.args.dump, SCHEDULE_FIELDS, schedule.rows())
            self.logger.info("Schedule %r written into '%s'", schedule,
                             self.args.dump)

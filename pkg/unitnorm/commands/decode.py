"""
Decode a corpus split with the non-autoregressive model.
"""

from unitnorm.core.cmdlineparser import non_negative_float, positive_int
from unitnorm.core.commands import BaseCommand, argument
from unitnorm.core.constants import SPLITS
from unitnorm.pipeline.report import write_units
from unitnorm.pipeline.stages import decode_config, decode_split


class Decode(BaseCommand):
    """
    Management command which decodes split ``--split`` of ``--data`` by
    guided mask-predict and writes units file ``--out``. Options not
    given on the command line come from section ``[decode]``.
    """

    name = 'decode'
    help = 'decode units by guided mask-predict'
    arguments = (
        argument('--model', dest='model', required=True,
                 help='CMLM checkpoint'),
        argument('--iterations', dest='iterations',
                 type=positive_int, default=None,
                 help='override [decode] iterations'),
        argument('--omega', dest='omega',
                 type=non_negative_float, default=None,
                 help='override [decode] omega'),
        argument('--length-mode', dest='length_mode', default=None,
                 choices=('predicted', 'oracle'),
                 help='override [decode] length_mode'),
        argument('--data', dest='data', required=True,
                 help='corpus directory'),
        argument('--split', dest='split', default='test', choices=SPLITS,
                 help='corpus split'),
        argument('--out', dest='out', required=True,
                 help='output units file'),
    )

    def command(self):
        section = self.context.config.decode
        config = decode_config(section, iterations=self.args.iterations,
                               omega=self.args.omega,
                               length_mode=self.args.length_mode)
        units = decode_split(self.args.model, self.args.data, self.args.split,
                             config, batch_size=section.batch_size)
        write_units(self.args.out, units)
        self.logger.info("Units written into '%s'", self.args.out)

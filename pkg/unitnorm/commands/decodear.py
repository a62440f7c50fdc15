"""
Decode a corpus split with the autoregressive baseline.
"""

from unitnorm.core.cmdlineparser import positive_int
from unitnorm.core.commands import BaseCommand, argument
from unitnorm.core.constants import SPLITS
from unitnorm.pipeline.report import write_units
from unitnorm.pipeline.stages import decode_ar_split


class DecodeAr(BaseCommand):
    """
    Management command which decodes split ``--split`` of ``--data``
    greedily and writes units file ``--out``.
    """

    name = 'decode-ar'
    help = 'decode units by autoregressive baseline'
    arguments = (
        argument('--model', dest='model', required=True,
                 help='autoregressive checkpoint'),
        argument('--max-length', dest='max_length',
                 type=positive_int, default=None,
                 help='maximal number of decoded units'),
        argument('--data', dest='data', required=True,
                 help='corpus directory'),
        argument('--split', dest='split', default='test', choices=SPLITS,
                 help='corpus split'),
        argument('--out', dest='out', required=True,
                 help='output units file'),
    )

    def command(self):
        units = decode_ar_split(
            self.args.model, self.args.data, self.args.split,
            batch_size=self.context.config.decode.batch_size,
            max_length=self.args.max_length)
        write_units(self.args.out, units)
        self.logger.info("Units written into '%s'", self.args.out)

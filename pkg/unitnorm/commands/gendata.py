"""
Generate the synthetic corpus.
"""

from unitnorm.core.commands import BaseCommand, argument
from unitnorm.core.config import fingerprint
from unitnorm.pipeline.stages import build_dataset
from unitnorm.utils.seeding import derive_seed


class GenData(BaseCommand):
    """
    Management command which generates all splits of the synthetic
    parallel corpus, trains k-means on the train split and writes the
    quantized corpus into directory ``--out``.
    """

    name = 'gen-data'
    help = 'generate synthetic corpus'
    arguments = (
        argument('--out', dest='out', required=True,
                 help='output corpus directory'),
    )

    def command(self):
        config = self.context.config
        seed = derive_seed(config.experiment.seed, 'data')
        sizes = build_dataset(
            config.corpus, seed, self.args.out,
            fingerprint=fingerprint({'corpus': config.as_dict('corpus'),
                                     'seed': seed}))
        self.logger.info(
            "Corpus written into '%s': %s", self.args.out,
            ', '.join('%s=%d' % item for item in sizes.items()))

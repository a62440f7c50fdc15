"""
Train the autoregressive baseline.
"""

from unitnorm.core.cmdlineparser import positive_int
from unitnorm.core.commands import BaseCommand, argument
from unitnorm.pipeline.stages import default_log_path, train_ar_stage
from unitnorm.utils.seeding import derive_seed


class TrainAr(BaseCommand):

    name = 'train-ar'
    help = 'train autoregressive baseline'
    arguments = (
        argument('--data', dest='data', required=True,
                 help='corpus directory'),
        argument('--out', dest='out', required=True,
                 help='output checkpoint'),
        argument('--log', dest='log', default=None,
                 help='per-step CSV log'),
        argument('--steps', dest='steps', type=positive_int, default=None,
                 help='override [ar] steps'),
    )

    def command(self):
        config = self.context.config
        train_ar_stage(
            config, self.args.data, self.args.out,
            derive_seed(config.experiment.seed, 'ar'),
            log_path=self.args.log or default_log_path(self.args.out),
            fingerprint=config.fingerprint('corpus', 'ar'),
            steps=self.args.steps)

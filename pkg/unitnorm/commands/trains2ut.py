"""
Train the non-autoregressive speech-to-unit model.
"""

from unitnorm.core.cmdlineparser import non_negative_float, positive_int
from unitnorm.core.commands import BaseCommand, argument
from unitnorm.pipeline.stages import default_log_path, train_s2ut_stage
from unitnorm.utils.seeding import derive_seed


class TrainS2ut(BaseCommand):
    """
    Management command which trains the CMLM on source features and
    target units of the train split of ``--data``. ``--cg-dropout``
    overrides the probability of replacing the encoder output by the
    null representation.
    """

    name = 'train-s2ut'
    help = 'train non-autoregressive speech-to-unit model'
    arguments = (
        argument('--data', dest='data', required=True,
                 help='corpus directory'),
        argument('--cg-dropout', dest='cg_dropout', type=non_negative_float,
                 default=None, help='override [cmlm] cg_dropout'),
        argument('--out', dest='out', required=True,
                 help='output checkpoint'),
        argument('--log', dest='log', default=None,
                 help='per-step CSV log'),
        argument('--steps', dest='steps', type=positive_int, default=None,
                 help='override [cmlm] steps'),
    )

    def command(self):
        config = self.context.config
        train_s2ut_stage(
            config, self.args.data, self.args.out,
            derive_seed(config.experiment.seed, 'cmlm'),
            cg_dropout=self.args.cg_dropout,
            log_path=self.args.log or default_log_path(self.args.out),
            fingerprint=config.fingerprint('corpus', 'cmlm'),
            steps=self.args.steps)

"""
Train the variational autoencoder.
"""

from unitnorm.core.cmdlineparser import positive_int
from unitnorm.core.commands import BaseCommand, argument
from unitnorm.pipeline.stages import default_log_path, train_vae_stage
from unitnorm.utils.seeding import derive_seed


class TrainVae(BaseCommand):
    """
    Management command which trains the VAE on target features of the
    train split of ``--data`` and writes checkpoint ``--out``. Per-step
    losses are written into CSV ``--log`` (``<out>.csv`` by default).
    """

    name = 'train-vae'
    help = 'train variational autoencoder'
    arguments = (
        argument('--data', dest='data', required=True,
                 help='corpus directory'),
        argument('--out', dest='out', required=True,
                 help='output checkpoint'),
        argument('--log', dest='log', default=None,
                 help='per-step CSV log'),
        argument('--steps', dest='steps', type=positive_int, default=None,
                 help='override [vae] steps'),
    )

    def command(self):
        config = self.context.config
        train_vae_stage(
            config, self.args.data, self.args.out,
            derive_seed(config.experiment.seed, 'vae'),
            log_path=self.args.log or default_log_path(self.args.out),
            fingerprint=config.fingerprint('corpus', 'vae'),
            steps=self.args.steps)

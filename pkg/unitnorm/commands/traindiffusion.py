"""
Train the latent diffusion model.
"""

from unitnorm.core.cmdlineparser import positive_int
from unitnorm.core.commands import BaseCommand, argument
from unitnorm.pipeline.stages import default_log_path, train_diffusion_stage
from unitnorm.utils.seeding import derive_seed


class TrainDiffusion(BaseCommand):
    """
    Management command which trains the diffusion model in the latent
    space of the VAE checkpoint ``--vae``.
    """

    name = 'train-diffusion'
    help = 'train latent diffusion model'
    arguments = (
        argument('--vae', dest='vae', required=True,
                 help='VAE checkpoint'),
        argument('--data', dest='data', required=True,
                 help='corpus directory'),
        argument('--out', dest='out', required=True,
                 help='output checkpoint'),
        argument('--log', dest='log', default=None,
                 help='per-step CSV log'),
        argument('--steps', dest='steps', type=positive_int, default=None,
                 help='override [diffusion] steps'),
    )

    def command(self):
        config = self.context.config
        train_diffusion_stage(
            config, self.args.data, self.args.vae, self.args.out,
            derive_seed(config.experiment.seed, 'diffusion'),
            log_path=self.args.log or default_log_path(self.args.out),
            fingerprint=config.fingerprint('vae', 'schedule', 'diffusion'),
            steps=self.args.steps)

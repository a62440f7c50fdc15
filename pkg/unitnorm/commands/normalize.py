"""
Normalize target units of a corpus.
"""

from unitnorm.core.cmdlineparser import non_negative_int, positive_int
from unitnorm.core.commands import BaseCommand, argument
from unitnorm.models.normalization import normalize_dataset
from unitnorm.utils.seeding import derive_seed


class Normalize(BaseCommand):
    """
    Management command which writes copy of corpus ``--data`` into
    ``--out`` with target units replaced by units reconstructed from
    latents noised at ``--t-start`` and denoised by DDIM.
    """

    name = 'normalize'
    help = 'build normalized units'
    arguments = (
        argument('--vae', dest='vae', required=True,
                 help='VAE checkpoint'),
        argument('--diff', dest='diff', required=True,
                 help='diffusion checkpoint'),
        argument('--t-start', dest='t_start',
                 type=non_negative_int, default=None,
                 help='override [normalize] t_start'),
        argument('--step-size', dest='step_size',
                 type=positive_int, default=None,
                 help='override [normalize] step_size'),
        argument('--data', dest='data', required=True,
                 help='corpus directory'),
        argument('--out', dest='out', required=True,
                 help='output corpus directory'),
    )

    def command(self):
        config = self.context.config
        section = config.normalize
        t_start = section.t_start if self.args.t_start is None \
            else self.args.t_start
        step_size = section.step_size if self.args.step_size is None \
            else self.args.step_size
        sizes = normalize_dataset(
            self.args.data, self.args.out, self.args.vae, self.args.diff,
            config.schedule, t_start,
            derive_seed(config.experiment.seed, 'normalize'),
            step_size=step_size, clip_latent=config.diffusion.clip_latent,
            batch_size=config.diffusion.batch_size,
            workers=config.experiment.workers, context=self.context,
            fingerprint=config.fingerprint('schedule', 'normalize'))
        self.logger.info("Normalized corpus written into '%s' (%d "
                         "utterances)", self.args.out, sum(sizes.values()))

"""
Score decoded units.
"""

from unitnorm.core.commands import BaseCommand, argument
from unitnorm.core.config import fingerprint
from unitnorm.core.constants import SPLITS
from unitnorm.corpus import storage
from unitnorm.pipeline.report import MetricsReport, read_units
from unitnorm.pipeline.stages import normalization_metrics, translation_metrics


class Evaluate(BaseCommand):
    """
    Management command which scores units file ``--hyp`` against split
    ``--split`` of corpus ``--data`` and writes the metrics report
    ``--out``. With ``--normalized`` it also reports reconstruction
    metrics of that normalized corpus against ``--data``.
    """

    name = 'evaluate'
    help = 'compute unit BLEU and phoneme BLEU of decoded units'
    arguments = (
        argument('--hyp', dest='hyp', required=True,
                 help='decoded units file'),
        argument('--system', dest='system', default='hypothesis',
                 help='system name written into the report'),
        argument('--data', dest='data', required=True,
                 help='corpus directory'),
        argument('--split', dest='split', default=None, choices=SPLITS,
                 help='override [evaluation] split'),
        argument('--normalized', dest='normalized', default=None,
                 help='normalized corpus directory'),
        argument('--out', dest='out', required=True,
                 help='output CSV report'),
    )

    def command(self):
        section = self.context.config.evaluation
        split = self.args.split or section.split
        hypotheses = read_units(self.args.hyp)
        data_fingerprint = storage.read_manifest(self.args.data)['fingerprint']
        report = MetricsReport()
        if self.args.normalized:
            manifest = storage.read_manifest(self.args.normalized)
            report.add(system='normalizer', split='train',
                       t_start=manifest['provenance'].get('t_start'),
                       fingerprint=manifest['fingerprint'] or 'unknown',
                       **normalization_metrics(self.args.data,
                                               self.args.normalized))
        report.add(
            system=self.args.system, split=split,
            fingerprint=fingerprint({
                'data': data_fingerprint,
                'hypotheses': dict((uid, [int(u) for u in units])
                                   for uid, units in hypotheses.items())}),
            **translation_metrics(hypotheses, self.args.data, split,
                                  dedup=section.dedup))
        report.write_csv(self.args.out)
        for row in report:
            self.logger.info("%s (%s): unit BLEU %s, phoneme BLEU %s",
                             row['system'], row['split'], row['unit_bleu'],
                             row['phone_bleu'])

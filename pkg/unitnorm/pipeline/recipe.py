"""
Module :module:`unitnorm.pipeline.recipe` runs the whole experiment:
corpus, VAE, diffusion model, normalized corpora, speech-to-unit systems,
the autoregressive baseline, evaluation and speed benchmark.

Every stage works in its own directory ``<workdir>/<stage>-<fingerprint>``
where the fingerprint hashes the configuration sections the stage reads
and the fingerprints of the stages it consumes. Finished stages leave a
``DONE`` marker and are reused by later runs.
"""

import collections
import logging
import os
import shutil
import traceback

from unitnorm.core.config import BASE_LOGGING, fingerprint
from unitnorm.core.constants import CHECKPOINT_SUFFIX, SYSTEMS
from unitnorm.core.exceptions import ImproperlyConfiguredError, StageError
from unitnorm.corpus import storage
from unitnorm.corpus.consistency import unit_consistency
from unitnorm.evaluation.benchmark import BENCHMARK_FIELDS, speed_benchmark
from unitnorm.models.autoregressive import ArModel
from unitnorm.models.cmlm import S2utModel
from unitnorm.models.normalization import normalize_dataset
from unitnorm.models.training import load_model
from unitnorm.pipeline import stages
from unitnorm.pipeline.report import (
    MetricsReport, read_rows, write_rows, write_units)
from unitnorm.utils.seeding import derive_seed

__all__ = ['StageResult', 'Recipe', 'run_recipe', 'system_plan',
           'ablation_plan']

DONE = 'DONE'
STAGE_LOG = 'stage.log'
ERROR_LOG = 'error.log'
REPORT = 'report.csv'
ITERATIONS_TABLE = 'iterations.csv'
GUIDANCE_TABLE = 'guidance.csv'
BENCHMARK = 'benchmark.csv'
ABLATION_TABLE = 'ablation.csv'

ABLATION_FIELDS = ('ablation', 'variant', 't_start', 'acc_rec', 'unit_bleu',
                   'unit_consistency', 'fingerprint')

StageResult = collections.namedtuple(
    'StageResult', ['name', 'fingerprint', 'path'])

SystemPlan = collections.namedtuple(
    'SystemPlan', ['name', 'normalized', 'guided'])

AblationVariant = collections.namedtuple(
    'AblationVariant', ['ablation', 'variant', 'vae', 'diffusion'])


def system_plan(name):
    """
    Describe system *name*: whether it trains on normalized units and
    whether it is trained with source dropout (and decoded with
    guidance).
    """
    if name not in SYSTEMS:
        raise ImproperlyConfiguredError(
            "Unknown system '%s', expected one of %s"
            % (name, ', '.join(SYSTEMS)))
    return SystemPlan(name, '_norm' in name, name.endswith('_cg'))


def ablation_plan(config):
    """
    Variants of the VAE and diffusion model compared by the ablation
    table: latent dimensions of ``[evaluation] ablation_latent_dims``,
    noise estimation alone against the multitask objective and a VAE
    without the Gaussian constraint against ``[vae] kl_weight``. Every
    variant overrides keys of ``[vae]`` or ``[diffusion]`` only, so step
    budgets stay equal and the unmodified variants reuse the stages of
    the main experiment.
    """
    plan = [AblationVariant('latent_dim', str(z), {'latent_dim': z}, {})
            for z in config.evaluation.ablation_latent_dims]
    plan.append(AblationVariant('objective', 'noise_only', {},
                                {'recon_weight': 0.0, 'nll_weight': 0.0}))
    plan.append(AblationVariant('objective', 'multitask', {}, {}))
    plan.append(AblationVariant('kl_weight', '0', {'kl_weight': 0.0}, {}))
    plan.append(AblationVariant('kl_weight', '%g' % config.vae.kl_weight,
                                {}, {}))
    return plan


def _checkpoint(stage, name):
    return os.path.join(stage.path, name + CHECKPOINT_SUFFIX)


class Recipe(object):
    """
    Staged experiment driven by *context*. *workdir* overrides
    ``[experiment] workdir``.
    """

    def __init__(self, context, workdir=None):
        self.context = context
        self.config = context.config
        self.seed = self.config.experiment.seed
        self.workdir = os.path.abspath(workdir or context.workdir)
        self.executed = []
        self.cached = []
        self.logger = logging.getLogger(
            "{:s}.{:s}".format(__name__, self.__class__.__name__))

    def stage(self, name, depends, work):
        """
        Run *work(path, fingerprint)* in the directory of stage *name*
        unless it has finished before. *depends* is a JSON document of
        everything the stage output depends on. A failure leaves the
        traceback in ``error.log`` and raises :exc:`StageError`.
        """
        stage_fingerprint = fingerprint({'stage': name, 'depends': depends})
        path = os.path.join(self.workdir,
                            '%s-%s' % (name, stage_fingerprint))
        result = StageResult(name, stage_fingerprint, path)
        if os.path.isfile(os.path.join(path, DONE)):
            self.logger.info("Stage '%s' is cached in '%s'", name, path)
            self.cached.append(name)
            return result
        if os.path.exists(path):
            self.logger.info("Removing unfinished stage '%s'", path)
            shutil.rmtree(path)
        os.makedirs(path)

        handler = logging.FileHandler(os.path.join(path, STAGE_LOG))
        handler.setFormatter(logging.Formatter(
            BASE_LOGGING['formatters']['default']['format']))
        root = logging.getLogger()
        root.addHandler(handler)
        self.logger.info("Running stage '%s' in '%s'", name, path)
        try:
            work(path, stage_fingerprint)
        except Exception as e:
            with open(os.path.join(path, ERROR_LOG), 'w') as f:
                f.write(traceback.format_exc())
            self.logger.error("Stage '%s' failed, see '%s'", name,
                              os.path.join(path, ERROR_LOG))
            raise StageError(
                name, "{}: {}".format(e.__class__.__name__, e)) from e
        finally:
            root.removeHandler(handler)
            handler.close()
        with open(os.path.join(path, DONE), 'w') as f:
            f.write(stage_fingerprint + '\n')
        self.executed.append(name)
        return result

    def stage_seed(self, name):
        return derive_seed(self.seed, name)

    def data(self):
        seed = self.stage_seed('data')

        def work(path, stage_fingerprint):
            stages.build_dataset(self.config.corpus, seed, path,
                                 fingerprint=stage_fingerprint)
        return self.stage('data', {
            'corpus': self.config.as_dict('corpus'), 'seed': seed}, work)

    def vae(self, data, overrides=None):
        """
        Train the VAE; *overrides* replace keys of ``[vae]``.
        """
        seed = self.stage_seed('vae')
        overrides = overrides or {}
        section = self.config.vae._replace(**overrides)
        document = self.config.as_dict('vae')
        document['vae'].update(overrides)

        def work(path, stage_fingerprint):
            stages.train_vae_stage(
                self.config, data.path, os.path.join(path, 'vae.dnck'), seed,
                log_path=os.path.join(path, 'vae.csv'),
                fingerprint=stage_fingerprint, section=section)
        return self.stage('vae', {
            'vae': document, 'data': data.fingerprint, 'seed': seed}, work)

    def diffusion(self, data, vae, overrides=None):
        seed = self.stage_seed('diffusion')
        overrides = overrides or {}
        section = self.config.diffusion._replace(**overrides)
        document = self.config.as_dict('diffusion', 'schedule')
        document['diffusion'].update(overrides)

        def work(path, stage_fingerprint):
            stages.train_diffusion_stage(
                self.config, data.path, _checkpoint(vae, 'vae'),
                os.path.join(path, 'diffusion.dnck'), seed,
                log_path=os.path.join(path, 'diffusion.csv'),
                fingerprint=stage_fingerprint, section=section)
        return self.stage('diffusion', {
            'sections': document,
            'data': data.fingerprint, 'vae': vae.fingerprint, 'seed': seed},
            work)

    def normalize(self, data, vae, diffusion, t_start):
        seed = self.stage_seed('normalize')
        section = self.config.normalize

        def work(path, stage_fingerprint):
            normalize_dataset(
                data.path, path, _checkpoint(vae, 'vae'),
                _checkpoint(diffusion, 'diffusion'), self.config.schedule,
                t_start, seed, step_size=section.step_size,
                clip_latent=self.config.diffusion.clip_latent,
                batch_size=self.config.diffusion.batch_size,
                workers=self.config.experiment.workers,
                context=self.context, fingerprint=stage_fingerprint)
        return self.stage('normalize-t%d' % t_start, {
            't_start': t_start, 'step_size': section.step_size,
            'clip_latent': self.config.diffusion.clip_latent,
            'schedule': self.config.as_dict('schedule'),
            'data': data.fingerprint, 'vae': vae.fingerprint,
            'diffusion': diffusion.fingerprint, 'seed': seed}, work)

    def s2ut(self, name, corpus, cg_dropout, steps=None):
        seed = self.stage_seed('cmlm')

        def work(path, stage_fingerprint):
            stages.train_s2ut_stage(
                self.config, corpus.path, os.path.join(path, 'cmlm.dnck'),
                seed, cg_dropout=cg_dropout,
                log_path=os.path.join(path, 'cmlm.csv'),
                fingerprint=stage_fingerprint, steps=steps)
        return self.stage(name, {
            'cmlm': self.config.as_dict('cmlm'), 'cg_dropout': cg_dropout,
            'steps': steps, 'corpus': corpus.fingerprint, 'seed': seed},
            work)

    def ar(self, data):
        seed = self.stage_seed('ar')

        def work(path, stage_fingerprint):
            stages.train_ar_stage(
                self.config, data.path, os.path.join(path, 'ar.dnck'), seed,
                log_path=os.path.join(path, 'ar.csv'),
                fingerprint=stage_fingerprint)
        return self.stage('ar', {
            'ar': self.config.as_dict('ar'), 'data': data.fingerprint,
            'seed': seed}, work)

    def t_start_grid(self):
        section = self.config.normalize
        return sorted(set(section.t_start_grid) | {section.t_start})

    def select_t_start(self, data, normalized):
        """
        Train a short downstream model on every normalized corpus, score
        it on the validation and test splits and return
        ``(selected t_start, report rows)``. The selected start time has
        the best phoneme BLEU on the validation split.
        """
        section = self.config.evaluation
        config = stages.decode_config(self.config.decode, omega=0.0)
        rows = []
        best = None
        for t_start, corpus in normalized.items():
            stage = self.s2ut('downstream-t%d' % t_start, corpus, 0.0,
                              steps=section.downstream_steps)
            scores = {}
            for split in ('valid', 'test'):
                hypotheses = stages.decode_split(
                    _checkpoint(stage, 'cmlm'), corpus.path, split, config,
                    batch_size=self.config.decode.batch_size)
                metrics = stages.translation_metrics(
                    hypotheses, corpus.path, split, dedup=section.dedup)
                scores[split] = metrics
                rows.append(dict(
                    system='downstream', split=split,
                    iterations=config.iterations, omega=config.omega,
                    t_start=t_start, fingerprint=stage.fingerprint,
                    **metrics))
            key = (scores['valid']['phone_bleu'], -t_start)
            if best is None or key > best[0]:
                best = (key, t_start)
        self.logger.info("Selected t_start %d by validation phoneme BLEU",
                         best[1])
        return best[1], rows

    def default_omega(self, plan):
        return self.config.decode.omega if plan.guided else 0.0

    def decoding_grid(self, plan):
        section = self.config.decode
        omega = self.default_omega(plan)
        grid = set((iterations, omega)
                   for iterations in section.iteration_grid)
        grid.add((section.iterations, omega))
        if plan.guided:
            grid.update((iterations, weight)
                        for iterations in section.guidance_iterations
                        for weight in section.omega_grid)
        return sorted(grid)

    def evaluate(self, data, normalized, systems, ar, selection_rows,
                 t_start):
        section = self.config.evaluation
        split = section.split

        def work(path, stage_fingerprint):
            report = MetricsReport()
            train = storage.read_split(data.path, 'train')
            report.add(system='kmeans', split='train', t_start=0,
                       acc_rec=100.0, unit_bleu=100.0,
                       unit_consistency=unit_consistency(train),
                       fingerprint=data.fingerprint)
            for t, corpus in normalized.items():
                report.add(system='normalizer', split='train', t_start=t,
                           fingerprint=corpus.fingerprint,
                           **stages.normalization_metrics(
                               data.path, corpus.path, 'train'))
            report.extend(selection_rows)

            iterations_table = []
            guidance_table = []
            for name, (stage, corpus) in systems.items():
                plan = system_plan(name)
                omega_default = self.default_omega(plan)
                for iterations, omega in self.decoding_grid(plan):
                    config = stages.decode_config(
                        self.config.decode, iterations=iterations,
                        omega=omega)
                    hypotheses = stages.decode_split(
                        _checkpoint(stage, 'cmlm'), corpus.path, split,
                        config, batch_size=self.config.decode.batch_size)
                    if iterations == self.config.decode.iterations and \
                            omega == omega_default:
                        write_units(os.path.join(path, name + '.units'),
                                    hypotheses)
                    metrics = stages.translation_metrics(
                        hypotheses, corpus.path, split, dedup=section.dedup)
                    report.add(system=name, split=split,
                               iterations=iterations, omega=omega,
                               t_start=t_start if plan.normalized else 0,
                               fingerprint=stage.fingerprint, **metrics)
                    row = (name, iterations, omega, metrics['unit_bleu'],
                           metrics['phone_bleu'])
                    if iterations in self.config.decode.iteration_grid and \
                            omega == omega_default:
                        iterations_table.append(row)
                    if plan.guided and iterations in \
                            self.config.decode.guidance_iterations:
                        guidance_table.append(row)

            hypotheses = stages.decode_ar_split(
                _checkpoint(ar, 'ar'), data.path, split,
                batch_size=self.config.decode.batch_size)
            write_units(os.path.join(path, 'ar.units'), hypotheses)
            report.add(system='ar', split=split, t_start=0,
                       fingerprint=ar.fingerprint,
                       **stages.translation_metrics(
                           hypotheses, data.path, split,
                           dedup=section.dedup))

            fields = ('system', 'iterations', 'omega', 'unit_bleu',
                      'phone_bleu')
            write_rows(os.path.join(path, ITERATIONS_TABLE), fields,
                       iterations_table)
            write_rows(os.path.join(path, GUIDANCE_TABLE), fields,
                       guidance_table)
            report.write_csv(os.path.join(path, REPORT))

        return self.stage('evaluate', {
            'sections': self.config.as_dict('decode', 'evaluation'),
            'data': data.fingerprint, 'ar': ar.fingerprint,
            'normalized': dict((str(t), c.fingerprint)
                               for t, c in normalized.items()),
            'systems': dict((name, stage.fingerprint)
                            for name, (stage, _) in systems.items()),
            'selection': sorted(set(row['fingerprint']
                                    for row in selection_rows)),
            't_start': t_start}, work)

    def benchmark(self, data, system, stage, ar):
        section = self.config.evaluation

        def work(path, stage_fingerprint):
            cmlm_model, _ = load_model(_checkpoint(stage, 'cmlm'), S2utModel)
            ar_model, _ = load_model(_checkpoint(ar, 'ar'), ArModel)
            test = storage.read_split(data.path, section.split)
            test = test[:section.benchmark_utterances]
            rows = speed_benchmark(
                cmlm_model, ar_model, [u.source_features for u in test],
                [len(u.target_units) for u in test],
                iteration_grid=self.config.decode.iteration_grid,
                system=system)
            write_rows(os.path.join(path, BENCHMARK), BENCHMARK_FIELDS, rows)

        return self.stage('benchmark', {
            'iteration_grid': list(self.config.decode.iteration_grid),
            'utterances': section.benchmark_utterances,
            'split': section.split, 'system': stage.fingerprint,
            'ar': ar.fingerprint}, work)

    def ablations(self, data):
        """
        Train every variant of :func:`ablation_plan`, normalize the train
        split at each of ``[evaluation] ablation_t_starts`` and write
        Acc-Rec of the normalized units into ``<workdir>/ablation.csv``.
        Return the rows.
        """
        t_starts = self.config.evaluation.ablation_t_starts
        timesteps = self.config.schedule.timesteps
        if not t_starts:
            raise ImproperlyConfiguredError("No ablation start time")
        for t_start in t_starts:
            if not 0 <= t_start <= timesteps:
                raise ImproperlyConfiguredError(
                    "Ablation start time %d is out of range [0, %d]"
                    % (t_start, timesteps))
        rows = []
        for variant in ablation_plan(self.config):
            vae = self.vae(data, variant.vae)
            diffusion = self.diffusion(data, vae, variant.diffusion)
            for t_start in t_starts:
                corpus = self.normalize(data, vae, diffusion, t_start)
                metrics = stages.normalization_metrics(
                    data.path, corpus.path, 'train')
                rows.append(collections.OrderedDict(
                    ablation=variant.ablation, variant=variant.variant,
                    t_start=t_start, fingerprint=corpus.fingerprint,
                    **metrics))
                self.logger.info("Ablation %s=%s at t_start %d: Acc-Rec "
                                 "%.2f", variant.ablation, variant.variant,
                                 t_start, metrics['acc_rec'])
        write_rows(os.path.join(self.workdir, ABLATION_TABLE),
                   ABLATION_FIELDS, rows)
        return rows

    def run(self):
        """
        Run all stages, return :class:`MetricsReport` which is also
        written into ``<workdir>/report.csv``.
        """
        section = self.config.evaluation
        plans = [system_plan(name) for name in section.systems]
        if not plans:
            raise ImproperlyConfiguredError("No system to evaluate")

        data = self.data()
        vae = self.vae(data)
        diffusion = self.diffusion(data, vae)
        normalized = collections.OrderedDict(
            (t, self.normalize(data, vae, diffusion, t))
            for t in self.t_start_grid())

        selection_rows = []
        t_start = self.config.normalize.t_start
        if section.select_t_start:
            t_start, selection_rows = self.select_t_start(data, normalized)

        systems = collections.OrderedDict()
        for plan in plans:
            corpus = normalized[t_start] if plan.normalized else data
            cg_dropout = self.config.cmlm.cg_dropout if plan.guided else 0.0
            systems[plan.name] = (
                self.s2ut(plan.name, corpus, cg_dropout), corpus)
        ar = self.ar(data)

        evaluation = self.evaluate(data, normalized, systems, ar,
                                   selection_rows, t_start)
        first = plans[0].name
        benchmark = self.benchmark(data, first, systems[first][0], ar)

        report = MetricsReport.read_csv(os.path.join(evaluation.path, REPORT))
        fingerprints = {'ar': ar.fingerprint, first: systems[first][0]
                        .fingerprint}
        for row in read_rows(os.path.join(benchmark.path, BENCHMARK)):
            report.add(system=row['system'], split=section.split,
                       iterations=int(row['iterations']) or None,
                       units_per_second=float(row['units_per_second']),
                       fingerprint=fingerprints[row['system']])
        report.write_csv(os.path.join(self.workdir, REPORT))
        if section.ablations:
            self.ablations(data)
        self.logger.info("Recipe finished: %d stage(s) run, %d cached, "
                         "report '%s'", len(self.executed), len(self.cached),
                         os.path.join(self.workdir, REPORT))
        return report


def run_recipe(context, workdir=None):
    """
    Run the experiment configured in *context*, return
    :class:`MetricsReport`.
    """
    return Recipe(context, workdir=workdir).run()

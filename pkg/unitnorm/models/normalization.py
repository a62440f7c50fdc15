"""
Module :module:`unitnorm.models.normalization` builds normalized corpora:
target units of every utterance are replaced by units reconstructed
through the VAE and the diffusion model from partially noised latents.
"""

import logging
import os
import shutil

import numpy as np

from unitnorm.core.constants import NORMALIZE_WORKER, SPLITS
from unitnorm.core.exceptions import CorpusError
from unitnorm.core.processes import TaskWorker, WorkerPool
from unitnorm.corpus import storage
from unitnorm.models.diffusion import DiffusionModel, ddim_normalize
from unitnorm.models.schedule import build_schedule
from unitnorm.models.training import load_model, pad_sequences
from unitnorm.models.vae import VaeModel
from unitnorm.utils.seeding import make_rng

__all__ = [
    'utterance_noise', 'normalize_utterances', 'NormalizeWorker',
    'normalize_dataset',
]

logger = logging.getLogger(__name__)

MAX_REPORTED_FAILURES = 5


def utterance_noise(seed, t_start, uid, shape):
    """
    Noise injected into latents of utterance *uid*, drawn from its own
    stream so the result does not depend on batching or worker layout.
    """
    return make_rng(seed, 'normalize', t_start, uid).standard_normal(shape)


def _normalize_batch(vae, model, schedule, batch, t_start, seed, step_size,
                     clip_latent):
    h, mask = pad_sequences([u.target_features for u in batch],
                            dtype=np.float32)
    noise = np.zeros(h.shape[:2] + (vae.latent_dim,))
    for i, utterance in enumerate(batch):
        noise[i, :len(utterance.target_features)] = utterance_noise(
            seed, t_start, utterance.uid,
            (len(utterance.target_features), vae.latent_dim))
    result = ddim_normalize(vae, model, schedule, h, t_start,
                            step_size=step_size, noise=noise,
                            clip_latent=clip_latent, mask=mask)
    return [result.units[i, :len(u.target_features)].astype(np.int64)
            for i, u in enumerate(batch)]


def normalize_utterances(vae, model, schedule, utterances, t_start, seed,
                         step_size=1, clip_latent=None, batch_size=16):
    """
    Normalize *utterances* in batches. Return ``(units, failures)`` where
    *units* maps utterance ids to normalized units and *failures* maps
    ids of utterances which could not be processed to error messages.
    A failed batch is retried utterance by utterance.
    """
    units = {}
    failures = {}
    for start in range(0, len(utterances), batch_size):
        batch = utterances[start:start + batch_size]
        try:
            normalized = _normalize_batch(vae, model, schedule, batch,
                                          t_start, seed, step_size,
                                          clip_latent)
        except Exception:
            logger.warning("Batch starting at utterance '%s' failed, "
                           "retrying one by one", batch[0].uid)
            for utterance in batch:
                try:
                    units[utterance.uid] = _normalize_batch(
                        vae, model, schedule, [utterance], t_start, seed,
                        step_size, clip_latent)[0]
                except Exception as e:
                    failures[utterance.uid] = "{}: {}".format(
                        e.__class__.__name__, e)
        else:
            for utterance, result in zip(batch, normalized):
                units[utterance.uid] = result
    return units, failures


class NormalizeWorker(TaskWorker):
    """
    Worker process which normalizes batches of utterances. Models are
    loaded from checkpoints when the first task arrives.
    """

    process_type = NORMALIZE_WORKER

    def initialize(self):
        self._models = None

    def models(self):
        if self._models is None:
            vae, _ = load_model(self.options['vae_path'], VaeModel)
            model, _ = load_model(self.options['diffusion_path'],
                                  DiffusionModel)
            schedule = build_schedule(self.options['schedule'])
            self._models = (vae, model, schedule)
        return self._models

    def process(self, payload):
        vae, model, schedule = self.models()
        units, failures = normalize_utterances(
            vae, model, schedule, payload, self.options['t_start'],
            self.options['seed'], step_size=self.options['step_size'],
            clip_latent=self.options['clip_latent'],
            batch_size=self.options['batch_size'])
        return units, failures


def _copy_artifacts(corpus_dir, out_dir):
    for name in (storage.KMEANS, storage.INVENTORY):
        path = os.path.join(corpus_dir, name)
        if os.path.isfile(path):
            shutil.copyfile(path, os.path.join(out_dir, name))


def normalize_dataset(corpus_dir, out_dir, vae_path, diffusion_path,
                      schedule_section, t_start, seed, step_size=1,
                      clip_latent=None, batch_size=16, workers=1,
                      context=None, splits=SPLITS, fingerprint=''):
    """
    Write copy of corpus *corpus_dir* into *out_dir* with target units
    replaced by normalized units. Original units are kept in the records
    and the manifest records *t_start* provenance. With ``workers > 1``
    the utterances are processed by a :class:`WorkerPool` (needs
    *context*). Per-utterance failures are collected and reported by one
    :exc:`CorpusError` after the remaining utterances are written.
    """
    vae, _ = load_model(vae_path, VaeModel)
    model, diffusion_checkpoint = load_model(diffusion_path, DiffusionModel)
    schedule = build_schedule(schedule_section)
    schedule.check_timestep(t_start)
    source = storage.read_manifest(corpus_dir)
    os.makedirs(out_dir, exist_ok=True)

    sizes = {}
    failures = {}
    for split in splits:
        utterances = storage.read_split(corpus_dir, split)
        if workers > 1:
            if context is None:
                raise ValueError("Worker pool needs application context")
            # chunks are whole batches, so batch layout matches workers=1
            chunk = batch_size * max(
                1, -(-len(utterances) // (workers * 4 * batch_size)))
            pool = WorkerPool(
                context, NormalizeWorker, workers, vae_path=vae_path,
                diffusion_path=diffusion_path, schedule=schedule_section,
                t_start=t_start, seed=seed, step_size=step_size,
                clip_latent=clip_latent, batch_size=batch_size)
            units = {}
            chunks = [utterances[i:i + chunk]
                      for i in range(0, len(utterances), chunk)]
            for payload, (result, error) in zip(chunks, pool.map(chunks)):
                if error is not None:
                    for utterance in payload:
                        failures[utterance.uid] = error
                    continue
                units.update(result[0])
                failures.update(result[1])
        else:
            units, split_failures = normalize_utterances(
                vae, model, schedule, utterances, t_start, seed,
                step_size=step_size, clip_latent=clip_latent,
                batch_size=batch_size)
            failures.update(split_failures)
        normalized = [u._replace(target_units=units[u.uid])
                      for u in utterances if u.uid in units]
        original = dict((u.uid, u.target_units) for u in utterances)
        storage.write_split(out_dir, split, normalized,
                            fingerprint=fingerprint, original_units=original)
        sizes[split] = len(normalized)
        logger.info("Normalized %d utterances of split '%s' at t_start %d",
                    len(normalized), split, t_start)

    _copy_artifacts(corpus_dir, out_dir)
    storage.write_manifest(out_dir, fingerprint, sizes, provenance={
        't_start': int(t_start),
        'step_size': int(step_size),
        'seed': int(seed),
        'source_fingerprint': source.get('fingerprint', ''),
        'diffusion_fingerprint': diffusion_checkpoint.fingerprint,
    })
    if failures:
        listed = ', '.join('%s (%s)' % item for item in
                           sorted(failures.items())[:MAX_REPORTED_FAILURES])
        raise CorpusError("Normalization failed for %d utterance(s): %s"
                          % (len(failures), listed))
    return sizes

"""
Module :module:`unitnorm.pipeline.stages` contains the work of every
pipeline stage as a plain function over directories and checkpoints.
Management commands call them directly, :class:`unitnorm.pipeline.recipe.
Recipe` calls them inside cached stage directories.
"""

import collections
import logging
import os

import numpy as np

from unitnorm.core.constants import SPLITS
from unitnorm.core.exceptions import CorpusError
from unitnorm.corpus import storage
from unitnorm.corpus.consistency import unit_consistency
from unitnorm.corpus.kmeans import train_kmeans
from unitnorm.corpus.synth import (
    assign_units, build_inventory, generate_splits, options_from_config)
from unitnorm.evaluation.metrics import (
    acc_rec, phone_bleu, unit_bleu, unit_phoneme_map)
from unitnorm.models.autoregressive import ArModel, ar_decode, train_ar
from unitnorm.models.cmlm import (
    DecodeConfig, S2utModel, decode_batches, train_cmlm)
from unitnorm.models.diffusion import DiffusionModel, train_diffusion
from unitnorm.models.schedule import build_schedule
from unitnorm.models.training import load_model, save_model
from unitnorm.models.vae import VaeModel, reconstruction_accuracy, train_vae
from unitnorm.utils.seeding import derive_seed

__all__ = [
    'build_dataset', 'corpus_dims', 'default_log_path', 'train_vae_stage',
    'train_diffusion_stage', 'train_s2ut_stage', 'train_ar_stage',
    'decode_split', 'decode_ar_split', 'normalization_metrics',
    'translation_metrics', 'decode_config',
]

logger = logging.getLogger(__name__)


def build_dataset(corpus_section, seed, out_dir, fingerprint=''):
    """
    Generate all splits, train k-means on target frames of the train
    split, quantize every split and write the corpus into *out_dir*.
    Return split sizes.
    """
    splits = generate_splits(corpus_section, seed)
    frames = np.concatenate([u.target_features for u in splits['train']])
    kmeans = train_kmeans(frames, corpus_section.units,
                          iterations=corpus_section.kmeans_iterations,
                          seed=derive_seed(seed, 'kmeans'))
    sizes = collections.OrderedDict()
    for split, utterances in splits.items():
        storage.write_split(out_dir, split, assign_units(utterances, kmeans),
                            fingerprint=fingerprint)
        sizes[split] = len(utterances)
    storage.write_kmeans(out_dir, kmeans, fingerprint=fingerprint)
    storage.write_inventory(
        out_dir, build_inventory(options_from_config(corpus_section, seed)),
        fingerprint=fingerprint)
    storage.write_manifest(out_dir, fingerprint, sizes, provenance={
        'seed': int(seed),
        'units': int(corpus_section.units),
        'kmeans_iterations': int(kmeans.iterations),
        'kmeans_inertia': kmeans.inertia[-1] if kmeans.inertia else None,
    })
    return sizes


def corpus_dims(corpus_section, corpus_dir, utterances):
    """
    Return copy of ``[corpus]`` *corpus_section* with feature dimensions
    and number of units of the corpus stored in *corpus_dir*, so models
    always fit the data they are trained on.
    """
    if not utterances:
        raise CorpusError("Corpus '%s' is empty" % corpus_dir)
    kmeans = storage.read_kmeans(corpus_dir)
    return corpus_section._replace(
        feature_dim=int(utterances[0].target_features.shape[1]),
        source_feature_dim=int(utterances[0].source_features.shape[1]),
        units=int(len(kmeans.centroids)))


def default_log_path(out_path):
    """
    Per-step CSV log written next to checkpoint *out_path*.
    """
    return os.path.splitext(out_path)[0] + '.csv'


def _pairs(utterances):
    return [(u.source_features, u.target_units) for u in utterances]


def train_vae_stage(config, corpus_dir, out_path, seed, log_path=None,
                    fingerprint='', steps=None, section=None):
    """
    Train the VAE on train split of *corpus_dir*. *section* replaces
    ``[vae]`` of *config*.
    """
    section = config.vae if section is None else section
    train = storage.read_split(corpus_dir, 'train')
    dims = corpus_dims(config.corpus, corpus_dir, train)
    model = VaeModel.from_config(section, dims, derive_seed(seed, 'vae'))
    train_vae(model, train, section, seed, path=log_path,
              log_interval=config.experiment.log_interval, steps=steps)
    accuracy = reconstruction_accuracy(model, train)
    logger.info("VAE reconstructs %.2f %% of train units", 100.0 * accuracy)
    save_model(out_path, model, fingerprint=fingerprint,
               metadata={'reconstruction_accuracy': accuracy})
    return model


def train_diffusion_stage(config, corpus_dir, vae_path, out_path, seed,
                          log_path=None, fingerprint='', steps=None,
                          section=None):
    section = config.diffusion if section is None else section
    train = storage.read_split(corpus_dir, 'train')
    vae, _ = load_model(vae_path, VaeModel)
    model = DiffusionModel.from_config(
        section, config.vae._replace(latent_dim=vae.latent_dim),
        config.schedule,
        derive_seed(seed, 'diffusion'))
    train_diffusion(model, vae, build_schedule(config.schedule), train,
                    section, seed, path=log_path,
                    log_interval=config.experiment.log_interval, steps=steps)
    save_model(out_path, model, fingerprint=fingerprint)
    return model


def train_s2ut_stage(config, corpus_dir, out_path, seed, cg_dropout=None,
                     log_path=None, fingerprint='', steps=None):
    """
    Train the non-autoregressive model on train split of *corpus_dir*.
    *cg_dropout* overrides ``[cmlm] cg_dropout``.
    """
    train = storage.read_split(corpus_dir, 'train')
    dims = corpus_dims(config.corpus, corpus_dir, train)
    model = S2utModel.from_config(config.cmlm, dims,
                                  derive_seed(seed, 'cmlm'))
    cg_dropout = config.cmlm.cg_dropout if cg_dropout is None else cg_dropout
    train_cmlm(model, _pairs(train), config.cmlm, seed, cg_dropout=cg_dropout,
               path=log_path, log_interval=config.experiment.log_interval,
               steps=steps)
    save_model(out_path, model, fingerprint=fingerprint,
               metadata={'cg_dropout': cg_dropout})
    return model


def train_ar_stage(config, corpus_dir, out_path, seed, log_path=None,
                   fingerprint='', steps=None):
    train = storage.read_split(corpus_dir, 'train')
    dims = corpus_dims(config.corpus, corpus_dir, train)
    model = ArModel.from_config(config.ar, dims, derive_seed(seed, 'ar'))
    train_ar(model, _pairs(train), config.ar, seed, path=log_path,
             log_interval=config.experiment.log_interval, steps=steps)
    save_model(out_path, model, fingerprint=fingerprint)
    return model


def _check_split(split):
    if split not in SPLITS:
        raise ValueError("Unknown split '%s'" % split)


def decode_split(model_path, corpus_dir, split, config,
                 batch_size=32):
    """
    Decode source side of *split* with the non-autoregressive model in
    checkpoint *model_path*. Return ordered mapping of utterance ids to
    units.
    """
    _check_split(split)
    model, _ = load_model(model_path, S2utModel)
    utterances = storage.read_split(corpus_dir, split)
    lengths = None
    if config.length_mode == 'oracle':
        lengths = [len(u.target_units) for u in utterances]
    units = decode_batches(model, [u.source_features for u in utterances],
                           config, batch_size=batch_size,
                           reference_lengths=lengths)
    logger.info("Decoded %d utterances of split '%s' (%d iterations, "
                "omega %.2f)", len(utterances), split,
                config.iterations, config.omega)
    return collections.OrderedDict(
        (u.uid, sequence) for u, sequence in zip(utterances, units))


def decode_ar_split(model_path, corpus_dir, split, batch_size=32,
                    max_length=None):
    _check_split(split)
    model, _ = load_model(model_path, ArModel)
    utterances = storage.read_split(corpus_dir, split)
    units = collections.OrderedDict()
    passes = 0
    for start in range(0, len(utterances), batch_size):
        batch = utterances[start:start + batch_size]
        decoded, batch_passes = ar_decode(
            model, [u.source_features for u in batch], max_length=max_length)
        passes += batch_passes
        units.update((u.uid, sequence) for u, sequence in zip(batch, decoded))
    logger.info("Decoded %d utterances of split '%s' greedily in %d passes",
                len(utterances), split, passes)
    return units


def normalization_metrics(corpus_dir, normalized_dir, split='train'):
    """
    Compare units of a normalized corpus with the original units: return
    Acc-Rec, BLEU of normalized against original units and unit
    consistency of the normalized corpus.
    """
    original = storage.read_original_units(normalized_dir, split)
    normalized = storage.read_split(normalized_dir, split)
    if not normalized:
        raise CorpusError("Normalized split '%s' is empty" % split)
    if not original:
        reference = dict((u.uid, u.target_units)
                         for u in storage.read_split(corpus_dir, split))
        original = collections.OrderedDict(
            (u.uid, reference[u.uid]) for u in normalized)
    references = [original[u.uid] for u in normalized]
    hypotheses = [u.target_units for u in normalized]
    return collections.OrderedDict([
        ('acc_rec', acc_rec(references, hypotheses)),
        ('unit_bleu', unit_bleu(hypotheses, references)),
        ('unit_consistency', unit_consistency(normalized)),
    ])


def translation_metrics(hypotheses, corpus_dir, split, dedup=False):
    """
    Score decoded *hypotheses* (mapping of utterance ids to units)
    against *split* of *corpus_dir* and against the true phoneme
    sequences read back through the unit to phoneme map of its train
    split.

    ``unit_bleu`` always uses the pre-normalization units, so systems
    trained on normalized and on original corpora share one reference.
    For a normalized corpus ``normalized_unit_bleu`` scores against the
    normalized units the system was trained on.
    """
    _check_split(split)
    utterances = storage.read_split(corpus_dir, split)
    original = storage.read_original_units(corpus_dir, split)
    missing = [u.uid for u in utterances if u.uid not in hypotheses]
    if missing:
        raise CorpusError("No hypothesis for %d utterance(s), e.g. '%s'"
                          % (len(missing), missing[0]))
    train = storage.read_split(corpus_dir, 'train')
    mapping = unit_phoneme_map(
        train, units=len(storage.read_kmeans(corpus_dir).centroids))
    ordered = [hypotheses[u.uid] for u in utterances]
    targets = [u.target_units for u in utterances]
    metrics = collections.OrderedDict()
    if original:
        lacking = [u.uid for u in utterances if u.uid not in original]
        if lacking:
            raise CorpusError("Normalized split '%s' lacks original units "
                              "of '%s'" % (split, lacking[0]))
        references = [original[u.uid] for u in utterances]
        metrics['unit_bleu'] = unit_bleu(ordered, references, dedup=dedup)
        metrics['normalized_unit_bleu'] = unit_bleu(ordered, targets,
                                                    dedup=dedup)
    else:
        metrics['unit_bleu'] = unit_bleu(ordered, targets, dedup=dedup)
    metrics['phone_bleu'] = phone_bleu(ordered, utterances, mapping)
    return metrics


def decode_config(section, iterations=None, omega=None, length_mode=None,
                  seed=0):
    """
    :class:`DecodeConfig` from ``[decode]`` *section* with overrides.
    """
    return DecodeConfig(
        iterations=section.iterations if iterations is None else iterations,
        omega=section.omega if omega is None else omega,
        length_mode=section.length_mode if length_mode is None
        else length_mode,
        seed=seed)

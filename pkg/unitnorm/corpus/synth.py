"""
Module :module:`unitnorm.corpus.synth` generates paired source/target
toy speech corpus with known phoneme ground truth.

Each utterance is a phoneme sequence sampled from a first-order Markov
grammar. Every phoneme is rendered on both sides for a random number of
frames as its prototype vector plus a per-speaker offset plus frame
noise. Target and source speakers are drawn independently, so the same
phoneme sequence maps to many different target renderings.
"""

import collections
import logging

import numpy as np

from unitnorm.core.exceptions import CorpusError
from unitnorm.corpus.kmeans import quantize
from unitnorm.utils.seeding import make_rng

__all__ = [
    'CorpusOptions', 'PhonemeInventory', 'Utterance', 'build_inventory',
    'build_grammar', 'build_speakers', 'generate_corpus', 'generate_splits',
    'classify_frames', 'frame_phonemes', 'assign_units', 'options_from_config',
    'validate_options',
]

logger = logging.getLogger(__name__)

MAX_DURATION = 8
MAX_INVENTORY_ATTEMPTS = 100

CorpusOptions = collections.namedtuple('CorpusOptions', [
    'phonemes', 'units', 'feature_dim', 'source_feature_dim', 'utterances',
    'speakers', 'min_duration', 'max_duration', 'min_source_duration',
    'max_source_duration', 'min_phonemes', 'max_phonemes', 'speaker_sigma',
    'frame_sigma', 'seed',
])

PhonemeInventory = collections.namedtuple(
    'PhonemeInventory', ['target_prototypes', 'source_prototypes', 'seed'])

Utterance = collections.namedtuple('Utterance', [
    'uid', 'phoneme_ids', 'target_durations', 'source_durations',
    'source_features', 'target_features', 'target_units', 'speaker_id',
    'source_speaker_id',
])

Speakers = collections.namedtuple('Speakers', ['target', 'source'])


def options_from_config(corpus, seed, utterances=None):
    """
    Build :class:`CorpusOptions` from ``[corpus]`` config section
    *corpus*. *utterances* overrides the number of utterances (the
    section holds one count per split).
    """
    return CorpusOptions(
        phonemes=corpus.phonemes,
        units=corpus.units,
        feature_dim=corpus.feature_dim,
        source_feature_dim=corpus.source_feature_dim,
        utterances=(corpus.train_utterances if utterances is None
                    else utterances),
        speakers=corpus.speakers,
        min_duration=corpus.min_duration,
        max_duration=corpus.max_duration,
        min_source_duration=corpus.min_source_duration,
        max_source_duration=corpus.max_source_duration,
        min_phonemes=corpus.min_phonemes,
        max_phonemes=corpus.max_phonemes,
        speaker_sigma=corpus.speaker_sigma,
        frame_sigma=corpus.frame_sigma,
        seed=seed,
    )


def validate_options(options):
    """
    Raise :exc:`ValueError` when *options* are out of valid ranges.
    """
    if options.phonemes < 1:
        raise ValueError("Number of phonemes must be >= 1, got %d"
                         % options.phonemes)
    if options.phonemes > options.units:
        raise ValueError("Number of phonemes (%d) must not exceed number of "
                         "units (%d)" % (options.phonemes, options.units))
    if options.feature_dim < 1 or options.source_feature_dim < 1:
        raise ValueError("Feature dimensions must be >= 1")
    if options.utterances < 1:
        raise ValueError("Number of utterances must be >= 1, got %d"
                         % options.utterances)
    if options.speakers < 1:
        raise ValueError("Number of speakers must be >= 1, got %d"
                         % options.speakers)
    for low, high, side in [
            (options.min_duration, options.max_duration, 'target'),
            (options.min_source_duration, options.max_source_duration,
             'source')]:
        if not 1 <= low <= high <= MAX_DURATION:
            raise ValueError(
                "Invalid %s duration range [%d, %d], must be within [1, %d]"
                % (side, low, high, MAX_DURATION))
    if not 1 <= options.min_phonemes <= options.max_phonemes:
        raise ValueError("Invalid phoneme count range [%d, %d]" % (
            options.min_phonemes, options.max_phonemes))
    if options.speaker_sigma < 0 or options.frame_sigma < 0:
        raise ValueError("Noise deviations must be >= 0")


def build_inventory(options):
    """
    Draw target and source prototypes, standard normal entries. Target
    prototypes are redrawn until every pair is more than
    ``4 * frame_sigma`` apart.
    """
    rng = make_rng(options.seed, 'inventory')
    threshold = 4.0 * options.frame_sigma
    for _ in range(MAX_INVENTORY_ATTEMPTS):
        target = rng.standard_normal((options.phonemes, options.feature_dim))
        source = rng.standard_normal(
            (options.phonemes, options.source_feature_dim))
        if options.phonemes == 1 or \
                min_pairwise_distance(target) > threshold:
            return PhonemeInventory(target, source, options.seed)
    raise CorpusError("Cannot draw %d separable prototypes of dimension %d"
                      % (options.phonemes, options.feature_dim))


def min_pairwise_distance(points):
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    dist[np.diag_indices(len(points))] = np.inf
    return dist.min()


def build_grammar(options):
    """
    Return ``(initial, transitions)`` of the Markov phoneme grammar. Rows
    of *transitions* are Dirichlet draws with zero self-transition, so
    consecutive phonemes always differ (with more than one phoneme).
    """
    rng = make_rng(options.seed, 'grammar')
    count = options.phonemes
    initial = np.full(count, 1.0 / count)
    transitions = rng.dirichlet(np.ones(count), size=count)
    if count > 1:
        transitions[np.diag_indices(count)] = 0.0
        transitions /= transitions.sum(axis=1, keepdims=True)
    return initial, transitions


def build_speakers(options):
    """
    Per-speaker additive offsets, one table for target and one for
    source side, entries ``N(0, speaker_sigma^2)``.
    """
    rng = make_rng(options.seed, 'speakers')
    target = rng.normal(0.0, 1.0, (options.speakers, options.feature_dim)) \
        * options.speaker_sigma
    source = rng.normal(
        0.0, 1.0, (options.speakers, options.source_feature_dim)) \
        * options.speaker_sigma
    return Speakers(target, source)


def _render(prototypes, phoneme_ids, durations, offset, frame_sigma, rng):
    frames = np.repeat(prototypes[phoneme_ids], durations, axis=0) + offset
    noise = rng.normal(0.0, 1.0, frames.shape) * frame_sigma
    return frames + noise


def generate_utterance(uid, options, inventory, grammar, speakers, rng):
    """
    Generate one :class:`Utterance` with *rng* as the only source of
    randomness. Units are not assigned yet (``target_units`` is
    :const:`None`).
    """
    initial, transitions = grammar
    count = int(rng.integers(options.min_phonemes, options.max_phonemes + 1))
    phonemes = np.empty(count, dtype=np.int64)
    phonemes[0] = rng.choice(options.phonemes, p=initial)
    for i in range(1, count):
        phonemes[i] = rng.choice(options.phonemes,
                                 p=transitions[phonemes[i - 1]])
    target_durations = rng.integers(
        options.min_duration, options.max_duration + 1, size=count)
    source_durations = rng.integers(
        options.min_source_duration, options.max_source_duration + 1,
        size=count)
    speaker = int(rng.integers(options.speakers))
    source_speaker = int(rng.integers(options.speakers))
    target = _render(inventory.target_prototypes, phonemes, target_durations,
                     speakers.target[speaker], options.frame_sigma, rng)
    source = _render(inventory.source_prototypes, phonemes, source_durations,
                     speakers.source[source_speaker], options.frame_sigma, rng)
    return Utterance(
        uid=uid,
        phoneme_ids=phonemes,
        target_durations=target_durations.astype(np.int64),
        source_durations=source_durations.astype(np.int64),
        source_features=source.astype(np.float32),
        target_features=target.astype(np.float32),
        target_units=None,
        speaker_id=speaker,
        source_speaker_id=source_speaker,
    )


def generate_corpus(options, split='train'):
    """
    Generate ``options.utterances`` utterances of *split*. The result is
    a pure function of *options* and *split*: inventory, grammar and
    speakers depend on the seed only, every utterance draws from its own
    stream derived from ``(seed, split, index)``.
    """
    validate_options(options)
    inventory = build_inventory(options)
    grammar = build_grammar(options)
    speakers = build_speakers(options)
    corpus = []
    for index in range(options.utterances):
        uid = '%s-%05d' % (split, index)
        rng = make_rng(options.seed, 'corpus', split, index)
        corpus.append(generate_utterance(
            uid, options, inventory, grammar, speakers, rng))
    logger.info("Generated %d utterances of split '%s' (%d target frames)",
                len(corpus), split,
                sum(len(u.target_features) for u in corpus))
    return corpus


def generate_splits(corpus_section, seed):
    """
    Generate train, valid and test splits configured in ``[corpus]``
    section. All splits share inventory, grammar and speakers.
    """
    splits = collections.OrderedDict()
    for split in ('train', 'valid', 'test'):
        count = getattr(corpus_section, '%s_utterances' % split)
        options = options_from_config(corpus_section, seed, utterances=count)
        splits[split] = generate_corpus(options, split=split)
    return splits


def classify_frames(features, prototypes):
    """
    Map every frame to the id of the nearest prototype.
    """
    features = np.asarray(features, dtype=np.float64)
    prototypes = np.asarray(prototypes, dtype=np.float64)
    diff = features[:, None, :] - prototypes[None, :, :]
    return np.argmin((diff * diff).sum(axis=-1), axis=1)


def frame_phonemes(utterance):
    """
    Phoneme id of every target frame of *utterance*.
    """
    return np.repeat(utterance.phoneme_ids, utterance.target_durations)


def assign_units(corpus, model):
    """
    Return copy of *corpus* with ``target_units`` quantized by k-means
    *model*.
    """
    return [u._replace(target_units=quantize(u.target_features, model))
            for u in corpus]

"""
Module :module:`unitnorm.evaluation.metrics` scores unit sequences:
frame accuracy of reconstructed units, corpus BLEU over unit ids and
BLEU over phonemes read back from units.
"""

import numpy as np

from sacrebleu.metrics import BLEU

from unitnorm.core.exceptions import ShapeError
from unitnorm.corpus.synth import frame_phonemes

__all__ = [
    'deduplicate', 'acc_rec', 'unit_bleu', 'unit_phoneme_map',
    'units_to_phonemes', 'phone_bleu',
]

UNKNOWN_PHONEME = -1


def _bleu():
    # add-one smoothing on 2..4-gram precisions, unigram precision is exact
    return BLEU(tokenize='none', smooth_method='add-k', smooth_value=1,
                force=True)


def deduplicate(units):
    """
    Collapse runs of repeated units, e.g. ``[3, 3, 5, 3] -> [3, 5, 3]``.
    """
    units = np.asarray(units, dtype=np.int64)
    if len(units) == 0:
        return units
    keep = np.ones(len(units), dtype=bool)
    keep[1:] = units[1:] != units[:-1]
    return units[keep]


def _check_pairs(hypotheses, references):
    hypotheses = list(hypotheses)
    references = list(references)
    if not hypotheses:
        raise ValueError("Empty hypothesis set")
    if len(hypotheses) != len(references):
        raise ValueError("Got %d hypotheses for %d references"
                         % (len(hypotheses), len(references)))
    return hypotheses, references


def acc_rec(references, reconstructed):
    """
    Micro-averaged exact-match rate (in percent) over all frames of
    aligned unit sequences. Every pair must have equal length.
    """
    reconstructed, references = _check_pairs(reconstructed, references)
    agree = 0
    total = 0
    for reference, hypothesis in zip(references, reconstructed):
        reference = np.asarray(reference)
        hypothesis = np.asarray(hypothesis)
        if reference.shape != hypothesis.shape:
            raise ShapeError("Sequences differ in length: %d != %d"
                             % (len(reference), len(hypothesis)))
        agree += int(np.sum(reference == hypothesis))
        total += len(reference)
    if not total:
        raise ValueError("No frames to compare")
    return 100.0 * agree / total


def _as_text(units):
    return ' '.join(str(int(u)) for u in units)


def unit_bleu(hypotheses, references, dedup=False):
    """
    Corpus BLEU-4 (0..100) of unit-id sequences with brevity penalty.
    With *dedup* repeated consecutive units are collapsed on both sides
    first.
    """
    hypotheses, references = _check_pairs(hypotheses, references)
    if dedup:
        hypotheses = [deduplicate(h) for h in hypotheses]
        references = [deduplicate(r) for r in references]
    result = _bleu().corpus_score([_as_text(h) for h in hypotheses],
                                  [[_as_text(r) for r in references]])
    return float(result.score)


def unit_phoneme_map(corpus, units=None):
    """
    Return array mapping every unit id to the phoneme most of its frames
    belong to in *corpus* (``-1`` for units never seen). Ties go to the
    lowest phoneme id.
    """
    units = units or 1 + max(int(u.target_units.max()) for u in corpus)
    phonemes = 1 + max(int(u.phoneme_ids.max()) for u in corpus)
    counts = np.zeros((units, phonemes), dtype=np.int64)
    for utterance in corpus:
        np.add.at(counts, (utterance.target_units, frame_phonemes(utterance)),
                  1)
    mapping = np.argmax(counts, axis=1)
    mapping[counts.sum(axis=1) == 0] = UNKNOWN_PHONEME
    return mapping


def units_to_phonemes(units, mapping):
    """
    Read phoneme sequence back from *units*: map every unit through
    *mapping*, drop unknown units and collapse repeats.
    """
    units = np.asarray(units, dtype=np.int64)
    if len(units) and (units.min() < 0 or units.max() >= len(mapping)):
        raise ValueError("Unit id out of range 0..%d" % (len(mapping) - 1))
    phonemes = np.asarray(mapping)[units]
    return deduplicate(phonemes[phonemes != UNKNOWN_PHONEME])


def phone_bleu(hypotheses, corpus, mapping):
    """
    Corpus BLEU of phonemes read from hypothesis units against the true
    phoneme sequences of *corpus*. Consecutive repeated phonemes are
    collapsed on both sides.
    """
    hypotheses, corpus = _check_pairs(hypotheses, corpus)
    return unit_bleu([units_to_phonemes(h, mapping) for h in hypotheses],
                     [deduplicate(u.phoneme_ids) for u in corpus])

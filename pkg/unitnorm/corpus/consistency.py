"""
Unit consistency: how often frames of the same phoneme, across all
speakers, receive the same unit.
"""

import collections
import collections.abc

import numpy as np

from unitnorm.core.exceptions import ShapeError
from unitnorm.corpus.synth import frame_phonemes

__all__ = ['unit_consistency']


def _majority(values):
    counts = np.bincount(values)
    return int(np.argmax(counts))


def unit_consistency(corpus, units_by_utterance=None):
    """
    For every phoneme occurrence take the majority unit of its frames,
    the per-phoneme global unit is the most frequent occurrence majority
    (ties to the lowest id). Return fraction of all frames whose unit
    equals the global unit of their phoneme.

    *units_by_utterance* maps utterance ids to unit sequences, or is a
    sequence aligned with *corpus*; when omitted, ``target_units`` of the
    utterances are used.
    """
    if units_by_utterance is None:
        units = [u.target_units for u in corpus]
    elif isinstance(units_by_utterance, collections.abc.Mapping):
        units = [units_by_utterance[u.uid] for u in corpus]
    else:
        units = list(units_by_utterance)
        if len(units) != len(corpus):
            raise ValueError("Got units for %d utterances, corpus has %d"
                             % (len(units), len(corpus)))

    occurrence_votes = collections.defaultdict(list)
    frames = []
    for utterance, sequence in zip(corpus, units):
        sequence = np.asarray(sequence, dtype=np.int64)
        phonemes = frame_phonemes(utterance)
        if len(sequence) != len(phonemes):
            raise ShapeError("Utterance '%s' has %d frames but %d units"
                             % (utterance.uid, len(phonemes), len(sequence)))
        bounds = np.cumsum(utterance.target_durations)[:-1]
        for phoneme, segment in zip(utterance.phoneme_ids,
                                    np.split(sequence, bounds)):
            occurrence_votes[int(phoneme)].append(_majority(segment))
        frames.append((phonemes, sequence))

    if not frames:
        return 0.0
    global_unit = dict((phoneme, _majority(np.asarray(votes)))
                       for phoneme, votes in occurrence_votes.items())
    agree = 0
    total = 0
    for phonemes, sequence in frames:
        expected = np.array([global_unit[int(p)] for p in phonemes])
        agree += int((expected == sequence).sum())
        total += len(sequence)
    return agree / float(total) if total else 0.0

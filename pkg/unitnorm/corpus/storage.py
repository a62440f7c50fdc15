"""
Module :module:`unitnorm.corpus.storage` keeps corpus on disk::

    <corpus>/manifest.json          fingerprint, provenance, split sizes
    <corpus>/kmeans.dnck            quantizer centroids
    <corpus>/inventory.dnck         phoneme prototypes
    <corpus>/<split>/manifest.json  records of the split with sizes
    <corpus>/<split>/<uid>.dnck     one utterance

Utterance records use the checkpoint binary layout of
:mod:`unitnorm.tensor.checkpoint`.
"""

import collections
import json
import logging
import os

import numpy as np

from unitnorm.core.constants import CHECKPOINT_SUFFIX, SPLITS
from unitnorm.core.exceptions import CheckpointError, CorpusError
from unitnorm.corpus.kmeans import KMeansModel
from unitnorm.corpus.synth import PhonemeInventory, Utterance
from unitnorm.tensor import checkpoint

__all__ = [
    'MANIFEST', 'write_manifest', 'read_manifest', 'write_split',
    'read_split', 'read_original_units', 'write_kmeans', 'read_kmeans',
    'write_inventory', 'read_inventory', 'utterance_path', 'write_utterance',
]

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'
KMEANS = 'kmeans' + CHECKPOINT_SUFFIX
INVENTORY = 'inventory' + CHECKPOINT_SUFFIX
FORMAT_VERSION = 1


def _write_json(path, data):
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')


def _read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except (IOError, OSError, ValueError) as e:
        raise CorpusError("Cannot read '%s': %s" % (path, e))


def write_manifest(corpus_dir, fingerprint, split_sizes, provenance=None):
    os.makedirs(corpus_dir, exist_ok=True)
    _write_json(os.path.join(corpus_dir, MANIFEST), {
        'format': FORMAT_VERSION,
        'fingerprint': fingerprint,
        'splits': dict(split_sizes),
        'provenance': provenance or {},
    })


def read_manifest(corpus_dir):
    """
    Return corpus manifest as :class:`dict`.
    """
    manifest = _read_json(os.path.join(corpus_dir, MANIFEST))
    if manifest.get('format') != FORMAT_VERSION:
        raise CorpusError("Unsupported corpus format in '%s'" % corpus_dir)
    return manifest


def utterance_path(corpus_dir, split, uid):
    return os.path.join(corpus_dir, split, uid + CHECKPOINT_SUFFIX)


def _utterance_arrays(utterance, original_units=None):
    arrays = collections.OrderedDict([
        ('phoneme_ids', utterance.phoneme_ids),
        ('target_durations', utterance.target_durations),
        ('source_durations', utterance.source_durations),
        ('speaker_id', np.array(utterance.speaker_id)),
        ('source_speaker_id', np.array(utterance.source_speaker_id)),
        ('source_features', utterance.source_features),
        ('target_features', utterance.target_features),
    ])
    if utterance.target_units is not None:
        arrays['target_units'] = utterance.target_units
    if original_units is not None:
        arrays['original_units'] = original_units
    return arrays


def write_utterance(corpus_dir, split, utterance, fingerprint='',
                    original_units=None):
    """
    Write one utterance record, return its size in bytes.
    """
    data = checkpoint.dumps(_utterance_arrays(utterance, original_units),
                            fingerprint=fingerprint,
                            metadata={'uid': utterance.uid, 'split': split})
    with open(utterance_path(corpus_dir, split, utterance.uid), 'wb') as f:
        f.write(data)
    return len(data)


def write_split(corpus_dir, split, utterances, fingerprint='',
                original_units=None):
    """
    Write all *utterances* of *split* and the split manifest.
    *original_units* optionally maps utterance ids to units the
    utterance carried before normalization.
    """
    if split not in SPLITS:
        raise ValueError("Unknown split '%s'" % split)
    os.makedirs(os.path.join(corpus_dir, split), exist_ok=True)
    records = []
    for utterance in utterances:
        original = None if original_units is None \
            else original_units.get(utterance.uid)
        size = write_utterance(corpus_dir, split, utterance,
                               fingerprint=fingerprint,
                               original_units=original)
        records.append({
            'uid': utterance.uid,
            'file': utterance.uid + CHECKPOINT_SUFFIX,
            'phonemes': int(len(utterance.phoneme_ids)),
            'target_frames': int(len(utterance.target_features)),
            'source_frames': int(len(utterance.source_features)),
            'bytes': size,
        })
    _write_json(os.path.join(corpus_dir, split, MANIFEST),
                {'split': split, 'records': records})
    logger.info("Wrote %d utterances of split '%s' into '%s'",
                len(records), split, corpus_dir)
    return records


def _load_record(path):
    try:
        return checkpoint.load(path)
    except CheckpointError as e:
        raise CorpusError(str(e))


def _to_utterance(uid, arrays):
    def ints(name):
        return np.asarray(arrays[name]).astype(np.int64)
    try:
        return Utterance(
            uid=uid,
            phoneme_ids=ints('phoneme_ids'),
            target_durations=ints('target_durations'),
            source_durations=ints('source_durations'),
            source_features=arrays['source_features'],
            target_features=arrays['target_features'],
            target_units=ints('target_units') if 'target_units' in arrays
            else None,
            speaker_id=int(arrays['speaker_id']),
            source_speaker_id=int(arrays['source_speaker_id']),
        )
    except KeyError as e:
        raise CorpusError("Utterance '%s' lacks array %s" % (uid, e))


def _split_records(corpus_dir, split):
    manifest = _read_json(os.path.join(corpus_dir, split, MANIFEST))
    return manifest.get('records', [])


def read_split(corpus_dir, split):
    """
    Read list of :class:`Utterance` of *split* in manifest order.
    """
    corpus = []
    for record in _split_records(corpus_dir, split):
        loaded = _load_record(os.path.join(corpus_dir, split, record['file']))
        corpus.append(_to_utterance(record['uid'], loaded.arrays))
    return corpus


def read_original_units(corpus_dir, split):
    """
    Return mapping of utterance ids to pre-normalization units of a
    normalized corpus (empty for corpora which were not normalized).
    """
    result = collections.OrderedDict()
    for record in _split_records(corpus_dir, split):
        loaded = _load_record(os.path.join(corpus_dir, split, record['file']))
        if 'original_units' in loaded.arrays:
            result[record['uid']] = loaded.arrays['original_units'].astype(
                np.int64)
    return result


def write_kmeans(corpus_dir, model, fingerprint=''):
    checkpoint.save(os.path.join(corpus_dir, KMEANS),
                    {'centroids': model.centroids}, fingerprint=fingerprint,
                    metadata={'iterations': model.iterations,
                              'inertia': list(model.inertia)})


def read_kmeans(corpus_dir):
    loaded = _load_record(os.path.join(corpus_dir, KMEANS))
    return KMeansModel(loaded.arrays['centroids'].astype(np.float64),
                       loaded.metadata.get('iterations', 0),
                       tuple(loaded.metadata.get('inertia', ())))


def write_inventory(corpus_dir, inventory, fingerprint=''):
    checkpoint.save(os.path.join(corpus_dir, INVENTORY), {
        'target_prototypes': inventory.target_prototypes,
        'source_prototypes': inventory.source_prototypes,
    }, fingerprint=fingerprint, metadata={'seed': inventory.seed})


def read_inventory(corpus_dir):
    loaded = _load_record(os.path.join(corpus_dir, INVENTORY))
    return PhonemeInventory(
        loaded.arrays['target_prototypes'].astype(np.float64),
        loaded.arrays['source_prototypes'].astype(np.float64),
        loaded.metadata.get('seed'))

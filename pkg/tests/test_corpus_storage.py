
import json
import os

import numpy as np
import pytest

from unitnorm.core.exceptions import CorpusError
from unitnorm.corpus import storage
from unitnorm.corpus.kmeans import train_kmeans
from unitnorm.corpus.synth import (
    assign_units, build_inventory, generate_corpus)

from tests.test_corpus_synth import make_options


@pytest.fixture
def corpus():
    options = make_options(utterances=6)
    utterances = generate_corpus(options)
    frames = np.concatenate([u.target_features for u in utterances])
    model = train_kmeans(frames, 16, seed=0)
    return options, assign_units(utterances, model), model


def test_split_round_trip(tmpdir, corpus):
    _, utterances, _ = corpus
    path = str(tmpdir)
    records = storage.write_split(path, 'train', utterances, fingerprint='ab')
    assert len(records) == 6
    assert records[0]['target_frames'] == len(utterances[0].target_features)
    assert os.path.isfile(storage.utterance_path(path, 'train',
                                                 utterances[0].uid))
    loaded = storage.read_split(path, 'train')
    assert [u.uid for u in loaded] == [u.uid for u in utterances]
    for a, b in zip(loaded, utterances):
        assert np.array_equal(a.phoneme_ids, b.phoneme_ids)
        assert np.array_equal(a.target_units, b.target_units)
        assert np.array_equal(a.target_features, b.target_features)
        assert np.array_equal(a.source_durations, b.source_durations)
        assert a.speaker_id == b.speaker_id
        assert a.source_speaker_id == b.source_speaker_id
    assert storage.read_original_units(path, 'train') == {}


def test_original_units_kept(tmpdir, corpus):
    _, utterances, _ = corpus
    path = str(tmpdir)
    original = dict((u.uid, u.target_units) for u in utterances)
    normalized = [u._replace(target_units=np.zeros_like(u.target_units))
                  for u in utterances]
    storage.write_split(path, 'test', normalized, original_units=original)
    restored = storage.read_original_units(path, 'test')
    for uid, units in original.items():
        assert np.array_equal(restored[uid], units)


def test_manifest(tmpdir):
    path = str(tmpdir.join('corpus'))
    storage.write_manifest(path, 'f00d', {'train': 3},
                           provenance={'t_start': 100})
    manifest = storage.read_manifest(path)
    assert manifest['fingerprint'] == 'f00d'
    assert manifest['splits'] == {'train': 3}
    assert manifest['provenance'] == {'t_start': 100}
    with open(os.path.join(path, 'manifest.json'), 'w') as f:
        json.dump({'format': 99}, f)
    with pytest.raises(CorpusError):
        storage.read_manifest(path)


def test_kmeans_and_inventory(tmpdir, corpus):
    options, _, model = corpus
    path = str(tmpdir)
    storage.write_kmeans(path, model)
    loaded = storage.read_kmeans(path)
    assert np.allclose(loaded.centroids, model.centroids, atol=1e-5)
    assert loaded.iterations == model.iterations
    inventory = build_inventory(options)
    storage.write_inventory(path, inventory)
    assert np.allclose(storage.read_inventory(path).target_prototypes,
                       inventory.target_prototypes, atol=1e-6)


def test_missing_and_corrupted(tmpdir, corpus):
    _, utterances, _ = corpus
    path = str(tmpdir)
    with pytest.raises(CorpusError):
        storage.read_split(path, 'train')
    storage.write_split(path, 'train', utterances)
    with open(storage.utterance_path(path, 'train', utterances[0].uid),
              'wb') as f:
        f.write(b'garbage')
    with pytest.raises(CorpusError):
        storage.read_split(path, 'train')


def test_unknown_split(tmpdir, corpus):
    with pytest.raises(ValueError):
        storage.write_split(str(tmpdir), 'dev', corpus[1])

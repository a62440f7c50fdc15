
import numpy as np
import pytest

from unitnorm.core.exceptions import ShapeError
from unitnorm.corpus.kmeans import KMeansModel, quantize, train_kmeans
from unitnorm.corpus.synth import build_inventory, generate_corpus

from tests.test_corpus_synth import make_options


def test_two_clusters_one_dimension():
    model = train_kmeans(np.array([[0.0], [0.0], [10.0], [10.0]]), 2, seed=0)
    assert sorted(model.centroids[:, 0].tolist()) == [0.0, 10.0]
    assert model.inertia[-1] == 0.0


def test_noiseless_centroids_equal_prototypes():
    options = make_options(speaker_sigma=0.0, frame_sigma=0.0)
    frames = np.concatenate(
        [u.target_features for u in generate_corpus(options)])
    model = train_kmeans(frames, options.phonemes, iterations=10, seed=1)
    prototypes = build_inventory(options).target_prototypes.astype(np.float32)
    assert model.inertia[-1] == pytest.approx(0.0, abs=1e-6)
    matched = set()
    for centroid in model.centroids:
        distances = np.abs(prototypes - centroid).max(axis=1)
        index = int(np.argmin(distances))
        assert distances[index] < 1e-5
        matched.add(index)
    assert len(matched) == options.phonemes


def test_noiseless_quantization_is_bijection_onto_phonemes():
    options = make_options(speaker_sigma=0.0, frame_sigma=0.0)
    corpus = generate_corpus(options)
    frames = np.concatenate([u.target_features for u in corpus])
    model = train_kmeans(frames, options.phonemes, seed=2)
    mapping = {}
    for utterance in corpus:
        units = quantize(utterance.target_features, model)
        phonemes = np.repeat(utterance.phoneme_ids,
                             utterance.target_durations)
        for unit, phoneme in zip(units, phonemes):
            assert mapping.setdefault(int(unit), int(phoneme)) == phoneme
    assert len(set(mapping.values())) == len(mapping)


def test_inertia_non_increasing():
    rng = np.random.default_rng(0)
    frames = rng.normal(size=(500, 5))
    model = train_kmeans(frames, 12, iterations=25, seed=3)
    history = np.array(model.inertia)
    assert len(history) >= 2
    assert np.all(np.diff(history) <= 1e-9)
    assert model.iterations <= 25


def test_no_empty_clusters():
    rng = np.random.default_rng(1)
    frames = np.concatenate([rng.normal(0, 0.01, (100, 2)),
                             rng.normal(50, 0.01, (3, 2))])
    model = train_kmeans(frames, 8, seed=4)
    counts = np.bincount(quantize(frames, model), minlength=8)
    assert np.all(np.isfinite(model.centroids))
    assert np.all(counts > 0)


def test_too_few_frames():
    with pytest.raises(ValueError):
        train_kmeans(np.zeros((3, 2)), 4)


def test_quantize_exact_and_tie():
    centroids = np.array([[9.0, 9.0], [5.0, 5.0], [0.0, 0.0], [3.0, 0.0],
                          [7.0, 7.0], [2.0, 0.0]])
    model = KMeansModel(centroids, 0, ())
    assert quantize(np.array([[3.0, 0.0]]), model)[0] == 3
    # equidistant between centroid 2 and centroid 5
    assert quantize(np.array([[1.0, 0.0]]), model)[0] == 2


def test_quantize_matches_brute_force_loop():
    rng = np.random.default_rng(5)
    frames = rng.normal(size=(300, 4))
    model = train_kmeans(frames, 7, seed=6)
    units = quantize(frames, model)
    for frame, unit in zip(frames, units):
        best = None
        best_distance = None
        for index, centroid in enumerate(model.centroids):
            distance = float(((frame - centroid) ** 2).sum())
            if best_distance is None or distance < best_distance:
                best, best_distance = index, distance
        assert unit == best


def test_quantize_dimension_mismatch():
    model = KMeansModel(np.zeros((3, 4)), 0, ())
    with pytest.raises(ShapeError):
        quantize(np.zeros((2, 5)), model)

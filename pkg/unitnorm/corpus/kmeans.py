"""
Module :module:`unitnorm.corpus.kmeans` trains k-means quantizer of
feature frames (k-means++ seeding, Lloyd iterations) and maps frames to
unit ids.
"""

import collections
import logging

import numpy as np

from unitnorm.core.exceptions import ShapeError

__all__ = ['KMeansModel', 'train_kmeans', 'quantize', 'pairwise_sq_distances']

logger = logging.getLogger(__name__)

CHUNK_SIZE = 1024

KMeansModel = collections.namedtuple(
    'KMeansModel', ['centroids', 'iterations', 'inertia'])
KMeansModel.__doc__ = """
Trained quantizer. *centroids* is ``V x H`` array, *iterations* number of
Lloyd iterations run and *inertia* tuple of the sum of squared distances
after each assignment step.
"""


def pairwise_sq_distances(points, centroids):
    """
    Squared Euclidean distances ``N x V`` between *points* and
    *centroids*, computed from exact differences in chunks, so that
    equidistant frames tie exactly.
    """
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    out = np.empty((len(points), len(centroids)))
    for start in range(0, len(points), CHUNK_SIZE):
        chunk = points[start:start + CHUNK_SIZE]
        diff = chunk[:, None, :] - centroids[None, :, :]
        out[start:start + CHUNK_SIZE] = (diff * diff).sum(axis=-1)
    return out


def _assign(points, centroids):
    distances = pairwise_sq_distances(points, centroids)
    labels = np.argmin(distances, axis=1)
    nearest = distances[np.arange(len(points)), labels]
    return labels, nearest


def _kmeans_plus_plus(points, count, rng):
    centroids = np.empty((count, points.shape[1]))
    centroids[0] = points[rng.integers(len(points))]
    nearest = pairwise_sq_distances(points, centroids[:1])[:, 0]
    for i in range(1, count):
        total = nearest.sum()
        if total > 0:
            index = rng.choice(len(points), p=nearest / total)
        else:
            index = rng.integers(len(points))
        centroids[i] = points[index]
        nearest = np.minimum(
            nearest, pairwise_sq_distances(points, centroids[i:i + 1])[:, 0])
    return centroids


def train_kmeans(features, n_clusters, iterations=30, seed=0):
    """
    Cluster rows of *features* into *n_clusters* centroids. Clusters
    which become empty are re-seeded with the point farthest from its
    centroid. Training stops after *iterations* or when assignment does
    not change.
    """
    points = np.asarray(features, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError("K-means expects N x H features, got shape %s"
                         % (points.shape,))
    if n_clusters < 1:
        raise ValueError("Number of clusters must be >= 1, got %d"
                         % n_clusters)
    if len(points) < n_clusters:
        raise ValueError("K-means with %d clusters needs at least as many "
                         "frames, got %d" % (n_clusters, len(points)))
    rng = np.random.default_rng(seed)
    centroids = _kmeans_plus_plus(points, n_clusters, rng)

    history = []
    labels = None
    done = 0
    for done in range(1, iterations + 1):
        new_labels, nearest = _assign(points, centroids)
        history.append(float(nearest.sum()))
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=n_clusters)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        filled = counts > 0
        centroids[filled] = sums[filled] / counts[filled, None]
        empty = np.flatnonzero(~filled)
        if len(empty):
            order = np.argsort(-nearest, kind='stable')
            for cluster, index in zip(empty, order):
                centroids[cluster] = points[index]
            logger.debug("Re-seeded %d empty clusters", len(empty))
    else:
        if iterations > 0:
            _, nearest = _assign(points, centroids)
            history.append(float(nearest.sum()))

    logger.info("K-means with %d clusters finished after %d iterations, "
                "inertia %.4f", n_clusters, done, history[-1] if history
                else float('nan'))
    return KMeansModel(centroids, done, tuple(history))


def quantize(features, model):
    """
    Map every frame of *features* (``M x H``) to the id of the nearest
    centroid, ties broken by the lowest id.
    """
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[1] != model.centroids.shape[1]:
        raise ShapeError("Features of shape %s do not match centroids of "
                         "dimension %d"
                         % (features.shape, model.centroids.shape[1]))
    labels, _ = _assign(features, model.centroids)
    return labels.astype(np.int64)

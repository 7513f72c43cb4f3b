"""Seeded per-class clustering used by the cluster-grouped M updates.

Plain Lloyd iterations over squared euclidean (kmeans) or cityblock
(kmedian) distances. Everything is deterministic given the seed: starts are
drawn from a seeded generator, ties in assignment go to the lowest cluster
id, and an emptied cluster is reseeded on the point farthest from its
center.
"""

import numpy as np

MAX_ROUNDS = 100


class ClusterConfig:
    def __init__(self, fraction=0.2, algo="kmeans", seed=0):
        if not 0.0 < fraction <= 1.0:
            raise ValueError("fraction must be in (0, 1]")
        if algo not in ("kmeans", "kmedian"):
            raise ValueError("algo must be kmeans or kmedian")
        self.fraction = float(fraction)
        self.algo = algo
        self.seed = int(seed)


class Clustering:
    """assignments[i] is the cluster id of row i of the clustered points;
    groups() gives the member-index arrays, one per id, every one non-empty."""

    def __init__(self, assignments, centers):
        self.assignments = np.asarray(assignments, dtype=int)
        self.centers = np.asarray(centers, dtype=float)
        self.k = len(self.centers)

    def groups(self):
        return [np.flatnonzero(self.assignments == c) for c in range(self.k)]


def _distances(points, centers, metric):
    diff = points[:, None, :] - centers[None, :, :]
    if metric == "sqeuclidean":
        return np.einsum("ijk,ijk->ij", diff, diff)
    return np.abs(diff).sum(axis=2)


def _plusplus_start(points, k, rng, metric):
    n = len(points)
    centers = [points[rng.integers(n)]]
    while len(centers) < k:
        d = _distances(points, np.asarray(centers), metric).min(axis=1)
        total = d.sum()
        if total <= 0.0:
            # all remaining mass sits on existing centers; any point will do
            centers.append(points[rng.integers(n)])
            continue
        centers.append(points[rng.choice(n, p=d / total)])
    return np.asarray(centers, dtype=float)


def _lloyd(points, k, seed, metric, center_fn):
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    rng = np.random.default_rng(seed)
    centers = _plusplus_start(points, k, rng, metric)
    assign = None
    for _ in range(MAX_ROUNDS):
        dist = _distances(points, centers, metric)
        new_assign = dist.argmin(axis=1)   # argmin takes the lowest id on ties
        for c in range(k):
            if not np.any(new_assign == c):
                far = int(dist[np.arange(n), new_assign].argmax())
                new_assign[far] = c
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            centers[c] = center_fn(points[assign == c])
    return Clustering(assign, centers)


def kmeans(points, k, seed=0):
    return _lloyd(points, k, seed, "sqeuclidean",
                  lambda block: block.mean(axis=0))


def kmedian(points, k, seed=0):
    return _lloyd(points, k, seed, "cityblock",
                  lambda block: np.median(block, axis=0))


def cluster_per_class(ds, fraction, algo="kmeans", seed=0):
    """Cluster each class separately with k = max(1, round(fraction * class
    size)). Returns (positive groups, negative groups), each a list of index
    arrays into the dataset; no group ever mixes classes."""
    fn = {"kmeans": kmeans, "kmedian": kmedian}[algo]
    out = []
    for cls in (1.0, -1.0):
        idx = np.flatnonzero(ds.y == cls)
        if idx.size == 0:
            out.append([])
            continue
        k = max(1, int(round(fraction * idx.size)))
        clustering = fn(ds.X[idx], k, seed)
        out.append([idx[members] for members in clustering.groups()])
    return tuple(out)

import itertools

import numpy as np
import pytest

from lumen import cluster
from lumen.assess import PollutionIndices


def blob_points(rng, centers, n_each, sd=0.05):
    pts = []
    for c in centers:
        pts.append(rng.normal(loc=c, scale=sd, size=(n_each, len(c))))
    return np.vstack(pts)


def exhaustive_best_inertia(points, k):
    """Minimum k-means objective over every assignment of points to k groups.

    Uses cost = sum ||x_i||^2 - sum_j ||sum_{i in G_j} x_i||^2 / |G_j| and
    enumerates all k^n assignments (point 0 pinned to group 0 by symmetry).
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    tails = np.array(list(itertools.product(range(k), repeat=n - 1)), dtype=np.int8)
    labels = np.hstack([np.zeros((len(tails), 1), dtype=np.int8), tails])
    total_sq = float(np.sum(points * points))
    explained = np.zeros(len(labels))
    for j in range(k):
        mask = labels == j
        counts = mask.sum(axis=1)
        sums = mask @ points
        with np.errstate(invalid="ignore", divide="ignore"):
            term = np.where(counts > 0, np.sum(sums * sums, axis=1) / counts, 0.0)
        explained += term
    return total_sq - float(explained.max())


class TestFitKmeans:
    def test_separated_blobs_recovered(self):
        pts = np.vstack([np.zeros((10, 3)), np.full((10, 3), 10.0)])
        rng = np.random.default_rng(5)
        pts = pts + rng.normal(scale=1e-9, size=pts.shape)  # keep features non-constant
        model = cluster.fit_kmeans(pts, k=2, seed=1)
        low = [cluster.assign_level(model, p) for p in pts[:10]]
        high = [cluster.assign_level(model, p) for p in pts[10:]]
        assert set(low) == {0}
        assert set(high) == {1}

    def test_k_equals_n(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(size=(6, 3))
        model = cluster.fit_kmeans(pts, k=6, seed=0)
        assert model.inertia == pytest.approx(0.0, abs=1e-20)
        levels = {cluster.assign_level(model, p) for p in pts}
        assert levels == set(range(6))

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(9)
        pts = blob_points(rng, [(0, 0, 0), (3, 3, 0), (0, 4, 4)], n_each=4, sd=0.3)
        model = cluster.fit_kmeans(pts, k=3, seed=0)
        # oracle works in the same standardized space the model clusters in
        z = (pts - model.feature_means) / model.feature_sds
        assert model.inertia == pytest.approx(exhaustive_best_inertia(z, 3), abs=1e-9)

    def test_inertia_trace_non_increasing(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(size=(40, 3))
        for seed in range(5):
            model = cluster.fit_kmeans(pts, k=4, seed=seed)
            trace = model.inertia_trace
            assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))

    def test_too_few_points(self):
        with pytest.raises(ValueError, match="at least"):
            cluster.fit_kmeans(np.zeros((3, 3)) + np.arange(3)[:, None], k=4, seed=0)

    def test_degenerate_feature(self):
        pts = np.column_stack([np.arange(10.0), np.arange(10.0), np.full(10, 7.0)])
        with pytest.raises(ValueError, match="degenerate feature"):
            cluster.fit_kmeans(pts, k=2, seed=0)

    def test_deterministic_in_seed(self):
        rng = np.random.default_rng(8)
        pts = rng.uniform(size=(30, 3))
        a = cluster.fit_kmeans(pts, k=4, seed=123)
        b = cluster.fit_kmeans(pts, k=4, seed=123)
        assert cluster.model_to_json(a) == cluster.model_to_json(b)

    def test_most_polluted_is_top_level(self):
        pts = np.vstack([np.zeros((10, 3)), np.full((10, 3), 10.0)])
        pts += np.random.default_rng(0).normal(scale=0.01, size=pts.shape)
        model = cluster.fit_kmeans(pts, k=2, seed=4)
        assert cluster.assign_level(model, np.array([10.0, 10.0, 10.0])) == 1


class TestAssignLevel:
    def model(self):
        return cluster.LevelModel(
            k=3,
            centroids=np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 9.0, 0.0]]),
            feature_means=np.zeros(3),
            feature_sds=np.ones(3),
            level_order=[2, 1, 0],
            seed=0,
            inertia=0.0,
            n_iter=0,
            inertia_trace=[],
        )

    def test_centroid_back_image(self):
        model = self.model()
        assert cluster.assign_level(model, np.array([1.0, 0.0, 0.0])) == 2
        assert cluster.assign_level(model, np.array([-1.0, 0.0, 0.0])) == 1

    def test_tie_goes_to_smaller_level(self):
        # (0,0,0) is equidistant from the level-2 and level-1 centroids
        assert cluster.assign_level(self.model(), np.zeros(3)) == 1

    def test_accepts_pollution_indices(self):
        model = self.model()
        ind = PollutionIndices(tnl=1.0, nld=0.0, nlsd=0.0, score=1.0)
        assert cluster.assign_level(model, ind) == 2

    def test_matches_distance_table(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(size=(50, 3))
        model = cluster.fit_kmeans(pts, k=4, seed=2)
        for p in rng.uniform(size=(100, 3)):
            z = (p - model.feature_means) / model.feature_sds
            d = np.sum((model.centroids - z) ** 2, axis=1)
            want = model.level_order[int(np.argmin(d))]
            assert cluster.assign_level(model, p) == want

    def test_rescaling_invariance(self):
        rng = np.random.default_rng(6)
        pts = rng.uniform(1.0, 2.0, size=(60, 3))
        scale = np.array([100.0, 0.01, 7.0])
        a = cluster.fit_kmeans(pts, k=4, seed=9)
        b = cluster.fit_kmeans(pts * scale, k=4, seed=9)
        for p in rng.uniform(1.0, 2.0, size=(50, 3)):
            assert cluster.assign_level(a, p) == cluster.assign_level(b, p * scale)


class TestPersistence:
    def test_json_round_trip(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(size=(20, 3))
        model = cluster.fit_kmeans(pts, k=3, seed=5)
        again = cluster.model_from_json(cluster.model_to_json(model))
        assert np.array_equal(again.centroids, model.centroids)
        assert again.level_order == model.level_order
        for p in rng.uniform(size=(20, 3)):
            assert cluster.assign_level(again, p) == cluster.assign_level(model, p)

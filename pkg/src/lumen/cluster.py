"""Pollution-level assignment by k-means over the three indices.

Features are standardized internally so tnl's raw magnitude cannot swamp
nlsd. Fitted levels are ordered by centroid coordinate sum: level k-1 is
the most polluted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from lumen.assess import PollutionIndices


@dataclass
class LevelModel:
    k: int
    centroids: np.ndarray  # (k, 3), standardized coordinates
    feature_means: np.ndarray  # (3,)
    feature_sds: np.ndarray  # (3,)
    level_order: list[int]  # centroid index -> level
    seed: int
    inertia: float
    n_iter: int
    inertia_trace: list[float]

    def level_of_centroid(self, centroid_idx: int) -> int:
        return self.level_order[centroid_idx]


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(0, n))
    centroids[0] = points[first]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass on already-chosen locations; take any point
            idx = int(np.argmax(d2 > -1.0))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[i] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, float]:
    d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(len(points)), labels].sum())
    return labels, inertia


def fit_kmeans(
    points,
    k: int = 4,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> LevelModel:
    """Seeded k-means++ plus Lloyd iterations over standardized features.

    Empty clusters are repaired by reseeding on the point farthest from
    its assigned centroid. Inertia is recorded per iteration and asserted
    non-increasing.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = len(pts)
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    means = pts.mean(axis=0)
    sds = pts.std(axis=0)
    if np.any(sds == 0.0):
        degenerate = [int(i) for i in np.where(sds == 0.0)[0]]
        raise ValueError(f"degenerate feature (constant column) at index {degenerate}")
    z = (pts - means) / sds

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(z, k, rng)
    trace: list[float] = []
    labels, inertia = _assign(z, centroids)
    trace.append(inertia)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new_centroids = centroids.copy()
        for j in range(k):
            mask = labels == j
            if np.any(mask):
                new_centroids[j] = z[mask].mean(axis=0)
        # repair empty clusters with the worst-served points
        empties = [j for j in range(k) if not np.any(labels == j)]
        if empties:
            d_own = np.sum((z - new_centroids[labels]) ** 2, axis=1)
            for j in empties:
                far = int(np.argmax(d_own))
                new_centroids[j] = z[far]
                d_own[far] = -1.0
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        labels, inertia = _assign(z, centroids)
        if inertia > trace[-1] + 1e-9 * max(1.0, trace[-1]):
            raise AssertionError(
                f"inertia increased at iteration {n_iter}: {trace[-1]} -> {inertia}"
            )
        trace.append(inertia)
        if shift < tol:
            break

    order = np.argsort(centroids.sum(axis=1), kind="stable")
    level_order = [0] * k
    for level, centroid_idx in enumerate(order):
        level_order[int(centroid_idx)] = level
    return LevelModel(
        k=k,
        centroids=centroids,
        feature_means=means,
        feature_sds=sds,
        level_order=level_order,
        seed=seed,
        inertia=trace[-1],
        n_iter=n_iter,
        inertia_trace=trace,
    )


def assign_level(model: LevelModel, indices: PollutionIndices | np.ndarray) -> int:
    """Level of the nearest centroid; ties go to the smaller level."""
    if isinstance(indices, PollutionIndices):
        point = np.array([indices.tnl, indices.nld, indices.nlsd])
    else:
        point = np.asarray(indices, dtype=np.float64)
    z = (point - model.feature_means) / model.feature_sds
    d2 = np.sum((model.centroids - z) ** 2, axis=1)
    best = min(range(model.k), key=lambda j: (d2[j], model.level_order[j]))
    return model.level_order[best]


def assign_levels(
    model: LevelModel, table: dict[str, PollutionIndices]
) -> dict[str, PollutionIndices]:
    """New indices table with the level field filled from the model."""
    return {aid: ind.with_level(assign_level(model, ind)) for aid, ind in table.items()}


def model_to_json(model: LevelModel) -> str:
    payload = {
        "k": model.k,
        "centroids": model.centroids.tolist(),
        "means": model.feature_means.tolist(),
        "sds": model.feature_sds.tolist(),
        "level_order": model.level_order,
        "seed": model.seed,
        "inertia": model.inertia,
        "n_iter": model.n_iter,
    }
    return json.dumps(payload, separators=(",", ":"), sort_keys=True)


def model_from_json(text: str) -> LevelModel:
    payload = json.loads(text)
    return LevelModel(
        k=payload["k"],
        centroids=np.asarray(payload["centroids"], dtype=np.float64),
        feature_means=np.asarray(payload["means"], dtype=np.float64),
        feature_sds=np.asarray(payload["sds"], dtype=np.float64),
        level_order=list(payload["level_order"]),
        seed=payload["seed"],
        inertia=payload["inertia"],
        n_iter=payload["n_iter"],
        inertia_trace=[],
    )

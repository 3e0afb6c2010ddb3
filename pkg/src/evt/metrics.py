"""Clustering of latent representations and the two scores used to grade it.

Accuracy is the best one-to-one cluster-to-class matching (solved as a
linear assignment problem on the contingency table); NMI normalises mutual
information by the geometric mean of the partition entropies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import nn


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    k: int
    inertia: float

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ValueError("cluster labels outside [0, k)")


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # computed in float64: the expansion ||x||^2 - 2xc + ||c||^2 loses
    # precision in float32 and can go slightly negative
    p2 = np.einsum("ij,ij->i", points, points)[:, None]
    c2 = np.einsum("ij,ij->i", centers, centers)[None, :]
    d = p2 + c2 - 2.0 * points @ centers.T
    np.maximum(d, 0.0, out=d)
    return d


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=points.dtype)
    centers[0] = points[rng.integers(n)]
    closest = _squared_distances(points, centers[:1]).ravel()
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[i] = points[rng.integers(n)]
        else:
            centers[i] = points[rng.choice(n, p=closest / total)]
        d = _squared_distances(points, centers[i : i + 1]).ravel()
        np.minimum(closest, d, out=closest)
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int,
           tol: float) -> tuple[np.ndarray, np.ndarray, float]:
    k = centers.shape[0]
    labels = np.zeros(points.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        d = _squared_distances(points, centers)
        labels = d.argmin(axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = points[labels == j]
            if members.shape[0]:
                new_centers[j] = members.mean(axis=0)
            else:
                # keep k clusters alive: restart the empty centroid at the
                # point currently worst represented
                farthest = d.min(axis=1).argmax()
                new_centers[j] = points[farthest]
        shift = float(np.abs(new_centers - centers).max())
        centers = new_centers
        if shift <= tol:
            break
    d = _squared_distances(points, centers)
    labels = d.argmin(axis=1)
    inertia = float(d[np.arange(points.shape[0]), labels].sum())
    return labels, centers, inertia


def kmeans(points: np.ndarray, k: int, seed: int, restarts: int = 10,
           max_iter: int = 100, tol: float = 1e-6) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ seeding, best of ``restarts`` by inertia.

    Deterministic for a given seed; restarts draw independent child seeds so
    a parallel implementation would reproduce sequential results.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-d array")
    if not np.isfinite(points).all():
        raise ValueError("points contain non-finite values")
    n = points.shape[0]
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds sample count {n}")
    if restarts < 1:
        raise ValueError("need at least one restart")
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    best: tuple[np.ndarray, float] | None = None
    for child in seeds:
        rng = np.random.default_rng(child)
        centers = _plusplus_init(points, k, rng)
        labels, _, inertia = _lloyd(points, centers, max_iter, tol)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    return ClusterAssignment(best[0], k, best[1])


def contingency(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Count matrix with one row per predicted cluster, one column per class."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch {pred.shape} vs {truth.shape}")
    pred_ids, pred_idx = np.unique(pred, return_inverse=True)
    true_ids, true_idx = np.unique(truth, return_inverse=True)
    table = np.zeros((pred_ids.size, true_ids.size), dtype=np.int64)
    np.add.at(table, (pred_idx, true_idx), 1)
    return table


def optimal_assignment(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-cost one-to-one assignment (Hungarian method) on a cost matrix."""
    return linear_sum_assignment(np.asarray(cost))


def clustering_accuracy(pred, truth) -> float:
    """Fraction matched under the best one-to-one cluster-to-class mapping.

    The contingency table is padded square and solved as an assignment
    problem, so the score is exact rather than greedy.
    """
    labels = pred.labels if isinstance(pred, ClusterAssignment) else pred
    labels = np.asarray(labels, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if labels.shape != truth.shape:
        raise ValueError(f"length mismatch {labels.shape} vs {truth.shape}")
    table = contingency(labels, truth)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: table.shape[0], : table.shape[1]] = table
    rows, cols = linear_sum_assignment(padded, maximize=True)
    matched = padded[rows, cols].sum()
    return float(matched) / labels.size


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the partition entropies.

    Natural logarithms throughout.  Degenerate conventions: two identical
    single-cluster partitions score 1; otherwise a zero-entropy partition
    scores 0.
    """
    labels = pred.labels if isinstance(pred, ClusterAssignment) else pred
    labels = np.asarray(labels, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if labels.shape != truth.shape:
        raise ValueError(f"length mismatch {labels.shape} vs {truth.shape}")
    if labels.size == 0:
        raise ValueError("empty partitions")
    table = contingency(labels, truth).astype(np.float64)
    n = labels.size
    joint = table / n
    p_pred = joint.sum(axis=1)
    p_true = joint.sum(axis=0)
    h_pred = float(-(p_pred * np.log(p_pred, where=p_pred > 0,
                                     out=np.zeros_like(p_pred))).sum())
    h_true = float(-(p_true * np.log(p_true, where=p_true > 0,
                                     out=np.zeros_like(p_true))).sum())
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    if h_pred == 0.0 or h_true == 0.0:
        return 0.0
    outer = p_pred[:, None] * p_true[None, :]
    nz = joint > 0
    mi = float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())
    value = mi / np.sqrt(h_pred * h_true)
    return float(min(max(value, 0.0), 1.0))


def evaluate(model: "nn.Network", x: np.ndarray, truth: np.ndarray, k: int,
             seed: int, restarts: int = 10) -> tuple[float, float]:
    """Encode ``x`` to the bottleneck, cluster, and score against ``truth``."""
    latents = model.encode(np.asarray(x, dtype=model.layers[0].weights.dtype))
    assignment = kmeans(latents, k, seed, restarts)
    return clustering_accuracy(assignment, truth), nmi(assignment, truth)

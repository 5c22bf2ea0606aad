"""Learnable feature reweighting and Gaussian-kernel affinities.

Each view v rescales the features of every point by a weight vector
alpha_v (Hadamard product). Affinities between reweighted points are
exp(-||xi - xj||^2 / (2 sigma^2)), stored sparsely above a cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .data import PointCloud


def init_view_weights(num_views: int, d: int, seed: int) -> np.ndarray:
    """(V, d) weight matrix, ones plus small uniform noise in [-0.01, 0.01]."""
    rng = np.random.default_rng(seed)
    return 1.0 + rng.uniform(-0.01, 0.01, size=(num_views, d))


def reweight(cloud: PointCloud, alpha_v: np.ndarray) -> PointCloud:
    """Elementwise feature rescaling; shape preserved."""
    alpha_v = np.asarray(alpha_v, dtype=np.float64)
    if alpha_v.shape != (cloud.d,):
        raise ValueError(f"alpha has shape {alpha_v.shape}, cloud has d={cloud.d}")
    return PointCloud(cloud.points * alpha_v[None, :], id=cloud.id)


@dataclass(frozen=True)
class AffinityGraph:
    """Symmetric sparse affinity matrix in (0, 1]; diagonal is exactly 1."""

    weights: sp.csr_matrix
    n: int


def pairwise_sq_dists(points: np.ndarray) -> np.ndarray:
    """Dense squared Euclidean distances with an exactly-zero diagonal."""
    g = points @ points.T
    sq = np.diag(g)
    d2 = sq[:, None] + sq[None, :] - 2.0 * g
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def kernel_affinity(cloud: PointCloud, sigma: float, cutoff: float = 0.0) -> AffinityGraph:
    """All-pairs Gaussian affinities, keeping only pairs with affinity >= cutoff.

    Pairs below the cutoff become structural zeros. The matrix is built
    from the upper triangle and mirrored, so it is symmetric exactly.
    """
    if not (sigma > 0):
        raise ValueError("sigma must be positive")
    if not (0.0 <= cutoff < 1.0):
        raise ValueError("cutoff must lie in [0, 1)")
    pts = cloud.points
    n = pts.shape[0]
    d2 = pairwise_sq_dists(pts)
    aff = np.exp(d2 / (-2.0 * sigma * sigma))
    iu, ju = np.triu_indices(n, k=1)
    upper = aff[iu, ju]
    keep = upper >= cutoff
    ii, jj, vv = iu[keep], ju[keep], upper[keep]
    rows = np.concatenate([ii, jj, np.arange(n)])
    cols = np.concatenate([jj, ii, np.arange(n)])
    vals = np.concatenate([vv, vv, np.ones(n)])
    w = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return AffinityGraph(weights=w, n=n)


def threshold_edges(graph: AffinityGraph, epsilon: float) -> np.ndarray:
    """(E, 2) array of vertex pairs i < j with affinity >= epsilon, lex sorted."""
    coo = sp.triu(graph.weights, k=1).tocoo()
    keep = coo.data >= epsilon
    edges = np.column_stack([coo.row[keep], coo.col[keep]]).astype(np.int64)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return edges[order]

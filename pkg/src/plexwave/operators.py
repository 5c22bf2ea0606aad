"""Hodge Laplacians, simplicial random walks, diffusion, and the simplicial graph.

The k-Hodge Laplacian is the sum of the lower term (transposed k-boundary
times itself) and the upper term (k+1-boundary times its transpose), with
the lower term absent at k=0 and the upper term absent at k=K. The random
walk normalizes its columns to sum to one; diffusion applies the walk
repeatedly, never materializing dense powers. A dense eigensolver handles
the heat equation for the verification suite only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .complexes import SimplicialComplex
from .errors import PlexwaveError

HEAT_DENSE_CAP = 2000


@dataclass(frozen=True)
class HodgeLaplacian:
    matrix: sp.csr_matrix
    order: int


@dataclass(frozen=True)
class RandomWalk:
    """Column-stochastic transition matrix over k-simplices plus its degrees."""

    matrix: sp.csr_matrix
    degree: np.ndarray


def hodge_laplacian(boundaries, k: int) -> HodgeLaplacian:
    """Assemble the order-k Hodge Laplacian from the boundary matrices."""
    max_order = len(boundaries) - 1
    if not (0 <= k <= max_order):
        raise ValueError(f"order {k} outside [0, {max_order}]")
    if k >= 1:
        nk = boundaries[k].shape[1]
    elif max_order >= 1:
        nk = boundaries[1].shape[0]
    else:
        raise ValueError("an order-0 complex has no boundary matrices; use all_hodge_laplacians")
    delta = sp.csr_matrix((nk, nk))
    if k >= 1:
        delta = delta + boundaries[k].T @ boundaries[k]
    if k + 1 <= max_order:
        delta = delta + boundaries[k + 1] @ boundaries[k + 1].T
    return HodgeLaplacian(matrix=delta.tocsr(), order=k)


def all_hodge_laplacians(complex: SimplicialComplex, boundaries) -> list:
    """Laplacians for every order 0..K (handles the K=0 corner directly)."""
    if complex.max_order == 0:
        n = complex.n
        return [HodgeLaplacian(matrix=sp.csr_matrix((n, n)), order=0)]
    return [hodge_laplacian(boundaries, k) for k in range(complex.max_order + 1)]


def random_walk(delta: HodgeLaplacian, oriented: bool = False) -> RandomWalk:
    """Column-normalize the (absolute, if oriented) Laplacian into a stochastic matrix.

    Simplices with zero degree become absorbing states: their column is the
    corresponding unit vector.
    """
    a = delta.matrix.copy()
    if oriented:
        a.data = np.abs(a.data)
    a.eliminate_zeros()
    deg = np.asarray(a.sum(axis=0)).ravel()
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / deg[nz]
    p = (a @ sp.diags(inv)).tocsr()
    if np.any(~nz):
        isolated = np.flatnonzero(~nz)
        eye = sp.csr_matrix(
            (np.ones(isolated.size), (isolated, isolated)), shape=a.shape
        )
        p = (p + eye).tocsr()
    return RandomWalk(matrix=p, degree=deg)


def dyadic_diffuse(walk: RandomWalk, x: np.ndarray, num_scales: int) -> list:
    """[P^1 X, P^2 X, P^4 X, ..., P^(2^J) X] by repeated sparse application."""
    if x.shape[0] != walk.matrix.shape[0]:
        raise ValueError(f"x has {x.shape[0]} rows, walk is {walk.matrix.shape[0]}x{walk.matrix.shape[1]}")
    p = walk.matrix
    out = [p @ x]
    for j in range(1, num_scales + 1):
        y = out[-1]
        for _ in range(2 ** (j - 1)):
            y = p @ y
        out.append(y)
    return out


def heat_solve(delta: HodgeLaplacian, u0: np.ndarray, t: float) -> np.ndarray:
    """exp(-t * Delta_k) u0 via dense symmetric eigendecomposition.

    Verification path only; sizes above HEAT_DENSE_CAP must use the sparse
    diffusion operators instead.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    nk = delta.matrix.shape[0]
    if nk > HEAT_DENSE_CAP:
        raise PlexwaveError(
            f"heat_solve is a dense verification path capped at {HEAT_DENSE_CAP} simplices "
            f"(got {nk}); use random_walk + dyadic_diffuse for large complexes"
        )
    lam, vec = np.linalg.eigh(delta.matrix.toarray())
    u = np.asarray(u0, dtype=np.float64)
    out = vec @ (np.exp(-t * lam)[:, None] * (vec.T @ u.reshape(nk, -1)))
    return out.reshape(u.shape)


@dataclass(frozen=True)
class SimplicialGraph:
    """All simplices as one vertex set, ordered by ascending order then lex.

    `incidence` is the symmetric face/cofacet incidence over that ordering
    (signed if oriented); `laplacian` is its square, which for oriented
    complexes is exactly block-diagonal with the per-order Hodge Laplacians.
    `adjacency` holds the upper/lower-adjacency edges of the graph itself.
    """

    order_sizes: tuple
    offsets: tuple
    incidence: sp.csr_matrix
    adjacency: sp.csr_matrix
    laplacian: sp.csr_matrix

    @property
    def total(self) -> int:
        return self.offsets[-1]

    def block(self, matrix: sp.spmatrix, k: int, kk: int) -> sp.csr_matrix:
        return matrix.tocsr()[self.offsets[k]:self.offsets[k + 1], self.offsets[kk]:self.offsets[kk + 1]]


def simplicial_graph(complex: SimplicialComplex, boundaries) -> SimplicialGraph:
    sizes = tuple(s.shape[0] for s in complex.simplices)
    offsets = tuple(int(v) for v in np.concatenate([[0], np.cumsum(sizes)]))
    total = offsets[-1]
    norders = len(sizes)
    blocks = [[None] * norders for _ in range(norders)]
    for k in range(norders):
        blocks[k][k] = sp.csr_matrix((sizes[k], sizes[k]))
    for k in range(1, norders):
        blocks[k - 1][k] = boundaries[k]
        blocks[k][k - 1] = boundaries[k].T
    m = sp.bmat(blocks, format="csr")

    # upper/lower adjacency: same-order pairs sharing a cofacet or a face
    pattern = m.copy()
    pattern.data = np.abs(pattern.data)
    two_step = (pattern @ pattern).tocoo()
    same_order = np.zeros(total, dtype=np.int64)
    for k in range(len(sizes)):
        same_order[offsets[k]:offsets[k + 1]] = k
    keep = (same_order[two_step.row] == same_order[two_step.col]) & (two_step.row != two_step.col)
    adj = sp.csr_matrix(
        (np.ones(int(keep.sum())), (two_step.row[keep], two_step.col[keep])),
        shape=(total, total),
    )
    adj.data[:] = 1.0

    lap = (m @ m.T).tocsr()
    return SimplicialGraph(
        order_sizes=sizes, offsets=offsets, incidence=m, adjacency=adj, laplacian=lap
    )


def dump_operator(matrix: sp.spmatrix, fh) -> None:
    """Coordinate triplet text dump: row, col, value per line."""
    coo = matrix.tocoo()
    for r, c, v in zip(coo.row, coo.col, coo.data):
        fh.write(f"{r}\t{c}\t{v!r}\n")

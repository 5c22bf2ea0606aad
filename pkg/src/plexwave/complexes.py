"""Vietoris-Rips (clique) complexes and their boundary matrices.

A k-simplex is a sorted tuple of k+1 vertex indices; the VR complex at
threshold epsilon is the clique complex of the graph of pairs whose
affinity clears the threshold. Enumeration proceeds by ordered extension:
each k-simplex is extended only with vertices greater than its maximum
that neighbor all of its vertices, so every clique is produced exactly
once, in lexicographic order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SimplexBudgetError
from .views import AffinityGraph, threshold_edges

DEFAULT_SIMPLEX_BUDGET = 5_000_000

_EXTENSION_CHUNK = 4096  # rows of the candidate mask materialized at once


@dataclass(frozen=True)
class SimplicialComplex:
    """Simplices of orders 0..K, each an (N_k, k+1) int array in lex order."""

    simplices: tuple
    orientation: str = "unoriented"

    @property
    def max_order(self) -> int:
        return len(self.simplices) - 1

    @property
    def n(self) -> int:
        return self.simplices[0].shape[0]

    def counts(self) -> list:
        return [s.shape[0] for s in self.simplices]

    def dump(self, fh) -> None:
        """Debug dump: one line per simplex, order then sorted vertices, tab-separated."""
        for k, simp in enumerate(self.simplices):
            for row in simp:
                fh.write("\t".join([str(k)] + [str(v) for v in row]) + "\n")


def _encode_rows(rows: np.ndarray, base: int) -> np.ndarray:
    """Pack each sorted vertex tuple into one int64, preserving lex order."""
    code = np.zeros(rows.shape[0], dtype=np.int64)
    for c in range(rows.shape[1]):
        code = code * base + rows[:, c]
    return code


def build_vr_complex(
    graph: AffinityGraph,
    epsilon: float,
    max_order: int,
    budget: int = DEFAULT_SIMPLEX_BUDGET,
    orientation: str = "unoriented",
) -> SimplicialComplex:
    """Clique complex of the epsilon-threshold graph, capped at max_order.

    Raises SimplexBudgetError if any order would exceed `budget` simplices.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1)")
    edges = threshold_edges(graph, epsilon)
    return clique_complex(graph.n, edges, max_order, budget=budget, orientation=orientation)


def clique_complex(
    n: int,
    edges: np.ndarray,
    max_order: int,
    budget: int = DEFAULT_SIMPLEX_BUDGET,
    orientation: str = "unoriented",
) -> SimplicialComplex:
    """Clique complex over an explicit lex-sorted (E, 2) edge list."""
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    levels = [np.arange(n, dtype=np.int64)[:, None]]
    if max_order == 0:
        return SimplicialComplex(simplices=tuple(levels), orientation=orientation)

    if edges.shape[0] > budget:
        raise SimplexBudgetError(order=1, count=edges.shape[0], budget=budget)
    levels.append(edges)

    if n > 0 and max_order > 1:
        adj = np.zeros((n, n), dtype=bool)
        adj[edges[:, 0], edges[:, 1]] = True
        adj[edges[:, 1], edges[:, 0]] = True
        col = np.arange(n)
        for k in range(2, max_order + 1):
            prev = levels[k - 1]
            if prev.shape[0] == 0:
                levels.append(np.empty((0, k + 1), dtype=np.int64))
                continue
            pieces = []
            total = 0
            for lo in range(0, prev.shape[0], _EXTENSION_CHUNK):
                chunk = prev[lo : lo + _EXTENSION_CHUNK]
                cand = adj[chunk[:, 0]].copy()
                for c in range(1, k):
                    cand &= adj[chunk[:, c]]
                cand &= col[None, :] > chunk[:, -1][:, None]
                rows, cols = np.nonzero(cand)
                total += rows.size
                if total > budget:
                    raise SimplexBudgetError(order=k, count=total, budget=budget)
                pieces.append(np.column_stack([chunk[rows], cols]))
            levels.append(
                np.concatenate(pieces, axis=0) if pieces else np.empty((0, k + 1), dtype=np.int64)
            )
    elif max_order > 1:
        levels.extend(np.empty((0, k + 1), dtype=np.int64) for k in range(2, max_order + 1))

    return SimplicialComplex(simplices=tuple(levels), orientation=orientation)


def boundary_matrices(complex: SimplicialComplex):
    """Per-order sparse boundary matrices; entry convention follows the orientation.

    Returns a list `B` of length K+1 with B[0] = None and B[k] of shape
    (N_{k-1}, N_k) mapping k-simplices to their (k-1)-faces. Oriented
    entries are (-1)^p for the face obtained by deleting the p-th vertex
    (vertices in increasing order); unoriented entries are 1.
    """
    signed = complex.orientation == "oriented"
    n = complex.n
    out = [None]
    for k in range(1, complex.max_order + 1):
        simp = complex.simplices[k]
        faces_level = complex.simplices[k - 1]
        nk, nf = simp.shape[0], faces_level.shape[0]
        if nk == 0:
            out.append(sp.csr_matrix((nf, 0)))
            continue
        face_codes = _encode_rows(faces_level, n)
        rows_idx, cols_idx, vals = [], [], []
        for p in range(k + 1):
            fc = _encode_rows(np.delete(simp, p, axis=1), n)
            idx = np.searchsorted(face_codes, fc)
            if np.any(idx >= nf) or np.any(face_codes[idx] != fc):
                raise RuntimeError(f"face missing at order {k - 1}: complex is not face-closed")
            rows_idx.append(idx)
            cols_idx.append(np.arange(nk, dtype=np.int64))
            vals.append(np.full(nk, (-1.0) ** p if signed else 1.0))
        b = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows_idx), np.concatenate(cols_idx))),
            shape=(nf, nk),
        )
        out.append(b)
    return out


def lift_features(complex: SimplicialComplex, boundaries, x0: np.ndarray):
    """Per-order features: X_{k+1} is the transposed boundary map applied to X_k."""
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape[0] != complex.n:
        raise ValueError(f"x0 has {x0.shape[0]} rows, complex has {complex.n} vertices")
    feats = [x0]
    for k in range(1, complex.max_order + 1):
        feats.append(boundaries[k].T @ feats[k - 1])
    return feats


def face_closure_ok(complex: SimplicialComplex) -> bool:
    """Exhaustive check that every face of every stored simplex is stored."""
    n = complex.n
    for k in range(1, complex.max_order + 1):
        codes = _encode_rows(complex.simplices[k - 1], n)
        simp = complex.simplices[k]
        if simp.shape[0] == 0:
            continue
        for p in range(k + 1):
            face_code = _encode_rows(np.delete(simp, p, axis=1), n)
            idx = np.searchsorted(codes, face_code)
            if np.any(idx >= codes.size) or np.any(codes[np.minimum(idx, codes.size - 1)] != face_code):
                return False
    return True

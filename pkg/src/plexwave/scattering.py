"""Simplicial diffusion-wavelet scattering features.

Wavelets are differences of dyadic random-walk powers; first-order
coefficients take the absolute value of a wavelet response, second-order
coefficients re-wavelet the first-order output at a strictly coarser
scale. Per-simplex coefficients are pooled over the simplex axis and
concatenated (view, then order, then block type, then scale, then feature
column) into one fixed-length vector per cloud.

The V per-view complexes of a cloud are embedded disjointly into one
union complex (view v's vertex i becomes v*n+i), so every operator is
block-diagonal across views and each diffusion chain runs once per order
instead of once per (view, order); pooling then reduces over per-view
segments of the simplex lists. The result is identical to running views
separately.

The forward pass records what exact reverse-mode gradients need: chains
are linear, so only absolute-value sign masks and max-pooling argmax
positions are cached. Complex structure is treated as constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complexes import SimplicialComplex, boundary_matrices, clique_complex, lift_features
from .data import PointCloud, RunConfig
from .operators import RandomWalk, all_hodge_laplacians, dyadic_diffuse, random_walk
from .views import kernel_affinity, threshold_edges


def wavelet_transform(diffused: list, j: int) -> np.ndarray:
    """Difference of the stored dyadic powers 2^j and 2^(j-1)."""
    num_scales = len(diffused) - 1
    if not (1 <= j <= num_scales):
        raise ValueError(f"scale j={j} outside 1..{num_scales}")
    return diffused[j] - diffused[j - 1]


def scatter_order1(x: np.ndarray, walk: RandomWalk, num_scales: int) -> list:
    """First-order coefficients |Psi_j x| for j = 1..J."""
    diffused = dyadic_diffuse(walk, x, num_scales)
    return [np.abs(wavelet_transform(diffused, j)) for j in range(1, num_scales + 1)]


def scatter_order2(x: np.ndarray, walk: RandomWalk, num_scales: int) -> list:
    """Second-order coefficients |Psi_j' |Psi_j x|| for j < j', in lex order."""
    diffused = dyadic_diffuse(walk, x, num_scales)
    out = []
    for j in range(1, num_scales + 1):
        inner = np.abs(wavelet_transform(diffused, j))
        inner_diffused = dyadic_diffuse(walk, inner, num_scales)
        for j2 in range(j + 1, num_scales + 1):
            out.append(np.abs(wavelet_transform(inner_diffused, j2)))
    return out


# ---------------------------------------------------------------------------
# pooling

def pooling_stats(pooling: str) -> tuple:
    return ("mean", "max") if pooling == "mean+max" else (pooling,)


def pool_block(m: np.ndarray, pooling: str, d: int):
    """Reduce an (N, d) block over the simplex axis; empty blocks pool to zeros.

    Returns (vector, aux) where aux carries the argmax rows for max pooling.
    """
    stats = pooling_stats(pooling)
    if m.shape[0] == 0:
        return np.zeros(d * len(stats)), None
    if pooling == "mean":
        return m.mean(axis=0), None
    if pooling == "sum":
        return m.sum(axis=0), None
    amax = np.argmax(m, axis=0)
    vec = np.column_stack([m.mean(axis=0), m[amax, np.arange(d)]]).ravel()
    return vec, amax


def unpool_block(gvec: np.ndarray, nk: int, pooling: str, aux, d: int) -> np.ndarray:
    """Adjoint of pool_block: spread a pooled gradient back over N rows."""
    if nk == 0:
        return np.zeros((0, d))
    if pooling == "mean":
        return np.tile(gvec / nk, (nk, 1))
    if pooling == "sum":
        return np.tile(gvec, (nk, 1))
    g2 = gvec.reshape(d, 2)
    out = np.tile(g2[:, 0] / nk, (nk, 1))
    out[aux, np.arange(d)] += g2[:, 1]
    return out


def pool_and_concat(blocks, pooling: str, d: int) -> np.ndarray:
    """Pool each (N_k, d) block and concatenate, in the given deterministic order."""
    return np.concatenate([pool_block(np.asarray(b, dtype=np.float64), pooling, d)[0] for b in blocks])


# ---------------------------------------------------------------------------
# feature layout

def block_descriptors(config: RunConfig) -> list:
    """Blocks per (view, order): raw, low-pass, first-order scales, second-order pairs."""
    descs = []
    if config.include_raw:
        descs.append(("raw", None, None))
    if config.include_lowpass:
        descs.append(("low", None, None))
    for j in range(1, config.num_scales + 1):
        descs.append(("s1", j, None))
    for j in range(1, config.num_scales + 1):
        for j2 in range(j + 1, config.num_scales + 1):
            descs.append(("s2", j, j2))
    return descs


def feature_length(config: RunConfig, d: int) -> int:
    return (
        config.num_views
        * (config.max_order + 1)
        * len(block_descriptors(config))
        * d
        * len(pooling_stats(config.pooling))
    )


def feature_names(config: RunConfig, d: int) -> list:
    names = []
    stats = pooling_stats(config.pooling)
    for v in range(config.num_views):
        for k in range(config.max_order + 1):
            for name, j, j2 in block_descriptors(config):
                tag = name if j is None else (f"{name}_{j}" if j2 is None else f"{name}_{j}_{j2}")
                for c in range(d):
                    for stat in stats:
                        names.append(f"v{v}_k{k}_{tag}_f{c}_{stat}")
    return names


# ---------------------------------------------------------------------------
# multi-view cloud structure

@dataclass
class CloudStructure:
    """Frozen combinatorics of one cloud: the union of its V view complexes."""

    complex: SimplicialComplex
    boundaries: list
    walks: list
    walks_t: list
    segments: list  # per order: (V+1,) offsets of the view segments
    n: int

    def view_counts(self) -> list:
        """Per-view simplex counts by order."""
        return [np.diff(seg).tolist() for seg in self.segments]


def build_cloud_structure(points: np.ndarray, alpha: np.ndarray, config: RunConfig) -> CloudStructure:
    """Threshold each reweighted view and embed all views in one complex."""
    n = points.shape[0]
    v = config.num_views
    edge_parts = []
    for i in range(v):
        cloud = PointCloud(points * alpha[i][None, :], id=f"view{i}")
        graph = kernel_affinity(cloud, config.bandwidth, cutoff=config.vr_threshold)
        edge_parts.append(threshold_edges(graph, config.vr_threshold) + i * n)
    edges = np.concatenate(edge_parts, axis=0)
    cx = clique_complex(
        v * n, edges, config.max_order,
        budget=config.simplex_budget, orientation=config.orientation,
    )
    bs = boundary_matrices(cx)
    laps = all_hodge_laplacians(cx, bs)
    oriented = config.orientation == "oriented"
    walks, walks_t, segments = [], [], []
    bounds = n * np.arange(v + 1)
    for k, lap in enumerate(laps):
        simp = cx.simplices[k]
        segments.append(np.searchsorted(simp[:, 0], bounds))
        if simp.shape[0] == 0:
            walks.append(None)
            walks_t.append(None)
        else:
            w = random_walk(lap, oriented=oriented)
            walks.append(w)
            walks_t.append(w.matrix.T.tocsr())
    return CloudStructure(complex=cx, boundaries=bs, walks=walks, walks_t=walks_t,
                          segments=segments, n=n)


@dataclass
class _OrderCache:
    nk: int
    seg: np.ndarray
    mask1: np.ndarray | None
    mask2: np.ndarray | None
    aux: list  # aux[desc][view] for max pooling


@dataclass
class CloudCache:
    structure: CloudStructure
    orders: list
    d: int


def _apply_repeated(mat, x: np.ndarray, times: int) -> np.ndarray:
    for _ in range(times):
        x = mat @ x
    return x


def _pool_segments(block: np.ndarray, seg: np.ndarray, pooling: str, d: int):
    vecs, auxs = [], []
    for v in range(seg.size - 1):
        vec, aux = pool_block(block[seg[v] : seg[v + 1]], pooling, d)
        vecs.append(vec)
        auxs.append(aux)
    return vecs, auxs


def scatter_cloud_forward(points: np.ndarray, alpha: np.ndarray, structure: CloudStructure,
                          config: RunConfig):
    """All-view scattering vector for one cloud, plus the gradient cache."""
    d = points.shape[1]
    nviews = config.num_views
    jmax = config.num_scales
    descs = block_descriptors(config)
    x0 = np.concatenate([points * alpha[v][None, :] for v in range(nviews)], axis=0)
    feats = lift_features(structure.complex, structure.boundaries, x0)

    # per_view[v][k] -> list of pooled block vectors
    per_view = [[None] * (config.max_order + 1) for _ in range(nviews)]
    orders = []
    stats_n = len(pooling_stats(config.pooling))
    for k in range(config.max_order + 1):
        xk = feats[k]
        nk = xk.shape[0]
        seg = structure.segments[k]
        walk = structure.walks[k]
        if nk == 0 or walk is None:
            zero = np.zeros(len(descs) * d * stats_n)
            for v in range(nviews):
                per_view[v][k] = [zero[: d * stats_n]] * len(descs)
            orders.append(_OrderCache(nk=nk, seg=seg, mask1=None, mask2=None,
                                      aux=[[None] * nviews] * len(descs)))
            continue
        snaps = dyadic_diffuse(walk, xk, jmax)
        wavelets = [snaps[j] - snaps[j - 1] for j in range(1, jmax + 1)]
        first = np.hstack([np.abs(w) for w in wavelets])
        mask1 = np.sign(np.hstack(wavelets))
        # scale J never feeds a second-order pair (j' > j), so drop its columns
        inner = first[:, : (jmax - 1) * d] if jmax > 1 else None
        snaps2 = dyadic_diffuse(walk, inner, jmax) if inner is not None and inner.size else None
        second_cols, mask2_cols = [], []
        for j in range(1, jmax):
            cols = slice((j - 1) * d, j * d)
            for j2 in range(j + 1, jmax + 1):
                w2 = snaps2[j2][:, cols] - snaps2[j2 - 1][:, cols]
                second_cols.append(np.abs(w2))
                mask2_cols.append(np.sign(w2))
        mask2 = np.hstack(mask2_cols) if mask2_cols else None

        blocks_per_view = [[] for _ in range(nviews)]
        aux_per_desc = []
        pi = 0
        for name, j, j2 in descs:
            if name == "raw":
                block = xk
            elif name == "low":
                block = snaps[jmax]
            elif name == "s1":
                block = first[:, (j - 1) * d : j * d]
            else:
                block = second_cols[pi]
                pi += 1
            vecs, auxs = _pool_segments(block, seg, config.pooling, d)
            for v in range(nviews):
                blocks_per_view[v].append(vecs[v])
            aux_per_desc.append(auxs)
        for v in range(nviews):
            per_view[v][k] = blocks_per_view[v]
        orders.append(_OrderCache(nk=nk, seg=seg, mask1=mask1, mask2=mask2, aux=aux_per_desc))

    phi = np.concatenate([vec for v in range(nviews) for k in range(config.max_order + 1)
                          for vec in per_view[v][k]])
    return phi, CloudCache(structure=structure, orders=orders, d=d)


def _reverse_chain(walk_t, taps: list, jmax: int) -> np.ndarray:
    """Adjoint of dyadic_diffuse: fold snapshot cotangents back to the input."""
    carry = taps[jmax]
    for j in range(jmax, 0, -1):
        carry = _apply_repeated(walk_t, carry, 2 ** (j - 1))
        if taps[j - 1] is not None:
            carry = carry + taps[j - 1]
    return walk_t @ carry


def scatter_cloud_backward(cache: CloudCache, dphi: np.ndarray, points: np.ndarray,
                           config: RunConfig) -> np.ndarray:
    """Gradient of the cloud's phi w.r.t. alpha, structure held constant."""
    d = cache.d
    nviews = config.num_views
    jmax = config.num_scales
    descs = block_descriptors(config)
    stats_n = len(pooling_stats(config.pooling))
    width = d * stats_n
    per_order = len(descs) * width
    per_view = (config.max_order + 1) * per_order
    structure = cache.structure
    dfeats = [None] * (config.max_order + 1)

    for k in range(config.max_order + 1):
        oc = cache.orders[k]
        nk = oc.nk
        if nk == 0:
            dfeats[k] = np.zeros((nk, d))
            continue
        seg = oc.seg
        walk_t = structure.walks_t[k]
        dxk = np.zeros((nk, d))
        taps = [None] * (jmax + 1)
        taps2 = [None] * (jmax + 1)
        dfirst = np.zeros((nk, jmax * d))

        def add_tap(store, idx, val):
            store[idx] = val if store[idx] is None else store[idx] + val

        pi = 0
        for b, (name, j, j2) in enumerate(descs):
            g = np.zeros((nk, d))
            any_nonzero = False
            for v in range(nviews):
                lo, hi = seg[v], seg[v + 1]
                if hi == lo:
                    continue
                gvec = dphi[v * per_view + k * per_order + b * width : v * per_view + k * per_order + (b + 1) * width]
                if not np.any(gvec):
                    continue
                g[lo:hi] = unpool_block(gvec, hi - lo, config.pooling, oc.aux[b][v], d)
                any_nonzero = True
            if not any_nonzero:
                if name == "s2":
                    pi += 1
                continue
            if name == "raw":
                dxk += g
            elif name == "low":
                add_tap(taps, jmax, g)
            elif name == "s1":
                dfirst[:, (j - 1) * d : j * d] += g
            else:
                dw2 = g * oc.mask2[:, pi * d : (pi + 1) * d]
                pi += 1
                wide = np.zeros((nk, (jmax - 1) * d))
                wide[:, (j - 1) * d : j * d] = dw2
                add_tap(taps2, j2, wide)
                add_tap(taps2, j2 - 1, -wide)

        if any(t is not None for t in taps2):
            for idx in range(jmax + 1):
                if taps2[idx] is None:
                    taps2[idx] = np.zeros((nk, (jmax - 1) * d))
            dfirst[:, : (jmax - 1) * d] += _reverse_chain(walk_t, taps2, jmax)

        dwav = dfirst * oc.mask1
        for j in range(1, jmax + 1):
            cols = slice((j - 1) * d, j * d)
            add_tap(taps, j, dwav[:, cols])
            add_tap(taps, j - 1, -dwav[:, cols])

        if any(t is not None for t in taps):
            for idx in range(jmax + 1):
                if taps[idx] is None:
                    taps[idx] = np.zeros((nk, d))
            dxk += _reverse_chain(walk_t, taps, jmax)
        dfeats[k] = dxk

    # fold the lift chain X_{k+1} = B_{k+1}^T X_k back down to the vertices
    for k in range(config.max_order, 0, -1):
        if dfeats[k].shape[0] > 0:
            dfeats[k - 1] = dfeats[k - 1] + structure.boundaries[k] @ dfeats[k]
    dx0 = dfeats[0]
    n = structure.n
    dalpha = np.empty((nviews, d))
    for v in range(nviews):
        dalpha[v] = (dx0[v * n : (v + 1) * n] * points).sum(axis=0)
    return dalpha


# ---------------------------------------------------------------------------
# whole-cloud features

def cloud_features(points: np.ndarray, alpha: np.ndarray, config: RunConfig, structure=None):
    """Scattering vector for one cloud under all views.

    Returns (phi, cache, structure); pass `structure` back in to freeze the
    combinatorial part across calls.
    """
    if structure is None:
        structure = build_cloud_structure(points, alpha, config)
    phi, cache = scatter_cloud_forward(points, alpha, structure, config)
    return phi, cache, structure


def cloud_features_backward(cache: CloudCache, dphi: np.ndarray, points: np.ndarray,
                            config: RunConfig) -> np.ndarray:
    """Gradient of phi w.r.t. alpha, complex structure held constant."""
    return scatter_cloud_backward(cache, dphi, points, config)

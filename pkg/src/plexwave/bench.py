"""Wall-time scaling of complex construction vs point count.

The all-pairs affinity pass is quadratic in n, so the fitted log-log
exponent should land near 2 (the dominant term of the predicted cost
n^2 + V J^2 sum_k D_k N_k at fixed d, V, J, K).
"""

from __future__ import annotations

import time

import numpy as np

from .complexes import build_vr_complex
from .data import PointCloud, RunConfig
from .synth import make_gaussian_cloud
from .views import kernel_affinity

DEFAULT_SIZES = (250, 500, 1000, 2000)


def time_construction(n_points: int, config: RunConfig, d: int = 10, repeats: int = 3,
                      seed: int = 0) -> float:
    pts = make_gaussian_cloud(n_points, d, seed)
    cloud = PointCloud(pts, id=f"bench{n_points}")
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        graph = kernel_affinity(cloud, config.bandwidth, cutoff=config.vr_threshold)
        build_vr_complex(graph, config.vr_threshold, config.max_order,
                         budget=config.simplex_budget)
        best = min(best, time.perf_counter() - t0)
    return best


def run_bench(config: RunConfig, sizes=DEFAULT_SIZES, d: int = 10, repeats: int = 3,
              seed: int = 0) -> dict:
    """Measure construction time per size and fit the log-log scaling exponent."""
    times = [time_construction(n, config, d=d, repeats=repeats, seed=seed) for n in sizes]
    slope, intercept = np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.log(times), 1)
    return {
        "sizes": list(sizes),
        "seconds": times,
        "fitted_exponent": float(slope),
        "log_intercept": float(intercept),
        "predicted_cost": "n^2 + V J^2 sum_k D_k N_k (quadratic term dominates construction)",
        "config": {
            "d": d,
            "bandwidth": config.bandwidth,
            "vr_threshold": config.vr_threshold,
            "max_order": config.max_order,
            "repeats": repeats,
            "seed": seed,
        },
    }

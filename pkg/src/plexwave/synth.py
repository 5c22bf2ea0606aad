"""Synthetic cohorts for demos and quantitative checks.

Scales are chosen so that, after cohort-global z-scoring, within-cluster
pair distances sit near the default affinity threshold: single-blob clouds
form one connected component and mixture clouds split into two, so class
membership is a topological property rather than a mean shift.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import Cohort, TASK_CLASSIFICATION, TASK_REGRESSION, assemble_cohort, write_hpmx


def make_mixture_cohort(
    n_clouds: int = 60,
    n_points: int = 200,
    d: int = 10,
    seed: int = 0,
    center_spread: float = 4.0,
    separation_range=(10.0, 16.0),
) -> Cohort:
    """Half single-Gaussian clouds (class 0), half two-Gaussian mixtures (class 1).

    Mixture separations vary per cloud, so H0 persistence summaries vary
    continuously and the cohort works for regression targets too.
    """
    rng = np.random.default_rng(seed)
    mats, labels = [], []
    for i in range(n_clouds):
        label = i % 2
        center = rng.normal(scale=center_spread, size=d)
        if label == 0:
            pts = center + rng.normal(size=(n_points, d))
        else:
            sep = rng.uniform(*separation_range)
            axis = rng.normal(size=d)
            axis *= sep / (2.0 * np.linalg.norm(axis))
            half = n_points // 2
            pts = np.vstack(
                [
                    center - axis + rng.normal(size=(half, d)),
                    center + axis + rng.normal(size=(n_points - half, d)),
                ]
            )
        mats.append(pts)
        labels.append(label)
    return assemble_cohort(mats, np.asarray(labels, dtype=np.int64), TASK_CLASSIFICATION)


def make_split_signal_cohort(
    n_clouds: int = 40,
    n_points: int = 120,
    d: int = 10,
    seed: int = 0,
    separation: float = 12.0,
    center_spread: float = 4.0,
) -> Cohort:
    """Class signal split across two disjoint feature subsets.

    Dims 0..d/2-1 form subset A, the rest subset B. Each cloud is bimodal
    in A, in B, in both, or in neither; the label is the parity (XOR) of
    the two bits, so no single subset determines the class.
    """
    rng = np.random.default_rng(seed)
    half_d = d // 2
    mats, labels = [], []
    for i in range(n_clouds):
        bit_a, bit_b = (i // 2) % 2, i % 2
        center = rng.normal(scale=center_spread, size=d)
        pts = center + rng.normal(size=(n_points, d))
        for bit, lo, hi in ((bit_a, 0, half_d), (bit_b, half_d, d)):
            if bit:
                axis = rng.normal(size=hi - lo)
                axis *= separation / (2.0 * np.linalg.norm(axis))
                signs = np.where(rng.random(n_points) < 0.5, -1.0, 1.0)
                pts[:, lo:hi] += signs[:, None] * axis[None, :]
        mats.append(pts)
        labels.append(bit_a ^ bit_b)
    return assemble_cohort(mats, np.asarray(labels, dtype=np.int64), TASK_CLASSIFICATION)


def make_gaussian_cloud(n_points: int, d: int, seed: int, scale: float = 0.35) -> np.ndarray:
    """A single blob; `scale` controls edge density under the default kernel."""
    rng = np.random.default_rng(seed)
    return rng.normal(scale=scale, size=(n_points, d))


def write_cohort_manifest(cohort: Cohort, directory, fmt: str = "hpmx", task: str | None = None):
    """Write matrix files plus a manifest.json; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    items = []
    for i, cloud in enumerate(cohort.clouds):
        if fmt == "hpmx":
            fname = f"{cloud.id or f'cloud{i}'}.hpmx"
            write_hpmx(directory / fname, cloud.points)
        else:
            fname = f"{cloud.id or f'cloud{i}'}.csv"
            np.savetxt(directory / fname, cloud.points, delimiter=",", fmt="%.17g")
        label = cohort.labels[i]
        if cohort.task == TASK_CLASSIFICATION:
            label = int(label)
        else:
            label = label.tolist() if label.size > 1 else float(label[0])
        items.append({"file": fname, "label": label, "id": cloud.id or f"cloud{i}"})
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"task": task or cohort.task, "items": items}, indent=1))
    return manifest

"""Shared fixtures: reference synthetic data, a trained manifold model, and
held-out clean/displaced sets.

Heavy fixtures are session-scoped and derive deterministically from pinned
seeds, so every run sees bit-identical objects.  Torch is pinned to one
thread up front; reduction order changes results otherwise.
"""

from dataclasses import replace

import numpy as np
import pytest

from tmd import (
    ArchConfig,
    EmbeddingDataset,
    SyntheticSpec,
    TrainConfig,
    configure_torch,
    displace_orthogonal,
    fit_scaler,
    make_synthetic,
    scale_matrix,
    synthetic_centers,
    train,
    train_head,
)
from tmd.seeding import spawn_rng

configure_torch(threads=1)

SIGMA = 0.2


@pytest.fixture(scope="session")
def four_cluster():
    """Reference 4-cluster data: (raw ds, scaler, centers, scaled ds)."""
    spec = SyntheticSpec(num_clusters=4, dim=16, points_per_cluster=250,
                         sigma=SIGMA, seed=7)
    ds = make_synthetic(spec)
    centers = synthetic_centers(spec)
    scaler = fit_scaler(ds)
    scaled = EmbeddingDataset(data=scale_matrix(ds.data, scaler, "forward"),
                              labels=ds.labels, scaled=True)
    return ds, scaler, centers, scaled


@pytest.fixture(scope="session")
def reference_bundle(four_cluster):
    """Trained manifold model the statistical criteria run against (about a
    minute of training; shared across the session)."""
    _, scaler, _, scaled = four_cluster
    cfg = TrainConfig(arch=ArchConfig("mlp", 16, 8, 16), epochs=1500,
                      alpha_g=3e-3, alpha_d=3e-3, alpha_p=1e-2, seed=0)
    bundle, _ = train(scaled, cfg)
    return replace(bundle, scaler=scaler)


@pytest.fixture(scope="session")
def holdout(four_cluster):
    """200 held-out clean points, 6-sigma displaced copies (both scaled), and
    their cluster labels."""
    _, scaler, centers, _ = four_cluster
    rng = spawn_rng(123, "holdout")
    idx = rng.choice(4, size=200)
    clean_raw = (centers[idx]
                 + SIGMA * rng.standard_normal((200, 16))).astype(np.float32)
    labels = idx.astype(np.int32)
    displaced = displace_orthogonal(
        EmbeddingDataset(data=clean_raw, labels=labels),
        centers, magnitude=6 * SIGMA, seed=5)
    return (scale_matrix(clean_raw, scaler, "forward"),
            scale_matrix(displaced.data, scaler, "forward"),
            labels)


@pytest.fixture(scope="session")
def small_sample_head(four_cluster):
    """Classifier head fit on a 40-row subsample.  Small-sample heads carry
    decision-direction noise outside the cluster-mean span, which is the
    component the boundary attack pushes along."""
    _, _, _, scaled = four_cluster
    sub = spawn_rng(11, "headsub").choice(scaled.n, size=40, replace=False)
    head_ds = EmbeddingDataset(data=scaled.data[sub], labels=scaled.labels[sub],
                               scaled=True)
    return train_head(head_ds, epochs=200, lr=0.5)


@pytest.fixture(scope="session")
def tiny_setup():
    """Two-cluster dim-8 model trained two epochs; cheap enough for unit
    tests that need any trained bundle at all."""
    spec = SyntheticSpec(num_clusters=2, dim=8, points_per_cluster=20,
                         sigma=0.1, seed=1)
    ds = make_synthetic(spec)
    scaler = fit_scaler(ds)
    scaled = EmbeddingDataset(data=scale_matrix(ds.data, scaler, "forward"),
                              labels=ds.labels, scaled=True)
    cfg = TrainConfig(arch=ArchConfig("mlp", 8, 3, 4), epochs=2, seed=0)
    bundle, report = train(scaled, cfg)
    return {"raw": ds, "scaler": scaler, "scaled": scaled,
            "bundle": replace(bundle, scaler=scaler), "report": report}

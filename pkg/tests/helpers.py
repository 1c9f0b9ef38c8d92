"""Shared synthetic-atlas constructions for the test suite."""

import numpy as np

from chartbundle.bundle import AtlasModel
from chartbundle.cover import Cover
from chartbundle.geometry import PointCloud
from chartbundle.net import ChartAutoencoder, Mlp, init_mlp


def linear_chart(a, basis=None):
    """Exact linear chart on the subspace spanned by basis (N x d): encode by
    A V^T, decode by V A^{-1}; decode-encode is the identity on the subspace."""
    a = np.asarray(a, dtype=np.float64)
    d = a.shape[0]
    v = np.eye(d) if basis is None else np.asarray(basis, dtype=np.float64)
    enc = Mlp(layer_dims=[v.shape[0], d], weights=[a @ v.T], biases=[np.zeros(d)])
    dec = Mlp(
        layer_dims=[d, v.shape[0]],
        weights=[v @ np.linalg.inv(a)],
        biases=[np.zeros(v.shape[0])],
    )
    return ChartAutoencoder(encoder=enc, decoder=dec)


def linear_atlas(mats, n_points=30, seed=0, basis=None):
    """Exact atlas of linear charts, all covering one random subspace cloud."""
    g = np.random.default_rng(seed)
    d = mats[0].shape[0]
    v = np.eye(d) if basis is None else np.asarray(basis, dtype=np.float64)
    coords = g.standard_normal((n_points, d))
    cloud = PointCloud(points=coords @ v.T, ambient_dim=v.shape[0])
    idx = np.arange(n_points)
    cover = Cover(
        charts=[idx.copy() for _ in mats], method="slab", n_points=n_points
    )
    charts = [linear_chart(a, v) for a in mats]
    for c, ch in enumerate(charts):
        ch.chart_index = c
    return AtlasModel(charts=charts, cover=cover, latent_dim=d), cloud


def random_untrained_atlas(n_charts=3, n_amb=4, d=2, seed=0, n_points=20):
    g = np.random.default_rng(seed)
    cloud = PointCloud(
        points=g.standard_normal((n_points, n_amb)), ambient_dim=n_amb
    )
    idx = np.arange(n_points)
    cover = Cover(
        charts=[idx.copy() for _ in range(n_charts)],
        method="slab",
        n_points=n_points,
    )
    charts = [
        ChartAutoencoder(
            encoder=init_mlp([n_amb, 8, 6, d], seed=int(g.integers(1 << 31))),
            decoder=init_mlp([d, 6, 8, n_amb], seed=int(g.integers(1 << 31))),
            chart_index=c,
        )
        for c in range(n_charts)
    ]
    return AtlasModel(charts=charts, cover=cover, latent_dim=d), cloud

"""Transition-map Jacobians of a trained atlas and its diagnostic metrics.

The chart-to-chart transition at a point x in both domains is
T_ji = E_j o D_i on latent codes; its Jacobian factors exactly as
J_{E_j}(D_i(z)) @ J_{D_i}(z) at z = E_i(x). Determinant signs of these
little d x d matrices are the raw material for the orientability test, so
they are computed analytically, never by differencing the composed map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cover import Cover, OverlapComponent, TripleOverlap
from .geometry import PointCloud
from .net import (
    ChartAutoencoder,
    forward,
    jacobian_batch,
    mlp_from_dict,
    mlp_to_dict,
)


@dataclass
class AtlasModel:
    charts: list[ChartAutoencoder]
    cover: Cover
    latent_dim: int

    def __post_init__(self) -> None:
        if len(self.charts) != self.cover.n_charts:
            raise ValueError(
                f"{len(self.charts)} autoencoders for "
                f"{self.cover.n_charts} cover charts"
            )
        for c in self.charts:
            if c.latent_dim != self.latent_dim:
                raise ValueError(f"chart {c.chart_index} latent dim mismatch")


@dataclass
class TransitionSample:
    """Transition Jacobian at one overlap point, with its determinant sign."""

    point_index: int
    pair: tuple[int, int]
    component_id: int
    g: np.ndarray  # (d, d)
    det: float
    sign: int  # 0 iff det == 0 exactly (flagged degenerate downstream)


@dataclass
class DiagnosticsReport:
    recon_sup: float  # max over charts of sup reconstruction error
    recon_mean: float  # mean over charts of mean reconstruction error
    recon_sup_per_chart: list[float]
    recon_mean_per_chart: list[float]
    diff_err_per_chart: list[float]  # latent round-trip operator-norm error
    diff_err_max: float
    gap: float | None  # min |det g| over all overlap samples
    cocycle_defect_mean: float | None
    cocycle_defect_max: float | None
    enc_sigma_min: float  # min over charts/points of sigma_min(encoder Jacobian)

    def to_dict(self) -> dict:
        return {
            "recon_sup": self.recon_sup,
            "recon_mean": self.recon_mean,
            "recon_sup_per_chart": self.recon_sup_per_chart,
            "recon_mean_per_chart": self.recon_mean_per_chart,
            "diff_err_per_chart": self.diff_err_per_chart,
            "diff_err_max": self.diff_err_max,
            "gap": self.gap,
            "cocycle_defect_mean": self.cocycle_defect_mean,
            "cocycle_defect_max": self.cocycle_defect_max,
            "enc_sigma_min": self.enc_sigma_min,
        }


def transition_jacobian_batch(
    atlas: AtlasModel, i: int, j: int, x: np.ndarray
) -> np.ndarray:
    """(B, d, d) transition Jacobians from chart i to chart j at points x."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    z = forward(atlas.charts[i].encoder, x)
    y = forward(atlas.charts[i].decoder, z)
    jd = jacobian_batch(atlas.charts[i].decoder, z)  # (B, N, d)
    je = jacobian_batch(atlas.charts[j].encoder, y)  # (B, d, N)
    return je @ jd


def transition_jacobian(atlas: AtlasModel, i: int, j: int, x: np.ndarray) -> np.ndarray:
    """Jacobian of the chart-i-to-chart-j transition at a single point."""
    return transition_jacobian_batch(atlas, i, j, x)[0]


def transition_map(atlas: AtlasModel, i: int, j: int, z: np.ndarray) -> np.ndarray:
    """Latent-to-latent transition: decode from chart i, re-encode in chart j."""
    return forward(atlas.charts[j].encoder, forward(atlas.charts[i].decoder, z))


def compute_transition_samples(
    atlas: AtlasModel, cloud: PointCloud, components: list[OverlapComponent]
) -> list[TransitionSample]:
    """Evaluate the transition Jacobian at every point of every overlap
    component (the gap is a minimum; subsampling could miss a near-zero
    determinant)."""
    samples: list[TransitionSample] = []
    for comp in components:
        i, j = comp.pair
        pts = cloud.points[comp.point_indices]
        g = transition_jacobian_batch(atlas, i, j, pts)
        dets = np.linalg.det(g)
        for idx, det, gm in zip(comp.point_indices, dets, g):
            samples.append(
                TransitionSample(
                    point_index=int(idx),
                    pair=comp.pair,
                    component_id=comp.component_id,
                    g=gm,
                    det=float(det),
                    sign=int(np.sign(det)),
                )
            )
    return samples


def samples_to_csv(samples: list[TransitionSample]) -> str:
    """Per-point transition data: point, chart pair, component, det, sign."""
    lines = ["point_index,chart_i,chart_j,component_id,det,sign"]
    for s in samples:
        lines.append(
            f"{s.point_index},{s.pair[0]},{s.pair[1]},{s.component_id},"
            f"{s.det:.17g},{s.sign}"
        )
    return "\n".join(lines) + "\n"


def reconstruction_error(atlas: AtlasModel, cloud: PointCloud):
    """(sup, mean, per-chart sups, per-chart means) of ||D_i(E_i(x)) - x||
    over each chart's own points."""
    sups, means = [], []
    for i, chart in enumerate(atlas.charts):
        pts = cloud.points[atlas.cover.charts[i]]
        resid = forward(chart.decoder, forward(chart.encoder, pts)) - pts
        norms = np.linalg.norm(resid, axis=1)
        sups.append(float(norms.max()))
        means.append(float(norms.mean()))
    return max(sups), float(np.mean(means)), sups, means


def differential_error_latent(atlas: AtlasModel, cloud: PointCloud):
    """Per-chart sup of ||J_E(D(z)) J_D(z) - I|| (operator norm) at the
    latent codes of the chart's points, plus the max over charts.

    This measures how far the latent round-trip E o D is from the identity
    on R^d; a single chart with a large value can corrupt the global sign
    pattern even when signs are internally consistent.
    """
    per_chart = []
    eye = np.eye(atlas.latent_dim)
    for i, chart in enumerate(atlas.charts):
        pts = cloud.points[atlas.cover.charts[i]]
        z = forward(chart.encoder, pts)
        y = forward(chart.decoder, z)
        jd = jacobian_batch(chart.decoder, z)
        je = jacobian_batch(chart.encoder, y)
        dev = je @ jd - eye
        op_norms = np.linalg.svd(dev, compute_uv=False)[:, 0]
        per_chart.append(float(op_norms.max()))
    return per_chart, max(per_chart)


def nondegeneracy_gap(samples: list[TransitionSample]) -> float:
    """Minimum |det g| over all transition samples."""
    if not samples:
        raise ValueError("no transition samples")
    return min(abs(s.det) for s in samples)


def cocycle_error(atlas: AtlasModel, cloud: PointCloud, triples: list[TripleOverlap]):
    """Cocycle defect ||T_ki(E_i(x)) - T_kj(T_ji(E_i(x)))|| per triple-overlap
    point; returns (mean, max, per-triple means). Empty triple list -> Nones.
    """
    if not triples:
        return None, None, []
    all_defects = []
    per_triple = []
    for t in triples:
        i, j, k = t.triple
        pts = cloud.points[t.point_indices]
        zi = forward(atlas.charts[i].encoder, pts)
        direct = transition_map(atlas, i, k, zi)
        composed = transition_map(atlas, j, k, transition_map(atlas, i, j, zi))
        defects = np.linalg.norm(direct - composed, axis=1)
        all_defects.append(defects)
        per_triple.append(float(defects.mean()))
    cat = np.concatenate(all_defects)
    return float(cat.mean()), float(cat.max()), per_triple


def encoder_min_singular(atlas: AtlasModel, cloud: PointCloud) -> float:
    """Smallest singular value of any encoder Jacobian over chart points."""
    smin = np.inf
    for i, chart in enumerate(atlas.charts):
        pts = cloud.points[atlas.cover.charts[i]]
        je = jacobian_batch(chart.encoder, pts)
        s = np.linalg.svd(je, compute_uv=False)[:, -1]
        smin = min(smin, float(s.min()))
    return smin


def diagnostics(
    atlas: AtlasModel,
    cloud: PointCloud,
    samples: list[TransitionSample],
    triples: list[TripleOverlap],
) -> DiagnosticsReport:
    sup, mean, sups, means = reconstruction_error(atlas, cloud)
    per_chart_eta, eta_max = differential_error_latent(atlas, cloud)
    c_mean, c_max, _ = cocycle_error(atlas, cloud, triples)
    return DiagnosticsReport(
        recon_sup=sup,
        recon_mean=mean,
        recon_sup_per_chart=sups,
        recon_mean_per_chart=means,
        diff_err_per_chart=per_chart_eta,
        diff_err_max=eta_max,
        gap=nondegeneracy_gap(samples) if samples else None,
        cocycle_defect_mean=c_mean,
        cocycle_defect_max=c_max,
        enc_sigma_min=encoder_min_singular(atlas, cloud),
    )


def atlas_to_json(atlas: AtlasModel) -> str:
    from .cover import cover_to_json

    return json.dumps(
        {
            "latent_dim": atlas.latent_dim,
            "cover": json.loads(cover_to_json(atlas.cover)),
            "charts": [
                {
                    "chart_index": c.chart_index,
                    "encoder": mlp_to_dict(c.encoder),
                    "decoder": mlp_to_dict(c.decoder),
                }
                for c in atlas.charts
            ],
        }
    )


def atlas_from_json(text: str) -> AtlasModel:
    from .cover import cover_from_json

    obj = json.loads(text)
    charts = [
        ChartAutoencoder(
            encoder=mlp_from_dict(c["encoder"]),
            decoder=mlp_from_dict(c["decoder"]),
            chart_index=c["chart_index"],
        )
        for c in obj["charts"]
    ]
    return AtlasModel(
        charts=charts,
        cover=cover_from_json(json.dumps(obj["cover"])),
        latent_dim=obj["latent_dim"],
    )

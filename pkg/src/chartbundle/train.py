"""Per-chart autoencoder training: reconstruction + Jacobian hinge losses,
Adam, and the convergence/retry protocol.

Each chart autoencoder trains only on the points assigned to its chart.
There is no cocycle term in the objective: cocycle consistency emerges from
reconstruction alone, which is one of the claims the diagnostics verify.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cover import Cover
from .geometry import PointCloud
from .net import (
    ChartAutoencoder,
    Mlp,
    MlpGrads,
    forward,
    forward_parts,
    init_mlp,
    jacobian_batch,
    jacobian_vjp,
    zero_grads,
)


class DivergenceError(RuntimeError):
    def __init__(self, chart: int, epoch: int):
        self.chart = chart
        self.epoch = epoch
        super().__init__(f"non-finite loss on chart {chart} at epoch {epoch}")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 2000
    batch_size: int = 64
    lambda_jac: float = 0.0
    eps_sv: float = 0.1  # hinge threshold on the smallest encoder singular value
    eps_thresh: float = 0.15  # sup reconstruction error triggering a retry
    max_retries: int = 3
    retry_extra_epochs: int = 2000
    seed: int = 0
    latent_dim: int = 2
    hidden_dims: tuple[int, ...] = (32, 16)

    def __post_init__(self) -> None:
        if self.lr <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("need lr > 0, epochs >= 0, batch_size >= 1")


@dataclass
class TrainingLog:
    loss_curves: list[list[float]]  # per chart, per epoch (appended on retries)
    retry_count: int = 0
    converged: bool = False
    sup_errors: list[float] = field(default_factory=list)
    mean_errors: list[float] = field(default_factory=list)


def training_log_to_csv(log: TrainingLog) -> str:
    """Loss curves as epoch,chart,loss rows."""
    lines = ["epoch,chart,loss"]
    for chart, curve in enumerate(log.loss_curves):
        for epoch, loss in enumerate(curve):
            lines.append(f"{epoch},{chart},{loss:.17g}")
    return "\n".join(lines) + "\n"


def training_log_to_json(log: TrainingLog) -> str:
    return json.dumps(
        {
            "retry_count": log.retry_count,
            "converged": log.converged,
            "sup_errors": log.sup_errors,
            "mean_errors": log.mean_errors,
            "epochs_per_chart": [len(c) for c in log.loss_curves],
            "final_loss_per_chart": [
                c[-1] if c else None for c in log.loss_curves
            ],
        }
    )


def recon_loss(
    chart: ChartAutoencoder, batch: np.ndarray
) -> tuple[float, MlpGrads, MlpGrads]:
    """Mean squared reconstruction error over the batch, with gradients for
    encoder and decoder."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if len(batch) == 0:
        raise ValueError("empty batch")
    z, acts_e, slopes_e = forward_parts(chart.encoder, batch)
    y, acts_d, slopes_d = forward_parts(chart.decoder, z)
    resid = y - batch
    loss = float(np.mean(np.sum(resid * resid, axis=1)))
    upstream = 2.0 * resid / len(batch)
    dec_grads, dz = _backprop(chart.decoder, acts_d, slopes_d, upstream)
    enc_grads, _ = _backprop(chart.encoder, acts_e, slopes_e, dz)
    return loss, enc_grads, dec_grads


def jac_reg_loss(
    chart: ChartAutoencoder, batch: np.ndarray, eps_sv: float
) -> tuple[float, MlpGrads]:
    """Hinge on the smallest encoder-Jacobian singular value:
    mean of max(0, eps_sv - sigma_min(J_E(x))) over the batch.

    The active-hinge subgradient of sigma_min is the outer product of its
    singular vectors; at (measure-zero) ties numpy's ordering picks the pair.
    """
    if eps_sv <= 0:
        raise ValueError("eps_sv must be > 0")
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if len(batch) == 0:
        raise ValueError("empty batch")
    jac = jacobian_batch(chart.encoder, batch)
    try:
        u, s, vt = np.linalg.svd(jac, full_matrices=False)
    except np.linalg.LinAlgError:
        for b in range(len(batch)):
            try:
                np.linalg.svd(jac[b])
            except np.linalg.LinAlgError:
                raise np.linalg.LinAlgError(
                    f"SVD failed on batch point {b} of chart {chart.chart_index}"
                ) from None
        raise
    sig_min = s[:, -1]
    active = sig_min < eps_sv
    loss = float(np.mean(np.maximum(0.0, eps_sv - sig_min)))
    if not np.any(active):
        return loss, zero_grads(chart.encoder)
    # d sigma_min / dJ = u_min v_min^T; hinge contributes -1/B per active point
    gmat = np.zeros_like(jac)
    gmat[active] = (
        -u[active, :, -1][:, :, None] * vt[active, -1, :][:, None, :]
    ) / len(batch)
    return loss, jacobian_vjp(chart.encoder, batch, gmat)


def _backprop(mlp: Mlp, acts, slopes, upstream: np.ndarray):
    grads = zero_grads(mlp)
    delta = upstream
    for l in range(mlp.n_layers - 1, -1, -1):
        grads.weights[l] += delta.T @ acts[l]
        grads.biases[l] += delta.sum(axis=0)
        da = delta @ mlp.weights[l]
        delta = da * slopes[l - 1] if l > 0 else da
    return grads, delta


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def adam_init(params: list[np.ndarray]) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[list[np.ndarray], AdamState]:
    """Standard bias-corrected Adam update, in place."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


def chart_errors(chart: ChartAutoencoder, points: np.ndarray) -> tuple[float, float]:
    """(sup, mean) reconstruction error over the chart's full point set."""
    resid = forward(chart.decoder, forward(chart.encoder, points)) - points
    norms = np.linalg.norm(resid, axis=1)
    return float(norms.max()), float(norms.mean())


def total_loss_and_grads(
    chart: ChartAutoencoder, batch: np.ndarray, cfg: TrainConfig
) -> tuple[float, MlpGrads, MlpGrads]:
    loss, enc_g, dec_g = recon_loss(chart, batch)
    if cfg.lambda_jac > 0.0:
        jl, enc_jg = jac_reg_loss(chart, batch, cfg.eps_sv)
        loss += cfg.lambda_jac * jl
        enc_g.add(enc_jg, scale=cfg.lambda_jac)
    return loss, enc_g, dec_g


def _train_chart_epochs(
    chart: ChartAutoencoder,
    points: np.ndarray,
    cfg: TrainConfig,
    epochs: int,
    rng: np.random.Generator,
    enc_state: AdamState,
    dec_state: AdamState,
    curve: list[float],
    epoch_offset: int,
) -> None:
    n = len(points)
    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            batch = points[order[start : start + cfg.batch_size]]
            loss, enc_g, dec_g = total_loss_and_grads(chart, batch, cfg)
            if not np.isfinite(loss):
                raise DivergenceError(chart.chart_index, epoch_offset + epoch)
            adam_step(chart.encoder.params(), enc_g.params(), enc_state, cfg.lr)
            adam_step(chart.decoder.params(), dec_g.params(), dec_state, cfg.lr)
            epoch_loss += loss
            n_batches += 1
        curve.append(epoch_loss / n_batches)


def _fresh_chart(
    ambient_dim: int, cfg: TrainConfig, rng: np.random.Generator, index: int
) -> ChartAutoencoder:
    enc_dims = [ambient_dim, *cfg.hidden_dims, cfg.latent_dim]
    dec_dims = [cfg.latent_dim, *reversed(cfg.hidden_dims), ambient_dim]
    return ChartAutoencoder(
        encoder=init_mlp(enc_dims, rng),
        decoder=init_mlp(dec_dims, rng),
        chart_index=index,
    )


def train_atlas(cloud: PointCloud, cover: Cover, cfg: TrainConfig):
    """Train one autoencoder per chart on that chart's points.

    After the scheduled epochs, any chart whose sup reconstruction error
    exceeds cfg.eps_thresh is retried: first by extending its training with
    cfg.retry_extra_epochs, then (further retries) by restarting it from a
    fresh seed stream. Charts below threshold are left untouched.

    Returns (AtlasModel, TrainingLog).
    """
    from .bundle import AtlasModel  # bundle imports ChartAutoencoder from net

    n_charts = cover.n_charts
    charts: list[ChartAutoencoder] = []
    rngs: list[np.random.Generator] = []
    enc_states: list[AdamState] = []
    dec_states: list[AdamState] = []
    curves: list[list[float]] = [[] for _ in range(n_charts)]

    for i in range(n_charts):
        # independent, order-free streams so charts may train in parallel
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([cfg.seed, i, 0]))
        )
        chart = _fresh_chart(cloud.ambient_dim, cfg, rng, i)
        s_e = adam_init(chart.encoder.params())
        s_d = adam_init(chart.decoder.params())
        pts = cloud.points[cover.charts[i]]
        _train_chart_epochs(
            chart, pts, cfg, cfg.epochs, rng, s_e, s_d, curves[i], 0
        )
        charts.append(chart)
        rngs.append(rng)
        enc_states.append(s_e)
        dec_states.append(s_d)

    def errors() -> tuple[list[float], list[float]]:
        sups, means = [], []
        for i in range(n_charts):
            s, m = chart_errors(charts[i], cloud.points[cover.charts[i]])
            sups.append(s)
            means.append(m)
        return sups, means

    sups, means = errors()
    retries = 0
    # epochs == 0 is the explicit "return untrained" escape hatch
    while cfg.epochs > 0 and max(sups) > cfg.eps_thresh and retries < cfg.max_retries:
        retries += 1
        for i in range(n_charts):
            if sups[i] <= cfg.eps_thresh:
                continue
            pts = cloud.points[cover.charts[i]]
            if retries == 1:
                _train_chart_epochs(
                    charts[i], pts, cfg, cfg.retry_extra_epochs, rngs[i],
                    enc_states[i], dec_states[i], curves[i], len(curves[i]),
                )
            else:
                rng = np.random.Generator(
                    np.random.PCG64(np.random.SeedSequence([cfg.seed, i, retries]))
                )
                charts[i] = _fresh_chart(cloud.ambient_dim, cfg, rng, i)
                enc_states[i] = adam_init(charts[i].encoder.params())
                dec_states[i] = adam_init(charts[i].decoder.params())
                rngs[i] = rng
                _train_chart_epochs(
                    charts[i], pts, cfg, cfg.epochs, rng,
                    enc_states[i], dec_states[i], curves[i], len(curves[i]),
                )
        sups, means = errors()

    log = TrainingLog(
        loss_curves=curves,
        retry_count=retries,
        converged=bool(max(sups) <= cfg.eps_thresh),
        sup_errors=sups,
        mean_errors=means,
    )
    atlas = AtlasModel(charts=charts, cover=cover, latent_dim=cfg.latent_dim)
    return atlas, log

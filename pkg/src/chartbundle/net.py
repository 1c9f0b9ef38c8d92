"""Minimal tanh MLP with exact analytic Jacobians.

Hidden layers use tanh; the output layer is linear so decoders can reach
arbitrary ambient coordinates. Jacobians are computed as the explicit matrix
product of layer derivatives, not by finite differences: downstream code
takes determinant signs of these matrices, which must be exact to the model.

Everything is batched over the leading axis; single-vector calls reshape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class Mlp:
    layer_dims: list[int]
    weights: list[np.ndarray]  # weights[l]: (layer_dims[l+1], layer_dims[l])
    biases: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> list[np.ndarray]:
        """Flat view of all parameter arrays (shared, not copied)."""
        return self.weights + self.biases


@dataclass
class MlpGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def params(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def add(self, other: "MlpGrads", scale: float = 1.0) -> "MlpGrads":
        for a, b in zip(self.params(), other.params()):
            a += scale * b
        return self


def zero_grads(mlp: Mlp) -> MlpGrads:
    return MlpGrads(
        weights=[np.zeros_like(w) for w in mlp.weights],
        biases=[np.zeros_like(b) for b in mlp.biases],
    )


def init_mlp(layer_dims: list[int], seed: int | np.random.Generator) -> Mlp:
    """Glorot-uniform weights (|w| <= sqrt(6/(fan_in+fan_out))), zero biases."""
    if len(layer_dims) < 2:
        raise ValueError("need at least an input and an output layer")
    if any(d < 1 for d in layer_dims):
        raise ValueError(f"zero-width layer in {layer_dims}")
    g = (
        seed
        if isinstance(seed, np.random.Generator)
        else np.random.Generator(np.random.PCG64(seed))
    )
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(g.uniform(-bound, bound, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(layer_dims=list(layer_dims), weights=weights, biases=biases)


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def forward_parts(mlp: Mlp, x: np.ndarray):
    """Forward pass keeping per-layer activations and tanh slopes.

    Returns (y, acts, slopes): acts[l] is the input to layer l (acts[0] = x),
    slopes[l] = tanh'(preactivation of hidden layer l+1).
    """
    a = x
    acts = [a]
    slopes = []
    for l in range(mlp.n_layers - 1):
        z = a @ mlp.weights[l].T + mlp.biases[l]
        a = np.tanh(z)
        slopes.append(1.0 - a * a)
        acts.append(a)
    y = a @ mlp.weights[-1].T + mlp.biases[-1]
    return y, acts, slopes


def forward(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    xb, single = _as_batch(x)
    if xb.shape[1] != mlp.layer_dims[0]:
        raise ValueError(
            f"input dim {xb.shape[1]} != layer_dims[0] = {mlp.layer_dims[0]}"
        )
    y, _, _ = forward_parts(mlp, xb)
    return y[0] if single else y


def jacobian_batch(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    """(B, n_out, n_in) Jacobians: W_L diag(s_{L-1}) ... diag(s_1) W_1."""
    xb, _ = _as_batch(x)
    _, _, slopes = forward_parts(mlp, xb)
    if mlp.n_layers == 1:
        return np.broadcast_to(
            mlp.weights[0], (len(xb),) + mlp.weights[0].shape
        ).copy()
    j = slopes[0][:, :, None] * mlp.weights[0][None, :, :]
    for l in range(1, mlp.n_layers - 1):
        j = (slopes[l][:, :, None] * mlp.weights[l][None, :, :]) @ j
    return mlp.weights[-1] @ j


def jacobian(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    xb, single = _as_batch(x)
    if xb.shape[1] != mlp.layer_dims[0]:
        raise ValueError(
            f"input dim {xb.shape[1]} != layer_dims[0] = {mlp.layer_dims[0]}"
        )
    j = jacobian_batch(mlp, xb)
    return j[0] if single else j


def vjp(mlp: Mlp, x: np.ndarray, upstream: np.ndarray):
    """Backprop of <upstream, forward(x)> summed over the batch.

    Returns (MlpGrads, input gradient with the same shape as x).
    """
    xb, single = _as_batch(x)
    ub, _ = _as_batch(upstream)
    if ub.shape[1] != mlp.layer_dims[-1]:
        raise ValueError(
            f"upstream dim {ub.shape[1]} != output dim {mlp.layer_dims[-1]}"
        )
    _, acts, slopes = forward_parts(mlp, xb)
    grads = zero_grads(mlp)
    delta = ub  # d/d(preactivation of output layer)
    for l in range(mlp.n_layers - 1, -1, -1):
        grads.weights[l] += delta.T @ acts[l]
        grads.biases[l] += delta.sum(axis=0)
        da = delta @ mlp.weights[l]
        delta = da * slopes[l - 1] if l > 0 else da
    dx = delta
    return grads, (dx[0] if single else dx)


def grad(mlp: Mlp, x: np.ndarray, upstream: np.ndarray) -> MlpGrads:
    """Parameter gradients of <upstream, forward(x)>."""
    return vjp(mlp, x, upstream)[0]


def jacobian_vjp(mlp: Mlp, x: np.ndarray, gmat: np.ndarray) -> MlpGrads:
    """Parameter gradients of sum_b <gmat[b], jacobian(x[b])> (Frobenius).

    Used for losses on the Jacobian itself (e.g. smallest-singular-value
    hinges, where gmat is the outer product of the extreme singular vectors).
    The Jacobian is a product of weight matrices and tanh-slope diagonals;
    weight factors contribute directly, slope diagonals are differentiated
    through the forward pass and backpropagated like a second output head.
    """
    xb, _ = _as_batch(x)
    gb = np.asarray(gmat, dtype=np.float64)
    if gb.ndim == 2:
        gb = gb[None, :, :]
    B = len(xb)
    L = mlp.n_layers
    _, acts, slopes = forward_parts(mlp, xb)
    grads = zero_grads(mlp)

    if L == 1:
        grads.weights[0] += gb.sum(axis=0)
        return grads

    # suffix[l]: product of all Jacobian factors strictly right of W_l
    suffix: list[np.ndarray] = [None] * L
    n_in = mlp.layer_dims[0]
    suffix[0] = np.broadcast_to(np.eye(n_in), (B, n_in, n_in))
    for l in range(1, L):
        block = slopes[l - 1][:, :, None] * (mlp.weights[l - 1] @ suffix[l - 1])
        suffix[l] = block
    # prefix[l]: product of all factors strictly left of W_l
    prefix: list[np.ndarray] = [None] * L
    n_out = mlp.layer_dims[-1]
    prefix[L - 1] = np.broadcast_to(np.eye(n_out), (B, n_out, n_out))
    for l in range(L - 2, -1, -1):
        prefix[l] = (prefix[l + 1] @ mlp.weights[l + 1]) * slopes[l][:, None, :]

    # direct dependence on each weight matrix: d<G, A W S>/dW = A^T G S^T
    for l in range(L):
        grads.weights[l] += np.einsum(
            "bou,bon,bvn->uv", prefix[l], gb, suffix[l], optimize=True
        )

    # dependence through the tanh slopes: J = C diag(s_l) E with
    # C = prefix[l+1] W_{l+1}, E = W_l suffix[l]; d<G,J>/ds_l is the diagonal
    # of C^T G E^T, and ds_l/dz_l = -2 a_l s_l.
    delta_z: list[np.ndarray] = []
    for l in range(L - 1):
        c = prefix[l + 1] @ mlp.weights[l + 1]
        e = mlp.weights[l] @ suffix[l]
        t = np.einsum("bom,bon,bmn->bm", c, gb, e, optimize=True)
        delta_z.append(t * (-2.0 * acts[l + 1] * slopes[l]))

    # backpropagate the slope contributions through the forward pass
    carry = np.zeros_like(delta_z[-1])  # gradient wrt acts[l+1] from above
    for l in range(L - 2, -1, -1):
        dz = carry * slopes[l] + delta_z[l]
        grads.weights[l] += dz.T @ acts[l]
        grads.biases[l] += dz.sum(axis=0)
        carry = dz @ mlp.weights[l]
    return grads


@dataclass
class ChartAutoencoder:
    """Encoder/decoder pair for one chart; output of E feeds D."""

    encoder: Mlp
    decoder: Mlp
    chart_index: int = 0

    def __post_init__(self) -> None:
        if self.encoder.layer_dims[-1] != self.decoder.layer_dims[0]:
            raise ValueError(
                "encoder output dim != decoder input dim: "
                f"{self.encoder.layer_dims[-1]} vs {self.decoder.layer_dims[0]}"
            )

    @property
    def latent_dim(self) -> int:
        return self.encoder.layer_dims[-1]


def mlp_to_dict(mlp: Mlp) -> dict:
    return {
        "layer_dims": mlp.layer_dims,
        "weights": [w.tolist() for w in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
    }


def mlp_from_dict(obj: dict) -> Mlp:
    return Mlp(
        layer_dims=list(obj["layer_dims"]),
        weights=[np.asarray(w, dtype=np.float64) for w in obj["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in obj["biases"]],
    )


def mlp_to_json(mlp: Mlp) -> str:
    return json.dumps(mlp_to_dict(mlp))


def mlp_from_json(text: str) -> Mlp:
    return mlp_from_dict(json.loads(text))

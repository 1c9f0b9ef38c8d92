import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chartbundle.net import (
    ChartAutoencoder,
    Mlp,
    forward,
    grad,
    init_mlp,
    jacobian,
    jacobian_batch,
    jacobian_vjp,
    mlp_from_json,
    mlp_to_json,
    vjp,
)
from chartbundle.oracles import finite_difference_jacobian


def straight_line_forward(mlp, x):
    """Independent re-implementation of the forward pass (plain loops)."""
    a = list(x)
    for l in range(len(mlp.weights)):
        w, b = mlp.weights[l], mlp.biases[l]
        z = [sum(w[r][c] * a[c] for c in range(len(a))) + b[r] for r in range(len(b))]
        a = [np.tanh(v) for v in z] if l < len(mlp.weights) - 1 else z
    return np.array(a)


class TestInit:
    def test_shapes(self):
        mlp = init_mlp([3, 32, 16, 2], seed=0)
        assert [w.shape for w in mlp.weights] == [(32, 3), (16, 32), (2, 16)]
        assert [b.shape for b in mlp.biases] == [(32,), (16,), (2,)]
        assert all(np.all(b == 0) for b in mlp.biases)

    def test_determinism(self):
        a, b = init_mlp([4, 8, 2], seed=5), init_mlp([4, 8, 2], seed=5)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_uniform_bound(self):
        mlp = init_mlp([2, 2], seed=9)
        assert np.all(np.abs(mlp.weights[0]) <= np.sqrt(6.0 / 4.0))

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            init_mlp([3], seed=0)
        with pytest.raises(ValueError):
            init_mlp([3, 0, 2], seed=0)


class TestForward:
    def test_zero_weights_give_bias(self):
        mlp = init_mlp([3, 8, 2], seed=0)
        for w in mlp.weights:
            w[:] = 0.0
        mlp.biases[-1][:] = [1.5, -2.0]
        assert np.allclose(forward(mlp, np.ones(3)), [1.5, -2.0])

    def test_single_linear_layer(self):
        mlp = init_mlp([3, 2], seed=1)
        x = np.array([1.0, -2.0, 0.5])
        assert np.allclose(
            forward(mlp, x), mlp.weights[0] @ x + mlp.biases[0], atol=1e-15
        )

    def test_matches_straight_line_oracle(self):
        g = np.random.default_rng(2)
        for _ in range(10):
            mlp = init_mlp([4, 7, 5, 3], seed=int(g.integers(1 << 31)))
            x = g.standard_normal(4)
            assert np.allclose(
                forward(mlp, x), straight_line_forward(mlp, x), atol=1e-14
            )

    def test_dimension_mismatch(self):
        mlp = init_mlp([3, 2], seed=0)
        with pytest.raises(ValueError):
            forward(mlp, np.ones(4))


class TestJacobian:
    def test_linear_layer_exact(self):
        mlp = init_mlp([3, 2], seed=3)
        assert np.array_equal(jacobian(mlp, np.ones(3)), mlp.weights[0])

    def test_finite_difference_100_nets(self):
        g = np.random.default_rng(4)
        worst = 0.0
        for _ in range(100):
            dims = [int(g.integers(2, 6)) for _ in range(int(g.integers(2, 5)))]
            mlp = init_mlp(dims, seed=int(g.integers(1 << 31)))
            x = g.standard_normal(dims[0])
            ja = jacobian(mlp, x)
            jn = finite_difference_jacobian(lambda v: forward(mlp, v), x, h=1e-5)
            worst = max(worst, np.abs(ja - jn).max() / max(np.abs(jn).max(), 1e-12))
        assert worst < 1e-4

    def test_chain_rule_composition(self):
        # merge g's output layer into f's first layer: the composed single
        # net computes f(g(x)) exactly, so its analytic Jacobian must equal
        # the product of the two factors' Jacobians
        g_rng = np.random.default_rng(5)
        f = init_mlp([3, 6, 2], seed=50)
        g = init_mlp([4, 5, 3], seed=51)
        composed = Mlp(
            layer_dims=[4, 5, 6, 2],
            weights=[
                g.weights[0].copy(),
                f.weights[0] @ g.weights[1],
                f.weights[1].copy(),
            ],
            biases=[
                g.biases[0].copy(),
                f.weights[0] @ g.biases[1] + f.biases[0],
                f.biases[1].copy(),
            ],
        )
        for _ in range(5):
            x = g_rng.standard_normal(4)
            gx = forward(g, x)
            assert np.allclose(forward(composed, x), forward(f, gx), atol=1e-12)
            product = jacobian(f, gx) @ jacobian(g, x)
            assert np.abs(jacobian(composed, x) - product).max() < 1e-12

    def test_batch_matches_single(self):
        mlp = init_mlp([3, 8, 4, 2], seed=6)
        xs = np.random.default_rng(7).standard_normal((9, 3))
        jb = jacobian_batch(mlp, xs)
        for i in range(9):
            assert np.allclose(jb[i], jacobian(mlp, xs[i]), atol=1e-15)


class TestGrad:
    def test_zero_upstream(self):
        mlp = init_mlp([3, 8, 2], seed=8)
        g = grad(mlp, np.ones(3), np.zeros(2))
        assert all(np.all(p == 0) for p in g.params())

    def test_single_linear_layer_outer_product(self):
        mlp = init_mlp([3, 2], seed=9)
        x = np.array([1.0, 2.0, -1.0])
        u = np.array([0.5, -1.5])
        g = grad(mlp, x, u)
        assert np.allclose(g.weights[0], np.outer(u, x), atol=1e-15)
        assert np.allclose(g.biases[0], u, atol=1e-15)

    def test_finite_difference_params(self):
        g_rng = np.random.default_rng(10)
        mlp = init_mlp([3, 8, 5, 2], seed=11)
        x = g_rng.standard_normal(3)
        u = g_rng.standard_normal(2)
        gr = grad(mlp, x, u)
        h = 1e-6
        for arr, garr in zip(mlp.params(), gr.params()):
            flat = arr.ravel()
            for idx in g_rng.choice(flat.size, size=min(5, flat.size), replace=False):
                old = flat[idx]
                flat[idx] = old + h
                fp = float(u @ forward(mlp, x))
                flat[idx] = old - h
                fm = float(u @ forward(mlp, x))
                flat[idx] = old
                fd = (fp - fm) / (2 * h)
                assert abs(fd - garr.ravel()[idx]) <= 1e-4 * max(abs(fd), 1e-6)

    def test_jacobian_rows_equal_input_grads(self):
        # the two derivative paths (Jacobian product vs backprop) must agree
        mlp = init_mlp([4, 9, 3], seed=12)
        x = np.random.default_rng(13).standard_normal(4)
        jac = jacobian(mlp, x)
        for r in range(3):
            e = np.zeros(3)
            e[r] = 1.0
            _, dx = vjp(mlp, x, e)
            assert np.abs(dx - jac[r]).max() < 1e-12


class TestJacobianVjp:
    def test_finite_difference(self):
        g_rng = np.random.default_rng(14)
        for dims in ([3, 8, 4, 2], [2, 5, 2], [4, 3]):
            mlp = init_mlp(dims, seed=int(g_rng.integers(1 << 31)))
            x = g_rng.standard_normal(dims[0])
            gmat = g_rng.standard_normal((dims[-1], dims[0]))
            gr = jacobian_vjp(mlp, x, gmat)
            h = 1e-6
            for arr, garr in zip(mlp.params(), gr.params()):
                flat = arr.ravel()
                for idx in g_rng.choice(
                    flat.size, size=min(4, flat.size), replace=False
                ):
                    old = flat[idx]
                    flat[idx] = old + h
                    fp = float(np.sum(gmat * jacobian(mlp, x)))
                    flat[idx] = old - h
                    fm = float(np.sum(gmat * jacobian(mlp, x)))
                    flat[idx] = old
                    fd = (fp - fm) / (2 * h)
                    assert abs(fd - garr.ravel()[idx]) <= 1e-4 * max(abs(fd), 1e-5)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=3, max_size=3
    ),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_forward_and_jacobian_finite_on_bounded_inputs(xs, seed):
    mlp = init_mlp([3, 16, 8, 2], seed=seed)
    x = np.array(xs)
    assert np.all(np.isfinite(forward(mlp, x)))
    assert np.all(np.isfinite(jacobian(mlp, x)))


class TestChartAutoencoder:
    def test_latent_dim_check(self):
        enc = init_mlp([3, 8, 2], seed=0)
        dec_bad = init_mlp([3, 8, 3], seed=1)
        with pytest.raises(ValueError):
            ChartAutoencoder(encoder=enc, decoder=dec_bad)

    def test_json_round_trip(self):
        mlp = init_mlp([3, 8, 2], seed=15)
        back = mlp_from_json(mlp_to_json(mlp))
        assert back.layer_dims == mlp.layer_dims
        for a, b in zip(back.params(), mlp.params()):
            assert np.array_equal(a, b)
        x = np.array([0.3, -0.7, 1.1])
        assert np.array_equal(forward(back, x), forward(mlp, x))

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mminet.errors import DataError, NumericalError
from mminet.gradcheck import check_backward, parameter_difference
from mminet.nn import (
    DenseLayer,
    OptimizerState,
    ProjectionNetwork,
    backward,
    build_network,
    elu,
    forward,
    load_network,
    save_network,
    sgd_momentum_step,
)


def test_paper_default_dims_wdbc():
    net = build_network(30, 2, "paper_default", seed=0)
    assert net.dims() == [30, 15, 7, 2]
    assert [l.activation for l in net.layers] == ["elu", "elu", "identity"]
    assert all(np.all(l.bias == 0) for l in net.layers)


def test_paper_default_width_floor():
    assert build_network(6, 3, "paper_default", 0).dims() == [6, 3, 3, 3]


def test_single_linear_shape():
    net = build_network(2, 1, "single_linear", seed=0)
    assert len(net.layers) == 1
    assert net.layers[0].weight.shape == (1, 2)
    assert net.layers[0].bias is None and net.layers[0].activation == "identity"


def test_build_errors():
    with pytest.raises(ValueError):
        build_network(3, 1, "paper_default", 0)
    with pytest.raises(ValueError):
        build_network(5, 0, "paper_default", 0)
    with pytest.raises(ValueError):
        build_network(5, 1, "resnet", 0)


@pytest.mark.parametrize("d_x", range(4, 65))
def test_width_rule_chains(d_x):
    for d_y in range(1, 6):
        net = build_network(d_x, d_y, "paper_default", seed=d_x * 7 + d_y)
        dims = net.dims()
        assert dims[0] == d_x and dims[-1] == d_y and min(dims[1:]) >= d_y
        for a, b in zip(net.layers, net.layers[1:]):
            assert a.out_dim == b.in_dim


def test_init_bounds_and_seed():
    a = build_network(40, 2, "paper_default", seed=3)
    b = build_network(40, 2, "paper_default", seed=3)
    for la, lb in zip(a.layers, b.layers):
        np.testing.assert_array_equal(la.weight, lb.weight)
        assert np.all(np.abs(la.weight) <= 1 / np.sqrt(la.in_dim))
    c = build_network(40, 2, "paper_default", seed=4)
    assert not np.array_equal(a.layers[0].weight, c.layers[0].weight)


def test_network_invariants():
    with pytest.raises(ValueError):
        ProjectionNetwork([DenseLayer(np.zeros((3, 2)), None), DenseLayer(np.zeros((1, 4)), None)])
    with pytest.raises(ValueError):
        ProjectionNetwork([DenseLayer(np.zeros((1, 2)), None, "elu")])


def test_forward_identity_row():
    net = ProjectionNetwork([DenseLayer(np.array([[1.0, 0.0]]), None)])
    y, _ = forward(net, np.array([3.0, -2.0]))
    assert y.tolist() == [3.0]


def test_forward_zero_network(rng):
    net = build_network(8, 2, "paper_default", 0)
    for layer in net.layers:
        layer.weight[:] = 0
    y, _ = forward(net, rng.normal(size=8))
    assert np.all(y == 0)


def test_forward_matches_straight_line_oracle(rng):
    net = build_network(12, 3, "paper_default", seed=9)
    for layer in net.layers:
        layer.bias[:] = rng.normal(size=layer.bias.shape)
    x = rng.normal(size=12)
    W1, W2, W3 = (l.weight for l in net.layers)
    b1, b2, b3 = (l.bias for l in net.layers)

    def elu_ref(z):
        return np.array([v if v > 0 else np.exp(v) - 1 for v in z])

    expected = W3 @ elu_ref(W2 @ elu_ref(W1 @ x + b1) + b2) + b3
    y, _ = forward(net, x)
    np.testing.assert_allclose(y, expected, rtol=0, atol=1e-12)


def test_forward_batch_matches_rows(rng):
    net = build_network(10, 2, "paper_default", seed=1)
    X = rng.normal(size=(7, 10))
    Y, _ = forward(net, X)
    for i in range(7):
        np.testing.assert_allclose(Y[i], forward(net, X[i])[0], rtol=0, atol=1e-14)


def test_forward_deterministic_and_dim_check(rng):
    net = build_network(10, 2, "paper_default", seed=1)
    x = rng.normal(size=10)
    assert forward(net, x)[0].tobytes() == forward(net, x)[0].tobytes()
    with pytest.raises(DataError):
        forward(net, np.zeros(9))


def test_elu_values():
    np.testing.assert_allclose(elu(np.array([-1.0, 0.0, 2.0])), [np.exp(-1) - 1, 0.0, 2.0])
    assert np.isfinite(elu(np.array([1e5, -1e5]))).all()


def test_backward_gradcheck():
    assert check_backward(seed=11, instances=24).passed


def test_backward_zero_grad(rng):
    net = build_network(8, 2, "paper_default", 0)
    _, tape = forward(net, rng.normal(size=8))
    assert all(np.all(g == 0) for g in backward(net, tape, np.zeros(2)))


def test_backward_single_linear_outer_product():
    net = build_network(2, 1, "single_linear", 0)
    _, tape = forward(net, np.array([2.0, -3.0]))
    (dW,) = backward(net, tape, np.array([0.5]))
    np.testing.assert_array_equal(dW, [[1.0, -1.5]])


def test_backward_batch_is_sum(rng):
    net = build_network(9, 2, "paper_default", 2)
    X, G = rng.normal(size=(5, 9)), rng.normal(size=(5, 2))
    _, tape = forward(net, X)
    batched = backward(net, tape, G)
    summed = [np.zeros_like(p) for p in net.parameters()]
    for i in range(5):
        _, t = forward(net, X[i])
        for s, g in zip(summed, backward(net, t, G[i])):
            s += g
    for a, b in zip(batched, summed):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_backward_shape_errors(rng):
    net = build_network(8, 2, "paper_default", 0)
    _, tape = forward(net, rng.normal(size=8))
    with pytest.raises(ValueError):
        backward(net, tape, np.zeros(3))
    with pytest.raises(ValueError):
        backward(net, tape[:2], np.zeros(2))


# -- momentum SGD -----------------------------------------------------------


def test_sgd_plain_limit(rng):
    net = build_network(6, 2, "paper_default", 0)
    before = [p.copy() for p in net.parameters()]
    grads = [rng.normal(size=p.shape) for p in before]
    state = OptimizerState.for_network(net, 0.1, 0.0)
    sgd_momentum_step(net, grads, state)
    for p, p0, g in zip(net.parameters(), before, grads):
        np.testing.assert_array_equal(p, p0 - 0.1 * g)


def test_sgd_geometric_velocity():
    net = build_network(4, 1, "single_linear", 0)
    g = [np.full((1, 4), 0.3)]
    state = OptimizerState.for_network(net, 0.01, 0.9)
    for t in range(1, 30):
        sgd_momentum_step(net, g, state)
        np.testing.assert_allclose(state.velocity[0], 0.3 * (1 - 0.9**t) / 0.1, rtol=1e-12)


def test_sgd_zero_gradient_fixed_point():
    net = build_network(6, 2, "paper_default", 0)
    before = [p.copy() for p in net.parameters()]
    state = OptimizerState.for_network(net, 0.5, 0.9)
    sgd_momentum_step(net, [np.zeros_like(p) for p in before], state)
    for p, p0 in zip(net.parameters(), before):
        np.testing.assert_array_equal(p, p0)


def test_sgd_non_finite_aborts_untouched():
    net = build_network(6, 2, "paper_default", 0)
    before = [p.copy() for p in net.parameters()]
    grads = [np.ones_like(p) for p in before]
    grads[-1][0] = np.nan
    state = OptimizerState.for_network(net, 0.5, 0.9)
    with pytest.raises(NumericalError):
        sgd_momentum_step(net, grads, state)
    for p, p0 in zip(net.parameters(), before):
        np.testing.assert_array_equal(p, p0)
    assert all(np.all(v == 0) for v in state.velocity)


def test_optimizer_state_validation():
    with pytest.raises(ValueError):
        OptimizerState(0.1, 1.0)
    with pytest.raises(ValueError):
        OptimizerState(-1.0, 0.5)


def test_velocity_shapes_match():
    net = build_network(20, 3, "paper_default", 0)
    state = OptimizerState.for_network(net, 0.1, 0.9)
    assert [v.shape for v in state.velocity] == [p.shape for p in net.parameters()]


# -- serialization -----------------------------------------------------------


@pytest.mark.parametrize("arch", ["paper_default", "single_linear"])
def test_model_round_trip_bit_exact(tmp_path, arch):
    net = build_network(11, 2, arch, seed=5)
    save_network(net, tmp_path / "m.npz", means=np.arange(11.0))
    back, extras = load_network(tmp_path / "m.npz")
    assert back.arch == arch and back.dims() == net.dims()
    for a, b in zip(net.parameters(), back.parameters()):
        assert a.tobytes() == b.tobytes()
    np.testing.assert_array_equal(extras["means"], np.arange(11.0))


@settings(max_examples=25, deadline=None)
@given(d_x=st.integers(4, 12), d_y=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_backward_matches_fd_property(d_x, d_y, seed):
    rng = np.random.default_rng(seed)
    net = build_network(d_x, d_y, "paper_default", seed)
    for layer in net.layers:
        layer.bias[:] = rng.normal(0, 0.3, layer.bias.shape)
    x, gy = rng.normal(size=d_x), rng.normal(size=d_y)
    _, tape = forward(net, x)
    analytic = backward(net, tape, gy)
    numeric = parameter_difference(net, lambda n: float(gy @ forward(n, x)[0]))
    for a, b in zip(analytic, numeric):
        np.testing.assert_allclose(a, b, rtol=1e-4, atol=1e-7)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import scalar_layer_inputs, scalar_network
from spikelth.core import (
    BatchNorm,
    DomainError,
    LayerState,
    LifParams,
    MaskedDenseLayer,
    SpikingNetwork,
    init_network,
    layer_forward,
    lif_step,
    network_forward,
    simulate,
)


class TestLifParams:
    def test_defaults_valid(self):
        p = LifParams()
        assert 0 < p.beta < 1 and p.v_reset < p.u_th

    @pytest.mark.parametrize("beta", [0.0, 1.0, -0.2, 1.5])
    def test_beta_out_of_range(self, beta):
        with pytest.raises(DomainError):
            LifParams(beta=beta)

    def test_reset_must_be_below_threshold(self):
        with pytest.raises(DomainError):
            LifParams(u_th=0.5, v_reset=0.5)

    def test_threshold_finite(self):
        with pytest.raises(DomainError):
            LifParams(u_th=float("inf"))


class TestLifStep:
    def test_fire_and_reset(self):
        assert lif_step(0.3, 0.4, LifParams(beta=0.9, u_th=0.5)) == (1, 0.0)

    def test_decay_without_spike(self):
        s, h = lif_step(0.2, 0.1, LifParams(beta=0.9, u_th=0.5))
        assert s == 0
        assert h == pytest.approx(0.27, abs=1e-15)

    def test_boundary_fires(self):
        assert lif_step(0.0, 0.5, LifParams(u_th=0.5))[0] == 1

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(DomainError):
            lif_step(bad, 0.0, LifParams())
        with pytest.raises(DomainError):
            lif_step(0.0, bad, LifParams())


class TestLayer:
    def test_silent_input_stays_silent(self):
        layer = MaskedDenseLayer(np.random.default_rng(0).normal(size=(3, 4)))
        s, st_ = layer_forward(layer, LifParams(), np.zeros(4), LayerState.zeros(3))
        np.testing.assert_array_equal(s, 0)
        np.testing.assert_array_equal(st_.h, 0)

    def test_mask_kills_weight(self):
        layer = MaskedDenseLayer([[1.0]], mask=[[0]])
        np.testing.assert_array_equal(layer.spatial_input(np.array([1])), [0.0])

    def test_matches_per_neuron_oracle(self):
        rng = np.random.default_rng(3)
        norm = BatchNorm(rng.uniform(0.5, 2, 3), rng.uniform(0.2, 1, 3), rng.normal(size=3), rng.normal(size=3))
        layer = MaskedDenseLayer(rng.normal(size=(3, 3)), mask=rng.integers(0, 2, (3, 3)), norm=norm)
        prm = LifParams(beta=0.7, u_th=0.4)
        h0 = rng.normal(0, 0.2, 3)
        s_in = np.array([1, 0, 1])
        s, new = layer_forward(layer, prm, s_in, LayerState(h0.copy()))
        xs = scalar_layer_inputs(layer.weights, layer.mask, norm, s_in)
        for j in range(3):
            u = h0[j] + xs[j]
            assert s[j] == (u >= prm.u_th)
            assert new.h[j] == pytest.approx(prm.v_reset if s[j] else prm.beta * u, abs=1e-14)

    def test_dimension_mismatch(self):
        layer = MaskedDenseLayer(np.ones((2, 3)))
        with pytest.raises(DomainError):
            layer_forward(layer, LifParams(), np.zeros(2), LayerState.zeros(2))
        with pytest.raises(DomainError):
            layer_forward(layer, LifParams(), np.zeros(3), LayerState.zeros(3))

    def test_bad_mask(self):
        with pytest.raises(DomainError):
            MaskedDenseLayer(np.ones((2, 2)), mask=[[0, 2], [1, 1]])
        with pytest.raises(DomainError):
            MaskedDenseLayer(np.ones((2, 2)), mask=np.ones((2, 3)))

    def test_norm_validation(self):
        with pytest.raises(DomainError):
            BatchNorm(np.ones(2), -np.ones(2), np.zeros(2), np.zeros(2))
        with pytest.raises(DomainError):
            BatchNorm(np.ones(2), np.ones(2), np.zeros(2), np.zeros(2), eps_bn=0.0)

    def test_folded_norm(self):
        nm = BatchNorm([2.0], [1.0], [0.5], [0.1], eps_bn=1e-5)
        layer = MaskedDenseLayer([[1.0, 1.0]], norm=nm)
        scale = 2.0 / np.sqrt(1.0 + 1e-5)
        np.testing.assert_allclose(layer.spatial_input(np.array([1, 1])), [2.0 * scale + 0.1 - 0.5 * scale])


class TestNetwork:
    def test_incompatible_widths(self):
        with pytest.raises(DomainError):
            SpikingNetwork([MaskedDenseLayer(np.ones((3, 2))), MaskedDenseLayer(np.ones((2, 4)))], LifParams())

    def test_single_layer_single_step_equals_layer_forward(self):
        net = init_network([4, 3], seed=2, gain=2.0)
        s_in = np.array([1, 1, 0, 1], dtype=np.uint8)
        out = network_forward(net, s_in[None])
        s, _ = layer_forward(net.layers[0], net.params[0], s_in, LayerState.zeros(3))
        np.testing.assert_array_equal(out[0], s)

    def test_deterministic(self):
        train = (np.random.default_rng(0).random((5, 6)) < 0.5).astype(np.uint8)
        a = network_forward(init_network([6, 5, 3], seed=9), train)
        b = network_forward(init_network([6, 5, 3], seed=9), train)
        np.testing.assert_array_equal(a, b)

    def test_repeated_calls_agree(self):
        net = init_network([6, 5, 3], seed=9, gain=2.0)
        train = (np.random.default_rng(0).random((5, 6)) < 0.5).astype(np.uint8)
        np.testing.assert_array_equal(network_forward(net, train), network_forward(net, train))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_scalar_simulation(self, seed):
        rng = np.random.default_rng(seed)
        net = init_network([4, 4, 4], LifParams(beta=0.6, u_th=0.5), seed=seed, gain=2.5)
        train = (rng.random((3, 4)) < 0.6).astype(np.uint8)
        out = network_forward(net, train)
        ref, _ = scalar_network(net, train)
        np.testing.assert_array_equal(out, np.array(ref))

    def test_final_state_kept(self):
        net = init_network([2, 1], seed=0)
        net.layers[0].weights[:] = 0.2
        network_forward(net, np.ones((2, 2), dtype=np.uint8))
        # t0: u=0.4 -> h=0.2; t1: u=0.6 fires -> h=0
        np.testing.assert_allclose(net.states[0].h, [0.0])

    def test_width_mismatch(self):
        with pytest.raises(DomainError):
            network_forward(init_network([3, 2]), np.zeros((2, 4), dtype=np.uint8))

    def test_non_binary_rejected(self):
        with pytest.raises(DomainError):
            network_forward(init_network([2, 2]), np.array([[0, 2]]))

    def test_batch_equals_per_sample(self):
        rng = np.random.default_rng(4)
        net = init_network([5, 6, 3], seed=4, gain=2.0)
        batch = (rng.random((7, 4, 5)) < 0.5).astype(np.uint8)
        out, _ = simulate(net, batch)
        for b in range(7):
            np.testing.assert_array_equal(out[b], network_forward(net, batch[b]))

    def test_zero_input_forever_silent(self):
        net = init_network([4, 8, 3], seed=1, gain=3.0)
        np.testing.assert_array_equal(network_forward(net, np.zeros((50, 4), dtype=np.uint8)), 0)


@settings(max_examples=30, deadline=None)
@given(
    T=st.integers(1, 8),
    eps=st.floats(0.0, 0.2),
    beta=st.floats(0.05, 0.95),
    seed=st.integers(0, 2**31),
)
def test_membrane_error_recursion(T, eps, beta, seed):
    rng = np.random.default_rng(seed)
    prm = LifParams(beta=beta, u_th=0.5)
    x_a = rng.normal(0.1, 0.5, T)
    x_b = x_a + rng.uniform(-eps, eps, T)
    h_a = h_b = 0.0
    for t in range(T):
        u_a, u_b = h_a + x_a[t], h_b + x_b[t]
        s_a, h_a = lif_step(h_a, x_a[t], prm)
        s_b, h_b = lif_step(h_b, x_b[t], prm)
        bound = eps * sum(beta**n for n in range(t + 1))
        assert abs(u_a - u_b) <= bound + 1e-12
        if s_a != s_b:
            break


@settings(max_examples=30, deadline=None)
@given(widths=st.lists(st.integers(1, 6), min_size=2, max_size=4), seed=st.integers(0, 2**31), T=st.integers(1, 5))
def test_outputs_binary(widths, seed, T):
    net = init_network(widths, seed=seed, gain=3.0)
    train = (np.random.default_rng(seed).random((T, widths[0])) < 0.5).astype(np.uint8)
    out = network_forward(net, train)
    assert out.shape == (T, widths[-1])
    assert set(np.unique(out)) <= {0, 1}
    for st_, prm in zip(net.states, net.params):
        assert np.all(np.isfinite(st_.h))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gaussian_interval_mass, scalar_weight_flip
from spikelth.core import BatchNorm, DomainError, MaskedDenseLayer, SpikingNetwork, init_network
from spikelth.encode import synthetic_patterns
from spikelth.probmodel import (
    REPORT_COLUMNS,
    CrisisQuery,
    crisis_probability,
    estimate_membrane_stats,
    layer_flip_bound,
    layer_flip_probabilities,
    prob_report_rows,
    stats_from_potentials,
    temporal_error_bound,
    weight_flip_probability,
    write_prob_report,
)


class TestStats:
    def test_constant_is_degenerate(self):
        st_ = stats_from_potentials(np.array([0.3, 0.3]))
        assert st_.mu[0] == pytest.approx(0.3) and st_.var[0] == 0 and st_.degenerate[0]
        assert np.isfinite(st_.p_sup[0])

    def test_population_variance(self):
        st_ = stats_from_potentials(np.array([0.2, 0.4]))
        assert st_.mu[0] == pytest.approx(0.3) and st_.var[0] == pytest.approx(0.01)

    def test_gaussian_sample(self):
        u = np.random.default_rng(0).normal(0, 1, 100_000)
        st_ = stats_from_potentials(u)
        assert abs(st_.mu[0]) <= 0.02 and abs(st_.var[0] - 1) <= 0.05

    def test_empty(self):
        with pytest.raises(DomainError):
            stats_from_potentials(np.zeros((0, 3)))

    def test_network_width_mismatch(self):
        ds = synthetic_patterns(2, 5, 2, 0.1, 3, seed=0)
        with pytest.raises(DomainError):
            estimate_membrane_stats(init_network([4, 2]), ds)

    def test_network_stats_shapes_and_rates(self):
        ds = synthetic_patterns(2, 6, 3, 0.1, 10, seed=0)
        net = init_network([6, 5, 2], seed=0, gain=2.0)
        stats = estimate_membrane_stats(net, ds)
        assert [s.mu.shape for s in stats] == [(5,), (2,)]
        np.testing.assert_allclose(stats[0].in_rate, ds.spikes.reshape(-1, 6).mean(0))
        np.testing.assert_allclose(stats[0].e_act_absw, stats[0].in_rate[None] * np.abs(net.layers[0].weights))


class TestCrisis:
    def test_standard_normal(self):
        q = CrisisQuery(eps=0.1, u_th=0.5)
        oracle = gaussian_interval_mass(0.0, 1.0, 0.4, 0.6)
        assert crisis_probability(0.0, 1.0, q) == pytest.approx(oracle, abs=1e-12)
        assert crisis_probability(0.0, 1.0, q) == pytest.approx(0.0703, abs=5e-5)

    def test_infinite_eps(self):
        assert crisis_probability(0.0, 1.0, CrisisQuery(eps=1e6, u_th=0.5)) == pytest.approx(1.0)

    def test_zero_eps(self):
        assert crisis_probability(0.5, 1.0, CrisisQuery(eps=0.0, u_th=0.5)) == 0.0

    def test_point_mass(self):
        q = CrisisQuery(eps=0.1, u_th=0.5)
        assert crisis_probability(0.45, 0.0, q) == 1.0
        assert crisis_probability(0.7, 0.0, q) == 0.0

    def test_vectorised(self):
        q = CrisisQuery(eps=0.2, u_th=0.5)
        out = crisis_probability(np.array([0.0, 0.5]), np.array([1.0, 0.25]), q)
        np.testing.assert_allclose(out, [gaussian_interval_mass(0, 1, 0.3, 0.7), gaussian_interval_mass(0.5, 0.25, 0.3, 0.7)], atol=1e-12)

    def test_query_validation(self):
        with pytest.raises(DomainError):
            CrisisQuery(eps=-0.1, u_th=0.5)
        with pytest.raises(DomainError):
            CrisisQuery(eps=0.1, u_th=0.5, beta=1.0)


class TestTemporalBound:
    def test_limit(self):
        assert temporal_error_bound(0.1, 0.5, math.inf) == pytest.approx(0.2)

    def test_two_steps(self):
        assert temporal_error_bound(0.1, 0.5, 2) == pytest.approx(0.15)

    def test_one_step(self):
        assert temporal_error_bound(0.1, 0.5, 1) == pytest.approx(0.1)

    @settings(max_examples=50, deadline=None)
    @given(eps=st.floats(0, 10), beta=st.floats(0.01, 0.99), T=st.integers(1, 200))
    def test_below_limit(self, eps, beta, T):
        assert temporal_error_bound(eps, beta, T) <= eps / (1 - beta) * (1 + 1e-12)


class TestLayerBound:
    def test_product(self):
        assert layer_flip_bound(0.4, CrisisQuery(eps=0.05, u_th=0.5, beta=0.5, N=10)) == pytest.approx(0.8)

    def test_zero_eps(self):
        assert layer_flip_bound(0.4, CrisisQuery(eps=0.0, u_th=0.5, N=10)) == 0.0

    def test_clamped(self):
        assert layer_flip_bound(0.4, CrisisQuery(eps=5.0, u_th=0.5, N=10)) == 1.0


class TestWeightFlip:
    def test_worked_value(self):
        P = weight_flip_probability(0.05, -0.3, 1.0, 0.0, gamma=1.0, sigma_b=1.0, eps_bn=1e-5)
        oracle = scalar_weight_flip(0.05, -0.3, 1.0, 0.0, 1.0, 1.0, 1e-5)
        assert P == pytest.approx(oracle, rel=1e-12)
        assert f"{P:.4g}" == "0.01907"

    def test_silent_channel(self):
        assert weight_flip_probability(0.0, 0.1, 1.0, 0.5) == 0.0

    def test_zero_gamma(self):
        assert weight_flip_probability(0.3, 0.1, 1.0, 0.5, gamma=0.0) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(
        e=st.floats(0, 1), de=st.floats(0, 1), g=st.floats(-3, 3), dg=st.floats(0, 2),
        mu=st.floats(-2, 2), var=st.floats(0.01, 4),
    )
    def test_monotone(self, e, de, g, dg, mu, var):
        base = weight_flip_probability(e, mu, var, 0.5, gamma=g)
        assert weight_flip_probability(e + de, mu, var, 0.5, gamma=g) >= base
        assert weight_flip_probability(e, mu, var, 0.5, gamma=abs(g) + dg) >= base
        assert weight_flip_probability(e, 0.5, var, 0.5, gamma=g) >= base

    def test_closer_mean_scores_higher(self):
        assert weight_flip_probability(0.1, 0.45, 1.0, 0.5) > weight_flip_probability(0.1, -0.5, 1.0, 0.5)

    def test_layer_matrix_matches_scalar(self):
        rng = np.random.default_rng(2)
        norm = BatchNorm(rng.uniform(-2, 2, 4), rng.uniform(0.1, 2, 4), rng.normal(size=4), np.zeros(4))
        layer = MaskedDenseLayer(rng.normal(size=(4, 6)), norm=norm)
        u = rng.normal(0.3, 0.5, (200, 4))
        s_in = rng.integers(0, 2, (200, 6))
        st_ = stats_from_potentials(u, s_in, layer.effective_weights)
        P = layer_flip_probabilities(layer, st_, 0.5)
        for j in range(4):
            for i in range(6):
                ref = scalar_weight_flip(st_.e_act_absw[j, i], st_.mu[j], st_.var[j], 0.5, norm.gamma[j], norm.sigma_b[j], norm.eps_bn)
                assert P[j, i] == pytest.approx(ref, rel=1e-9)


class TestReport:
    def test_rows_and_csv(self, tmp_path):
        ds = synthetic_patterns(2, 4, 3, 0.1, 10, seed=0)
        net = init_network([4, 3, 2], seed=1, gain=2.0, norm_layers=(0,))
        net.layers[1].mask[0, 0] = 0
        rows = prob_report_rows(net, estimate_membrane_stats(net, ds))
        assert len(rows) == 4 * 3 + 3 * 2 - 1
        path = tmp_path / "r.csv"
        write_prob_report(path, rows)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(REPORT_COLUMNS)
        assert len(lines) == len(rows) + 1

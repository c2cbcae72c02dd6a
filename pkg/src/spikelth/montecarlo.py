"""Monte Carlo simulators for the flip-probability bounds.

Each simulator draws paired neurons (a reference and a perturbed copy)
and reports raw counts so callers can compare frequencies against the
analytic bounds in :mod:`spikelth.probmodel` with binomial error bars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .probmodel import temporal_error_bound


def binomial_std(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n > 0 else math.inf


@dataclass
class FlipCount:
    flips: int
    trials: int

    @property
    def frequency(self) -> float:
        return self.flips / self.trials if self.trials else math.nan


def single_neuron_flips(mu, var, u_th, eps, n_trials, seed) -> FlipCount:
    """Gaussian potential ``u``; perturbed copy ``u + d`` with ``d ~ U[-eps, eps]``."""
    rng = np.random.default_rng(seed)
    u = rng.normal(mu, math.sqrt(var), n_trials)
    d = rng.uniform(-eps, eps, n_trials)
    flips = (u >= u_th) != (u + d >= u_th)
    return FlipCount(int(flips.sum()), n_trials)


@dataclass
class TemporalErrorResult:
    errors: np.ndarray  # |u_ref^T - u_pert^T| for accepted trials
    bound: float
    accepted: int
    trials: int

    @property
    def within_bound(self) -> int:
        return int(np.sum(self.errors <= self.bound))


def paired_neuron_errors(
    beta, T, eps, n_trials, seed, u_th=0.5, v_reset=0.0, x_mean=0.2, x_std=0.5
) -> TemporalErrorResult:
    """Final-step membrane error of paired neurons with matching spike histories.

    Both copies start at ``h = 0``; spatial inputs differ by at most ``eps``
    at every step. Trials whose spikes differ before step ``T`` are rejected.
    """
    rng = np.random.default_rng(seed)
    x_ref = rng.normal(x_mean, x_std, (T, n_trials))
    x_pert = x_ref + rng.uniform(-eps, eps, (T, n_trials))
    u_ref, s_ref, _ = kernels.lif_forward(x_ref, beta, u_th, v_reset)
    u_pert, s_pert, _ = kernels.lif_forward(x_pert, beta, u_th, v_reset)
    keep = np.all(s_ref[: T - 1] == s_pert[: T - 1], axis=0)
    err = np.abs(u_ref[T - 1, keep] - u_pert[T - 1, keep])
    return TemporalErrorResult(err, temporal_error_bound(eps, beta, T), int(keep.sum()), n_trials)


@dataclass
class LayerFlipResult:
    mismatches: int
    accepted: int
    p_sup: float


def paired_layer_flips(
    N, beta, T, eps, n_trials, seed, u_th=0.5, v_reset=0.0, x_mean=0.2, x_std=1.0
) -> LayerFlipResult:
    """Any-neuron spike mismatch at step ``T`` between two width-``N`` layers.

    Spatial inputs are Gaussian and independent of the past, so the density
    of the final potential never exceeds ``1 / (x_std * sqrt(2 pi))``; that
    value is reported as ``p_sup``.
    """
    rng = np.random.default_rng(seed)
    x_ref = rng.normal(x_mean, x_std, (T, n_trials * N))
    x_pert = x_ref + rng.uniform(-eps, eps, (T, n_trials * N))
    _, s_ref, _ = kernels.lif_forward(x_ref, beta, u_th, v_reset)
    _, s_pert, _ = kernels.lif_forward(x_pert, beta, u_th, v_reset)
    s_ref = s_ref.reshape(T, n_trials, N)
    s_pert = s_pert.reshape(T, n_trials, N)
    keep = np.all(s_ref[: T - 1] == s_pert[: T - 1], axis=(0, 2))
    mismatch = np.any(s_ref[T - 1] != s_pert[T - 1], axis=1) & keep
    return LayerFlipResult(int(mismatch.sum()), int(keep.sum()), 1.0 / (x_std * math.sqrt(2.0 * math.pi)))

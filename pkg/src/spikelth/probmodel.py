"""Spike-flip probability model.

A perturbation of at most ``eps`` in a neuron's membrane potential can only
change its spike when the unperturbed potential lies in the crisis
neighbourhood ``[u_th - eps, u_th + eps]``. The quantities here bound or
estimate that probability for one neuron, over time, for a whole layer,
and per weight (the pruning criterion).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import DomainError, MaskedDenseLayer, SpikingNetwork, simulate
from .encode import LabeledSpikeDataset

DEGENERATE_VAR = 1e-8


@dataclass
class MembraneStats:
    """Per-output-neuron membrane statistics of one layer.

    ``in_rate`` is the firing rate of each input channel; ``e_act_absw``
    is ``in_rate[i] * |w_eff[j, i]|``, the expected absolute weight that is
    actually driven by a presynaptic spike.
    """

    mu: np.ndarray
    var: np.ndarray
    p_sup: np.ndarray
    degenerate: np.ndarray
    in_rate: np.ndarray
    e_act_absw: np.ndarray
    n_obs: int = 0

    def __post_init__(self):
        if np.any(self.var < 0) or np.any(self.p_sup < 0):
            raise DomainError("var and p_sup must be nonnegative")


@dataclass(frozen=True)
class CrisisQuery:
    eps: float
    u_th: float
    beta: float = 0.5
    N: int = 1
    T: int = 1

    def __post_init__(self):
        if not self.eps >= 0:
            raise DomainError("eps must be nonnegative")
        if not (0.0 < self.beta < 1.0):
            raise DomainError("beta must lie in (0, 1)")


def gaussian_pdf(x, mean, var):
    x, mean, var = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (x, mean, var)))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2.0 * math.pi * var)
    return out


def _histogram_peak(values: np.ndarray, bin_width: float) -> float:
    lo = values.min() - 0.5 * bin_width
    n_bins = max(1, int(math.ceil((values.max() + 0.5 * bin_width - lo) / bin_width)))
    counts, _ = np.histogram(values, bins=n_bins, range=(lo, lo + n_bins * bin_width))
    return float(counts.max() / (values.size * bin_width))


def stats_from_potentials(
    u: np.ndarray,
    in_spikes: np.ndarray | None = None,
    w_eff: np.ndarray | None = None,
    hist_bin_width: float = 0.01,
) -> MembraneStats:
    """Statistics from observed potentials ``u`` of shape ``(n_obs, n_neurons)``.

    ``in_spikes`` (``(n_obs, n_in)``) and ``w_eff`` supply the activated
    weight expectation; without them it is left empty.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] == 0:
        raise DomainError("no membrane observations")
    mu = u.mean(axis=0)
    var = u.var(axis=0)
    degenerate = var < DEGENERATE_VAR
    with np.errstate(divide="ignore"):
        p_sup = 1.0 / np.sqrt(2.0 * math.pi * var)
    for j in np.flatnonzero(degenerate):
        p_sup[j] = _histogram_peak(u[:, j], hist_bin_width)
    if in_spikes is not None and w_eff is not None:
        in_rate = np.asarray(in_spikes, dtype=np.float64).mean(axis=0)
        e_act = in_rate[None, :] * np.abs(w_eff)
    else:
        in_rate = np.zeros(0)
        e_act = np.zeros((u.shape[1], 0))
    return MembraneStats(mu, var, p_sup, degenerate, in_rate, e_act, n_obs=u.shape[0])


def estimate_membrane_stats(
    net: SpikingNetwork,
    data: LabeledSpikeDataset,
    hist_bin_width: float = 0.01,
    chunk: int = 1024,
) -> list[MembraneStats]:
    """Membrane statistics for every layer, pooled over samples and timesteps."""
    if len(data) == 0:
        raise DomainError("dataset is empty")
    if data.N != net.layers[0].n_in:
        raise DomainError(f"dataset width {data.N} does not match network input {net.layers[0].n_in}")
    us = [[] for _ in net.layers]
    ins = [[] for _ in net.layers]
    for i in range(0, len(data), chunk):
        _, records = simulate(net, data.spikes[i : i + chunk], record=True)
        for idx, rec in enumerate(records):
            us[idx].append(rec.u.reshape(-1, rec.u.shape[-1]))
            ins[idx].append(rec.s_in.reshape(-1, rec.s_in.shape[-1]))
    return [
        stats_from_potentials(
            np.concatenate(us[idx]),
            np.concatenate(ins[idx]),
            layer.effective_weights,
            hist_bin_width,
        )
        for idx, layer in enumerate(net.layers)
    ]


def crisis_probability(mu, var, q: CrisisQuery):
    """Gaussian mass of the crisis neighbourhood ``[u_th - eps, u_th + eps]``.

    A zero variance is a point mass: 1 inside the neighbourhood, 0 outside.
    """
    mu = np.asarray(mu, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    mu, var = np.broadcast_arrays(mu, var)
    point = var <= 0
    sd = np.sqrt(np.where(point, 1.0, var))
    with np.errstate(invalid="ignore"):
        hi = ndtr((q.u_th + q.eps - mu) / sd)
        lo = ndtr((q.u_th - q.eps - mu) / sd)
    out = np.where(point, (np.abs(mu - q.u_th) <= q.eps).astype(np.float64), np.clip(hi - lo, 0.0, 1.0))
    return float(out) if out.ndim == 0 else out


def temporal_error_bound(eps: float, beta: float, T: float) -> float:
    """Worst membrane error after ``T`` steps of per-step input error ``eps``.

    ``eps * (1 + beta + ... + beta**(T-1))``; ``T = inf`` gives ``eps / (1 - beta)``.
    """
    if not (0.0 < beta < 1.0):
        raise DomainError("beta must lie in (0, 1)")
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    if math.isinf(T):
        return eps / (1.0 - beta)
    return eps * (1.0 - beta**T) / (1.0 - beta)


def layer_flip_bound(p_sup, q: CrisisQuery) -> float:
    """Union bound on any of ``N`` neurons flipping: ``min(1, 2 N p_sup eps / (1 - beta))``.

    ``p_sup`` may be a number, an array (its max is used) or :class:`MembraneStats`.
    """
    if isinstance(p_sup, MembraneStats):
        p_sup = p_sup.p_sup
    p = float(np.max(p_sup))
    return min(1.0, 2.0 * q.N * p * q.eps / (1.0 - q.beta))


def normalization_scale(gamma=1.0, sigma_b=1.0, eps_bn=1e-5):
    """``|gamma| / sqrt(sigma_b**2 + eps_bn)``: how much one weight's change moves ``u``."""
    return np.abs(gamma) / np.sqrt(np.asarray(sigma_b, dtype=np.float64) ** 2 + eps_bn)


def threshold_density(mu, var, u_th, hist_bin_width: float = 0.01):
    """Gaussian density of the membrane potential evaluated at the threshold.

    Degenerate (near-zero variance) neurons are treated as a point mass
    spread over one histogram bin.
    """
    mu, var = np.broadcast_arrays(np.asarray(mu, dtype=np.float64), np.asarray(var, dtype=np.float64))
    point = var < DEGENERATE_VAR
    dens = gaussian_pdf(0.0, mu - u_th, np.where(point, 1.0, var))
    spread = np.where(np.abs(mu - u_th) <= 0.5 * hist_bin_width, 1.0 / hist_bin_width, 0.0)
    out = np.where(point, spread, dens)
    return float(out) if out.ndim == 0 else out


def weight_flip_probability(e_act_absw, mu, var, u_th, gamma=1.0, sigma_b=1.0, eps_bn=1e-5):
    """Estimated probability that removing a weight flips its target neuron's spike.

    ``E|u' - u| * N(0 | mu - u_th, var)`` with
    ``E|u' - u| = e_act_absw * |gamma| / sqrt(sigma_b**2 + eps_bn)``.
    """
    err = np.asarray(e_act_absw, dtype=np.float64) * normalization_scale(gamma, sigma_b, eps_bn)
    out = err * threshold_density(mu, var, u_th)
    return float(out) if np.ndim(out) == 0 else out


def layer_flip_probabilities(layer: MaskedDenseLayer, stats: MembraneStats, u_th: float) -> np.ndarray:
    """Matrix of per-weight flip probabilities ``(n_out, n_in)`` for one layer."""
    if layer.norm is not None:
        gamma, sigma_b, eps_bn = layer.norm.gamma, layer.norm.sigma_b, layer.norm.eps_bn
    else:
        gamma, sigma_b, eps_bn = np.ones(layer.n_out), np.ones(layer.n_out), 0.0
    return weight_flip_probability(
        stats.e_act_absw,
        stats.mu[:, None],
        stats.var[:, None],
        u_th,
        gamma[:, None],
        sigma_b[:, None],
        eps_bn,
    )


REPORT_COLUMNS = ("layer", "out_idx", "in_idx", "abs_w", "e_act_absw", "gamma_scale", "mu", "var", "P")


def prob_report_rows(net: SpikingNetwork, stats: list[MembraneStats]):
    """One row per unmasked weight, in layer/out/in order."""
    rows = []
    for idx, (layer, st) in enumerate(zip(net.layers, stats)):
        P = layer_flip_probabilities(layer, st, net.params[idx].u_th)
        if layer.norm is not None:
            scale = normalization_scale(layer.norm.gamma, layer.norm.sigma_b, layer.norm.eps_bn)
        else:
            scale = np.ones(layer.n_out)
        w = np.abs(layer.effective_weights)
        for j, i in zip(*np.nonzero(layer.mask)):
            rows.append((idx, int(j), int(i), w[j, i], st.e_act_absw[j, i], scale[j], st.mu[j], st.var[j], P[j, i]))
    return rows


def write_prob_report(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in rows:
            writer.writerow([r[0], r[1], r[2]] + [repr(float(v)) for v in r[3:]])

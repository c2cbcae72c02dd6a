"""Rewind iterative magnitude pruning and its spike-flip variants.

``criterion="magnitude"`` ranks by ``|w|``. ``"sf1"`` ranks hidden layers
by the estimated spike-flip probability of each weight and keeps the
magnitude ranking for the encoding (first) and readout (last) layers.
``"sf2"`` additionally lets those two layers regrow: their mask applies
only in the forward pass, their updates and rewinds ignore it, and their
mask is recomputed from all weights each iteration.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, MaskedDenseLayer, SpikingNetwork
from .encode import LabeledSpikeDataset
from .probmodel import MembraneStats, estimate_membrane_stats, layer_flip_probabilities
from .train import SurrogateSpec, TrainConfig, accuracy, train_epochs

CRITERIA = ("magnitude", "sf1", "sf2")


class PruneConfigError(DomainError):
    pass


@dataclass
class ImpConfig:
    p: float = 20.0
    K: int = 10
    R: int = 2
    n_epochs: int = 50
    criterion: str = "magnitude"
    seed: int = 0
    scope: str = "global"

    def __post_init__(self):
        if not (0.0 < self.p < 100.0):
            raise DomainError("p must lie in (0, 100)")
        if self.K < 0:
            raise DomainError("K must be nonnegative")
        if not (0 <= self.R <= self.n_epochs):
            raise DomainError("R must lie in [0, n_epochs]")
        if self.criterion not in CRITERIA:
            raise DomainError(f"criterion must be one of {CRITERIA}")
        if self.scope not in ("global", "layer"):
            raise DomainError("scope must be 'global' or 'layer'")


@dataclass
class PruneStep:
    iteration: int
    masks: list
    sparsity: float
    eval_acc: float
    criterion: str
    scores_digest: str
    rewound_weights: list | None = None


@dataclass
class PruneTrajectory:
    steps: list = field(default_factory=list)
    theta_rewind: list | None = None

    def rows(self):
        return [(s.iteration, s.sparsity, s.eval_acc, s.criterion) for s in self.steps]


def sf_imp2_mask_policy(layer_kind: str, phase: str, criterion: str = "sf2") -> bool:
    """Whether the mask is applied to a layer in a given training phase.

    ``layer_kind`` is ``"encoding"``, ``"hidden"`` or ``"readout"``;
    ``phase`` is ``"loss"`` (forward), ``"update"`` or ``"rewind"``.
    """
    if layer_kind not in ("encoding", "hidden", "readout"):
        raise ValueError(f"unknown layer kind {layer_kind!r}")
    if phase not in ("loss", "forward", "update", "rewind"):
        raise ValueError(f"unknown phase {phase!r}")
    if criterion != "sf2" or layer_kind == "hidden":
        return True
    return phase in ("loss", "forward")


def layer_kind(idx: int, depth: int) -> str:
    if idx == 0:
        return "encoding"
    if idx == depth - 1:
        return "readout"
    return "hidden"


def magnitude_scores(layer: MaskedDenseLayer) -> np.ndarray:
    """``|w|`` for unmasked weights; masked weights score ``-inf`` and are never ranked."""
    return np.where(layer.mask == 1, np.abs(layer.weights), -np.inf)


def sf_scores(layer: MaskedDenseLayer, stats: MembraneStats, u_th: float, fallback: bool = False) -> np.ndarray:
    """Per-weight spike-flip probability; masked weights score ``-inf``.

    Layers without normalization, or with ``fallback`` set (encoding and
    readout layers), use :func:`magnitude_scores` instead.
    """
    if fallback or layer.norm is None:
        return magnitude_scores(layer)
    P = layer_flip_probabilities(layer, stats, u_th)
    return np.where(layer.mask == 1, P, -np.inf)


def _uses_fallback(net: SpikingNetwork, idx: int) -> bool:
    return layer_kind(idx, net.depth) != "hidden" or net.layers[idx].norm is None


def criterion_scores(net, criterion, stats=None):
    if criterion == "magnitude":
        return [magnitude_scores(layer) for layer in net.layers]
    if stats is None:
        raise PruneConfigError("spike-flip criteria need membrane statistics")
    return [
        sf_scores(layer, st, prm.u_th, fallback=_uses_fallback(net, idx))
        for idx, (layer, st, prm) in enumerate(zip(net.layers, stats, net.params))
    ]


def ranking_pools(net: SpikingNetwork, criterion: str, scope: str) -> list[list[int]]:
    """Groups of layer indices ranked together.

    Scores are only comparable within one criterion, so under sf1/sf2 the
    spike-flip layers share one pool and each magnitude-ranked layer is
    its own pool.
    """
    idxs = list(range(net.depth))
    if scope == "layer":
        return [[i] for i in idxs]
    if criterion == "magnitude":
        return [idxs]
    sf = [i for i in idxs if not _uses_fallback(net, i)]
    return ([sf] if sf else []) + [[i] for i in idxs if _uses_fallback(net, i)]


def keep_mask(scores: list[np.ndarray], n_keep: int) -> list[np.ndarray]:
    """Keep the ``n_keep`` highest finite scores across ``scores`` (ties: earlier flat index)."""
    flat = np.concatenate([s.ravel() for s in scores])
    order = np.argsort(-flat, kind="stable")
    keep = np.zeros(flat.size, dtype=np.uint8)
    keep[order[:n_keep]] = 1
    keep[~np.isfinite(flat)] = 0
    out, start = [], 0
    for s in scores:
        out.append(keep[start : start + s.size].reshape(s.shape))
        start += s.size
    return out


def prune_step(net, scores, pools, n_total, iteration, p, regrow=()):
    """New masks holding ``round(n_total[pool] * (1 - p/100)**iteration)`` weights per pool.

    Layers in ``regrow`` are ranked over all weights by magnitude, so
    previously pruned weights may return.
    """
    masks = [layer.mask.copy() for layer in net.layers]
    frac = (1.0 - p / 100.0) ** iteration
    for pool in pools:
        target = int(round(n_total[tuple(pool)] * frac))
        pool_scores = []
        for i in pool:
            s = scores[i]
            if i in regrow:
                s = np.abs(net.layers[i].weights)
            pool_scores.append(s)
        for i, m in zip(pool, keep_mask(pool_scores, target)):
            masks[i] = m
    return masks


def sparsity(masks) -> float:
    total = sum(m.size for m in masks)
    return 1.0 - sum(int(m.sum()) for m in masks) / total


def rewind_weights(net: SpikingNetwork, theta_rewind, masks, dense_layers=()) -> None:
    """Reload ``theta_rewind * mask`` (``dense_layers`` reload unmasked)."""
    for idx, (layer, theta, m) in enumerate(zip(net.layers, theta_rewind, masks)):
        layer.mask = m.copy()
        layer.weights = theta.copy() if idx in dense_layers else theta * m


def _digest(scores) -> str:
    h = hashlib.sha256()
    for s in scores:
        h.update(np.ascontiguousarray(s, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def imp_run(
    net: SpikingNetwork,
    data: LabeledSpikeDataset,
    cfg: ImpConfig,
    train_cfg: TrainConfig,
    spec: SurrogateSpec = SurrogateSpec(),
    eval_data: LabeledSpikeDataset | None = None,
    keep_weights: bool = False,
    callback=None,
) -> PruneTrajectory:
    """Rewind IMP.

    Train ``R`` epochs and snapshot the rewind point, train on to
    ``n_epochs``, then ``K`` times: score, prune, reload the rewind
    weights under the new mask and retrain ``n_epochs`` epochs.
    """
    if len(data) == 0:
        raise DomainError("empty dataset")
    eval_data = data if eval_data is None else eval_data
    regrow = ()
    if cfg.criterion == "sf2":
        regrow = tuple(i for i in range(net.depth) if not sf_imp2_mask_policy(layer_kind(i, net.depth), "update"))
    if cfg.criterion != "magnitude" and not any(not _uses_fallback(net, i) for i in range(net.depth)):
        raise PruneConfigError("spike-flip criteria need at least one normalized hidden layer")

    train_epochs(net, data, train_cfg, spec, start_epoch=0, n_epochs=cfg.R, dense_update_layers=regrow)
    theta_rewind = [layer.weights.copy() for layer in net.layers]
    train_epochs(net, data, train_cfg, spec, start_epoch=cfg.R, n_epochs=cfg.n_epochs - cfg.R, dense_update_layers=regrow)

    traj = PruneTrajectory(theta_rewind=theta_rewind)
    pools = ranking_pools(net, cfg.criterion, cfg.scope)
    n_total = {tuple(pool): sum(net.layers[i].mask.size for i in pool) for pool in pools}
    step = PruneStep(0, net.masks(), sparsity(net.masks()), accuracy(net, eval_data), cfg.criterion, "")
    traj.steps.append(step)
    if callback is not None:
        callback(step, net)
    for k in range(1, cfg.K + 1):
        stats = estimate_membrane_stats(net, data) if cfg.criterion != "magnitude" else None
        scores = criterion_scores(net, cfg.criterion, stats)
        masks = prune_step(net, scores, pools, n_total, k, cfg.p, regrow=regrow)
        rewind_weights(net, theta_rewind, masks, dense_layers=regrow)
        rewound = [layer.weights.copy() for layer in net.layers] if keep_weights else None
        train_epochs(net, data, train_cfg, spec, start_epoch=cfg.R, n_epochs=cfg.n_epochs, dense_update_layers=regrow)
        step = PruneStep(k, net.masks(), sparsity(masks), accuracy(net, eval_data), cfg.criterion, _digest(scores), rewound)
        traj.steps.append(step)
        if callback is not None:
            callback(step, net)
    return traj


# -- criterion analysis -----------------------------------------------------


def flip_probability_matrices(net: SpikingNetwork, stats) -> list[np.ndarray]:
    """Spike-flip probability of every weight in every layer (no magnitude fallback)."""
    return [layer_flip_probabilities(layer, st, prm.u_th) for layer, st, prm in zip(net.layers, stats, net.params)]


def prune_by_rank(net: SpikingNetwork, scores, fraction: float, which: str) -> SpikingNetwork:
    """Copy of ``net`` with the lowest or highest ``fraction`` of unmasked weights removed (global rank)."""
    if which not in ("lowest", "highest"):
        raise ValueError("which must be 'lowest' or 'highest'")
    out = net.copy()
    alive = [layer.mask == 1 for layer in net.layers]
    n_alive = sum(int(a.sum()) for a in alive)
    n_remove = int(round(fraction * n_alive))
    sign = 1.0 if which == "highest" else -1.0
    ranked = [np.where(a, sign * s, -np.inf) for a, s in zip(alive, scores)]
    removed = keep_mask(ranked, n_remove)
    for layer, r in zip(out.layers, removed):
        layer.mask = layer.mask * (1 - r)
    return out


def output_hamming(net_a: SpikingNetwork, net_b: SpikingNetwork, spikes: np.ndarray) -> float:
    """Mean number of differing output spikes per sample."""
    from .core import simulate

    out_a, _ = simulate(net_a, spikes)
    out_b, _ = simulate(net_b, spikes)
    return float(np.mean(np.sum(out_a != out_b, axis=(1, 2))))


def criterion_direction(net, stats, spikes, fraction=0.2) -> tuple[float, float]:
    """Output perturbation after pruning the lowest- vs highest-probability ``fraction``."""
    P = flip_probability_matrices(net, stats)
    low = prune_by_rank(net, P, fraction, "lowest")
    high = prune_by_rank(net, P, fraction, "highest")
    return output_hamming(net, low, spikes), output_hamming(net, high, spikes)


def fraction_remaining(masks, original_sizes=None) -> float:
    total = sum(m.size for m in masks) if original_sizes is None else sum(original_sizes)
    return sum(int(m.sum()) for m in masks) / total


def expected_remaining(n_total: int, p: float, K: int) -> float:
    return n_total * (1.0 - p / 100.0) ** K


__all__ = [
    "ImpConfig",
    "PruneStep",
    "PruneTrajectory",
    "PruneConfigError",
    "criterion_direction",
    "criterion_scores",
    "expected_remaining",
    "imp_run",
    "keep_mask",
    "magnitude_scores",
    "prune_by_rank",
    "prune_step",
    "rewind_weights",
    "sf_imp2_mask_policy",
    "sf_scores",
    "sparsity",
]

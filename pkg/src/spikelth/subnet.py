"""Edge-popup sub-network search over frozen random weights.

Every weight carries a score; the forward pass keeps the top ``k_percent``
of scores in each layer and masks the rest. Scores are trained with the
surrogate gradient while weights never change. The top-k selection is
treated as the identity in the backward pass, so the score gradient of
edge ``u -> v`` is ``sum_t dL/dI_v * S_u * w_uv``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, SpikingNetwork
from .encode import LabeledSpikeDataset
from .train import SurrogateSpec, TrainConfig, accuracy, epoch_batches, loss_and_grads


def topk_count(size: int, k_percent: float) -> int:
    if not (0.0 < k_percent < 100.0):
        raise DomainError("k_percent must lie in (0, 100)")
    return min(size, int(math.ceil(k_percent * size / 100.0 - 1e-9)))


def select_topk_mask(scores: np.ndarray, k_percent: float) -> np.ndarray:
    """Binary mask with ``ceil(k% * size)`` ones at the largest scores.

    Ties go to the smaller flat index.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n_keep = topk_count(scores.size, k_percent)
    order = np.argsort(-scores.ravel(), kind="stable")
    mask = np.zeros(scores.size, dtype=np.uint8)
    mask[order[:n_keep]] = 1
    return mask.reshape(scores.shape)


def score_update(s_uv, alpha, dL_dI_v, S_u, w_uv):
    """``s_uv + alpha * dL_dI_v * S_u * w_uv`` (elementwise)."""
    return s_uv + alpha * dL_dI_v * S_u * w_uv


@dataclass
class ScoredLayer:
    weights: np.ndarray
    scores: np.ndarray
    k_percent: float

    def __post_init__(self):
        if self.weights.shape != self.scores.shape:
            raise DomainError("scores must match the weight shape")
        if not np.all(np.isfinite(self.scores)):
            raise DomainError("scores must be finite")
        topk_count(self.scores.size, self.k_percent)

    @property
    def mask(self) -> np.ndarray:
        return select_topk_mask(self.scores, self.k_percent)


def init_scores(net: SpikingNetwork, seed: int) -> list[np.ndarray]:
    """Scores drawn from U[-1, 1], one matrix per layer."""
    rng = np.random.default_rng(seed)
    return [rng.uniform(-1.0, 1.0, layer.weights.shape) for layer in net.layers]


def apply_topk(net: SpikingNetwork, scores, k_percent: float) -> list[np.ndarray]:
    masks = [select_topk_mask(s, k_percent) for s in scores]
    for layer, m in zip(net.layers, masks):
        layer.mask = m
    return masks


@dataclass
class EdgePopupResult:
    masks: list
    scores: list
    history: list = field(default_factory=list)


def edge_popup_train(
    net: SpikingNetwork,
    data: LabeledSpikeDataset,
    cfg: TrainConfig,
    spec: SurrogateSpec = SurrogateSpec(),
    k_percent: float = 50.0,
    scores=None,
    eval_data: LabeledSpikeDataset | None = None,
    callback=None,
) -> EdgePopupResult:
    """Search per-layer top-``k_percent`` masks by training scores only.

    The score step is plain gradient descent, i.e. ``score_update`` with
    ``alpha = -learning_rate`` applied to the batch-mean gradient (with
    optional momentum). ``net``'s masks are overwritten; weights are not.
    """
    if len(data) == 0:
        raise DomainError("empty dataset")
    scores = init_scores(net, cfg.seed) if scores is None else [np.array(s, dtype=np.float64) for s in scores]
    weights = [layer.weights for layer in net.layers]
    velocity = [np.zeros_like(s) for s in scores]
    masks = apply_topk(net, scores, k_percent)
    sparsity = 1.0 - sum(int(m.sum()) for m in masks) / sum(m.size for m in masks)
    history = []
    for epoch in range(cfg.epochs):
        for idx in epoch_batches(len(data), cfg.batch_size, cfg.seed, epoch):
            _, grads_w, _, _ = loss_and_grads(net, data.spikes[idx], data.labels[idx], spec)
            for li, (g, w) in enumerate(zip(grads_w, weights)):
                g_score = g * w
                if cfg.momentum > 0:
                    velocity[li] = cfg.momentum * velocity[li] + g_score
                    g_score = velocity[li]
                scores[li] = score_update(scores[li], -cfg.learning_rate, 1.0, 1.0, g_score)
            masks = apply_topk(net, scores, k_percent)
        row = {
            "epoch": epoch,
            "train_acc": accuracy(net, data),
            "eval_acc": accuracy(net, eval_data) if eval_data is not None else math.nan,
            "sparsity": sparsity,
        }
        history.append(row)
        if callback is not None:
            callback(row)
    return EdgePopupResult(masks, scores, history)


def random_mask_accuracies(
    net: SpikingNetwork, data: LabeledSpikeDataset, k_percent: float, n_masks: int, seed: int
) -> np.ndarray:
    """Accuracy of ``n_masks`` random top-``k_percent`` masks over the same weights."""
    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(n_masks):
        masks = [select_topk_mask(rng.uniform(-1.0, 1.0, layer.weights.shape), k_percent) for layer in net.layers]
        accs.append(accuracy(net, data, masks=masks))
    return np.array(accs)

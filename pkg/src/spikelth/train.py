"""Surrogate-gradient backpropagation through time for dense LIF networks.

The Heaviside spike nonlinearity is differentiated with a rectangular
window of width ``a`` centred on the threshold. In the state update
``h = v_reset * s + beta * u * (1 - s)`` the spike ``s`` is treated as a
constant, so the only temporal path is ``dh/du = beta * (1 - s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import DomainError, LifParams, SpikingNetwork, simulate
from .encode import LabeledSpikeDataset


@dataclass(frozen=True)
class SurrogateSpec:
    kind: str = "rectangular"
    width: float = 1.0

    def __post_init__(self):
        if self.kind != "rectangular":
            raise DomainError(f"unsupported surrogate kind {self.kind!r}")
        if not self.width > 0:
            raise DomainError("surrogate width must be positive")


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    loss: str = "rate_cross_entropy"
    momentum: float = 0.0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise DomainError("learning_rate must be nonnegative")
        if self.epochs < 0:
            raise DomainError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise DomainError("batch_size must be at least 1")
        if self.loss != "rate_cross_entropy":
            raise DomainError(f"unsupported loss {self.loss!r}")
        if not (0.0 <= self.momentum < 1.0):
            raise DomainError("momentum must lie in [0, 1)")


@dataclass
class GradCache:
    """Forward tensors kept for the backward pass (one record per layer)."""

    records: list
    output: np.ndarray  # (B, T, C)


def surrogate_grad(u: float, params: LifParams, spec: SurrogateSpec = SurrogateSpec()) -> float:
    if abs(u - params.u_th) < 0.5 * spec.width:
        return 1.0 / spec.width
    return 0.0


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def rate_loss(output: np.ndarray, label: int) -> float:
    """Softmax cross-entropy over per-class firing rates of one output train ``(T, C)``."""
    output = np.asarray(output, dtype=np.float64)
    n_classes = output.shape[-1]
    if not (0 <= label < n_classes):
        raise DomainError(f"label {label} outside [0, {n_classes})")
    logits = output.mean(axis=0)
    return float(-_log_softmax(logits)[label])


def batch_rate_loss(output: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss over a batch ``(B, T, C)`` and its gradient w.r.t. the output spikes."""
    B, T, C = output.shape
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise DomainError("label outside the output width")
    logits = output.mean(axis=1)
    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(B), labels].mean())
    dz = np.exp(logp)
    dz[np.arange(B), labels] -= 1.0
    dz /= B
    grad = np.broadcast_to((dz / T)[:, None, :], (B, T, C))
    return loss, grad


def forward_cached(net: SpikingNetwork, spikes: np.ndarray, masks=None) -> GradCache:
    out, records = simulate(net, spikes, record=True, masks=masks)
    return GradCache(records, out)


def backward(
    net: SpikingNetwork,
    cache: GradCache,
    grad_out: np.ndarray,
    spec: SurrogateSpec = SurrogateSpec(),
    masks=None,
):
    """Backpropagate ``dL/d(output spikes)`` through time and layers.

    Returns ``(grad_w_eff, grad_pre)`` per layer: the gradient with respect
    to the effective (masked) weights, and ``dL/dI`` for each neuron's
    pre-normalization input, time-major ``(T, B, n_out)``.
    """
    g_s = np.ascontiguousarray(np.asarray(grad_out).transpose(1, 0, 2))
    grads_w = [None] * net.depth
    grads_pre = [None] * net.depth
    for idx in range(net.depth - 1, -1, -1):
        layer, params, rec = net.layers[idx], net.params[idx], cache.records[idx]
        T, B, n_out = rec.u.shape
        g_x = kernels.lif_backward(
            g_s.reshape(T, B * n_out),
            rec.u.reshape(T, B * n_out),
            rec.s.reshape(T, B * n_out),
            params.beta,
            params.u_th,
            spec.width,
        ).reshape(T, B, n_out)
        g_pre = g_x * layer.norm.scale if layer.norm is not None else g_x
        s_in = rec.s_in.reshape(T * B, layer.n_in).astype(np.float64)
        grads_w[idx] = g_pre.reshape(T * B, n_out).T @ s_in
        grads_pre[idx] = g_pre
        if idx > 0:
            w_eff = layer.weights * (layer.mask if masks is None else masks[idx])
            g_s = g_pre @ w_eff
    return grads_w, grads_pre


def loss_and_grads(net, spikes, labels, spec=SurrogateSpec(), masks=None):
    cache = forward_cached(net, spikes, masks=masks)
    loss, grad_out = batch_rate_loss(cache.output.astype(np.float64), labels)
    grads_w, grads_pre = backward(net, cache, grad_out, spec, masks=masks)
    return loss, grads_w, grads_pre, cache


def _as_batch(batch):
    if isinstance(batch, LabeledSpikeDataset):
        return batch.spikes, batch.labels
    spikes, labels = batch
    return np.asarray(spikes), np.asarray(labels)


def bptt_step(
    net: SpikingNetwork,
    batch,
    cfg: TrainConfig,
    spec: SurrogateSpec = SurrogateSpec(),
    dense_update_layers=(),
    velocity=None,
):
    """One SGD step on ``batch`` (a dataset or ``(spikes, labels)``).

    Weights with mask 0 get no update unless their layer index is in
    ``dense_update_layers``, in which case the gradient of the effective
    weight is applied to the stored weight regardless of the mask.
    ``velocity`` (a list, updated in place) enables momentum.
    """
    spikes, labels = _as_batch(batch)
    if spikes.shape[0] == 0:
        raise DomainError("empty batch")
    loss, grads_w, _, _ = loss_and_grads(net, spikes, labels, spec)
    for idx, (layer, g) in enumerate(zip(net.layers, grads_w)):
        if idx not in dense_update_layers:
            g = g * layer.mask
        if velocity is not None and cfg.momentum > 0:
            if velocity[idx] is None:
                velocity[idx] = np.zeros_like(g)
            velocity[idx] = cfg.momentum * velocity[idx] + g
            g = velocity[idx]
            if idx not in dense_update_layers:
                g = g * layer.mask
        if cfg.learning_rate != 0:
            layer.weights -= cfg.learning_rate * g
    return net, loss


def epoch_batches(n: int, batch_size: int, seed: int, epoch: int):
    """Sample-index batches for one epoch; the shuffle depends only on (seed, epoch)."""
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def predict(net: SpikingNetwork, spikes: np.ndarray, masks=None, chunk: int = 1024) -> np.ndarray:
    """Class with the highest spike count (lowest index wins ties)."""
    preds = []
    for i in range(0, spikes.shape[0], chunk):
        out, _ = simulate(net, spikes[i : i + chunk], masks=masks)
        preds.append(out.sum(axis=1).argmax(axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def accuracy(net: SpikingNetwork, data: LabeledSpikeDataset, masks=None) -> float:
    if len(data) == 0:
        raise DomainError("empty dataset")
    return float(np.mean(predict(net, data.spikes, masks=masks) == data.labels))


def train_epochs(
    net: SpikingNetwork,
    data: LabeledSpikeDataset,
    cfg: TrainConfig,
    spec: SurrogateSpec = SurrogateSpec(),
    start_epoch: int = 0,
    n_epochs: int | None = None,
    dense_update_layers=(),
    eval_data: LabeledSpikeDataset | None = None,
    callback=None,
):
    """Run ``n_epochs`` (default ``cfg.epochs``) epochs of minibatch SGD.

    Returns one dict per epoch with ``epoch``, ``loss``, ``train_acc`` and
    ``eval_acc`` (NaN without ``eval_data``).
    """
    if len(data) == 0:
        raise DomainError("empty dataset")
    n_epochs = cfg.epochs if n_epochs is None else n_epochs
    velocity = [None] * net.depth
    history = []
    for epoch in range(start_epoch, start_epoch + n_epochs):
        losses = []
        for idx in epoch_batches(len(data), cfg.batch_size, cfg.seed, epoch):
            _, loss = bptt_step(
                net,
                (data.spikes[idx], data.labels[idx]),
                cfg,
                spec,
                dense_update_layers=dense_update_layers,
                velocity=velocity,
            )
            losses.append(loss)
        row = {
            "epoch": epoch,
            "loss": float(np.mean(losses)),
            "train_acc": accuracy(net, data),
            "eval_acc": accuracy(net, eval_data) if eval_data is not None else math.nan,
        }
        history.append(row)
        if callback is not None:
            callback(row)
    return history

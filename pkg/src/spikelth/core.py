"""Iterative leaky integrate-and-fire dynamics for dense spiking networks.

A neuron integrates its spatial input ``x`` into the carried temporal
state ``h``::

    u = h_prev + x
    s = 1 if u >= u_th else 0
    h = v_reset if s else beta * u

and a dense layer computes ``x = (W * mask) @ s_in`` followed by an
optional folded normalization affine. Spike arrays are uint8 with values
in {0, 1}; a single spike train is ``(T, N)`` and a batch is ``(B, T, N)``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class DomainError(ValueError):
    """Raised when an input violates an operation's precondition."""


@dataclass(frozen=True)
class LifParams:
    beta: float = 0.5
    u_th: float = 0.5
    v_reset: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")
        if not math.isfinite(self.u_th):
            raise DomainError("u_th must be finite")
        if not (self.v_reset < self.u_th):
            raise DomainError(f"v_reset ({self.v_reset}) must be below u_th ({self.u_th})")


@dataclass
class LayerState:
    h: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "LayerState":
        return cls(np.zeros(n, dtype=np.float64))


@dataclass
class BatchNorm:
    """Per-output-neuron normalization, folded into the linear map at inference.

    ``x_norm = gamma * (x - mu_b) / sqrt(sigma_b**2 + eps_bn) + shift``.
    ``mu_b`` and ``sigma_b`` are stored running statistics.
    """

    gamma: np.ndarray
    sigma_b: np.ndarray
    mu_b: np.ndarray
    shift: np.ndarray
    eps_bn: float = 1e-5

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.sigma_b = np.asarray(self.sigma_b, dtype=np.float64)
        self.mu_b = np.asarray(self.mu_b, dtype=np.float64)
        self.shift = np.asarray(self.shift, dtype=np.float64)
        if np.any(self.sigma_b < 0):
            raise DomainError("sigma_b must be nonnegative")
        if not self.eps_bn > 0:
            raise DomainError("eps_bn must be positive")

    @classmethod
    def identity(cls, n: int, eps_bn: float = 1e-5) -> "BatchNorm":
        return cls(np.ones(n), np.ones(n), np.zeros(n), np.zeros(n), eps_bn)

    @property
    def scale(self) -> np.ndarray:
        return self.gamma / np.sqrt(self.sigma_b**2 + self.eps_bn)

    @property
    def bias(self) -> np.ndarray:
        return self.shift - self.mu_b * self.scale


@dataclass
class MaskedDenseLayer:
    weights: np.ndarray
    mask: np.ndarray | None = None
    norm: BatchNorm | None = None

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise DomainError("weights must be a 2-D matrix (n_out, n_in)")
        if self.mask is None:
            self.mask = np.ones(self.weights.shape, dtype=np.uint8)
        else:
            mask = np.asarray(self.mask)
            if mask.shape != self.weights.shape:
                raise DomainError("mask shape must equal weight shape")
            if not np.all((mask == 0) | (mask == 1)):
                raise DomainError("mask entries must be 0 or 1")
            self.mask = mask.astype(np.uint8)
        if self.norm is not None and self.norm.gamma.shape != (self.n_out,):
            raise DomainError("normalization parameters must have length n_out")

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def effective_weights(self) -> np.ndarray:
        return self.weights * self.mask

    def spatial_input(self, s: np.ndarray) -> np.ndarray:
        """Spatial input feature ``x`` for spikes ``s`` of shape ``(..., n_in)``."""
        x = np.asarray(s, dtype=np.float64) @ self.effective_weights.T
        if self.norm is not None:
            x = x * self.norm.scale + self.norm.bias
        return x


@dataclass
class SpikingNetwork:
    """Ordered stack of masked dense LIF layers."""

    layers: list[MaskedDenseLayer]
    params: list[LifParams]
    states: list[LayerState] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise DomainError("a network needs at least one layer")
        if isinstance(self.params, LifParams):
            self.params = [self.params] * len(self.layers)
        if len(self.params) != len(self.layers):
            raise DomainError("one LifParams per layer is required")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise DomainError(f"layer widths incompatible: {a.n_out} -> {b.n_in}")
        if not self.states:
            self.reset_state()

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    def reset_state(self) -> None:
        self.states = [LayerState.zeros(layer.n_out) for layer in self.layers]

    def copy(self) -> "SpikingNetwork":
        return copy.deepcopy(self)

    def masks(self) -> list[np.ndarray]:
        return [layer.mask.copy() for layer in self.layers]

    def weight_arrays(self) -> list[np.ndarray]:
        return [layer.weights.copy() for layer in self.layers]


def init_network(
    widths: list[int],
    params: LifParams | list[LifParams] | None = None,
    seed: int = 0,
    gain: float = 1.0,
    norm_layers: tuple[int, ...] = (),
) -> SpikingNetwork:
    """Dense network with weights drawn from U[-gain/sqrt(n_in), gain/sqrt(n_in)].

    Layers listed in ``norm_layers`` get an identity :class:`BatchNorm`.
    """
    if len(widths) < 2:
        raise DomainError("widths needs an input width and at least one layer width")
    rng = np.random.default_rng(seed)
    layers = []
    for idx, (n_in, n_out) in enumerate(zip(widths, widths[1:])):
        bound = gain / math.sqrt(n_in)
        w = rng.uniform(-bound, bound, size=(n_out, n_in))
        norm = BatchNorm.identity(n_out) if idx in norm_layers else None
        layers.append(MaskedDenseLayer(w, norm=norm))
    if params is None:
        params = LifParams()
    return SpikingNetwork(layers, params)


def check_spikes(data, ndim: int | None = None) -> np.ndarray:
    """Validate a binary spike array and return it as uint8."""
    arr = np.asarray(data)
    if ndim is not None and arr.ndim != ndim:
        raise DomainError(f"expected a {ndim}-D spike array, got shape {arr.shape}")
    if arr.size == 0 or min(arr.shape) < 1:
        raise DomainError("spike arrays need T >= 1 and N >= 1")
    if arr.dtype != np.uint8:
        if not np.all((arr == 0) | (arr == 1)):
            raise DomainError("spike entries must be 0 or 1")
        arr = arr.astype(np.uint8)
    elif arr.max(initial=0) > 1:
        raise DomainError("spike entries must be 0 or 1")
    return arr


def lif_step(h_prev: float, x: float, params: LifParams) -> tuple[int, float]:
    """One scalar LIF update. Returns ``(spike, h_next)``."""
    if not (math.isfinite(h_prev) and math.isfinite(x)):
        raise DomainError("lif_step inputs must be finite")
    u = h_prev + x
    if u >= params.u_th:
        return 1, float(params.v_reset)
    return 0, params.beta * u


def layer_forward(
    layer: MaskedDenseLayer,
    params: LifParams,
    s_in: np.ndarray,
    state: LayerState,
) -> tuple[np.ndarray, LayerState]:
    """Advance one layer by a single timestep."""
    s_in = np.asarray(s_in)
    if s_in.shape != (layer.n_in,):
        raise DomainError(f"s_in must have shape ({layer.n_in},), got {s_in.shape}")
    if state.h.shape != (layer.n_out,):
        raise DomainError(f"state must have length {layer.n_out}")
    x = layer.spatial_input(s_in)
    u = state.h + x
    if not np.all(np.isfinite(u)):
        raise DomainError("non-finite membrane potential")
    s_out = (u >= params.u_th).astype(np.uint8)
    h = np.where(s_out == 1, params.v_reset, params.beta * u)
    return s_out, LayerState(h)


@dataclass
class LayerRecord:
    """Per-layer tensors from a batched run, all time-major ``(T, B, n)``."""

    s_in: np.ndarray
    x: np.ndarray
    u: np.ndarray
    s: np.ndarray


def simulate(
    net: SpikingNetwork,
    spikes: np.ndarray,
    record: bool = False,
    masks: list[np.ndarray] | None = None,
) -> tuple[np.ndarray, list[LayerRecord] | None]:
    """Run a batch ``(B, T, N_in)`` from zero temporal state.

    Layers carry no feedback, so each layer is evaluated over all
    timesteps before the next one; this equals the per-timestep order.
    Returns output spikes ``(B, T, N_out)`` and, if ``record``, the
    per-layer tensors needed for backpropagation and statistics.
    ``masks`` overrides the layers' own masks for this run.
    """
    spikes = check_spikes(spikes, ndim=3)
    B, T, n_in = spikes.shape
    if n_in != net.layers[0].n_in:
        raise DomainError(f"input width {n_in} does not match network input {net.layers[0].n_in}")
    cur = np.ascontiguousarray(spikes.transpose(1, 0, 2))
    records = [] if record else None
    final_states = []
    for idx, (layer, params) in enumerate(zip(net.layers, net.params)):
        w_eff = layer.weights * (layer.mask if masks is None else masks[idx])
        x = cur.astype(np.float64) @ w_eff.T
        if layer.norm is not None:
            x = x * layer.norm.scale + layer.norm.bias
        flat = x.reshape(T, B * layer.n_out)
        u, s, h = kernels.lif_forward(flat, params.beta, params.u_th, params.v_reset)
        u = u.reshape(T, B, layer.n_out)
        s = s.reshape(T, B, layer.n_out)
        if records is not None:
            records.append(LayerRecord(cur, x, u, s))
        final_states.append(h.reshape(B, layer.n_out))
        cur = s
    if B == 1:
        net.states = [LayerState(h[0].copy()) for h in final_states]
    return np.ascontiguousarray(cur.transpose(1, 0, 2)), records


def network_forward(net: SpikingNetwork, spike_train: np.ndarray) -> np.ndarray:
    """Output spike train ``(T, N_out)`` for one input train ``(T, N_in)``.

    Temporal state is reset to zero first; afterwards ``net.states`` holds
    the state after the last timestep.
    """
    spike_train = check_spikes(spike_train, ndim=2)
    net.reset_state()
    out, _ = simulate(net, spike_train[None])
    return out[0]

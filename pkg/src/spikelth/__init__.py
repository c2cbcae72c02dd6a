"""Spiking neural networks, spike-flip probability bounds and lottery tickets.

Modules:
    core: LIF dynamics, masked dense layers, network simulation.
    encode: rate encoding, synthetic datasets, feature CSV loading.
    train: surrogate-gradient BPTT.
    probmodel: crisis probabilities, flip bounds, per-weight flip criterion.
    lth: virtual-neuron construction and required-width bounds.
    subnet: edge-popup mask search on frozen weights.
    prune: rewind IMP with magnitude and spike-flip criteria.
    checkpoint, config, plot, cli: experiment plumbing.
"""

from .core import (
    BatchNorm,
    DomainError,
    LayerState,
    LifParams,
    MaskedDenseLayer,
    SpikingNetwork,
    init_network,
    lif_step,
    network_forward,
    simulate,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BatchNorm",
    "DomainError",
    "LayerState",
    "LifParams",
    "MaskedDenseLayer",
    "SpikingNetwork",
    "init_network",
    "lif_step",
    "network_forward",
    "simulate",
]

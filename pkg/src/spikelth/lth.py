"""Lottery-ticket width bounds and the virtual-neuron equivalent network.

A target weight ``w_hat`` from input ``i`` is reproduced by one virtual
spiking neuron with in-weight ``v >= u_th`` (so it fires exactly when input
``i`` fires, whatever its temporal state) and out-weight ``w_tilde`` within
tolerance of ``w_hat``. A random layer of ``k`` virtual neurons is split
into one block per input; every (output, input) pair keeps the first
qualifying neuron of its block and masks the rest.

All logarithms are natural.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, MaskedDenseLayer, SpikingNetwork, simulate


class InfeasibleBoundError(DomainError):
    """``delta`` is too small for the requested ``eps``; shrink ``eps``."""


@dataclass(frozen=True)
class LthBoundParams:
    N: int
    L: int = 1
    T: int = 1
    eps: float = 0.1
    delta: float = 0.1
    u_th: float = 0.5
    C: float = 0.0

    def __post_init__(self):
        if self.N < 1 or self.L < 1 or self.T < 1:
            raise DomainError("N, L and T must be at least 1")
        if not self.eps > 0:
            raise DomainError("eps must be positive")
        if not (0.0 < self.delta <= 1.0):
            raise DomainError("delta must lie in (0, 1]")
        if self.C < 0:
            raise DomainError("C must be nonnegative")
        if not self.u_th < 1.0:
            raise DomainError(f"u_th={self.u_th} gives C_th=(1-u_th)/2 <= 0")

    @property
    def C_th(self) -> float:
        """Probability that a U[-1, 1] in-weight clears the threshold."""
        return (1.0 - self.u_th) / 2.0


def _ceil(x: float) -> int:
    # guards exact-integer values against last-bit rounding
    return int(math.ceil(x - 1e-9 * max(1.0, abs(x))))


def required_k_single(p: LthBoundParams) -> int:
    """``ceil(log(1/delta) / (C_th eps))`` virtual neurons for one weight."""
    return max(0, _ceil(math.log(1.0 / p.delta) / (p.C_th * p.eps)))


def required_k_layer(p: LthBoundParams) -> int:
    """One output neuron fed by ``N`` inputs: ``N ceil(N log(N/delta) / (C_th eps))``."""
    N = p.N
    return N * max(0, _ceil(N / (p.C_th * p.eps) * math.log(N / p.delta)))


def required_k_layer_to_layer(p: LthBoundParams, variant: str = "all_weights") -> int:
    """Full ``N x N`` linear map.

    ``variant="all_weights"`` uses ``log(N**2/delta)`` (union over all N**2
    weights); ``variant="per_row"`` uses the shorter ``log(N/delta)`` form.
    """
    N = p.N
    if variant == "all_weights":
        arg = N * N / p.delta
    elif variant == "per_row":
        arg = N / p.delta
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return N * max(0, _ceil(N / (p.C_th * p.eps) * math.log(arg)))


def _slack(p: LthBoundParams, L: int, T: int) -> float:
    slack = p.delta - p.N * p.C * L * T * p.eps
    if slack <= 0:
        raise InfeasibleBoundError(
            f"delta - N*C*L*T*eps = {slack:.6g} <= 0; reduce eps below "
            f"{p.delta / (p.N * p.C * L * T):.6g}"
        )
    return slack


def required_k_activation(p: LthBoundParams) -> int:
    """One spiking layer: ``N**2 ceil(N log(N**2 / (delta - N C eps)) / (C_th eps))``."""
    N = p.N
    slack = _slack(p, 1, 1)
    return N * N * max(0, _ceil(N / (p.C_th * p.eps) * math.log(N * N / slack)))


def required_k_network(p: LthBoundParams) -> int:
    """Whole network over ``T`` steps: ``N**2 ceil(N log(N**2 L / (delta - N C L T eps)) / (C_th eps))``."""
    N = p.N
    slack = _slack(p, p.L, p.T)
    return N * N * max(0, _ceil(N / (p.C_th * p.eps) * math.log(N * N * p.L / slack)))


def max_feasible_eps(N: int, L: int, T: int, delta: float, C: float) -> float:
    """Supremum of ``eps`` with ``delta - N C L T eps > 0``."""
    return math.inf if C == 0 else delta / (N * C * L * T)


# -- construction -----------------------------------------------------------


@dataclass
class EquivalentBlock:
    v_in: np.ndarray
    w_out: np.ndarray
    mask: np.ndarray
    success: bool
    index: int | None
    error: float


def select_candidate(v, w, target, eps, u_th, mode="first"):
    """Index of the virtual neuron chosen for ``target``, or None.

    A candidate qualifies when ``v >= u_th`` and ``|w - target| <= eps``;
    ``mode="first"`` keeps the lowest qualifying index, ``"best"`` the one
    with the smallest error.
    """
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    err = np.abs(w - target)
    ok = np.flatnonzero((v >= u_th) & (err <= eps))
    if ok.size == 0:
        return None
    if mode == "first":
        return int(ok[0])
    if mode == "best":
        return int(ok[np.argmin(err[ok])])
    raise ValueError(f"unknown selection mode {mode!r}")


def _check_target_range(w, n_in):
    bound = 1.0 / math.sqrt(n_in)
    if np.any(np.abs(w) > bound):
        raise DomainError(f"target weights must lie in [-1/sqrt(N), 1/sqrt(N)] = [-{bound:.6g}, {bound:.6g}]")


def construct_single_weight(
    target_w: float,
    k: int,
    eps: float,
    u_th: float,
    seed: int,
    N: int = 1,
    mode: str = "first",
    allow_empty: bool = False,
) -> EquivalentBlock:
    """Approximate one weight with ``k`` random virtual neurons.

    Draws ``v`` then ``w_tilde`` (``k`` values each) from U[-1, 1]. With
    ``allow_empty`` a target with ``|target| <= eps`` succeeds even when no
    neuron qualifies, by masking all of them.
    """
    if k < 1:
        raise DomainError("k must be at least 1")
    _check_target_range(np.array([target_w]), N)
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1.0, 1.0, k)
    w = rng.uniform(-1.0, 1.0, k)
    return _block_from_candidates(v, w, target_w, eps, u_th, mode, allow_empty)


def _block_from_candidates(v, w, target, eps, u_th, mode="first", allow_empty=False):
    idx = select_candidate(v, w, target, eps, u_th, mode)
    mask = np.zeros(len(v), dtype=np.uint8)
    if idx is not None:
        mask[idx] = 1
        return EquivalentBlock(v, w, mask, True, idx, float(abs(w[idx] - target)))
    ok = allow_empty and abs(target) <= eps
    return EquivalentBlock(v, w, mask, ok, None, float(abs(target)))


@dataclass
class ConstructionReport:
    k_per_layer: int
    weight_eps: float
    errors: list = field(default_factory=list)  # per layer (n_out, n_in)
    failed: list = field(default_factory=list)  # (layer, out, in)
    blocks: int = 0

    @property
    def all_succeeded(self) -> bool:
        return not self.failed

    @property
    def max_error(self) -> float:
        return max(float(e.max()) for e in self.errors) if self.errors else 0.0


def construct_equivalent_layer(w_hat, k, eps, u_th, rng, mode="first", allow_empty=False):
    """Virtual layer ``V`` (``k x n_in``) and masked out-layer ``W_tilde`` (``n_out x k``).

    Virtual neurons are split into ``n_in`` consecutive blocks of
    ``k / n_in``; a neuron in block ``i`` is wired only to input ``i``.
    Each target weight gets tolerance ``eps / n_in`` so that every output's
    linear error stays within ``eps``.
    """
    n_out, n_in = w_hat.shape
    if k % n_in != 0 or k < n_in:
        raise DomainError(f"k={k} must be a positive multiple of the input width {n_in}")
    kb = k // n_in
    tol = eps / n_in
    V = rng.uniform(-1.0, 1.0, (k, n_in))
    W = rng.uniform(-1.0, 1.0, (n_out, k))
    block_of = np.arange(k) // kb
    v_mask = np.zeros((k, n_in), dtype=np.uint8)
    v_mask[np.arange(k), block_of] = 1
    w_mask = np.zeros((n_out, k), dtype=np.uint8)
    errors = np.zeros((n_out, n_in))
    failed = []
    v_diag = V[np.arange(k), block_of]
    for i in range(n_in):
        sl = slice(i * kb, (i + 1) * kb)
        qualifies_v = v_diag[sl] >= u_th
        for j in range(n_out):
            err = np.abs(W[j, sl] - w_hat[j, i])
            ok = np.flatnonzero(qualifies_v & (err <= tol))
            if ok.size:
                a = ok[0] if mode == "first" else ok[np.argmin(err[ok])]
                w_mask[j, i * kb + a] = 1
                errors[j, i] = err[a]
            else:
                errors[j, i] = abs(w_hat[j, i])
                if not (allow_empty and abs(w_hat[j, i]) <= tol):
                    failed.append((j, i))
    return MaskedDenseLayer(V, v_mask), MaskedDenseLayer(W, w_mask), errors, failed


def construct_equivalent_network(
    target: SpikingNetwork,
    k_per_layer: int,
    eps: float,
    seed: int,
    mode: str = "first",
    allow_empty: bool = False,
) -> tuple[SpikingNetwork, ConstructionReport]:
    """Equivalent network of depth ``2 L`` drawn from one seeded generator.

    Virtual layers reuse the LIF parameters of the target layer they expand.
    """
    rng = np.random.default_rng(seed)
    layers, params = [], []
    report = ConstructionReport(k_per_layer, eps)
    for idx, (layer, prm) in enumerate(zip(target.layers, target.params)):
        if layer.norm is not None:
            raise DomainError("targets with normalization are not supported")
        w_hat = layer.effective_weights
        _check_target_range(w_hat, layer.n_in)
        v_layer, w_layer, errors, failed = construct_equivalent_layer(
            w_hat, k_per_layer, eps, prm.u_th, rng, mode, allow_empty
        )
        report.weight_eps = eps / layer.n_in
        report.errors.append(errors)
        report.failed.extend((idx, j, i) for j, i in failed)
        report.blocks += w_hat.size
        layers += [v_layer, w_layer]
        params += [prm, prm]
    return SpikingNetwork(layers, params), report


def rescale_to_admissible(net: SpikingNetwork) -> SpikingNetwork:
    """Copy of ``net`` with each layer scaled into ``[-1/sqrt(n_in), 1/sqrt(n_in)]``.

    Scaling changes firing relative to the threshold, hence the warning.
    """
    out = net.copy()
    for idx, layer in enumerate(out.layers):
        bound = 1.0 / math.sqrt(layer.n_in)
        peak = float(np.abs(layer.weights).max(initial=0.0))
        if peak > bound:
            warnings.warn(f"layer {idx}: weights rescaled by {bound / peak:.6g}", stacklevel=2)
            layer.weights *= bound / peak
    return out


def linear_map(first: MaskedDenseLayer, second: MaskedDenseLayer, params, s: np.ndarray) -> np.ndarray:
    """Spatial input of the out-layer for binary inputs ``s`` (``(n, n_in)``), from zero state."""
    x_virtual = np.asarray(s, dtype=np.float64) @ first.effective_weights.T
    fired = (x_virtual >= params.u_th).astype(np.float64)
    return fired @ second.effective_weights.T


# -- measurement ------------------------------------------------------------


@dataclass
class Agreement:
    fraction: float
    mean_l2: float
    n: int


def measure_agreement(net_a: SpikingNetwork, net_b: SpikingNetwork, data) -> Agreement:
    """Fraction of samples whose output trains match at every timestep.

    ``data`` is a dataset or a ``(B, T, N)`` spike array. ``mean_l2`` is
    the mean over samples of ``(1/T) sum_t ||out_a^t - out_b^t||_2``.
    """
    spikes = getattr(data, "spikes", data)
    spikes = np.asarray(spikes)
    if spikes.ndim != 3 or spikes.shape[0] == 0:
        raise DomainError("agreement needs a non-empty (B, T, N) batch")
    if net_a.layers[0].n_in != net_b.layers[0].n_in or net_a.layers[-1].n_out != net_b.layers[-1].n_out:
        raise DomainError("networks differ in input or output width")
    out_a, _ = simulate(net_a, spikes)
    out_b, _ = simulate(net_b, spikes)
    diff = out_a.astype(np.float64) - out_b.astype(np.float64)
    same = np.all(diff == 0, axis=(1, 2))
    l2 = np.sqrt((diff**2).sum(axis=2)).mean(axis=1)
    return Agreement(float(same.mean()), float(l2.mean()), spikes.shape[0])


# -- end-to-end check -------------------------------------------------------


def random_target(N: int, L: int, params, rng) -> SpikingNetwork:
    """Square ``L``-layer target with weights U[-1/sqrt(N), 1/sqrt(N)]."""
    bound = 1.0 / math.sqrt(N)
    layers = [MaskedDenseLayer(rng.uniform(-bound, bound, (N, N))) for _ in range(L)]
    return SpikingNetwork(layers, params)


def estimate_density_constant(
    N: int, L: int, T: int, params, n_targets: int = 200, seed: int = 0, window: float = 0.05, rate: float = 0.5
) -> tuple[float, float]:
    """Measured ``(p_sup, C)`` with ``C = 2 p_sup / (1 - beta)``.

    ``p_sup`` is the pooled density of all target-network membrane
    potentials in ``[u_th - window, u_th + window]``, over random targets
    and Bernoulli(``rate``) inputs.
    """
    rng = np.random.default_rng(seed)
    hits, total = 0, 0
    for _ in range(n_targets):
        net = random_target(N, L, params, rng)
        spikes = (rng.random((1, T, N)) < rate).astype(np.uint8)
        _, records = simulate(net, spikes, record=True)
        for rec in records:
            hits += int(np.sum(np.abs(rec.u - params.u_th) <= window))
            total += rec.u.size
    p_sup = hits / (total * 2.0 * window)
    return p_sup, 2.0 * p_sup / (1.0 - params.beta)


@dataclass
class LthCheck:
    N: int
    L: int
    T: int
    eps: float
    delta: float
    C: float
    k: int
    k_variants: dict
    trials: int
    agreeing: int
    blocks_attempted: int
    blocks_failed: int
    failed_trials: int
    mean_l2: float

    @property
    def agreement(self) -> float:
        return self.agreeing / self.trials

    @property
    def lower_bound(self) -> float:
        return 1.0 - self.delta


def verify_lth(
    N: int,
    L: int,
    T: int,
    delta: float,
    params,
    n_trials: int = 500,
    seed: int = 0,
    eps: float | None = None,
    eps_fraction: float = 0.5,
    C: float | None = None,
    k: int | None = None,
    rate: float = 0.5,
) -> LthCheck:
    """Build equivalent networks for random targets and count exact agreement.

    Without explicit ``eps``, it is ``eps_fraction`` of the largest feasible
    value for the measured ``C``. Each trial draws a fresh target, input
    train and over-parameterized network.
    """
    if C is None:
        _, C = estimate_density_constant(N, L, T, params, seed=seed + 1, rate=rate)
    if eps is None:
        eps = eps_fraction * max_feasible_eps(N, L, T, delta, C)
    bp = LthBoundParams(N, L, T, eps, delta, params.u_th, C)
    if k is None:
        k = required_k_network(bp)
    variants = {
        "single": required_k_single(bp),
        "layer": required_k_layer(bp),
        "layer_to_layer": required_k_layer_to_layer(bp),
        "layer_to_layer_per_row": required_k_layer_to_layer(bp, "per_row"),
        "activation": required_k_activation(bp),
        "network": required_k_network(bp),
    }
    rng = np.random.default_rng(seed)
    agreeing = attempted = failed_blocks = failed_trials = 0
    l2 = 0.0
    for trial in range(n_trials):
        target = random_target(N, L, params, rng)
        spikes = (rng.random((1, T, N)) < rate).astype(np.uint8)
        equiv, report = construct_equivalent_network(target, k, eps, seed=int(rng.integers(2**63)))
        attempted += report.blocks
        failed_blocks += len(report.failed)
        failed_trials += not report.all_succeeded
        agr = measure_agreement(target, equiv, spikes)
        agreeing += int(agr.fraction == 1.0)
        l2 += agr.mean_l2
    return LthCheck(
        N, L, T, eps, delta, C, k, variants, n_trials, agreeing, attempted, failed_blocks, failed_trials, l2 / n_trials
    )

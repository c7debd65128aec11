"""Binary RBM layers, deep stacks, ancestral propagation and greedy training."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from scipy.special import expit

from .rng import substream

log = logging.getLogger(__name__)


class ContractError(ValueError):
    """Raised when an argument violates a shape or domain contract."""


@dataclass(frozen=True)
class RbmLayer:
    """One RBM: ``weights`` is (n_out, n_in), hidden bias ``a``, visible bias ``b``.

    The visible bias drops out of the conditional ``t(h | h')`` and is kept
    only so the joint model round-trips through model files.
    """

    weights: np.ndarray
    hidden_bias: np.ndarray
    visible_bias: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=float, ndmin=2)
        a = np.array(self.hidden_bias, dtype=float, ndmin=1)
        b = np.array(self.visible_bias, dtype=float, ndmin=1)
        if W.ndim != 2 or a.shape != (W.shape[0],) or b.shape != (W.shape[1],):
            raise ContractError(
                f"inconsistent layer shapes W{W.shape} a{a.shape} b{b.shape}"
            )
        for name, arr in (("weights", W), ("hidden_bias", a), ("visible_bias", b)):
            if not np.all(np.isfinite(arr)):
                raise ContractError(f"non-finite entries in {name}")
            arr.setflags(write=False)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "hidden_bias", a)
        object.__setattr__(self, "visible_bias", b)

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def zeros(cls, n_out: int, n_in: int) -> "RbmLayer":
        return cls(np.zeros((n_out, n_in)), np.zeros(n_out), np.zeros(n_in))

    @classmethod
    def identity(cls, n: int, strength: float = 40.0) -> "RbmLayer":
        """Saturated copy kernel: ``h_j = h'_j`` up to ``exp(-strength/2)``."""
        return cls(2 * strength * np.eye(n), -strength * np.ones(n), np.zeros(n))


@dataclass(frozen=True)
class DeepStack:
    layers: tuple[RbmLayer, ...]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ContractError("a stack needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].n_in != layers[k - 1].n_out:
                raise ContractError(
                    f"layer {k + 1} expects {layers[k].n_in} inputs but layer {k} "
                    f"has {layers[k - 1].n_out} outputs"
                )
        object.__setattr__(self, "layers", layers)

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def sizes(self) -> list[int]:
        return [self.n_in] + [layer.n_out for layer in self.layers]

    @property
    def n_classes(self) -> int:
        return int(self.meta.get("n_classes", self.layers[-1].n_out))


@dataclass
class LayerEnsemble:
    """Samples of layer ``layer_index`` (1-based) with the parent each came from.

    For layer 1 ``paired_previous`` is the clamped input broadcast over chains.
    """

    layer_index: int
    samples: np.ndarray
    paired_previous: np.ndarray
    chain_ids: np.ndarray

    def __post_init__(self):
        if len(self.samples) != len(self.paired_previous) or len(self.samples) != len(self.chain_ids):
            raise ContractError("samples, parents and chain ids must align one-to-one")

    def __len__(self) -> int:
        return len(self.samples)


def check_input(x: Sequence[float], n_in: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n_in,):
        raise ContractError(f"input of shape {x.shape}, layer expects ({n_in},)")
    if np.any(x < 0) or np.any(x > 1):
        raise ContractError("input coordinates must lie in [0, 1]")
    return x


def hidden_given_visible(layer: RbmLayer, v: np.ndarray) -> np.ndarray:
    """p(h_j = 1 | v) = logistic(W v + a)_j; ``v`` may be a batch of rows."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != layer.n_in:
        raise ContractError(f"visible vector of width {v.shape[-1]}, layer expects {layer.n_in}")
    return expit(v @ layer.weights.T + layer.hidden_bias)


def visible_given_hidden(layer: RbmLayer, h: np.ndarray) -> np.ndarray:
    return expit(np.asarray(h, dtype=float) @ layer.weights + layer.visible_bias)


def sample_layer(layer: RbmLayer, v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    p = hidden_given_visible(layer, v)
    return (rng.random(p.shape) < p).astype(np.uint8)


def propagate(
    stack: DeepStack, x: Sequence[float], n_chains: int, rng: np.random.Generator
) -> list[LayerEnsemble]:
    """Ancestral samples of every layer, starting from the clamped input ``x``."""
    if n_chains < 1:
        raise ContractError("n_chains must be positive")
    x = check_input(x, stack.n_in)
    ids = np.arange(n_chains)
    prev = np.broadcast_to(x, (n_chains, x.size))
    out = []
    for k, layer in enumerate(stack.layers, start=1):
        cur = sample_layer(layer, prev, rng)
        out.append(LayerEnsemble(k, cur, prev, ids))
        prev = cur
    return out


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    hidden_sizes: tuple[int, ...] = (6,)
    block_size: int = 2
    cd_steps: int = 1
    learning_rate: float = 0.1
    epochs: int = 30
    output_epochs: int = 200
    output_learning_rate: float = 0.5
    batch_size: int = 32
    init_scale: float = 0.01
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "hidden_sizes" in known:
            known["hidden_sizes"] = tuple(known["hidden_sizes"])
        return cls(**known)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d


def _init_layer(n_out: int, n_in: int, scale: float, rng) -> dict[str, np.ndarray]:
    return {
        "W": scale * rng.standard_normal((n_out, n_in)),
        "a": np.zeros(n_out),
        "b": np.zeros(n_in),
    }


def _cd_epoch(params, data, cfg: TrainConfig, rng):
    W, a, b = params["W"], params["a"], params["b"]
    order = rng.permutation(len(data))
    for start in range(0, len(data), cfg.batch_size):
        v0 = data[order[start : start + cfg.batch_size]].astype(float)
        ph0 = expit(v0 @ W.T + a)
        h = (rng.random(ph0.shape) < ph0).astype(float)
        for _ in range(cfg.cd_steps):
            pv = expit(h @ W + b)
            v = (rng.random(pv.shape) < pv).astype(float)
            ph = expit(v @ W.T + a)
            h = (rng.random(ph.shape) < ph).astype(float)
        m = len(v0)
        W += cfg.learning_rate * (ph0.T @ v0 - ph.T @ v) / m
        a += cfg.learning_rate * (ph0 - ph).mean(axis=0)
        b += cfg.learning_rate * (v0 - v).mean(axis=0)


def _output_epoch(params, data, targets, cfg: TrainConfig, rng):
    # hidden units are clamped to the one-hot blocks; the conditional
    # log-likelihood gradient is (target - p(h|v)) v^T
    W, a, b = params["W"], params["a"], params["b"]
    order = rng.permutation(len(data))
    for start in range(0, len(data), cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        v, t = data[idx].astype(float), targets[idx]
        p = expit(v @ W.T + a)
        W += cfg.output_learning_rate * ((t - p).T @ v) / len(v)
        a += cfg.output_learning_rate * (t - p).mean(axis=0)
        pv = expit(t @ W + b)
        b += cfg.learning_rate * (v - pv).mean(axis=0)


def one_hot_blocks(labels: np.ndarray, n_classes: int, block_size: int) -> np.ndarray:
    t = np.zeros((len(labels), n_classes * block_size))
    for c in range(n_classes):
        t[labels == c, c * block_size : (c + 1) * block_size] = 1.0
    return t


def _stack_from_params(params: list[dict], meta: dict) -> DeepStack:
    return DeepStack(
        tuple(RbmLayer(p["W"].copy(), p["a"].copy(), p["b"].copy()) for p in params), meta
    )


def initial_stack(n_in: int, n_classes: int, cfg: TrainConfig) -> DeepStack:
    """The untrained stack ``train_layerwise`` starts from (same seed)."""
    rng = substream(cfg.seed, "train-init")
    sizes = [n_in, *cfg.hidden_sizes, n_classes * cfg.block_size]
    params = [_init_layer(sizes[k + 1], sizes[k], cfg.init_scale, rng) for k in range(len(sizes) - 1)]
    meta = {"seed": cfg.seed, "n_classes": n_classes, "block_size": cfg.block_size, "trained": False}
    return _stack_from_params(params, meta)


def train_layerwise(
    data: np.ndarray, labels: np.ndarray, cfg: TrainConfig = TrainConfig()
) -> DeepStack:
    """Greedy CD-k pretraining of each hidden layer, then the output layer on labels.

    Hidden layers see propagated (sampled) activations of the layer below.
    The output layer's units are one-hot class blocks of ``cfg.block_size``.
    Final training accuracy is stored in ``meta["train_accuracy"]``.
    """
    data = np.asarray(data)
    labels = np.asarray(labels, dtype=int)
    if len(data) == 0:
        raise ContractError("empty dataset")
    if data.ndim != 2 or len(labels) != len(data):
        raise ContractError("dataset must be a 2-D array with one label per row")
    if labels.min() < 0:
        raise ContractError("class indices must be non-negative")
    n_classes = max(int(labels.max()) + 1, 1)

    init = initial_stack(data.shape[1], n_classes, cfg)
    params = [
        {"W": np.array(L.weights), "a": np.array(L.hidden_bias), "b": np.array(L.visible_bias)}
        for L in init.layers
    ]
    rng = substream(cfg.seed, "train")

    acts = data.astype(float)
    for k, p in enumerate(params[:-1]):
        for _ in range(cfg.epochs):
            _cd_epoch(p, acts, cfg, rng)
        acts = (rng.random((len(acts), p["W"].shape[0])) < expit(acts @ p["W"].T + p["a"])).astype(float)
        log.debug("pretrained hidden layer %d", k + 1)

    targets = one_hot_blocks(labels, n_classes, cfg.block_size)
    top = params[-1]
    below = params[:-1]
    for _ in range(cfg.output_epochs):
        # fresh samples of the penultimate layer each epoch so the readout
        # learns the propagation noise
        h = data.astype(float)
        for p in below:
            h = (rng.random((len(h), p["W"].shape[0])) < expit(h @ p["W"].T + p["a"])).astype(float)
        _output_epoch(top, h, targets, cfg, rng)

    meta = dict(init.meta, trained=True, config=cfg.to_dict())
    stack = _stack_from_params(params, meta)
    acc = float(np.mean(classify(stack, data, np.random.default_rng(cfg.seed)) == labels))
    log.info("trained stack %s, training accuracy %.3f", stack.sizes, acc)
    return with_meta(stack, train_accuracy=acc)


def block_means(stack: DeepStack, output_marginals: np.ndarray) -> np.ndarray:
    """Mean activation of each class block of the output layer."""
    n_classes = stack.n_classes
    m = np.asarray(output_marginals, dtype=float)
    return m.reshape(*m.shape[:-1], n_classes, -1).mean(axis=-1)


def classify(stack: DeepStack, X: np.ndarray, rng: np.random.Generator, n_chains: int = 64) -> np.ndarray:
    """Argmax class block of sampled output marginals for each row of ``X``."""
    X = np.asarray(X, dtype=float)
    out = np.empty(len(X), dtype=int)
    for i, x in enumerate(X):
        ens = propagate(stack, x, n_chains, rng)
        prev = ens[-2].samples if len(ens) > 1 else np.broadcast_to(x, (n_chains, x.size))
        marg = hidden_given_visible(stack.layers[-1], prev).mean(axis=0)
        out[i] = int(np.argmax(block_means(stack, marg)))
    return out


def with_meta(stack: DeepStack, **meta) -> DeepStack:
    return replace(stack, meta={**stack.meta, **meta})

"""Engagement network: stacked graph-temporal layers over the face graph.

Layer chain (defaults): input whitening over every (channel, node)
feature, three graph-temporal layers widening 3 -> 64 -> 128 -> 256 with
residual paths on the last two, global average pooling, and either one
K-class head or K-1 single-output binary heads.

Axis order is (B, C, T, N) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import BnState, Tensor
from .errors import ConfigError, ShapeError, ValidationError
from .facegraph import FaceGraphSpec, normalize_adjacency

HEAD_KCLASS = "kclass"
HEAD_BINARY = "binary_heads"

DEFAULT_CHANNELS = (64, 128, 256)
DEFAULT_TEMPORAL_KERNEL = 9
DEFAULT_DROPOUT = 0.1
INPUT_CHANNELS = 3


@dataclass(frozen=True)
class LayerSpec:
    """One graph-temporal layer: channel widths, kernel, residual flag."""

    c_in: int
    c_out: int
    gamma: int = DEFAULT_TEMPORAL_KERNEL
    residual: bool = False
    dropout: float = DEFAULT_DROPOUT
    has_mask: bool = True
    stride: int = 1

    def validate(self):
        problems = []
        if self.c_in < 1 or self.c_out < 1:
            problems.append(f"channel counts must be positive: {self.c_in}->{self.c_out}")
        if self.gamma < 1 or self.gamma % 2 == 0:
            problems.append(f"temporal kernel must be odd and positive, got {self.gamma}")
        if not 0.0 <= self.dropout < 1.0:
            problems.append(f"dropout must be in [0, 1), got {self.dropout}")
        if self.stride < 1:
            problems.append(f"stride must be >= 1, got {self.stride}")
        if problems:
            raise ConfigError(problems)


def default_layer_specs(channels=DEFAULT_CHANNELS, in_channels: int = INPUT_CHANNELS,
                        gamma: int = DEFAULT_TEMPORAL_KERNEL,
                        dropout: float = DEFAULT_DROPOUT,
                        strides=None) -> tuple:
    """First layer plain, later layers residual; widths chain together."""
    if strides is None:
        strides = (1,) * len(channels)
    if len(strides) != len(channels):
        raise ConfigError([f"{len(channels)} channels but {len(strides)} strides"])
    specs = []
    prev = in_channels
    for i, (c, s) in enumerate(zip(channels, strides)):
        specs.append(LayerSpec(c_in=prev, c_out=c, gamma=gamma,
                               residual=(i > 0), dropout=dropout,
                               has_mask=True, stride=int(s)))
        prev = c
    return tuple(specs)


class StgcnNetwork:
    """Parameters, running stats, and the forward pass.

    Parameters live in `params` (name -> Tensor) with a parallel
    `trainable` flag map; batch-norm running statistics live outside the
    tape in `bn_states`.  Construction is deterministic given the seed.
    """

    def __init__(self, graph: FaceGraphSpec, layer_specs, k: int,
                 head_mode: str = HEAD_KCLASS, seed: int = 0,
                 in_channels: int = INPUT_CHANNELS, dtype=np.float32):
        if k < 2:
            raise ConfigError([f"class count must be at least 2, got {k}"])
        if head_mode not in (HEAD_KCLASS, HEAD_BINARY):
            raise ConfigError([f"unknown head mode {head_mode!r}"])
        layer_specs = tuple(layer_specs)
        if not layer_specs:
            raise ConfigError(["need at least one layer"])
        for spec in layer_specs:
            spec.validate()
        if layer_specs[0].c_in != in_channels:
            raise ConfigError([f"first layer expects {layer_specs[0].c_in} channels, "
                               f"input has {in_channels}"])
        for a, b in zip(layer_specs, layer_specs[1:]):
            if a.c_out != b.c_in:
                raise ConfigError([f"layer widths do not chain: {a.c_out} -> {b.c_in}"])

        self.graph = graph
        self.layer_specs = layer_specs
        self.k = k
        self.head_mode = head_mode
        self.in_channels = in_channels
        self.node_count = graph.node_count
        self.dtype = np.dtype(dtype)
        self.seed = seed
        # constant (A+I)_ij / sqrt(d_i d_j); the learnable mask multiplies this
        self.p_matrix = normalize_adjacency(graph)

        self.params: dict = {}
        self.trainable: dict = {}
        self.bn_states: dict = {}
        self._init_params(np.random.default_rng(seed))

    # ------------------------------------------------------------------
    # construction

    def _add(self, name: str, values: np.ndarray, trainable: bool = True):
        self.params[name] = ad.parameter(values.astype(self.dtype))
        self.trainable[name] = trainable

    def _uniform(self, rng, shape, fan_in: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    def _init_params(self, rng):
        n = self.node_count
        c0 = self.in_channels
        self._add("input_bn.gamma", np.ones((1, c0, 1, n)))
        self._add("input_bn.beta", np.zeros((1, c0, 1, n)))
        self.bn_states["input_bn"] = BnState((1, c0, 1, n), self.dtype)

        for i, spec in enumerate(self.layer_specs):
            pfx = f"layer{i}"
            if spec.has_mask:
                self._add(f"{pfx}.mask", np.ones((n, n)))
            self._add(f"{pfx}.spatial.weight",
                      self._uniform(rng, (spec.c_in, spec.c_out), spec.c_in))
            self._add(f"{pfx}.spatial.bias",
                      self._uniform(rng, (spec.c_out,), spec.c_in))
            fan_t = spec.c_out * spec.gamma
            self._add(f"{pfx}.temporal.weight",
                      self._uniform(rng, (spec.c_out, spec.c_out, spec.gamma), fan_t))
            self._add(f"{pfx}.temporal.bias",
                      self._uniform(rng, (spec.c_out,), fan_t))
            if spec.residual and spec.c_in != spec.c_out:
                self._add(f"{pfx}.res.weight",
                          self._uniform(rng, (spec.c_in, spec.c_out), spec.c_in))
                self._add(f"{pfx}.res.bias",
                          self._uniform(rng, (spec.c_out,), spec.c_in))
                self._add(f"{pfx}.res_bn.gamma", np.ones((1, spec.c_out, 1, 1)))
                self._add(f"{pfx}.res_bn.beta", np.zeros((1, spec.c_out, 1, 1)))
                self.bn_states[f"{pfx}.res_bn"] = BnState((1, spec.c_out, 1, 1),
                                                          self.dtype)

        c_pool = self.layer_specs[-1].c_out
        if self.head_mode == HEAD_KCLASS:
            self._add("head.weight", self._uniform(rng, (c_pool, self.k), c_pool))
            self._add("head.bias", self._uniform(rng, (self.k,), c_pool))
        else:
            for i in range(self.k - 1):
                self._add(f"head.bin.{i}.weight",
                          self._uniform(rng, (c_pool, 1), c_pool))
                self._add(f"head.bin.{i}.bias",
                          self._uniform(rng, (1,), c_pool))

    def reinit_heads(self, seed: int):
        """Fresh head parameters (used when attaching binary heads)."""
        rng = np.random.default_rng(seed)
        c_pool = self.layer_specs[-1].c_out
        for name in [p for p in self.params if p.startswith("head")]:
            del self.params[name], self.trainable[name]
        if self.head_mode == HEAD_KCLASS:
            self._add("head.weight", self._uniform(rng, (c_pool, self.k), c_pool))
            self._add("head.bias", self._uniform(rng, (self.k,), c_pool))
        else:
            for i in range(self.k - 1):
                self._add(f"head.bin.{i}.weight",
                          self._uniform(rng, (c_pool, 1), c_pool))
                self._add(f"head.bin.{i}.bias",
                          self._uniform(rng, (1,), c_pool))

    # ------------------------------------------------------------------
    # forward

    def _check_input(self, x: np.ndarray):
        if x.ndim != 4:
            raise ShapeError(f"expected (B, C, T, N) features, got {x.shape}")
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"expected {self.in_channels} channels, got {x.shape[1]}")
        if x.shape[3] != self.node_count:
            raise ShapeError(f"expected {self.node_count} nodes, got {x.shape[3]}")
        if not np.isfinite(x).all():
            raise ValidationError("features", "non-finite values in input")

    def forward(self, features: np.ndarray, training: bool = False,
                rng=None, want_map: bool = False):
        """Logits (B, K) or (B, K-1); with want_map also the last layer map.

        Eval mode needs no rng and is a pure function of the inputs.
        """
        x_np = np.asarray(features, dtype=self.dtype)
        self._check_input(x_np)
        if training and rng is None and any(s.dropout > 0 for s in self.layer_specs):
            raise ValidationError("rng", "training-mode forward needs an rng for dropout")

        x = Tensor(x_np)
        x = ad.batch_norm(x, self.params["input_bn.gamma"],
                          self.params["input_bn.beta"],
                          self.bn_states["input_bn"], axes=(0, 2),
                          training=training)
        ones_mask = None
        for i, spec in enumerate(self.layer_specs):
            pfx = f"layer{i}"
            x0 = x
            if spec.has_mask:
                mask = self.params[f"{pfx}.mask"]
            else:
                if ones_mask is None:
                    ones_mask = ad.constant(np.ones((self.node_count, self.node_count),
                                                    dtype=self.dtype))
                mask = ones_mask
            x = ad.spatial_unit(x, self.params[f"{pfx}.spatial.weight"],
                                self.params[f"{pfx}.spatial.bias"],
                                mask, self.p_matrix)
            x = ad.temporal_conv(x, self.params[f"{pfx}.temporal.weight"],
                                 self.params[f"{pfx}.temporal.bias"],
                                 stride=spec.stride)
            x = ad.relu(x)
            x = ad.dropout(x, spec.dropout, rng, training)
            if spec.residual:
                r = ad.strided_frames(x0, spec.stride)
                if spec.c_in != spec.c_out:
                    r = ad.channel_map(r, self.params[f"{pfx}.res.weight"],
                                       self.params[f"{pfx}.res.bias"])
                    r = ad.batch_norm(r, self.params[f"{pfx}.res_bn.gamma"],
                                      self.params[f"{pfx}.res_bn.beta"],
                                      self.bn_states[f"{pfx}.res_bn"],
                                      axes=(0, 2, 3), training=training)
                x = ad.add(x, r)
        last_map = x
        pooled = ad.global_avg_pool(x)
        logits = self.head_logits(pooled)
        if want_map:
            return logits, last_map
        return logits

    def head_logits(self, pooled: Tensor) -> Tensor:
        """Head(s) applied to pooled (B, C) features."""
        if self.head_mode == HEAD_KCLASS:
            return ad.linear(pooled, self.params["head.weight"],
                             self.params["head.bias"])
        cols = [ad.linear(pooled, self.params[f"head.bin.{i}.weight"],
                          self.params[f"head.bin.{i}.bias"])
                for i in range(self.k - 1)]
        return ad.concat_cols(cols)

    # ------------------------------------------------------------------
    # parameter bookkeeping

    def trainable_params(self) -> dict:
        return {n: p for n, p in self.params.items() if self.trainable[n]}

    def head_param_names(self) -> list:
        return [n for n in self.params if n.startswith("head")]

    def freeze_backbone(self):
        for name in self.params:
            if not name.startswith("head"):
                self.trainable[name] = False

    def count_parameters(self):
        """(total, per-block sizes) over trainable blocks."""
        per_block = {n: int(p.data.size) for n, p in self.params.items()
                     if self.trainable[n]}
        return sum(per_block.values()), per_block

    def state_arrays(self) -> dict:
        """Every persistent array: parameters plus running statistics."""
        out = {n: p.data for n, p in self.params.items()}
        for name, st in self.bn_states.items():
            out[f"{name}.running_mean"] = st.mean
            out[f"{name}.running_var"] = st.var
        return out

    def load_state_arrays(self, arrays: dict):
        for name, p in self.params.items():
            if name not in arrays:
                raise ValidationError("checkpoint", f"missing block {name!r}")
            values = np.asarray(arrays[name])
            if values.shape != p.data.shape:
                raise ShapeError(f"block {name!r}: shape {values.shape} != "
                                 f"{p.data.shape}")
            p.data = values.astype(self.dtype)
        for name, st in self.bn_states.items():
            st.mean = np.asarray(arrays[f"{name}.running_mean"]).astype(self.dtype)
            st.var = np.asarray(arrays[f"{name}.running_var"]).astype(self.dtype)

    def arch_meta(self) -> dict:
        """Architecture identity; the checkpoint fingerprint hashes this."""
        return {
            "node_count": self.node_count,
            "k": self.k,
            "head_mode": self.head_mode,
            "in_channels": self.in_channels,
            "layers": [{
                "c_in": s.c_in, "c_out": s.c_out, "gamma": s.gamma,
                "residual": s.residual, "dropout": s.dropout,
                "has_mask": s.has_mask, "stride": s.stride,
            } for s in self.layer_specs],
        }


def layer_specs_from_meta(meta: dict) -> tuple:
    return tuple(LayerSpec(**d) for d in meta["layers"])


def build_network(graph: FaceGraphSpec, k: int, head_mode: str = HEAD_KCLASS,
                  seed: int = 0, channels=DEFAULT_CHANNELS,
                  in_channels: int = INPUT_CHANNELS,
                  gamma: int = DEFAULT_TEMPORAL_KERNEL,
                  dropout: float = DEFAULT_DROPOUT, strides=None,
                  dtype=np.float32) -> StgcnNetwork:
    specs = default_layer_specs(channels, in_channels, gamma, dropout, strides)
    return StgcnNetwork(graph, specs, k, head_mode, seed, in_channels, dtype)


def with_binary_heads(net: StgcnNetwork, seed: int) -> StgcnNetwork:
    """Frozen-backbone copy of `net` with fresh K-1 single-output heads."""
    clone = StgcnNetwork(net.graph, net.layer_specs, net.k, HEAD_BINARY,
                         seed=net.seed, in_channels=net.in_channels,
                         dtype=net.dtype)
    backbone = {n: np.array(v, copy=True) for n, v in net.state_arrays().items()
                if not n.startswith("head")}
    for name, p in clone.params.items():
        if name in backbone:
            p.data = backbone[name].astype(clone.dtype)
    for name, st in clone.bn_states.items():
        st.mean = np.array(backbone[f"{name}.running_mean"], copy=True)
        st.var = np.array(backbone[f"{name}.running_var"], copy=True)
    clone.reinit_heads(seed)
    clone.freeze_backbone()
    return clone

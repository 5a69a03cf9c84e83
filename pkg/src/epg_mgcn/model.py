"""The prediction network.

Observed tracks are embedded to C channels, pushed through one branch of
stacked graph-convolution blocks per enabled interaction graph (spatial
mixing with the column-normalized adjacency, then a same-padded 3-tap
temporal convolution), fused across branches with a 1x1 convolution, fused
again with the encoded ego plan, and decoded per category by GRU
encoder-decoder pairs that emit per-step displacements accumulated onto each
agent's last observed position.

Parameters live in a flat, deterministically ordered name -> Tensor registry
(:class:`ModelParams`); ablation configurations register only the tensors
their enabled components need.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

from . import autograd as ag
from .autograd import GRUParams, Tensor
from .errors import DimensionError, FormatError, RoutingError, UsageError
from .graphs import GRAPH_NAMES, AdjacencySet, build_adjacency, normalize_adjacency
from .scene import CATEGORIES, Sample, ego_center

__all__ = [
    "ModelConfig",
    "ModelParams",
    "embed_inputs",
    "graph_conv_block",
    "fuse_graph_features",
    "encode_plan",
    "fuse_plan_features",
    "cs_gru_decode",
    "supervised_mask",
    "forward",
    "predict",
    "prediction_loss",
    "save_params",
    "load_params",
]

_GATES = ("z", "r", "h")

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture switches; the ablation ladder toggles the last three."""

    channels: int = 64
    blocks_per_branch: int = 2
    t_obs_points: int = 6
    t_pred: int = 6
    categories_decoded: tuple = ("vehicle", "pedestrian", "bicyclist")
    enabled_graphs: tuple = GRAPH_NAMES
    planning_fusion_enabled: bool = True
    category_specific_decoders: bool = True
    d_d: float = 10.0
    beta_degrees: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "categories_decoded", tuple(self.categories_decoded))
        object.__setattr__(self, "enabled_graphs", tuple(self.enabled_graphs))
        if not self.enabled_graphs:
            raise UsageError("at least one graph must be enabled")
        for g in self.enabled_graphs:
            if g not in GRAPH_NAMES:
                raise UsageError(f"unknown graph {g!r}")
        for c in self.categories_decoded:
            if c not in CATEGORIES:
                raise UsageError(f"unknown category {c!r}")
        if self.channels < 1 or self.blocks_per_branch < 1:
            raise UsageError("channels and blocks_per_branch must be positive")
        if self.t_obs_points < 2 or self.t_pred < 1:
            raise UsageError("t_obs_points >= 2 and t_pred >= 1 required")

    @property
    def branch_order(self) -> tuple:
        return tuple(g for g in GRAPH_NAMES if g in self.enabled_graphs)

    @property
    def decoder_keys(self) -> tuple:
        if self.category_specific_decoders:
            return self.categories_decoded
        return ("shared",)

    def to_dict(self) -> dict:
        return {
            "channels": self.channels,
            "blocks_per_branch": self.blocks_per_branch,
            "t_obs_points": self.t_obs_points,
            "t_pred": self.t_pred,
            "categories_decoded": list(self.categories_decoded),
            "enabled_graphs": list(self.enabled_graphs),
            "planning_fusion_enabled": self.planning_fusion_enabled,
            "category_specific_decoders": self.category_specific_decoders,
            "d_d": self.d_d,
            "beta_degrees": self.beta_degrees,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def _gru_specs(prefix: str, c_in: int, c_h: int):
    for gate in _GATES:
        yield f"{prefix}.w_{gate}", (c_in, c_h), c_in
        yield f"{prefix}.u_{gate}", (c_h, c_h), c_h
        yield f"{prefix}.b_{gate}", (c_h,), None


def param_specs(config: ModelConfig):
    """Ordered (name, shape, fan_in) triples; fan_in None means zero-init."""
    c = config.channels
    yield "embed.weight", (c, 2), 2
    yield "embed.bias", (c,), None
    for g in config.branch_order:
        for b in range(config.blocks_per_branch):
            yield f"branch.{g}.block{b}.spatial.weight", (c, c), c
            yield f"branch.{g}.block{b}.temporal.kernel", (c, c, 3), 3 * c
    n_branches = len(config.branch_order)
    yield "graph_fusion.weight", (1, n_branches), n_branches
    yield "graph_fusion.bias", (1,), None
    if config.planning_fusion_enabled:
        yield "plan.embed.weight", (c, 2), 2
        yield "plan.embed.bias", (c,), None
        yield from _gru_specs("plan.gru", c, c)
        yield "plan_fusion.weight", (1, 2), 2
        yield "plan_fusion.bias", (1,), None
    for key in config.decoder_keys:
        yield from _gru_specs(f"decoder.{key}.enc", c, c)
        yield f"decoder.{key}.pos_embed.weight", (c, 2), 2
        yield f"decoder.{key}.pos_embed.bias", (c,), None
        yield from _gru_specs(f"decoder.{key}.dec", c, c)
        yield f"decoder.{key}.out.weight", (2, c), c
        yield f"decoder.{key}.out.bias", (2,), None


class ModelParams:
    """Flat registry of learnable tensors, keyed by dotted names.

    Creation order follows :func:`param_specs`, so initialization from a
    seeded generator is reproducible and every tensor is registered exactly
    once with the optimizer.
    """

    def __init__(self, config: ModelConfig, tensors: dict):
        self.config = config
        self.tensors = tensors

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int = 0,
                   dtype=np.float64) -> "ModelParams":
        """Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero."""
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, shape, fan_in in param_specs(config):
            if fan_in is None:
                data = np.zeros(shape, dtype=dtype)
            else:
                bound = 1.0 / np.sqrt(fan_in)
                data = rng.uniform(-bound, bound, size=shape).astype(dtype)
            tensors[name] = Tensor(data, requires_grad=True, name=name)
        return cls(config, tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def names(self) -> list:
        return list(self.tensors)

    def items(self):
        return self.tensors.items()

    def gru(self, prefix: str) -> GRUParams:
        return GRUParams(**{
            f"{w}_{g}": self.tensors[f"{prefix}.{w}_{g}"]
            for g in _GATES for w in ("w", "u", "b")
        })

    def count(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {
            name: Tensor(t.data.copy(), requires_grad=True, name=name)
            for name, t in self.tensors.items()
        })


# ---------------------------------------------------------------------------
# forward pieces
# ---------------------------------------------------------------------------


def embed_inputs(sample: Sample, params: ModelParams,
                 config: ModelConfig) -> Tensor:
    """Lift observed 2-D coordinates to C channels. Masked frames produce
    zero feature columns. Returns (N, C, T_obs_points)."""
    feats = ag.channel_mix(Tensor(sample.observed),
                           params["embed.weight"], params["embed.bias"], axis=2)
    feats = ag.mul(feats, sample.obs_mask[:, :, None].astype(sample.observed.dtype))
    return ag.transpose(feats, (0, 2, 1))  # (N, T, C) -> (N, C, T)


def graph_conv_block(z: Tensor, norm_adj: np.ndarray, spatial_weight: Tensor,
                     temporal_kernel: Tensor) -> Tensor:
    """One block: per-frame spatial mixing with the normalized adjacency and
    the learnable channel map, ReLU, then a same-padded temporal convolution.
    Neither step carries a bias, so zero features stay zero."""
    n, c, t = z.shape
    if norm_adj.shape != (n, n):
        raise DimensionError(
            f"adjacency {norm_adj.shape} does not match {n} agents"
        )
    mixed = ag.reshape(ag.matmul(Tensor(norm_adj), ag.reshape(z, (n, c * t))),
                       (n, c, t))
    lifted = ag.channel_mix(mixed, spatial_weight, axis=1)
    return ag.temporal_conv(ag.relu(lifted), temporal_kernel)


def _branch(z: Tensor, norm_adj: np.ndarray, params: ModelParams,
            graph_name: str, config: ModelConfig) -> Tensor:
    out = z
    for b in range(config.blocks_per_branch):
        out = graph_conv_block(
            out, norm_adj,
            params[f"branch.{graph_name}.block{b}.spatial.weight"],
            params[f"branch.{graph_name}.block{b}.temporal.kernel"],
        )
    return out


def fuse_graph_features(branch_outputs, params: ModelParams) -> Tensor:
    """Stack the enabled branches and mix them down with a 1x1 convolution
    plus ReLU. Stack depth equals the number of enabled graphs."""
    stacked = ag.stack(branch_outputs, axis=0)  # (S, N, C, T)
    mixed = ag.channel_mix(stacked, params["graph_fusion.weight"],
                           params["graph_fusion.bias"], axis=0)
    return ag.relu(ag.reshape(mixed, stacked.shape[1:]))


def encode_plan(ego_plan: np.ndarray, params: ModelParams,
                config: ModelConfig) -> Tensor:
    """Embed the planned trajectory per frame and scan it with a GRU from a
    zero initial state; returns the final hidden state (C,)."""
    embedded = ag.channel_mix(Tensor(np.asarray(ego_plan)),
                              params["plan.embed.weight"],
                              params["plan.embed.bias"], axis=1)  # (T_pred, C)
    gru = params.gru("plan.gru")
    h = Tensor(np.zeros(config.channels, dtype=embedded.data.dtype))
    for t in range(embedded.shape[0]):
        h = ag.gru_cell(embedded[t], h, gru)
    return h


def fuse_plan_features(f_graphs: Tensor, plan_encoding,
                       params: ModelParams, config: ModelConfig) -> Tensor:
    """Broadcast the plan encoding over agents and frames, stack it with the
    graph features, and mix with a 1x1 convolution plus ReLU. With planning
    fusion disabled this is just ReLU of the graph features (no parameters)."""
    if not config.planning_fusion_enabled:
        return ag.relu(f_graphs)
    n, c, t = f_graphs.shape
    tiled = ag.broadcast_to(ag.reshape(plan_encoding, (1, c, 1)), (n, c, t))
    stacked = ag.stack([f_graphs, tiled], axis=0)  # (2, N, C, T)
    mixed = ag.channel_mix(stacked, params["plan_fusion.weight"],
                           params["plan_fusion.bias"], axis=0)
    return ag.relu(ag.reshape(mixed, (n, c, t)))


def supervised_mask(sample: Sample, config: ModelConfig) -> np.ndarray:
    """Agents that contribute to the loss and metrics: non-ego, fully
    observed future, and of a decoded category."""
    mask = sample.fut_mask.all(axis=1)
    mask[Sample.EGO_INDEX] = False
    decodable = np.array([c in config.categories_decoded
                          for c in sample.categories])
    return mask & decodable


def _decoder_key(category: str, config: ModelConfig):
    if category not in config.categories_decoded:
        return None
    return category if config.category_specific_decoders else "shared"


def cs_gru_decode(f_fusion: Tensor, sample: Sample, params: ModelParams,
                  config: ModelConfig) -> Tensor:
    """Decode every agent whose category has a decoder; context-only agents
    keep their last observed position. Returns (N, T_pred, 2).

    Per agent: the encoder GRU scans its fused features to a hidden state,
    the decoder GRU starts from that state with the embedded current
    position as first input, and each step's hidden state projects to a
    displacement added onto the previous position.
    """
    n = sample.n_agents
    groups: dict = {}
    undecoded = []
    for i, cat in enumerate(sample.categories):
        key = _decoder_key(cat, config)
        if key is None:
            undecoded.append(i)
        else:
            if f"decoder.{key}.out.weight" not in params:
                raise RoutingError(f"no decoder registered for category {cat!r}")
            groups.setdefault(key, []).append(i)

    order = []
    blocks = []
    for key in sorted(groups):
        idx = groups[key]
        f_in = ag.gather_rows(f_fusion, idx)  # (B, C, T)
        enc = params.gru(f"decoder.{key}.enc")
        dec = params.gru(f"decoder.{key}.dec")
        h = Tensor(np.zeros((len(idx), config.channels), dtype=f_in.data.dtype))
        for t in range(f_in.shape[2]):
            h = ag.gru_cell(f_in[:, :, t], h, enc)
        pos = Tensor(sample.observed[idx, -1])  # (B, 2) current positions
        steps = []
        for _ in range(config.t_pred):
            inp = ag.channel_mix(pos, params[f"decoder.{key}.pos_embed.weight"],
                                 params[f"decoder.{key}.pos_embed.bias"], axis=1)
            h = ag.gru_cell(inp, h, dec)
            delta = ag.channel_mix(h, params[f"decoder.{key}.out.weight"],
                                   params[f"decoder.{key}.out.bias"], axis=1)
            pos = ag.add(pos, delta)
            steps.append(pos)
        blocks.append(ag.transpose(ag.stack(steps, axis=0), (1, 0, 2)))
        order.extend(idx)
    if undecoded:
        last = sample.observed[undecoded, -1]
        blocks.append(Tensor(np.repeat(last[:, None, :], config.t_pred, axis=1)))
        order.extend(undecoded)

    combined = ag.concat(blocks, axis=0) if len(blocks) > 1 else blocks[0]
    inverse = np.empty(n, dtype=np.intp)
    inverse[np.asarray(order, dtype=np.intp)] = np.arange(n)
    return ag.gather_rows(combined, inverse)


def forward(sample: Sample, config: ModelConfig, params: ModelParams,
            adjacency: AdjacencySet | None = None) -> Tensor:
    """Full network pass on an ego-centered sample. Builds (or accepts
    precomputed) adjacency, normalizes the enabled graphs, and returns
    predicted trajectories (N, T_pred, 2) in the sample's frame."""
    if sample.t_obs_points != config.t_obs_points:
        raise DimensionError(
            f"sample has {sample.t_obs_points} observed points, "
            f"config expects {config.t_obs_points}"
        )
    if sample.t_pred != config.t_pred:
        raise DimensionError(
            f"sample has {sample.t_pred} future frames, config expects {config.t_pred}"
        )
    if adjacency is None:
        adjacency = build_adjacency(sample, config.d_d, config.beta_degrees)
    z = embed_inputs(sample, params, config)
    dtype = z.data.dtype
    branch_outputs = [
        _branch(z, normalize_adjacency(adjacency.get(g)).astype(dtype),
                params, g, config)
        for g in config.branch_order
    ]
    f_graphs = fuse_graph_features(branch_outputs, params)
    plan_encoding = None
    if config.planning_fusion_enabled:
        plan_encoding = encode_plan(sample.ego_plan, params, config)
    f_fusion = fuse_plan_features(f_graphs, plan_encoding, params, config)
    return cs_gru_decode(f_fusion, sample, params, config)


def predict(sample: Sample, config: ModelConfig, params: ModelParams,
            adjacency: AdjacencySet | None = None) -> np.ndarray:
    """Ego-center, run the network, and return predictions as a plain array
    in the sample's original frame."""
    centered = ego_center(sample)
    out = forward(centered, config, params, adjacency)
    return out.data + centered.origin


def prediction_loss(predictions: Tensor, sample: Sample,
                    config: ModelConfig):
    """Mean squared Euclidean error (meters^2) over supervised agents and
    unmasked future frames; the ego never contributes. Returns the scalar
    loss tensor and the number of contributing agent-frames (0 means the
    loss is the defined zero for a sample with no supervised agents)."""
    sup = supervised_mask(sample, config)
    weight = (sup[:, None] & sample.fut_mask).astype(sample.future.dtype)
    count = int(weight.sum())
    if count == 0:
        return Tensor(0.0), 0
    diff = ag.sub(predictions, sample.future)
    sq = ag.mul(diff, diff)
    total = ag.tsum(ag.mul(sq, weight[:, :, None]))
    return ag.mul(total, 1.0 / count), count


# ---------------------------------------------------------------------------
# parameter checkpoint (flat, versioned container)
# ---------------------------------------------------------------------------


def save_params(params: ModelParams, path) -> None:
    """Write parameters as a numpy archive: one array per dotted name plus a
    JSON metadata entry with the format version and model configuration."""
    meta = json.dumps({
        "checkpoint_version": CHECKPOINT_VERSION,
        "model_config": params.config.to_dict(),
    })
    arrays = {name: t.data for name, t in params.items()}
    np.savez(path, __meta__=np.array(meta), **arrays)


def load_params(path, expected_config: ModelConfig | None = None) -> ModelParams:
    """Load a parameter checkpoint, validating names and shapes against the
    configuration recorded in the file (or ``expected_config`` if given)."""
    with np.load(path, allow_pickle=False) as archive:
        if "__meta__" not in archive:
            raise FormatError("not a parameter checkpoint: missing metadata")
        meta = json.loads(str(archive["__meta__"]))
        if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
            raise FormatError(
                f"unsupported checkpoint version {meta.get('checkpoint_version')!r}"
            )
        config = ModelConfig.from_dict(meta["model_config"])
        if expected_config is not None:
            config = expected_config
        stored = {k: archive[k] for k in archive.files if k != "__meta__"}
    tensors = {}
    for name, shape, _ in param_specs(config):
        if name not in stored:
            raise FormatError(f"parameter '{name}' missing from checkpoint")
        if stored[name].shape != shape:
            raise FormatError(
                f"parameter '{name}' has shape {stored[name].shape}, "
                f"expected {shape}"
            )
        tensors[name] = Tensor(stored[name], requires_grad=True, name=name)
        del stored[name]
    if stored:
        extra = sorted(stored)[0]
        raise FormatError(f"unexpected parameter '{extra}' in checkpoint")
    return ModelParams(config, tensors)

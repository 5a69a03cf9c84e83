"""Deterministic mini-batch training with the step learning-rate schedule.

One seeded PCG64 generator (numpy ``default_rng``) drives both parameter
initialization and epoch shuffling, and its state is persisted in
checkpoints, so a resumed run continues the loss trace bitwise identically
to an uninterrupted one. Per-sample losses are averaged over each batch
before a single backward pass; Adam applies the update at the scheduled
learning rate ``initial_lr * decay_factor ** floor(epoch / decay_every)``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autograd as ag
from .errors import DataError, FormatError, NumericError
from .graphs import build_adjacency
from .model import ModelConfig, ModelParams, forward, param_specs, prediction_loss
from .optim import Adam
from .scene import Sample, ego_center, validate_sample

__all__ = [
    "TrainConfig",
    "EpochRecord",
    "RunRecord",
    "TrainResult",
    "lr_at",
    "train",
    "checkpoint_save",
    "checkpoint_load",
    "write_run_record",
    "read_run_record",
]

TRAINER_CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    """Optimizer schedule and loop settings.

    ``decay_every_epochs`` is 200 for the urban setting and 5 for the
    highway one; ``precision`` selects float64 ("double") or float32
    ("single") parameters.
    """

    batch_size: int = 128
    initial_lr: float = 0.001
    lr_decay_factor: float = 0.1
    decay_every_epochs: int = 200
    max_epochs: int = 100
    seed: int = 0
    precision: str = "double"

    def __post_init__(self):
        if self.batch_size < 1 or self.decay_every_epochs < 1:
            raise DataError("batch_size and decay_every_epochs must be positive")
        if self.initial_lr <= 0:
            raise DataError("initial_lr must be positive")
        if not 0.0 < self.lr_decay_factor < 1.0:
            raise DataError("lr_decay_factor must lie in (0, 1)")
        if self.max_epochs < 0:
            raise DataError("max_epochs must be >= 0")
        if self.precision not in ("double", "single"):
            raise DataError(f"unknown precision {self.precision!r}")

    @property
    def dtype(self):
        return np.float64 if self.precision == "double" else np.float32

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "initial_lr": self.initial_lr,
            "lr_decay_factor": self.lr_decay_factor,
            "decay_every_epochs": self.decay_every_epochs,
            "max_epochs": self.max_epochs,
            "seed": self.seed,
            "precision": self.precision,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Step schedule: the learning rate decays by ``lr_decay_factor`` once
    every ``decay_every_epochs`` epochs."""
    if epoch < 0:
        raise DataError("epoch must be >= 0")
    return config.initial_lr * config.lr_decay_factor ** (
        epoch // config.decay_every_epochs
    )


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    learning_rate: float
    seconds: float


@dataclass
class RunRecord:
    epochs: list = field(default_factory=list)

    def losses(self) -> list:
        return [e.mean_loss for e in self.epochs]

    def append(self, record: EpochRecord) -> None:
        if self.epochs and record.epoch != self.epochs[-1].epoch + 1:
            raise DataError("epoch records must be contiguous")
        if not self.epochs and record.epoch != 0:
            raise DataError("epoch records must start at 0")
        self.epochs.append(record)


@dataclass
class TrainResult:
    params: ModelParams
    record: RunRecord
    optimizer: Adam
    rng: np.random.Generator


def _cast_sample(sample: Sample, dtype) -> Sample:
    out = sample.copy()
    out.observed = out.observed.astype(dtype)
    out.future = out.future.astype(dtype)
    out.ego_plan = out.ego_plan.astype(dtype)
    return out


def train(samples, model_config: ModelConfig, train_config: TrainConfig,
          *, resume=None, run_dir=None, checkpoint_every: int | None = None,
          progress=None) -> TrainResult:
    """Run the training loop; returns final parameters and the loss trace.

    ``resume`` continues from a trainer checkpoint (bitwise identical to the
    uninterrupted run). With ``run_dir`` set, a checkpoint and the run record
    land there at the end (and every ``checkpoint_every`` epochs).
    """
    if not samples:
        raise DataError("training dataset is empty")
    for s in samples:
        validate_sample(s)

    if resume is not None:
        params, optimizer, rng, start_epoch, record = checkpoint_load(
            resume, expected_config=model_config)
    else:
        rng = np.random.default_rng(train_config.seed)
        params = ModelParams.initialize(
            model_config, seed=train_config.seed, dtype=train_config.dtype)
        optimizer = Adam(params.tensors, learning_rate=train_config.initial_lr)
        start_epoch = 0
        record = RunRecord()

    prepared = []
    for s in samples:
        centered = ego_center(_cast_sample(s, train_config.dtype))
        prepared.append((centered,
                         build_adjacency(centered, model_config.d_d,
                                         model_config.beta_degrees)))

    run_dir = Path(run_dir) if run_dir is not None else None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)

    n = len(prepared)
    for epoch in range(start_epoch, train_config.max_epochs):
        t0 = time.perf_counter()
        lr = lr_at(epoch, train_config)
        optimizer.learning_rate = lr
        perm = rng.permutation(n)
        loss_sum = 0.0
        for b0 in range(0, n, train_config.batch_size):
            batch = perm[b0:b0 + train_config.batch_size]
            optimizer.zero_grad()
            batch_loss = None
            for i in batch:
                sample, adjacency = prepared[i]
                out = forward(sample, model_config, params, adjacency)
                loss, _ = prediction_loss(out, sample, model_config)
                batch_loss = loss if batch_loss is None else ag.add(batch_loss, loss)
            batch_loss = ag.mul(batch_loss, 1.0 / len(batch))
            value = batch_loss.item()
            if not math.isfinite(value):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {b0 // train_config.batch_size}"
                )
            batch_loss.backward()
            optimizer.step()
            loss_sum += value * len(batch)
        record.append(EpochRecord(epoch, loss_sum / n, lr,
                                  time.perf_counter() - t0))
        if progress is not None:
            progress(record.epochs[-1])
        if (run_dir is not None and checkpoint_every
                and (epoch + 1) % checkpoint_every == 0):
            checkpoint_save(run_dir / "checkpoint.npz", params, optimizer,
                            rng, epoch + 1, record)

    if run_dir is not None:
        checkpoint_save(run_dir / "checkpoint.npz", params, optimizer,
                        rng, train_config.max_epochs, record)
        write_run_record(record, run_dir / "run_record.jsonl")
    return TrainResult(params, record, optimizer, rng)


# ---------------------------------------------------------------------------
# trainer checkpoint: parameters + optimizer state + shuffle stream
# ---------------------------------------------------------------------------


def checkpoint_save(path, params: ModelParams, optimizer: Adam,
                    rng: np.random.Generator, epoch_count: int,
                    record: RunRecord) -> None:
    meta = json.dumps({
        "checkpoint_version": TRAINER_CHECKPOINT_VERSION,
        "model_config": params.config.to_dict(),
        "epoch_count": epoch_count,
        "rng_state": rng.bit_generator.state,
        "adam": {
            "step_count": optimizer.state.step_count,
            "beta1": optimizer.state.beta1,
            "beta2": optimizer.state.beta2,
            "epsilon": optimizer.state.epsilon,
            "learning_rate": optimizer.state.learning_rate,
        },
        "records": [
            [e.epoch, e.mean_loss, e.learning_rate, e.seconds]
            for e in record.epochs
        ],
    })
    arrays = {}
    for name, t in params.items():
        arrays[f"param.{name}"] = t.data
        arrays[f"adam.m.{name}"] = optimizer.state.first_moment[name]
        arrays[f"adam.v.{name}"] = optimizer.state.second_moment[name]
    np.savez(path, __meta__=np.array(meta), **arrays)


def checkpoint_load(path, expected_config: ModelConfig | None = None):
    """Returns (params, optimizer, rng, epoch_count, record)."""
    with np.load(path, allow_pickle=False) as archive:
        if "__meta__" not in archive:
            raise FormatError("not a trainer checkpoint: missing metadata")
        meta = json.loads(str(archive["__meta__"]))
        if meta.get("checkpoint_version") != TRAINER_CHECKPOINT_VERSION:
            raise FormatError(
                f"unsupported checkpoint version {meta.get('checkpoint_version')!r}"
            )
        config = ModelConfig.from_dict(meta["model_config"])
        if expected_config is not None and expected_config != config:
            config = expected_config
        stored = {k: archive[k] for k in archive.files if k != "__meta__"}

    tensors = {}
    first_moment, second_moment = {}, {}
    for name, shape, _ in param_specs(config):
        key = f"param.{name}"
        if key not in stored:
            raise FormatError(f"parameter '{name}' missing from checkpoint")
        if stored[key].shape != shape:
            raise FormatError(
                f"parameter '{name}' has shape {stored[key].shape}, expected {shape}"
            )
        if f"adam.m.{name}" not in stored or f"adam.v.{name}" not in stored:
            raise FormatError(f"optimizer state for '{name}' missing from checkpoint")
        tensors[name] = ag.Tensor(stored[key], requires_grad=True, name=name)
        first_moment[name] = stored[f"adam.m.{name}"]
        second_moment[name] = stored[f"adam.v.{name}"]
    params = ModelParams(config, tensors)

    adam_meta = meta["adam"]
    optimizer = Adam(params.tensors, learning_rate=adam_meta["learning_rate"],
                     beta1=adam_meta["beta1"], beta2=adam_meta["beta2"],
                     epsilon=adam_meta["epsilon"])
    optimizer.state.step_count = int(adam_meta["step_count"])
    optimizer.state.first_moment = first_moment
    optimizer.state.second_moment = second_moment

    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng_state"]

    record = RunRecord()
    for epoch, loss, lr, seconds in meta["records"]:
        record.append(EpochRecord(int(epoch), float(loss), float(lr),
                                  float(seconds)))
    return params, optimizer, rng, int(meta["epoch_count"]), record


def write_run_record(record: RunRecord, path) -> None:
    """Line-delimited records: epoch, loss, lr, seconds."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in record.epochs:
            fh.write(json.dumps({
                "epoch": e.epoch,
                "loss": format(e.mean_loss, ".17g"),
                "lr": format(e.learning_rate, ".17g"),
                "seconds": round(e.seconds, 6),
            }, separators=(",", ":")))
            fh.write("\n")


def read_run_record(path) -> RunRecord:
    record = RunRecord()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            record.append(EpochRecord(int(rec["epoch"]), float(rec["loss"]),
                                      float(rec["lr"]), float(rec["seconds"])))
    return record

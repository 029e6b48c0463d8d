"""Training loop: weighted cross-entropy, gradient clipping, best-on-val
checkpointing, and per-epoch learning curves.

Loss bookkeeping: when class weights are enabled the batch loss is the
weighted mean normalized by the sum of the per-example weights (PyTorch's
convention), and validation loss uses the same criterion so the checkpoint
metric matches what was optimized. Reported test losses elsewhere
(EvalReport.mean_loss) are always the unweighted mean, so comparison
tables stay comparable across weighting modes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
import torch
import torch.nn.functional as F

from . import corpus
from .corpus import Dataset
from .errors import ConfigurationError, TrainingDiverged, ValidationError
from .models import ModelHandle, ModelSpec, build_model, load_checkpoint, save_checkpoint
from .textprep import TokenizerAdapter, clean_text

BASELINE_LEARNING_RATE = 1e-3
ENCODER_LEARNING_RATE = 2e-5


@dataclass
class TrainConfig:
    epochs: int = 3
    batch_size: int = 32
    learning_rate: float | None = None  # resolved per model kind when None
    weight_decay: float = 0.01
    grad_clip_norm: float | None = 1.0
    use_class_weights: bool = False
    seed: int = 42

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1: {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1: {self.batch_size}")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be > 0: {self.learning_rate}")
        if self.grad_clip_norm is not None and self.grad_clip_norm <= 0:
            raise ConfigurationError(f"grad_clip_norm must be > 0: {self.grad_clip_norm}")

    def resolved_learning_rate(self, kind: str) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return ENCODER_LEARNING_RATE if kind.startswith("encoder") else BASELINE_LEARNING_RATE

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass
class LearningCurves:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def to_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([asdict(r) for r in self.records], fh, indent=2)

    def to_csv(self, path: str) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"]
            )
            writer.writeheader()
            for r in self.records:
                writer.writerow(asdict(r))


@dataclass
class CheckpointPolicy:
    """Save whenever validation loss improves; the file always holds the
    best-so-far weights."""

    path: str


def weighted_cross_entropy(logits, labels, weights) -> torch.Tensor:
    """Mean of w[y_i] * nll_i normalized by the total batch weight."""
    labels = torch.as_tensor(labels, dtype=torch.long)
    weights = torch.as_tensor(weights, dtype=logits.dtype)
    if (weights <= 0).any():
        raise ValidationError("class weights must be positive")
    return F.cross_entropy(logits, labels, weight=weights)


def clip_gradients(params, max_norm: float) -> float:
    """Scale gradients so the global norm is at most max_norm; returns the
    post-clip norm."""
    params = [p for p in params if p.grad is not None]
    if not params:
        return 0.0
    torch.nn.utils.clip_grad_norm_(params, max_norm)
    post = math.sqrt(sum(float((p.grad.detach() ** 2).sum()) for p in params))
    return post


def _encode_split(ds: Dataset, tokenizer: TokenizerAdapter, max_len: int):
    texts = [clean_text(t) for t in ds.frame["tweet"]]
    ids, mask = tokenizer.encode_batch(texts, max_len)
    return (
        torch.tensor(ids, dtype=torch.long),
        torch.tensor(mask, dtype=torch.long),
        torch.tensor(ds.frame["class"].to_numpy(), dtype=torch.long),
    )


def _pass_loss_accuracy(module, ids, mask, labels, batch_size, weights) -> tuple[float, float]:
    module.eval()
    total_loss, correct = 0.0, 0
    total_weight = 0.0
    with torch.no_grad():
        for start in range(0, len(labels), batch_size):
            sl = slice(start, start + batch_size)
            logits = module(ids[sl], mask[sl])
            if weights is not None:
                w = weights[labels[sl]]
                total_loss += float((F.cross_entropy(logits, labels[sl], reduction="none") * w).sum())
                total_weight += float(w.sum())
            else:
                total_loss += float(F.cross_entropy(logits, labels[sl], reduction="sum"))
                total_weight += len(labels[sl])
            correct += int((logits.argmax(dim=1) == labels[sl]).sum())
    return total_loss / total_weight, correct / len(labels)


def train(
    spec: ModelSpec,
    splits: dict[str, Dataset],
    config: TrainConfig,
    policy: CheckpointPolicy,
    tokenizer: TokenizerAdapter,
) -> tuple[ModelHandle, LearningCurves]:
    """Run the full loop and return the best-validation-loss checkpoint
    (not the last epoch) plus per-epoch curves."""
    if "train" not in splits or "val" not in splits:
        raise ConfigurationError("splits must contain 'train' and 'val'")
    torch.manual_seed(config.seed)
    np.random.seed(config.seed % (2**32))

    handle = build_model(spec, seed=config.seed)
    module = handle.module
    lr = config.resolved_learning_rate(spec.kind)
    optimizer = torch.optim.AdamW(
        [p for p in module.parameters() if p.requires_grad],
        lr=lr,
        weight_decay=config.weight_decay,
    )

    weights = None
    if config.use_class_weights:
        w = corpus.class_weights(splits["train"])
        weights = torch.tensor([w[c] for c in sorted(w)], dtype=torch.float32)

    tr_ids, tr_mask, tr_labels = _encode_split(splits["train"], tokenizer, spec.max_len)
    va_ids, va_mask, va_labels = _encode_split(splits["val"], tokenizer, spec.max_len)

    gen = torch.Generator().manual_seed(config.seed)
    curves = LearningCurves()
    best_val = float("inf")
    best_epoch = -1
    loss_history: list[float] = []
    step = 0

    for epoch in range(config.epochs):
        module.train()
        perm = torch.randperm(len(tr_labels), generator=gen)
        epoch_loss, epoch_weight, correct = 0.0, 0.0, 0
        for start in range(0, len(perm), config.batch_size):
            batch_idx = perm[start : start + config.batch_size]
            ids, mask, labels = tr_ids[batch_idx], tr_mask[batch_idx], tr_labels[batch_idx]
            optimizer.zero_grad()
            logits = module(ids, mask)
            if weights is not None:
                loss = weighted_cross_entropy(logits, labels, weights)
                batch_weight = float(weights[labels].sum())
            else:
                loss = F.cross_entropy(logits, labels)
                batch_weight = float(len(labels))
            loss_value = float(loss.detach())
            loss_history.append(loss_value)
            if not math.isfinite(loss_value):
                raise TrainingDiverged(
                    f"non-finite loss {loss_value} at step {step}",
                    step=step,
                    batch_ids=batch_idx.tolist(),
                    loss_history=loss_history[-50:],
                )
            loss.backward()
            if config.grad_clip_norm is not None:
                clip_gradients(module.parameters(), config.grad_clip_norm)
            optimizer.step()
            epoch_loss += loss_value * batch_weight
            epoch_weight += batch_weight
            correct += int((logits.detach().argmax(dim=1) == labels).sum())
            step += 1

        val_loss, val_acc = _pass_loss_accuracy(
            module, va_ids, va_mask, va_labels, config.batch_size, weights
        )
        curves.records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=epoch_loss / epoch_weight,
                train_accuracy=correct / len(tr_labels),
                val_loss=val_loss,
                val_accuracy=val_acc,
            )
        )
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            save_checkpoint(handle, policy.path)

    _write_manifest(policy.path, spec, splits, config, curves, best_epoch, best_val)
    best_handle = load_checkpoint(policy.path)
    return best_handle, curves


def _write_manifest(path, spec, splits, config, curves, best_epoch, best_val):
    manifest = {
        "spec": spec.to_dict(),
        "config": config.to_dict(),
        "split_manifest_hash": corpus.manifest_hash(splits),
        "best_epoch": best_epoch,
        "best_val_loss": best_val,
        "curves": [asdict(r) for r in curves.records],
    }
    with open(str(path) + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)

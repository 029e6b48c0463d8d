"""The classifier family: embedding baselines, encoder fine-tunes, hybrids.

Six architecture kinds cover the ten studied configurations (the encoder
kinds are instantiated with either a full-size or a distilled checkpoint):

  cnn / lstm / bilstm   from-scratch embeddings over subword ids
  encoder               pretrained encoder, start-token head
  encoder_cnn           encoder hidden states -> conv -> adaptive max pool
  encoder_bilstm        encoder hidden states -> BiLSTM -> final states

Conventions that tests rely on: the padding token embeds to the zero
vector; pooling and recurrent final states only see real-token positions;
eval-mode forwards are pure functions of (parameters, input); argmax ties
break toward the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import CheckpointError, ConfigurationError

NUM_CLASSES = 3
CHECKPOINT_FORMAT_VERSION = 1

BASELINE_KINDS = ("cnn", "lstm", "bilstm")
ENCODER_KINDS = ("encoder", "encoder_cnn", "encoder_bilstm")
KINDS = BASELINE_KINDS + ENCODER_KINDS


@dataclass
class ModelSpec:
    kind: str
    encoder_name: str | None = None
    vocab_size: int | None = None
    embed_dim: int = 128
    conv_filters: int = 100
    kernel_sizes: list[int] = field(default_factory=lambda: [3, 4, 5])
    lstm_hidden: int = 128
    lstm_layers: int = 1
    dropout: float = 0.1
    num_classes: int = NUM_CLASSES
    max_len: int = 64
    pad_token_id: int = 0
    freeze_encoder: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.num_classes != NUM_CLASSES:
            raise ConfigurationError(f"num_classes is fixed at {NUM_CLASSES}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigurationError(f"dropout must be in [0,1): {self.dropout}")
        if self.max_len < 2:
            raise ConfigurationError(f"max_len must be >= 2: {self.max_len}")
        if any(k > self.max_len for k in self.kernel_sizes):
            raise ConfigurationError(
                f"kernel sizes {self.kernel_sizes} exceed max_len {self.max_len}"
            )
        uses_encoder = self.kind in ENCODER_KINDS
        if uses_encoder and not self.encoder_name:
            raise ConfigurationError(f"kind {self.kind!r} requires encoder_name")
        if not uses_encoder and self.encoder_name:
            raise ConfigurationError(f"kind {self.kind!r} must not set encoder_name")
        if not uses_encoder and (self.vocab_size is None or self.vocab_size < 1):
            raise ConfigurationError(f"kind {self.kind!r} requires a positive vocab_size")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


def _valid_positions(mask: torch.Tensor) -> torch.Tensor:
    """Boolean mask of real tokens; an all-padding row keeps position 0 so
    pooling and packing always have at least one position to look at."""
    valid = mask.bool()
    empty = ~valid.any(dim=1)
    if empty.any():
        valid = valid.clone()
        valid[empty, 0] = True
    return valid


def _same_pad(x: torch.Tensor, k: int) -> torch.Tensor:
    return F.pad(x, (k // 2, (k - 1) // 2))


class TextCNN(nn.Module):
    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.embedding = nn.Embedding(spec.vocab_size, spec.embed_dim, padding_idx=spec.pad_token_id)
        self.convs = nn.ModuleList(
            nn.Conv1d(spec.embed_dim, spec.conv_filters, k) for k in spec.kernel_sizes
        )
        self.dropout = nn.Dropout(spec.dropout)
        self.fc = nn.Linear(spec.conv_filters * len(spec.kernel_sizes), spec.num_classes)

    def forward(self, ids, mask):
        x = self.embedding(ids).transpose(1, 2)  # B,E,L
        valid = _valid_positions(mask)
        feats = []
        for conv in self.convs:
            y = F.relu(conv(_same_pad(x, conv.kernel_size[0])))
            y = y.masked_fill(~valid.unsqueeze(1), float("-inf"))
            feats.append(y.max(dim=2).values)
        z = self.dropout(torch.cat(feats, dim=1))
        return self.fc(z)


class LSTMClassifier(nn.Module):
    def __init__(self, spec: ModelSpec, bidirectional: bool):
        super().__init__()
        self.embedding = nn.Embedding(spec.vocab_size, spec.embed_dim, padding_idx=spec.pad_token_id)
        self.lstm = nn.LSTM(
            spec.embed_dim,
            spec.lstm_hidden,
            num_layers=spec.lstm_layers,
            batch_first=True,
            bidirectional=bidirectional,
        )
        self.bidirectional = bidirectional
        self.dropout = nn.Dropout(spec.dropout)
        width = 2 * spec.lstm_hidden if bidirectional else spec.lstm_hidden
        self.fc = nn.Linear(width, spec.num_classes)

    def forward(self, ids, mask):
        emb = self.embedding(ids)
        lengths = mask.sum(dim=1).clamp(min=1).cpu()
        packed = nn.utils.rnn.pack_padded_sequence(
            emb, lengths, batch_first=True, enforce_sorted=False
        )
        _, (h_n, _) = self.lstm(packed)
        if self.bidirectional:
            final = torch.cat([h_n[-2], h_n[-1]], dim=1)
        else:
            final = h_n[-1]
        return self.fc(self.dropout(final))


class EncoderClassifier(nn.Module):
    """Pretrained encoder; classify from the start-token representation."""

    def __init__(self, spec: ModelSpec, encoder):
        super().__init__()
        self.encoder = encoder
        self.dropout = nn.Dropout(spec.dropout)
        self.fc = nn.Linear(encoder.config.hidden_size, spec.num_classes)

    def forward(self, ids, mask):
        hidden = self.encoder(input_ids=ids, attention_mask=mask).last_hidden_state
        return self.fc(self.dropout(hidden[:, 0]))


class EncoderCNN(nn.Module):
    """Encoder hidden states -> single conv -> adaptive max pool (width 1).

    Padded positions are zeroed and excluded from pooling, so appending
    masked padding cannot change the logits.
    """

    def __init__(self, spec: ModelSpec, encoder):
        super().__init__()
        self.encoder = encoder
        self.conv = nn.Conv1d(encoder.config.hidden_size, spec.conv_filters, spec.kernel_sizes[0])
        self.fc = nn.Linear(spec.conv_filters, spec.num_classes)

    def forward(self, ids, mask):
        hidden = self.encoder(input_ids=ids, attention_mask=mask).last_hidden_state
        hidden = hidden * mask.unsqueeze(-1).to(hidden.dtype)
        valid = _valid_positions(mask)
        y = F.relu(self.conv(_same_pad(hidden.transpose(1, 2), self.conv.kernel_size[0])))
        y = y.masked_fill(~valid.unsqueeze(1), float("-inf"))
        return self.fc(y.max(dim=2).values)


class EncoderBiLSTM(nn.Module):
    def __init__(self, spec: ModelSpec, encoder):
        super().__init__()
        self.encoder = encoder
        self.lstm = nn.LSTM(
            encoder.config.hidden_size,
            spec.lstm_hidden,
            num_layers=spec.lstm_layers,
            batch_first=True,
            bidirectional=True,
        )
        self.dropout = nn.Dropout(spec.dropout)
        self.fc = nn.Linear(2 * spec.lstm_hidden, spec.num_classes)

    def forward(self, ids, mask):
        hidden = self.encoder(input_ids=ids, attention_mask=mask).last_hidden_state
        lengths = mask.sum(dim=1).clamp(min=1).cpu()
        packed = nn.utils.rnn.pack_padded_sequence(
            hidden, lengths, batch_first=True, enforce_sorted=False
        )
        _, (h_n, _) = self.lstm(packed)
        final = torch.cat([h_n[-2], h_n[-1]], dim=1)
        return self.fc(self.dropout(final))


@dataclass
class ModelHandle:
    spec: ModelSpec
    module: nn.Module

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.module.parameters())


def _load_encoder(spec: ModelSpec, encoder_config: dict | None = None):
    from transformers import AutoConfig, AutoModel

    try:
        if encoder_config is not None:
            cfg_kwargs = {k: v for k, v in encoder_config.items() if k != "model_type"}
            cfg = AutoConfig.for_model(encoder_config["model_type"], **cfg_kwargs)
            encoder = AutoModel.from_config(cfg)
        else:
            encoder = AutoModel.from_pretrained(spec.encoder_name)
    except Exception as exc:
        raise CheckpointError(
            f"could not resolve encoder checkpoint {spec.encoder_name!r}: {exc}"
        ) from exc
    max_pos = getattr(encoder.config, "max_position_embeddings", None)
    if max_pos is not None and spec.max_len > max_pos:
        raise ConfigurationError(
            f"max_len {spec.max_len} exceeds encoder position limit {max_pos}"
        )
    if spec.freeze_encoder:
        for p in encoder.parameters():
            p.requires_grad_(False)
    return encoder


def _construct(spec: ModelSpec, encoder_config: dict | None = None) -> nn.Module:
    if spec.kind == "cnn":
        return TextCNN(spec)
    if spec.kind == "lstm":
        return LSTMClassifier(spec, bidirectional=False)
    if spec.kind == "bilstm":
        return LSTMClassifier(spec, bidirectional=True)
    encoder = _load_encoder(spec, encoder_config)
    if spec.kind == "encoder":
        return EncoderClassifier(spec, encoder)
    if spec.kind == "encoder_cnn":
        return EncoderCNN(spec, encoder)
    return EncoderBiLSTM(spec, encoder)


def build_model(spec: ModelSpec, seed: int = 0) -> ModelHandle:
    """Construct a model with seeded (hence reproducible) initialization."""
    torch.manual_seed(seed)
    module = _construct(spec)
    module.eval()
    return ModelHandle(spec=spec, module=module)


def _forward(handle: ModelHandle, ids, mask) -> torch.Tensor:
    ids = torch.as_tensor(ids, dtype=torch.long)
    mask = torch.as_tensor(mask, dtype=torch.long)
    if ids.dim() == 1:
        ids, mask = ids.unsqueeze(0), mask.unsqueeze(0)
    return handle.module(ids, mask)


def _forward_for_kind(handle: ModelHandle, ids, mask, kind: str) -> torch.Tensor:
    if handle.spec.kind != kind:
        raise ConfigurationError(f"expected a {kind!r} model, got {handle.spec.kind!r}")
    return _forward(handle, ids, mask)


def forward_cnn(handle, ids, mask):
    return _forward_for_kind(handle, ids, mask, "cnn")


def forward_lstm(handle, ids, mask):
    return _forward_for_kind(handle, ids, mask, "lstm")


def forward_bilstm(handle, ids, mask):
    return _forward_for_kind(handle, ids, mask, "bilstm")


def forward_encoder(handle, ids, mask):
    return _forward_for_kind(handle, ids, mask, "encoder")


def forward_encoder_cnn(handle, ids, mask):
    return _forward_for_kind(handle, ids, mask, "encoder_cnn")


def forward_encoder_bilstm(handle, ids, mask):
    return _forward_for_kind(handle, ids, mask, "encoder_bilstm")


def softmax_probabilities(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict(handle: ModelHandle, ids, mask):
    """Eval-mode labels and probabilities; ties go to the lowest class index."""
    handle.module.eval()
    with torch.no_grad():
        logits = _forward(handle, ids, mask).cpu().numpy()
    probs = softmax_probabilities(logits)
    labels = np.argmax(probs, axis=-1)  # np.argmax returns the first maximum
    return labels, probs


def save_checkpoint(handle: ModelHandle, path: str) -> None:
    encoder = getattr(handle.module, "encoder", None)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "spec": handle.spec.to_dict(),
        "state_dict": handle.module.state_dict(),
        "encoder_config": encoder.config.to_dict() if encoder is not None else None,
    }
    torch.save(payload, path)


def load_checkpoint(path: str) -> ModelHandle:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"could not read checkpoint {path!r}: {exc}") from exc
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version!r}")
    try:
        spec = ModelSpec.from_dict(payload["spec"])
        module = _construct(spec, encoder_config=payload.get("encoder_config"))
        module.load_state_dict(payload["state_dict"], strict=True)
    except ConfigurationError:
        raise
    except Exception as exc:
        raise CheckpointError(f"checkpoint {path!r} incompatible with its spec: {exc}") from exc
    module.eval()
    return ModelHandle(spec=spec, module=module)

"""Confusion matrices, per-class/macro metrics, and comparison tables.

Zero-division convention: any precision/recall/F1 whose denominator is 0
reports 0.0 (the degenerate always-predict-one-class case depends on it).
Macro averages are unweighted means over the three classes. Rounding
(half-up) happens only when rendering; reports keep full precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from decimal import Decimal, ROUND_HALF_UP

import numpy as np
import torch

from .corpus import Dataset, LABELS
from .errors import ValidationError
from .models import ModelHandle, predict
from .textprep import TokenizerAdapter, clean_text

EVAL_REPORT_VERSION = 1


def confusion(preds, labels) -> np.ndarray:
    """3x3 counts; rows are true classes, columns are predicted classes."""
    preds = np.asarray(preds, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if preds.shape != labels.shape or preds.ndim != 1 or len(preds) == 0:
        raise ValidationError(
            f"predictions and labels must be equal-length non-empty vectors: "
            f"{preds.shape} vs {labels.shape}"
        )
    m = np.zeros((len(LABELS), len(LABELS)), dtype=int)
    np.add.at(m, (labels, preds), 1)
    return m


def _safe_div(num: float, den: float) -> float:
    return float(num / den) if den else 0.0


def per_class_metrics(m: np.ndarray) -> dict[int, dict[str, float]]:
    out = {}
    for c in LABELS:
        precision = _safe_div(m[c, c], m[:, c].sum())
        recall = _safe_div(m[c, c], m[c, :].sum())
        f1 = _safe_div(2 * precision * recall, precision + recall)
        out[c] = {"precision": precision, "recall": recall, "f1": f1}
    return out


def macro_metrics(per_class: dict[int, dict[str, float]]) -> dict[str, float]:
    return {
        key: float(np.mean([per_class[c][key] for c in LABELS]))
        for key in ("precision", "recall", "f1")
    }


def accuracy(m: np.ndarray) -> float:
    return _safe_div(np.trace(m), m.sum())


@dataclass
class EvalReport:
    confusion: list[list[int]]
    per_class: dict[int, dict[str, float]]
    macro: dict[str, float]
    accuracy: float
    mean_loss: float
    support: dict[int, int]
    report_version: int = EVAL_REPORT_VERSION

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_class"] = {str(k): v for k, v in self.per_class.items()}
        d["support"] = {str(k): v for k, v in self.support.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            confusion=d["confusion"],
            per_class={int(k): v for k, v in d["per_class"].items()},
            macro=d["macro"],
            accuracy=d["accuracy"],
            mean_loss=d["mean_loss"],
            support={int(k): v for k, v in d["support"].items()},
            report_version=d.get("report_version", EVAL_REPORT_VERSION),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "EvalReport":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def report_from_predictions(preds, labels, mean_loss: float = float("nan")) -> EvalReport:
    m = confusion(preds, labels)
    pc = per_class_metrics(m)
    return EvalReport(
        confusion=m.tolist(),
        per_class=pc,
        macro=macro_metrics(pc),
        accuracy=accuracy(m),
        mean_loss=float(mean_loss),
        support={c: int(m[c, :].sum()) for c in LABELS},
    )


def evaluate(
    handle: ModelHandle,
    ds: Dataset,
    tokenizer: TokenizerAdapter,
    batch_size: int = 64,
) -> EvalReport:
    """Run the model over a dataset split; mean_loss is the *unweighted*
    mean cross-entropy so reports stay comparable across weighting modes."""
    texts = [clean_text(t) for t in ds.frame["tweet"]]
    labels = ds.frame["class"].to_numpy()
    ids, mask = tokenizer.encode_batch(texts, handle.spec.max_len)
    ids_t = torch.tensor(ids, dtype=torch.long)
    mask_t = torch.tensor(mask, dtype=torch.long)
    labels_t = torch.tensor(labels, dtype=torch.long)

    handle.module.eval()
    preds, total_nll = [], 0.0
    with torch.no_grad():
        for start in range(0, len(labels), batch_size):
            sl = slice(start, start + batch_size)
            logits = handle.module(ids_t[sl], mask_t[sl])
            total_nll += float(
                torch.nn.functional.cross_entropy(logits, labels_t[sl], reduction="sum")
            )
            probs = logits.double().softmax(dim=-1).cpu().numpy()
            preds.append(np.argmax(probs, axis=-1))
    preds = np.concatenate(preds)
    return report_from_predictions(preds, labels, mean_loss=total_nll / len(labels))


def _half_up(x: float, digits: int = 0) -> float:
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


@dataclass
class ComparisonTable:
    """Rendered side of the metric reports; row order is as given."""

    names: list[str]
    reports: list[EvalReport]
    epochs: list[int]

    def rows(self) -> list[dict]:
        out = []
        for name, rep, ep in zip(self.names, self.reports, self.epochs):
            out.append(
                {
                    "model": name,
                    "precision_pct": _half_up(100 * rep.macro["precision"]),
                    "recall_pct": _half_up(100 * rep.macro["recall"]),
                    "f1_pct": _half_up(100 * rep.macro["f1"]),
                    "loss": _half_up(rep.mean_loss, 3),
                    "accuracy_pct": _half_up(100 * rep.accuracy, 1),
                    "epochs": ep,
                }
            )
        return out

    def render_text(self) -> str:
        header = ("Model", "Precision (%)", "Recall (%)", "F1-Score (%)", "Loss", "Accuracy (%)", "Epochs")
        rows = [
            (
                r["model"],
                f"{r['precision_pct']:.0f}",
                f"{r['recall_pct']:.0f}",
                f"{r['f1_pct']:.0f}",
                f"{r['loss']:.3f}",
                f"{r['accuracy_pct']:.1f}",
                str(r["epochs"]),
            )
            for r in self.rows()
        ]
        widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(header)]
        lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
        lines.append("  ".join("-" * w for w in widths))
        for row in rows:
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
        return "\n".join(lines)

    def to_csv(self, path: str) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh,
                fieldnames=["model", "precision_pct", "recall_pct", "f1_pct", "loss", "accuracy_pct", "epochs"],
            )
            writer.writeheader()
            writer.writerows(self.rows())

    def to_json(self) -> dict:
        return {
            "report_version": EVAL_REPORT_VERSION,
            "rows": self.rows(),
            "full_precision": [r.to_dict() for r in self.reports],
        }


def compare_report(named_reports: list[tuple[str, EvalReport, int]]) -> ComparisonTable:
    if not named_reports:
        raise ValidationError("compare_report needs at least one report")
    names = [n for n, _, _ in named_reports]
    reports = [r for _, r, _ in named_reports]
    epochs = [e for _, _, e in named_reports]
    return ComparisonTable(names=names, reports=reports, epochs=epochs)

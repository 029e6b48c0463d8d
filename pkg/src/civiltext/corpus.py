"""Dataset ingestion, validation, exploratory statistics, and splits.

The canonical file is a UTF-8 CSV (RFC 4180 quoting) with a header row and
columns: `Unnamed: 0`, count, hate_speech, offensive_language, neither,
class, tweet, and optionally text_length (recomputed from the tweet when
absent). Rows violating the vote-sum or label-range invariants are
quarantined with a reason, never silently dropped.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import SchemaError, ValidationError
from .textprep import clean_text, word_count

LABELS = (0, 1, 2)
LABEL_NAMES = {0: "hate_speech", 1: "offensive_language", 2: "neither"}

ID_COLUMN = "Unnamed: 0"
VOTE_COLUMNS = ("hate_speech", "offensive_language", "neither")
REQUIRED_COLUMNS = (ID_COLUMN, "count", *VOTE_COLUMNS, "class", "tweet")
NUMERIC_COLUMNS = (ID_COLUMN, "count", *VOTE_COLUMNS, "class", "text_length")

STATS_REPORT_VERSION = 1


@dataclass
class LabeledTweet:
    row_id: int
    count: int
    hate_votes: int
    offensive_votes: int
    neither_votes: int
    label: int
    text: str
    text_length: int


@dataclass
class Dataset:
    """Immutable table of labeled tweets plus provenance and quarantine info."""

    frame: pd.DataFrame
    source: str = ""
    content_hash: str = ""
    quarantined: pd.DataFrame | None = None
    quarantine_reasons: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frame)

    def __post_init__(self):
        if len(self.frame) == 0:
            raise ValidationError("dataset is empty")
        if self.frame[ID_COLUMN].duplicated().any():
            dupes = self.frame[ID_COLUMN][self.frame[ID_COLUMN].duplicated()].tolist()[:5]
            raise ValidationError(f"duplicate row ids: {dupes}")

    def rows(self):
        for rec in self.frame.to_dict("records"):
            yield LabeledTweet(
                row_id=int(rec[ID_COLUMN]),
                count=int(rec["count"]),
                hate_votes=int(rec["hate_speech"]),
                offensive_votes=int(rec["offensive_language"]),
                neither_votes=int(rec["neither"]),
                label=int(rec["class"]),
                text=str(rec["tweet"]),
                text_length=int(rec["text_length"]),
            )

    @property
    def row_ids(self) -> list[int]:
        return self.frame[ID_COLUMN].astype(int).tolist()


def _hash_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_dataset(path: str) -> Dataset:
    """Parse and validate the annotated-tweets CSV.

    Raises SchemaError for missing columns, ValidationError for unparseable
    class values (with the offending row number). Vote-sum or label-range
    violations quarantine the row into `Dataset.quarantined`.
    """
    try:
        frame = pd.read_csv(path, encoding="utf-8", keep_default_na=False, na_values=[])
    except FileNotFoundError:
        raise SchemaError(f"dataset file not found: {path}")
    except Exception as exc:
        raise SchemaError(f"could not parse CSV {path}: {exc}") from exc

    for col in REQUIRED_COLUMNS:
        if col not in frame.columns:
            raise SchemaError(f"dataset is missing required column {col!r}")

    for col in (ID_COLUMN, "count", *VOTE_COLUMNS, "class"):
        try:
            frame[col] = frame[col].astype(int)
        except (ValueError, TypeError):
            bad = frame.index[pd.to_numeric(frame[col], errors="coerce").isna()]
            row = int(bad[0]) + 2 if len(bad) else "?"  # +2: header + 1-based
            raise ValidationError(f"non-integer value in column {col!r} at file row {row}")

    frame["tweet"] = frame["tweet"].astype(str)
    if "text_length" in frame.columns:
        frame["text_length"] = frame["text_length"].astype(int)
    else:
        frame["text_length"] = frame["tweet"].map(word_count)

    vote_sum = sum(frame[c] for c in VOTE_COLUMNS)
    bad_votes = vote_sum != frame["count"]
    bad_label = ~frame["class"].isin(LABELS)
    bad_counts = (frame["count"] < 1) | (frame[list(VOTE_COLUMNS)] < 0).any(axis=1)
    bad = bad_votes | bad_label | bad_counts

    reasons = []
    if bad.any():
        for idx in frame.index[bad]:
            why = []
            if bad_votes[idx]:
                why.append("vote counts do not sum to count")
            if bad_label[idx]:
                why.append(f"class {frame.at[idx, 'class']} outside {LABELS}")
            if bad_counts[idx]:
                why.append("negative votes or count < 1")
            reasons.append(f"row id {frame.at[idx, ID_COLUMN]}: " + "; ".join(why))

    quarantined = frame[bad].reset_index(drop=True) if bad.any() else None
    kept = frame[~bad].reset_index(drop=True)
    if len(kept) == 0:
        raise ValidationError("all rows quarantined; nothing to load")

    return Dataset(
        frame=kept,
        source=str(path),
        content_hash=_hash_file(path),
        quarantined=quarantined,
        quarantine_reasons=reasons,
    )


def class_distribution(ds: Dataset) -> dict[int, int]:
    counts = ds.frame["class"].value_counts().to_dict()
    return {label: int(counts.get(label, 0)) for label in LABELS}


def descriptive_stats(ds: Dataset, columns=None) -> dict[str, dict]:
    """Per-column count/mean/std/min/quartiles/max.

    Sample std (ddof=1); quantiles use linear interpolation between order
    statistics. A single-row column reports std 0.0 with a degenerate flag.
    """
    cols = [c for c in (columns or NUMERIC_COLUMNS) if c in ds.frame.columns]
    out = {}
    for col in cols:
        x = ds.frame[col].to_numpy(dtype=float)
        degenerate = len(x) < 2
        out[col] = {
            "count": int(len(x)),
            "mean": float(x.mean()),
            "std": 0.0 if degenerate else float(x.std(ddof=1)),
            "min": float(x.min()),
            "q25": float(np.percentile(x, 25)),
            "median": float(np.percentile(x, 50)),
            "q75": float(np.percentile(x, 75)),
            "max": float(x.max()),
            "degenerate_sample": degenerate,
        }
    return out


def unique_counts(ds: Dataset, columns=None) -> dict[str, int]:
    cols = [c for c in (columns or (*NUMERIC_COLUMNS[:-1], "tweet", "text_length")) if c in ds.frame.columns]
    return {col: int(ds.frame[col].nunique()) for col in cols}


def word_frequencies(ds: Dataset, top_k: int) -> list[tuple[str, int]]:
    """Top-k (word, frequency) over cleaned tweets; ties break lexicographically."""
    if top_k < 1:
        raise ValidationError(f"top_k must be >= 1, got {top_k}")
    counts = Counter()
    for text in ds.frame["tweet"]:
        counts.update(clean_text(text).split())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_k]


@dataclass
class SplitSpec:
    train_fraction: float = 0.70
    val_fraction: float = 0.15
    test_fraction: float = 0.15
    seed: int = 42
    stratified: bool = True

    def __post_init__(self):
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(not (0.0 < f < 1.0) for f in fracs):
            raise ValidationError(f"split fractions must be in (0,1): {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1: {fracs}")


def _allot(n: int, fractions) -> list[int]:
    """Floor each share, then hand out the remainder by largest fractional
    part, ties going to the later split (so test fills before val)."""
    raw = [n * f for f in fractions]
    sizes = [int(np.floor(r)) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (raw[i] - sizes[i], i), reverse=True)
    for i in range(n - sum(sizes)):
        sizes[order[i % len(order)]] += 1
    return sizes


def split(ds: Dataset, spec: SplitSpec) -> dict[str, Dataset]:
    """Seeded partition into train/val/test; stratified by class when flagged."""
    fractions = (spec.train_fraction, spec.val_fraction, spec.test_fraction)
    rng = np.random.default_rng(spec.seed)
    parts = {"train": [], "val": [], "test": []}

    if spec.stratified:
        for label in LABELS:
            rows = ds.frame.index[ds.frame["class"] == label].to_numpy()
            if len(rows) and len(rows) < 3:
                raise ValidationError(
                    f"class {label} has {len(rows)} rows; cannot stratify into 3 splits"
                )
            if len(rows) == 0:
                continue
            rng.shuffle(rows)
            n_tr, n_va, n_te = _allot(len(rows), fractions)
            parts["train"].append(rows[:n_tr])
            parts["val"].append(rows[n_tr : n_tr + n_va])
            parts["test"].append(rows[n_tr + n_va :])
    else:
        rows = ds.frame.index.to_numpy().copy()
        rng.shuffle(rows)
        n_tr, n_va, n_te = _allot(len(rows), fractions)
        parts["train"].append(rows[:n_tr])
        parts["val"].append(rows[n_tr : n_tr + n_va])
        parts["test"].append(rows[n_tr + n_va :])

    out = {}
    for name, chunks in parts.items():
        idx = np.sort(np.concatenate(chunks))
        out[name] = Dataset(
            frame=ds.frame.loc[idx].reset_index(drop=True),
            source=ds.source,
            content_hash=ds.content_hash,
        )
    return out


def class_weights(train: Dataset) -> dict[int, float]:
    """w_c = N / (3 * n_c): the weighted mean over the training set is 1."""
    dist = class_distribution(train)
    missing = [label for label, n in dist.items() if n == 0]
    if missing:
        raise ValidationError(f"cannot compute class weights; missing classes {missing}")
    n = len(train)
    return {label: n / (len(LABELS) * dist[label]) for label in LABELS}


def label_vote_consistency(ds: Dataset) -> dict:
    """Report (not enforce) how often the stored label is the vote argmax."""
    votes = ds.frame[list(VOTE_COLUMNS)].to_numpy()
    argmax_label = votes.argmax(axis=1)
    is_max = votes[np.arange(len(votes)), ds.frame["class"].to_numpy()] == votes.max(axis=1)
    violating = ds.frame[ID_COLUMN][~is_max].astype(int).tolist()
    return {
        "fraction_consistent": float(is_max.mean()),
        "violating_row_ids": violating,
        "strict_argmax_fraction": float((argmax_label == ds.frame["class"].to_numpy()).mean()),
    }


def text_length_report(ds: Dataset) -> dict:
    """Recompute word counts and diff against the stored text_length column."""
    recomputed = ds.frame["tweet"].map(word_count)
    mismatch = ds.frame[ID_COLUMN][recomputed != ds.frame["text_length"]].astype(int).tolist()
    return {
        "mean_recomputed": float(recomputed.mean()),
        "mean_stored": float(ds.frame["text_length"].mean()),
        "mismatching_row_ids": mismatch,
    }


def stats_report(ds: Dataset, top_k_words: int = 20) -> dict:
    """The documented JSON exploratory report (schema-versioned)."""
    return {
        "report_version": STATS_REPORT_VERSION,
        "source": ds.source,
        "content_hash": ds.content_hash,
        "n_rows": len(ds),
        "n_quarantined": 0 if ds.quarantined is None else int(len(ds.quarantined)),
        "class_distribution": {str(k): v for k, v in class_distribution(ds).items()},
        "descriptive_stats": descriptive_stats(ds),
        "unique_counts": unique_counts(ds),
        "word_frequencies": [[w, c] for w, c in word_frequencies(ds, top_k_words)],
        "label_vote_consistency": label_vote_consistency(ds),
        "text_length_check": text_length_report(ds),
    }


def save_split_manifest(splits: dict[str, Dataset], path: str) -> None:
    manifest = {name: part.row_ids for name, part in splits.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)


def load_split_manifest(ds: Dataset, path: str) -> dict[str, Dataset]:
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    by_id = ds.frame.set_index(ds.frame[ID_COLUMN])
    out = {}
    for name, ids in manifest.items():
        frame = by_id.loc[ids].reset_index(drop=True)
        out[name] = Dataset(frame=frame, source=ds.source, content_hash=ds.content_hash)
    return out


def manifest_hash(splits: dict[str, Dataset]) -> str:
    payload = json.dumps({k: splits[k].row_ids for k in sorted(splits)}).encode()
    return hashlib.sha256(payload).hexdigest()

"""Deterministic statistics-matched surrogate dataset.

The original 24,783-tweet corpus cannot be redistributed with this package,
so offline runs use a generated stand-in engineered to match its published
summary statistics exactly: row count, per-class counts, the text-length
distribution (mean 14.12, sample std 6.83, quartiles 9/13/19, max 52,
35 distinct values), and all-unique tweet texts.

Class signal is synthetic: each class owns a disjoint content vocabulary,
and a NOISE_RATE fraction of rows draw their words from a different
class's vocabulary. That pins the best achievable test accuracy near
1 - NOISE_RATE, so end-to-end training runs land in a predictable band.

Point tooling at the real corpus via --dataset / CIVILTEXT_DATASET_CSV to
reproduce the published numbers instead.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .corpus import ID_COLUMN

N_ROWS = 24783
CLASS_COUNTS = {0: 1430, 1: 19190, 2: 4163}
NOISE_RATE = 0.10
DEFAULT_SEED = 20240901

# Frozen solution of the length-distribution constraints (see module doc).
TEXT_LENGTH_HISTOGRAM = {
    1: 2, 2: 17, 3: 128, 4: 365, 5: 747, 6: 1204, 7: 1643, 8: 1995,
    9: 1400, 10: 1516, 11: 1542, 12: 1497, 13: 1403, 14: 1285, 15: 1154,
    16: 1021, 17: 893, 18: 774, 19: 840, 20: 744, 21: 639, 22: 606,
    23: 521, 24: 464, 25: 414, 26: 370, 27: 330, 28: 293, 29: 258,
    30: 226, 31: 194, 32: 163, 34: 100, 36: 34, 52: 1,
}

_ONSETS = "b bl br c ch cl cr d dr f fl fr g gl gr h j k l m n p pl pr r s sh sl sm sn sp st str t th tr v w".split()
_NUCLEI = "a e i o u ai ea ee oo ou".split()
_CODAS = "b ck d g k l ll m n ng nt p r rd rk rm rn s sh st t".split()

_GLUE_WORDS = (
    "the a an and or but so if to of in on at for with is are was be it this "
    "that you i we they he she not no yes do did done get got like just about "
    "from as by up down out now then there here my your our his her them him "
    "me us its one all some any more most very really too also still even"
).split()

# Raw-text decorations so the cleaning cascade has something to remove.
_URLS = ["https://t.co/%s" % s for s in ("a1b2c", "xk9q", "m3nn0", "zz74p", "q0ws8")]
_MENTIONS = ["@user%d" % i for i in (7, 23, 58, 104, 311)]
_DIGIT_TOKENS = ["8", "42", "100", "2023", "777"]
_EMOTICON_TOKENS = [":-)", ":)", "xD", "<3", ":*", "=P", "O.o"]


def _pseudo_word(rng: np.random.Generator, syllables: int) -> str:
    parts = []
    for _ in range(syllables):
        parts.append(rng.choice(_ONSETS) + rng.choice(_NUCLEI))
    return "".join(parts) + rng.choice(_CODAS)


def _class_vocabs(rng: np.random.Generator, size_per_class: int = 360):
    """Three disjoint content-word pools (also disjoint from glue words)."""
    seen = set(_GLUE_WORDS)
    pools = []
    for _ in range(3):
        pool = []
        while len(pool) < size_per_class:
            w = _pseudo_word(rng, int(rng.integers(1, 3)))
            if w not in seen:
                seen.add(w)
                pool.append(w)
        pools.append(pool)
    return pools


def _length_assignments(rng: np.random.Generator) -> np.ndarray:
    lengths = np.repeat(
        list(TEXT_LENGTH_HISTOGRAM.keys()),
        list(TEXT_LENGTH_HISTOGRAM.values()),
    )
    rng.shuffle(lengths)
    return lengths


def _count_and_votes(rng: np.random.Generator, label: int):
    """Annotator totals: strict majority on the stored label."""
    count = int(rng.choice([3, 4, 5, 6, 9], p=[0.845, 0.09, 0.04, 0.02, 0.005]))
    majority = count // 2 + 1
    label_votes = int(rng.integers(majority, count + 1))
    rest = count - label_votes
    others = [l for l in (0, 1, 2) if l != label]
    first = int(rng.integers(0, rest + 1)) if rest else 0
    votes = {label: label_votes, others[0]: first, others[1]: rest - first}
    return count, votes[0], votes[1], votes[2]


def generate(seed: int = DEFAULT_SEED) -> pd.DataFrame:
    """Build the full surrogate frame with the canonical CSV schema."""
    rng = np.random.default_rng(seed)
    vocabs = _class_vocabs(rng)
    lengths = _length_assignments(rng)

    labels = np.repeat([0, 1, 2], [CLASS_COUNTS[0], CLASS_COUNTS[1], CLASS_COUNTS[2]])
    rng.shuffle(labels)

    seen_tweets = set()
    records = []
    for i in range(N_ROWS):
        label = int(labels[i])
        length = int(lengths[i])

        # vocabulary-source class: flipped for a NOISE_RATE fraction
        if rng.random() < NOISE_RATE:
            source = int(rng.choice([l for l in (0, 1, 2) if l != label]))
        else:
            source = label

        pool = vocabs[source]
        for _attempt in range(64):
            tokens = []
            budget = length
            # occasional raw-only tokens exercising the cleaning cascade
            if budget > 2 and rng.random() < 0.05:
                tokens.append(_MENTIONS[rng.integers(len(_MENTIONS))])
                budget -= 1
            if budget > 2 and rng.random() < 0.05:
                tokens.append(_DIGIT_TOKENS[rng.integers(len(_DIGIT_TOKENS))])
                budget -= 1
            trailing = []
            if budget > 2 and rng.random() < 0.05:
                trailing.append(_URLS[rng.integers(len(_URLS))])
                budget -= 1
            if budget > 2 and rng.random() < 0.03:
                trailing.append(_EMOTICON_TOKENS[rng.integers(len(_EMOTICON_TOKENS))])
                budget -= 1
            glue = rng.random(budget) < 0.40
            glue_idx = rng.integers(0, len(_GLUE_WORDS), budget)
            word_idx = rng.integers(0, len(pool), budget)
            tokens.extend(
                _GLUE_WORDS[glue_idx[j]] if glue[j] else pool[word_idx[j]]
                for j in range(budget)
            )
            tokens.extend(trailing)
            tweet = " ".join(tokens)
            if tweet not in seen_tweets:
                seen_tweets.add(tweet)
                break
        else:
            raise RuntimeError("could not generate a unique tweet")

        count, v0, v1, v2 = _count_and_votes(rng, label)
        records.append((i, count, v0, v1, v2, label, tweet, length))

    frame = pd.DataFrame(
        records,
        columns=[ID_COLUMN, "count", "hate_speech", "offensive_language", "neither", "class", "tweet", "text_length"],
    )
    return frame


def write_csv(path: str, seed: int = DEFAULT_SEED) -> str:
    frame = generate(seed)
    frame.to_csv(path, index=False)
    return str(path)

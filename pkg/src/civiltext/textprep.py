"""Text cleaning and tokenization for short social-media posts.

The cleaning cascade is reproduced bit-exactly from the original training
pipeline, including its quirks: the text is lowercased *before* the
emoticon pass, so emoticon literals containing uppercase letters (most of
the list) can never match.  Do not "fix" the ordering — downstream models
and golden files depend on it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigurationError

EMOTICON_FILE_VERSION = 1

# The emoticon literals ship as a data file so the list is versioned and
# byte-auditable; duplicates ('xD', 'XP') are intentional and preserved.
with resources.files("civiltext.data").joinpath("emoticons.txt").open(
    "r", encoding="utf-8"
) as _fh:
    EMOTICONS = [line.rstrip("\n") for line in _fh]

# Cascade regexes. Semantics pinned: \s = Unicode whitespace,
# \w = [A-Za-z0-9_], \d = [0-9]; \xbf is the literal inverted question
# mark U+00BF.
_URL_RE = re.compile(r"https?://[^\s]+")
_MENTION_RE = re.compile(r"@\w+", re.ASCII)
_DIGITS_RE = re.compile(r"\d+", re.ASCII)
_NON_KEPT_RE = re.compile(r"[^a-zA-Z?.!,\xbf]+")
_KEPT_PUNCT_RE = re.compile(r"([?.!,\xbf])")
# Note: the original used the class [" "] (quote or space). By this point
# quotes are gone, so it only collapses space runs, but we keep it verbatim.
_SPACE_RUN_RE = re.compile(r'[" "]+')


def clean_text(raw: str) -> str:
    """Normalize a raw post to lowercase words separated by single spaces.

    Steps, in order: lowercase; drop URLs, @-mentions, digit runs; delete
    emoticon literals (case-sensitive, list order); squash characters
    outside [a-zA-Z?.!,¿] to spaces; squash the kept punctuation to spaces;
    collapse space runs; strip.  Total function: any input, possibly empty
    output.
    """
    text = raw.lower()
    text = _URL_RE.sub("", text)
    text = _MENTION_RE.sub("", text)
    text = _DIGITS_RE.sub("", text)
    for emoticon in EMOTICONS:
        text = text.replace(emoticon, "")
    text = _NON_KEPT_RE.sub(" ", text)
    text = _KEPT_PUNCT_RE.sub(" ", text)
    text = _SPACE_RUN_RE.sub(" ", text)
    return text.strip()


def word_count(raw: str) -> int:
    """Number of maximal whitespace-separated tokens in `raw`."""
    return len(raw.split())


@dataclass
class TokenSequence:
    """Padded/truncated subword ids plus their attention mask."""

    ids: list[int]
    attention_mask: list[int]

    @property
    def length(self) -> int:
        return len(self.ids)


class TokenizerAdapter:
    """Wraps a loaded subword tokenizer behind the fixed-length contract."""

    def __init__(self, tokenizer, name: str = ""):
        if tokenizer is None:
            raise ConfigurationError("tokenizer adapter created without a loaded tokenizer")
        self.tokenizer = tokenizer
        self.name = name or getattr(tokenizer, "name_or_path", "")

    @property
    def vocab_size(self) -> int:
        return len(self.tokenizer)

    @property
    def pad_token_id(self) -> int:
        return self.tokenizer.pad_token_id

    def encode(self, clean: str, max_len: int) -> TokenSequence:
        if max_len < 2:
            raise ConfigurationError(f"max_len must be >= 2, got {max_len}")
        enc = self.tokenizer(
            clean,
            padding="max_length",
            truncation=True,
            max_length=max_len,
        )
        return TokenSequence(ids=enc["input_ids"], attention_mask=enc["attention_mask"])

    def encode_batch(self, texts: list[str], max_len: int):
        """Batch-encode to (ids, mask) lists of lists; used by training loops."""
        if max_len < 2:
            raise ConfigurationError(f"max_len must be >= 2, got {max_len}")
        enc = self.tokenizer(
            list(texts),
            padding="max_length",
            truncation=True,
            max_length=max_len,
        )
        return enc["input_ids"], enc["attention_mask"]


def tokenize(clean: str, adapter: TokenizerAdapter, max_len: int) -> TokenSequence:
    """Encode cleaned text to exactly `max_len` ids with special tokens."""
    return adapter.encode(clean, max_len)


def load_tokenizer(name_or_path: str) -> TokenizerAdapter:
    """Load a tokenizer from a checkpoint name or local directory.

    Hub names need network access; local directories and vocab files work
    offline.
    """
    import os

    from transformers import AutoTokenizer, BertTokenizer

    try:
        if os.path.isfile(name_or_path):  # a bare WordPiece vocab file
            tok = BertTokenizer(vocab_file=name_or_path)
        else:
            tok = AutoTokenizer.from_pretrained(name_or_path)
    except Exception as exc:
        raise ConfigurationError(f"could not load tokenizer {name_or_path!r}: {exc}") from exc
    return TokenizerAdapter(tok, name=str(name_or_path))


_SPECIAL_TOKENS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


def build_vocab(texts, path, size: int = 8000) -> int:
    """Write a WordPiece-style whole-word vocab built from cleaned `texts`.

    Lets the from-scratch baselines (and offline encoder fixtures) run
    without downloading a pretrained vocabulary. Returns the vocab size.
    """
    from collections import Counter

    counts = Counter()
    for t in texts:
        counts.update(clean_text(t).split())
    words = [w for w, _ in counts.most_common(max(0, size - len(_SPECIAL_TOKENS)))]
    with open(path, "w", encoding="utf-8") as fh:
        for token in _SPECIAL_TOKENS + words:
            fh.write(token + "\n")
    return len(_SPECIAL_TOKENS) + len(words)

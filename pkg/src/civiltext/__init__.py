"""civiltext: hate-speech / offensive-language detection and conditional
text neutralization for short social-media posts."""

__version__ = "0.1.0"

from .corpus import LABEL_NAMES, LABELS
from .errors import CiviltextError
from .textprep import clean_text, word_count

__all__ = ["LABELS", "LABEL_NAMES", "CiviltextError", "clean_text", "word_count", "__version__"]

"""polyg2p: multilingual grapheme-to-phoneme conversion.

A shared attention encoder-decoder trained on spelling-pronunciation pairs
from many languages at once, with language-ID source tokens, n-best beam
decoding, and PER/WER/WER-100 evaluation.
"""

__version__ = "0.1.0"

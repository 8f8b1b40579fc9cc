"""Export sentence embeddings and mask-position token log-probabilities
from a language model into the harness wire formats.

These adapters never compute metrics; the boundary to the harness is
pure data files.
"""

__version__ = "0.1.0"

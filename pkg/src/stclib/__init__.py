"""Temporal classification losses, language-gated attention, and
code-switch ASR evaluation metrics, with a toy end-to-end training harness.
"""

__version__ = "0.1.0"

"""Harness for composing OOD/ID benchmark splits, characterizing the
train/test distribution shift, and scoring exported training runs."""

__version__ = "0.1.0"

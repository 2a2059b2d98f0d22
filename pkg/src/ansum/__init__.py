"""Toolkit for compressing long-form answers into concise answers.

Subpackages cover corpus ingestion and statistics, extractive and
abstractive summarizers, sentence decontextualization, multi-reference
evaluation metrics, and a two-stage human annotation study service.
"""

__version__ = "0.1.0"

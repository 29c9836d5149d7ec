"""Python interface to the spatial-temporal graph convolutional decoder."""

from _stgcd import (
    Translator,
    bleu4,
    extract_heads,
    generate_corpus,
    normalize_adjacency,
    smooth_l1,
    uas,
    walk_kernel,
)

__all__ = [
    "Translator",
    "bleu4",
    "extract_heads",
    "generate_corpus",
    "normalize_adjacency",
    "smooth_l1",
    "uas",
    "walk_kernel",
]

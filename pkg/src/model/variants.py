"""Encoder variant tags."""

from enum import Enum


class EncoderVariant(str, Enum):
    SEPARABLE = "separable"
    FULL = "full"
    DISTINCT = "distinct"
    SEPARABLE_SHARED = "shared"

"""Pooling of per-token contextual vectors into single word vectors.

Four regimes: three no-context variants differing in which sequence-boundary
marker embeddings join the average, one in-context aggregation that averages
a word's per-sentence vectors into a static representation. All pooling is
an arithmetic mean accumulated in 64-bit with pairwise summation.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError


class NCVariant(enum.Enum):
    NOSPEC = "nospec"
    WITHCLS = "withcls"
    ALL = "all"


@dataclass(frozen=True)
class TokenizedInstance:
    """Per-token vectors for one encoded text at one layer.

    word_span is the half-open index range of the word's subword tokens;
    cls_index/sep_index locate the begin/end marker tokens when present and
    must lie outside the span.
    """

    tokens: np.ndarray  # (n_tokens, dim)
    word_span: tuple[int, int]
    cls_index: int | None = None
    sep_index: int | None = None

    def __post_init__(self) -> None:
        n = self.tokens.shape[0]
        start, end = self.word_span
        if not (0 <= start < end <= n):
            raise ValidationError(f"word_span {self.word_span} invalid for {n} tokens")
        for name, idx in (("cls_index", self.cls_index), ("sep_index", self.sep_index)):
            if idx is not None:
                if not 0 <= idx < n:
                    raise ValidationError(f"{name} {idx} out of bounds for {n} tokens")
                if start <= idx < end:
                    raise ValidationError(f"{name} {idx} lies inside word_span {self.word_span}")


def _mean64(rows: np.ndarray) -> np.ndarray:
    # pairwise 64-bit mean plus one residual-correction pass; the correction
    # makes the mean of N identical vectors return that vector exactly
    arr = np.ascontiguousarray(rows, dtype=np.float64)
    m = arr.mean(axis=0)
    return m + (arr - m).mean(axis=0)


def pool_nc(instance: TokenizedInstance, variant: NCVariant) -> np.ndarray:
    """Average a word's subword vectors, optionally with the marker tokens.

    NOSPEC averages the word span only; WITHCLS adds the begin marker;
    ALL adds both markers.
    """
    start, end = instance.word_span
    indices = list(range(start, end))
    if variant is NCVariant.WITHCLS:
        if instance.cls_index is None:
            raise ValidationError("withcls pooling requires a begin-marker index")
        indices.append(instance.cls_index)
    elif variant is NCVariant.ALL:
        if instance.cls_index is None or instance.sep_index is None:
            raise ValidationError("all pooling requires begin- and end-marker indices")
        indices.extend((instance.cls_index, instance.sep_index))
    return _mean64(instance.tokens[indices])


def pool_in_context(instances: Sequence[np.ndarray]) -> tuple[np.ndarray, int]:
    """Average one word's per-sentence vectors; returns (vector, N).

    The caller guarantees at least one instance: a word with zero corpus
    occurrences is a miss and must never reach this point.
    """
    if len(instances) == 0:
        raise ValidationError("pool_in_context requires at least one instance")
    dims = {v.shape[-1] for v in instances}
    if len(dims) != 1:
        raise ValidationError(f"instance vectors disagree on dim: {sorted(dims)}")
    return _mean64(np.stack(instances)), len(instances)


def pool_templated(instance: TokenizedInstance) -> np.ndarray:
    """Pool a word inside its instantiated template: the N=1 in-context case."""
    return pool_nc(instance, NCVariant.NOSPEC)


def align_word(text: str, word: str, spans: Sequence[tuple[int, int]]) -> tuple[tuple[int, int], int | None, int | None] | None:
    """Locate a word's subword tokens via byte-offset alignment.

    spans are half-open byte offsets into UTF-8 `text`; marker tokens carry
    degenerate spans (start == end). Matches the first whole-word,
    case-folded occurrence. Returns (word_span, cls_index, sep_index), or
    None when the word is absent or is split across tokenizer-inserted
    boundaries (a miss, never an approximation).
    """
    m = re.search(rf"(?<!\w){re.escape(word)}(?!\w)", text, re.IGNORECASE)
    if m is None:
        return None
    w_start = len(text[: m.start()].encode("utf-8"))
    w_end = w_start + len(text[m.start() : m.end()].encode("utf-8"))

    word_tokens = [
        i for i, (s, e) in enumerate(spans) if s < e and s >= w_start and e <= w_end
    ]
    if not word_tokens:
        return None
    lo, hi = word_tokens[0], word_tokens[-1]
    if word_tokens != list(range(lo, hi + 1)):
        return None
    # the word's tokens must tile its byte range exactly
    covered = sorted(spans[i] for i in word_tokens)
    if covered[0][0] != w_start or covered[-1][1] != w_end:
        return None
    for (_, e_prev), (s_next, _) in zip(covered, covered[1:]):
        if s_next != e_prev:
            return None

    markers = [i for i, (s, e) in enumerate(spans) if s == e]
    cls_index = markers[0] if markers and markers[0] < lo else None
    sep_index = markers[-1] if markers and markers[-1] > hi else None
    return (lo, hi + 1), cls_index, sep_index

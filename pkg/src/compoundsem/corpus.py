"""Sentence sampling from a line-per-sentence corpus.

Matching is whole-word on Unicode word boundaries after case folding, so a
constituent ("war") never matches inside a compound ("wartime"). Sampling
keeps up to `cap` distinct sentences per word in corpus order; scanning may
shard by byte ranges without changing the output.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

from .errors import ValidationError

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


@dataclass(frozen=True)
class SamplePlan:
    cap: int = 100
    seed: int = 0  # reserved for a shuffled truncation mode

    def __post_init__(self) -> None:
        if self.cap < 1:
            raise ValidationError(f"sampling cap must be >= 1, got {self.cap}")


@dataclass(frozen=True)
class WordSample:
    word: str
    sentences: tuple[str, ...]
    n_matched_total: int  # distinct matching sentences before the cap


def instantiate_template(template: str, word: str) -> str:
    """Fill the single `<word>` slot of a template sentence."""
    n = template.count("<word>")
    if n != 1:
        raise ValidationError(f"template must contain exactly one <word> slot, found {n}")
    return template.replace("<word>", word)


def _shard_ranges(size: int, n_shards: int) -> list[tuple[int, int]]:
    step = size // n_shards
    bounds = [i * step for i in range(n_shards)] + [size]
    return [(bounds[i], bounds[i + 1]) for i in range(n_shards)]


def _scan_shard(path: Path, start: int, end: int, words: frozenset[str]) -> Iterator[tuple[int, str, str]]:
    """Yield (line_start_offset, word, sentence) for lines starting in [start, end)."""
    with path.open("rb") as fh:
        if start > 0:
            fh.seek(start - 1)
            if fh.read(1) != b"\n":
                fh.readline()  # skip the line that began before this shard
        pos = fh.tell()
        while pos < end:
            raw = fh.readline()
            if not raw:
                break
            sentence = raw.decode("utf-8").rstrip("\n").rstrip("\r")
            hits = words.intersection(_TOKEN_RE.findall(sentence.casefold()))
            for word in hits:
                yield pos, word, sentence
            pos += len(raw)


def sample_sentences(
    corpus_path: str | Path,
    words: set[str],
    plan: SamplePlan = SamplePlan(),
    n_shards: int = 1,
) -> dict[str, WordSample]:
    """Collect up to `plan.cap` distinct sentences containing each word.

    Duplicate sentences are removed before capping. Every queried word gets
    an entry; zero matches is reported through an empty sample, not an
    error. Output is independent of `n_shards`.
    """
    path = Path(corpus_path)
    if not path.exists():
        raise ValidationError(f"corpus file not found: {path}")
    if n_shards < 1:
        raise ValidationError(f"n_shards must be >= 1, got {n_shards}")
    query = frozenset(w.casefold() for w in words)

    matches: list[tuple[int, str, str]] = []
    size = path.stat().st_size
    for start, end in _shard_ranges(size, min(n_shards, max(size, 1))):
        matches.extend(_scan_shard(path, start, end, query))
    matches.sort(key=lambda rec: rec[0])  # corpus position; shards stay disjoint

    per_word: dict[str, list[str]] = {w: [] for w in sorted(query)}
    seen: dict[str, set[str]] = {w: set() for w in query}
    totals: dict[str, int] = {w: 0 for w in query}
    for _, word, sentence in matches:
        if sentence in seen[word]:
            continue
        seen[word].add(sentence)
        totals[word] += 1
        if len(per_word[word]) < plan.cap:
            per_word[word].append(sentence)

    return {
        w: WordSample(w, tuple(per_word[w]), totals[w]) for w in sorted(query)
    }


def write_samples(samples: Mapping[str, WordSample], path: str | Path) -> None:
    """Serialize samples as JSONL: {word, sentences, n_matched_total}."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for word in sorted(samples):
            s = samples[word]
            fh.write(json.dumps(
                {"word": s.word, "sentences": list(s.sentences), "n_matched_total": s.n_matched_total},
                ensure_ascii=False,
            ) + "\n")


def read_samples(path: str | Path) -> dict[str, WordSample]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"samples file not found: {path}")
    out: dict[str, WordSample] = {}
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out[rec["word"]] = WordSample(rec["word"], tuple(rec["sentences"]), int(rec["n_matched_total"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"{path.name} line {ln}: malformed sample record: {exc}") from None
    return out

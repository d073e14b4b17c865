"""Encoder loading, content-hash pinning, and per-layer text encoding."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch


class ExportError(ValueError):
    pass


@dataclass
class Encoding:
    """One encoded text: token ids/strings, char-offset spans, hidden states."""

    tokens: list[str]
    offsets: list[tuple[int, int]]
    special_mask: list[int]
    hidden_states: np.ndarray  # (n_layers + 1, n_tokens, dim); row 0 = embeddings


class EncoderBundle:
    """A loaded encoder + tokenizer, pinned by a content hash of its weights."""

    def __init__(self, model, tokenizer, content_hash: str) -> None:
        self.model = model
        self.tokenizer = tokenizer
        self.content_hash = content_hash
        self.dim = int(model.config.hidden_size)
        self.n_layers = int(model.config.num_hidden_layers)

    def encode(self, text: str) -> Encoding:
        batch = self.tokenizer(
            text, return_offsets_mapping=True, return_special_tokens_mask=True,
            return_tensors="pt", truncation=True,
        )
        with torch.no_grad():
            out = self.model(
                input_ids=batch["input_ids"],
                attention_mask=batch["attention_mask"],
                output_hidden_states=True,
            )
        hidden = np.stack([h[0].numpy().astype(np.float32) for h in out.hidden_states])
        tokens = self.tokenizer.convert_ids_to_tokens(batch["input_ids"][0])
        offsets = [(int(s), int(e)) for s, e in batch["offset_mapping"][0].tolist()]
        special = [int(m) for m in batch["special_tokens_mask"][0].tolist()]
        return Encoding(tokens, offsets, special, hidden)


def _hash_state_dict(model) -> str:
    h = hashlib.sha256()
    state = model.state_dict()
    for name in sorted(state):
        h.update(name.encode("utf-8"))
        h.update(state[name].numpy().tobytes())
    return h.hexdigest()


def load_encoder(model_id: str, revision: str | None = None) -> EncoderBundle:
    """Load from a local weight directory or a pinned hub identifier.

    Unpinned hub references are refused: reproducibility of downstream
    correlations depends on exact weights, so the revision must be named
    and the loaded weights are content-hashed into every manifest.
    """
    from transformers import AutoModel, AutoTokenizer

    torch.set_num_threads(1)  # deterministic single-batch inference
    path = Path(model_id)
    if path.is_dir():
        model = AutoModel.from_pretrained(path)
        tokenizer = AutoTokenizer.from_pretrained(path)
    else:
        if not revision:
            raise ExportError(
                f"refusing unpinned model reference {model_id!r}: pass an explicit "
                "revision (commit hash) or a local weight directory"
            )
        model = AutoModel.from_pretrained(model_id, revision=revision)
        tokenizer = AutoTokenizer.from_pretrained(model_id, revision=revision)
    model.eval()
    if not tokenizer.is_fast:
        raise ExportError("a fast tokenizer (with offset mappings) is required")
    return EncoderBundle(model, tokenizer, _hash_state_dict(model))


def align_word(text: str, word: str, enc: Encoding) -> tuple[int, int] | None:
    """First whole-word, case-folded occurrence -> token index range.

    The word's tokens must tile its character span exactly; words split
    across tokenizer-inserted boundaries are misses, never approximations.
    """
    m = re.search(rf"(?<!\w){re.escape(word)}(?!\w)", text, re.IGNORECASE)
    if m is None:
        return None
    picked = [
        i for i, ((s, e), special) in enumerate(zip(enc.offsets, enc.special_mask))
        if not special and s < e and s >= m.start() and e <= m.end()
    ]
    if not picked or picked != list(range(picked[0], picked[-1] + 1)):
        return None
    spans = [enc.offsets[i] for i in picked]
    if spans[0][0] != m.start() or spans[-1][1] != m.end():
        return None
    for (_, prev_end), (next_start, _) in zip(spans, spans[1:]):
        if next_start != prev_end:
            return None
    return picked[0], picked[-1] + 1

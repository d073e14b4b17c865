from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

import numpy as np
import pytest

from compoundsem.embeddings import BackendEncoding, EncodeMiss

DATA = Path(__file__).parent / "data"
GOLDEN = DATA / "golden" / "fixture_golden.json"
SCRIPTS = Path(__file__).parent.parent / "scripts"

_WORD_RE = re.compile(r"\w+", re.UNICODE)


@pytest.fixture(scope="session")
def fixture_golden() -> dict:
    return json.loads(GOLDEN.read_text(encoding="utf-8"))


def _hash_component(token: str, layer: int, index: int) -> float:
    digest = hashlib.sha256(f"{token.lower()}|{layer}|{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**63 - 1.0


class HashBackend:
    """Deterministic in-memory backend: <=4-char subword chunks, hash vectors.

    Mirrors scripts/toy_pipe_backend.py so pipe and in-memory paths can be
    compared. Texts containing 'zzzmiss' raise EncodeMiss.
    """

    def __init__(self, dim: int = 8, n_layers: int = 3, include_input_layer: bool = False,
                 constant: float | None = None):
        self.dim = dim
        self.n_layers = n_layers
        self.include_input_layer = include_input_layer
        self.constant = constant

    def _vector(self, token: str, layer: int) -> list[float]:
        if self.constant is not None:
            return [self.constant] * self.dim
        return [_hash_component(token, layer, i) for i in range(self.dim)]

    def encode(self, text: str) -> BackendEncoding:
        if "zzzmiss" in text:
            raise EncodeMiss("unrepresentable text")
        tokens: list[str] = ["<s>"]
        spans: list[tuple[int, int]] = [(0, 0)]
        for m in _WORD_RE.finditer(text):
            char_pos = m.start()
            word = m.group()
            for k in range(0, len(word), 4):
                piece = word[k : k + 4]
                start = len(text[:char_pos].encode("utf-8"))
                spans.append((start, start + len(piece.encode("utf-8"))))
                tokens.append(piece)
                char_pos += len(piece)
        total = len(text.encode("utf-8"))
        tokens.append("</s>")
        spans.append((total, total))
        first = 0 if self.include_input_layer else 1
        layers = np.asarray(
            [[self._vector(t, layer) for t in tokens] for layer in range(first, self.n_layers + 1)],
            dtype=np.float32,
        )
        return BackendEncoding(tokens, spans, layers, self.include_input_layer)

    def close(self) -> None:
        pass

#!/usr/bin/env python3
"""Reference backend for the NDJSON pipe protocol, with a toy encoder.

Speaks the wire contract expected by the embed command: one JSON request
{"id", "text"} per line on stdin, one JSON response per line on stdout
carrying tokens, half-open byte-offset spans, and per-layer per-token
vectors. Marker tokens (<s>, </s>) have degenerate spans. The "model" is a
deterministic hash of (token, layer, component), so outputs are stable
across runs and platforms; words are chunked into <=4-character pieces to
imitate subword tokenization.

Test hooks: a text containing "zzzmiss" yields a miss response; a text
containing "zzzcrash" makes the process exit non-zero.

Usage: toy_pipe_backend.py [--dim D] [--layers L] [--include-input-layer]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys

WORD_RE = re.compile(r"\w+", re.UNICODE)
CHUNK = 4


def chunk_word(word: str) -> list[str]:
    return [word[i : i + CHUNK] for i in range(0, len(word), CHUNK)]


def component(token: str, layer: int, index: int) -> float:
    digest = hashlib.sha256(f"{token.lower()}|{layer}|{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**63 - 1.0


def tokenize(text: str) -> tuple[list[str], list[tuple[int, int]]]:
    tokens: list[str] = ["<s>"]
    spans: list[tuple[int, int]] = [(0, 0)]
    for m in WORD_RE.finditer(text):
        char_pos = m.start()
        for piece in chunk_word(m.group()):
            start = len(text[:char_pos].encode("utf-8"))
            end = start + len(piece.encode("utf-8"))
            tokens.append(piece)
            spans.append((start, end))
            char_pos += len(piece)
    total = len(text.encode("utf-8"))
    tokens.append("</s>")
    spans.append((total, total))
    return tokens, spans


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--dim", type=int, default=8)
    parser.add_argument("--layers", type=int, default=3)
    parser.add_argument("--include-input-layer", action="store_true")
    args = parser.parse_args()

    first_layer = 0 if args.include_input_layer else 1
    for line in sys.stdin:
        if not line.strip():
            continue
        req = json.loads(line)
        text = req["text"]
        if "zzzcrash" in text:
            sys.exit(17)
        if "zzzmiss" in text:
            print(json.dumps({"id": req["id"], "error": "unrepresentable text", "miss": True}), flush=True)
            continue
        tokens, spans = tokenize(text)
        layers = [
            [[component(t, layer, i) for i in range(args.dim)] for t in tokens]
            for layer in range(first_layer, args.layers + 1)
        ]
        print(json.dumps({
            "id": req["id"],
            "tokens": tokens,
            "spans": [list(s) for s in spans],
            "layers": layers,
            "includes_input_layer": args.include_input_layer,
        }), flush=True)


if __name__ == "__main__":
    main()

"""Inference backends supplying per-layer, per-token vectors.

Two adapters, both defined purely by the wire/file contract so the toolkit
never embeds model code:

* PipeBackend: out-of-process, newline-delimited JSON over stdin/stdout.
  Request:  {"id": int, "text": str}
  Response: {"id": int, "tokens": [str], "spans": [[start, end], ...],
             "layers": [[[float, ...] per token] per layer],
             "includes_input_layer": bool (optional, default false)}
  spans are half-open byte offsets into the UTF-8 text; marker tokens
  (sequence begin/end) carry start == end. Errors come back as
  {"id": int, "error": str, "miss": bool}: miss=true means the text is
  untokenizable (a reported miss); anything else is a backend failure.

* OnnxBackend: in-process over an interchange-format model whose outputs
  are the per-layer hidden states, plus a tokenizer definition file.
  Requires the optional onnxruntime and tokenizers packages.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from pathlib import Path

import numpy as np

from .embeddings import BackendEncoding, EncodeMiss
from .errors import BackendError


class PipeBackend:
    """Talk to a subprocess speaking the NDJSON protocol above."""

    def __init__(self, command: str | list[str]) -> None:
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendError(f"cannot start backend {argv!r}: {exc}") from exc
        self._next_id = 0

    def encode(self, text: str) -> BackendEncoding:
        if self._proc.poll() is not None:
            raise BackendError(f"backend exited with code {self._proc.returncode}")
        req_id = self._next_id
        self._next_id += 1
        try:
            assert self._proc.stdin is not None and self._proc.stdout is not None
            self._proc.stdin.write(json.dumps({"id": req_id, "text": text}) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"backend pipe broke: {exc}") from exc
        if not line:
            raise BackendError("backend closed its output stream")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError(f"backend sent invalid JSON: {exc}") from exc
        if resp.get("id") != req_id:
            raise BackendError(f"backend answered id {resp.get('id')} to request {req_id}")
        if "error" in resp:
            if resp.get("miss"):
                raise EncodeMiss(resp["error"])
            raise BackendError(f"backend error: {resp['error']}")
        try:
            layers = np.asarray(resp["layers"], dtype=np.float32)
            spans = [(int(s), int(e)) for s, e in resp["spans"]]
            tokens = [str(t) for t in resp["tokens"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from exc
        if layers.ndim != 3 or layers.shape[1] != len(tokens) or len(spans) != len(tokens):
            raise BackendError(
                f"backend response shapes disagree: layers {layers.shape}, "
                f"{len(tokens)} tokens, {len(spans)} spans"
            )
        return BackendEncoding(tokens, spans, layers, bool(resp.get("includes_input_layer", False)))

    def close(self) -> None:
        if self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "PipeBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class OnnxBackend:
    """Run an exported encoder in-process via onnxruntime.

    The model must expose its hidden states as outputs named hidden_0
    (input embeddings), hidden_1 ... hidden_L, and the tokenizer definition
    must be loadable by the tokenizers library.
    """

    def __init__(self, model_path: str | Path, tokenizer_path: str | Path) -> None:
        try:
            import onnxruntime  # type: ignore[import-not-found]
            from tokenizers import Tokenizer  # type: ignore[import-not-found]
        except ImportError as exc:
            raise BackendError(
                "the in-process backend needs the onnxruntime and tokenizers packages"
            ) from exc
        model_path, tokenizer_path = Path(model_path), Path(tokenizer_path)
        if not model_path.exists():
            raise BackendError(f"model file not found: {model_path}")
        if not tokenizer_path.exists():
            raise BackendError(f"tokenizer file not found: {tokenizer_path}")
        self._session = onnxruntime.InferenceSession(str(model_path))
        self._tokenizer = Tokenizer.from_file(str(tokenizer_path))
        names = [o.name for o in self._session.get_outputs() if o.name.startswith("hidden_")]
        if not names:
            raise BackendError("model exposes no hidden_* outputs")
        self._output_names = sorted(names, key=lambda n: int(n.split("_")[1]))

    def encode(self, text: str) -> BackendEncoding:
        encoding = self._tokenizer.encode(text)
        if not encoding.ids:
            raise EncodeMiss(f"tokenizer produced no tokens for {text!r}")
        spans = []
        for (cs, ce), special in zip(encoding.offsets, encoding.special_tokens_mask):
            if special:
                spans.append((0, 0))
            else:
                # tokenizer offsets are character-based; the wire contract is bytes
                bs = len(text[:cs].encode("utf-8"))
                spans.append((bs, bs + len(text[cs:ce].encode("utf-8"))))
        ids = np.asarray([encoding.ids], dtype=np.int64)
        mask = np.ones_like(ids)
        outputs = self._session.run(self._output_names, {"input_ids": ids, "attention_mask": mask})
        layers = np.stack([out[0] for out in outputs]).astype(np.float32)
        return BackendEncoding(list(encoding.tokens), spans, layers, includes_input_layer=True)

    def close(self) -> None:
        pass

"""The two export operations: interchange-model export and dump generation."""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .dumps import DumpRecord, write_dump
from .encoder import Encoding, ExportError, align_word, load_encoder

log = logging.getLogger(__name__)

NC_SETTINGS = ("nc-nospec", "nc-withcls", "nc-all")
SETTINGS = NC_SETTINGS + ("context", "templated")
SETTING_KINDS = {
    "nc-nospec": "nc_nospec",
    "nc-withcls": "nc_withcls",
    "nc-all": "nc_all",
    "context": "in_context",
    "templated": "templated",
}
DEFAULT_TEMPLATE = "This is a <word>"


@dataclass(frozen=True)
class ExportSpec:
    model: str
    out_dir: Path
    mode: str  # "model" | "dump"
    words_path: Path | None = None
    layers: str = "all"
    setting: str = "nc-nospec"
    template: str = DEFAULT_TEMPLATE
    revision: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("model", "dump"):
            raise ExportError(f"unknown mode {self.mode!r}")
        if self.mode == "dump" and self.words_path is None:
            raise ExportError("dump mode requires a word/sentence list path")
        if self.setting not in SETTINGS:
            raise ExportError(f"unknown setting {self.setting!r}; choose from {SETTINGS}")


def _parse_layers(spec: str, n_layers: int) -> tuple[int, int]:
    """'all' or a contiguous 'LO-HI' range over encoder layers 1..L."""
    if spec == "all":
        return 1, n_layers
    m = re.fullmatch(r"(\d+)-(\d+)", spec)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
    elif spec.isdigit():
        lo = hi = int(spec)
    else:
        raise ExportError(f"bad layer spec {spec!r}: use all, K, or LO-HI")
    if not 1 <= lo <= hi <= n_layers:
        raise ExportError(f"layer range {lo}-{hi} outside 1..{n_layers}")
    return lo, hi


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _HiddenStates(torch.nn.Module):
    """Expose every hidden layer as a separate graph output."""

    def __init__(self, encoder) -> None:
        super().__init__()
        self.encoder = encoder

    def forward(self, input_ids, attention_mask):
        out = self.encoder(
            input_ids=input_ids, attention_mask=attention_mask, output_hidden_states=True
        )
        return tuple(out.hidden_states)


def export_model(spec: ExportSpec) -> dict[str, Path]:
    """Write the encoder as an interchange-format graph plus its tokenizer.

    All hidden layers (embeddings plus every encoder layer) become outputs
    hidden_0 .. hidden_L. The manifest mirrors the dump manifest's dim and
    n_layers fields and pins the weights by content hash.
    """
    bundle = load_encoder(spec.model, spec.revision)
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    model_path = out_dir / "model.onnx"
    wrapper = _HiddenStates(bundle.model)
    ids = torch.tensor([[bundle.tokenizer.cls_token_id or 0, bundle.tokenizer.sep_token_id or 1]])
    mask = torch.ones_like(ids)
    output_names = [f"hidden_{i}" for i in range(bundle.n_layers + 1)]
    dynamic = {"input_ids": {0: "batch", 1: "tokens"}, "attention_mask": {0: "batch", 1: "tokens"}}
    dynamic.update({name: {0: "batch", 1: "tokens"} for name in output_names})
    try:
        torch.onnx.export(
            wrapper, (ids, mask), str(model_path),
            input_names=["input_ids", "attention_mask"],
            output_names=output_names,
            dynamic_axes=dynamic,
            dynamo=False,
        )
    except Exception as exc:  # the exporter needs the optional onnx package
        raise ExportError(f"interchange export failed: {exc}") from exc

    bundle.tokenizer.save_pretrained(out_dir)
    tokenizer_path = out_dir / "tokenizer.json"
    if not tokenizer_path.exists():
        raise ExportError("tokenizer export produced no tokenizer.json")

    manifest = {
        "format_version": 1,
        "kind": "interchange-model",
        "dim": bundle.dim,
        "n_layers": bundle.n_layers,
        "model_hash": bundle.content_hash,
        "outputs": output_names,
        "files": {
            "model.onnx": _sha256_file(model_path),
            "tokenizer.json": _sha256_file(tokenizer_path),
        },
    }
    manifest_path = out_dir / "model-manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {"model": model_path, "tokenizer": tokenizer_path, "manifest": manifest_path}


def _read_word_list(path: Path) -> list[tuple[str, list[str]]]:
    """Plain text: one word per line. JSONL: {word, sentences: [...]}."""
    items: list[tuple[str, list[str]]] = []
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        for ln, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                items.append((rec["word"].lower(), list(rec.get("sentences", []))))
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ExportError(f"{path.name} line {ln}: malformed record") from None
    else:
        items = [(w.strip().lower(), []) for w in text.splitlines() if w.strip()]
    if not items:
        raise ExportError(f"empty word list: {path}")
    return items


def _mean64(rows: np.ndarray) -> np.ndarray:
    # same compensated pairwise mean as the analysis toolkit's pooling
    arr = np.ascontiguousarray(rows, dtype=np.float64)
    m = arr.mean(axis=0)
    return m + (arr - m).mean(axis=0)


def _pool(enc: Encoding, span: tuple[int, int], setting: str, lo: int, hi: int) -> np.ndarray:
    rows = list(range(span[0], span[1]))
    if setting == "nc-withcls":
        rows = rows + [0]
    elif setting == "nc-all":
        rows = rows + [0, len(enc.tokens) - 1]
    # hidden_states row k is encoder layer k (row 0 = input embeddings)
    return np.stack([_mean64(enc.hidden_states[layer][rows]) for layer in range(lo, hi + 1)])


@dataclass
class DumpOutcome:
    out_dir: Path
    n_records: int
    misses: list[tuple[str, str]] = field(default_factory=list)


def generate_dump(spec: ExportSpec) -> DumpOutcome:
    """Encode a word/sentence list and write a dump for downstream analysis.

    Pooling follows the analysis toolkit exactly: subword-mean per layer for
    the no-context and templated settings, sentence-mean of subword-means
    for the in-context setting. Unresolvable words are reported misses.
    """
    if spec.mode != "dump":
        raise ExportError("generate_dump requires mode='dump'")
    bundle = load_encoder(spec.model, spec.revision)
    lo, hi = _parse_layers(spec.layers, bundle.n_layers)
    items = _read_word_list(Path(spec.words_path))  # type: ignore[arg-type]

    unk = bundle.tokenizer.unk_token
    records: list[DumpRecord] = []
    misses: list[tuple[str, str]] = []
    for word, sentences in items:
        if spec.setting == "context":
            per_sentence = []
            for sentence in sentences:
                enc = bundle.encode(sentence)
                span = align_word(sentence, word, enc)
                if span is None or unk in enc.tokens[span[0] : span[1]]:
                    continue
                per_sentence.append(_pool(enc, span, "nc-nospec", lo, hi))
            if not per_sentence:
                misses.append((word, "no usable sentence instances"))
                continue
            stacked = np.stack(per_sentence)  # (N, layers, dim)
            pooled = np.stack([_mean64(stacked[:, i]) for i in range(stacked.shape[1])])
            records.append(DumpRecord(word, pooled.astype(np.float32), len(per_sentence)))
        else:
            text = word if spec.setting in NC_SETTINGS else spec.template.replace("<word>", word)
            enc = bundle.encode(text)
            span = align_word(text, word, enc)
            if span is None:
                misses.append((word, "span resolution failed"))
                continue
            if unk in enc.tokens[span[0] : span[1]]:
                misses.append((word, "tokenizer cannot represent this word"))
                continue
            pooled = _pool(enc, span, spec.setting if spec.setting in NC_SETTINGS else "nc-nospec", lo, hi)
            records.append(DumpRecord(word, pooled.astype(np.float32), 1))

    if not records:
        raise ExportError("every word missed; nothing to dump")
    descriptor: dict = {"kind": SETTING_KINDS[spec.setting]}
    if spec.setting == "templated":
        descriptor["template"] = spec.template
    out = write_dump(
        records,
        Path(spec.out_dir),
        descriptor,
        first_layer=lo,
        provenance=f"model-export model_hash={bundle.content_hash}",
    )
    for word, reason in misses:
        log.warning("miss: %s (%s)", word, reason)
    return DumpOutcome(out, len(records), misses)

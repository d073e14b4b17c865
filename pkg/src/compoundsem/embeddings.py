"""Layer-indexed word vectors: stores, dump persistence, static baselines.

Three interchangeable providers feed the measure pipeline: a precomputed
dump reader, a text-format static-vector reader, and an adapter over an
inference backend. Vectors are persisted as little-endian 32-bit floats;
all downstream arithmetic is 64-bit. A missing word is always a reported
miss, never an imputed vector.

Dump format (directory):
  manifest.json   format_version, dim, n_layers, first_layer, setting
                  descriptor, record_count, per-file sha256 checksums,
                  provenance
  records-*.jsonl one JSON object per line:
                  {word, n_instances, layers: [[f32...] per layer]}
  records-*.cpe   packed alternative: magic "CPE1", dim u32 LE, n_layers
                  u32 LE, record count u32 LE, then per record
                  {u16 word-length, UTF-8 word, u32 n_instances,
                  n_layers*dim f32 LE}
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import instantiate_template
from .errors import BackendError, ValidationError
from .pooling import NCVariant, TokenizedInstance, align_word, pool_in_context, pool_nc, pool_templated

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
PACKED_MAGIC = b"CPE1"


class SettingKind(enum.Enum):
    NC_NOSPEC = "nc_nospec"
    NC_WITHCLS = "nc_withcls"
    NC_ALL = "nc_all"
    IN_CONTEXT = "in_context"
    TEMPLATED = "templated"


_CLI_NAMES = {
    "nc-nospec": SettingKind.NC_NOSPEC,
    "nc-withcls": SettingKind.NC_WITHCLS,
    "nc-all": SettingKind.NC_ALL,
    "context": SettingKind.IN_CONTEXT,
    "templated": SettingKind.TEMPLATED,
}
DEFAULT_TEMPLATE = "This is a <word>"


@dataclass(frozen=True)
class RepresentationSetting:
    kind: SettingKind
    template: str | None = None

    def __post_init__(self) -> None:
        if self.kind is SettingKind.TEMPLATED:
            if self.template is None:
                raise ValidationError("templated setting requires a template")
            instantiate_template(self.template, "probe")  # validates the single slot
        elif self.template is not None:
            raise ValidationError(f"{self.kind.value} setting does not take a template")

    def descriptor(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.template is not None:
            out["template"] = self.template
        return out

    @staticmethod
    def from_descriptor(desc: dict) -> "RepresentationSetting":
        try:
            kind = SettingKind(desc["kind"])
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"bad setting descriptor: {desc!r}") from exc
        return RepresentationSetting(kind, desc.get("template"))

    @staticmethod
    def from_cli_name(name: str, template: str | None = None) -> "RepresentationSetting":
        if name not in _CLI_NAMES:
            raise ValidationError(f"unknown setting {name!r}; choose from {sorted(_CLI_NAMES)}")
        kind = _CLI_NAMES[name]
        if kind is SettingKind.TEMPLATED:
            return RepresentationSetting(kind, template or DEFAULT_TEMPLATE)
        return RepresentationSetting(kind)

    @property
    def cli_name(self) -> str:
        return {v: k for k, v in _CLI_NAMES.items()}[self.kind]


@dataclass(frozen=True)
class LayeredEmbedding:
    """Per-layer vectors for one word under one setting."""

    word: str
    setting: RepresentationSetting
    layers: np.ndarray  # (n_layers, dim) float32
    n_instances: int = 1

    def __post_init__(self) -> None:
        if self.layers.ndim != 2:
            raise ValidationError(f"{self.word!r}: layers must be 2-d, got shape {self.layers.shape}")
        if self.n_instances < 1:
            raise ValidationError(f"{self.word!r}: n_instances must be >= 1")
        if not np.isfinite(self.layers).all():
            bad = int(np.argwhere(~np.isfinite(self.layers).all(axis=1))[0, 0])
            raise ValidationError(f"non-finite component in record {self.word!r} at layer row {bad}")

    @property
    def dim(self) -> int:
        return int(self.layers.shape[1])

    @property
    def n_layers(self) -> int:
        return int(self.layers.shape[0])


class EmbeddingStore:
    """Immutable collection of layered embeddings keyed by (word, setting)."""

    def __init__(
        self,
        embeddings: Sequence[LayeredEmbedding],
        provenance: str = "",
        first_layer: int = 1,
        dim: int | None = None,
        n_layers: int | None = None,
    ) -> None:
        if not embeddings and (dim is None or n_layers is None):
            raise ValidationError("an empty store needs explicit dim and n_layers")
        dims = {e.dim for e in embeddings}
        layer_counts = {e.n_layers for e in embeddings}
        if dim is not None:
            dims.add(dim)
        if n_layers is not None:
            layer_counts.add(n_layers)
        if len(dims) != 1 or len(layer_counts) != 1:
            raise ValidationError(
                f"inconsistent records: dims {sorted(dims)}, layer counts {sorted(layer_counts)}"
            )
        self.dim = dims.pop()
        self.n_layers = layer_counts.pop()
        self.first_layer = first_layer
        self.provenance = provenance
        self._entries = {(e.word, e.setting): e for e in embeddings}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: tuple[str, RepresentationSetting]) -> bool:
        return key in self._entries

    @property
    def entries(self) -> dict[tuple[str, RepresentationSetting], LayeredEmbedding]:
        return dict(self._entries)

    def settings(self) -> set[RepresentationSetting]:
        return {setting for _, setting in self._entries}

    def words(self) -> set[str]:
        return {word for word, _ in self._entries}

    def layer_indices(self) -> range:
        return range(self.first_layer, self.first_layer + self.n_layers)

    def get(self, word: str, setting: RepresentationSetting) -> LayeredEmbedding | None:
        """Look up one record; a miss returns None for the caller to report."""
        return self._entries.get((word, setting))

    def layer_vector(self, word: str, setting: RepresentationSetting, layer: int) -> np.ndarray | None:
        emb = self.get(word, setting)
        if emb is None:
            return None
        row = layer - self.first_layer
        if not 0 <= row < self.n_layers:
            raise ValidationError(
                f"layer {layer} outside stored range "
                f"[{self.first_layer}, {self.first_layer + self.n_layers - 1}]"
            )
        return emb.layers[row].astype(np.float64)


@dataclass(frozen=True)
class StaticStore:
    """Single-vector-per-word store (the static-embedding baseline)."""

    entries: dict[str, np.ndarray]
    dim: int

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, word: str) -> np.ndarray | None:
        vec = self.entries.get(word)
        return None if vec is None else vec.astype(np.float64)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_dump(store: EmbeddingStore, path: str | Path, fmt: str = "jsonl",
               setting: RepresentationSetting | None = None) -> None:
    """Persist a single-setting store so that load_dump inverts it exactly.

    `setting` is only needed for an empty store, whose records cannot pin it.
    """
    if fmt not in ("jsonl", "packed"):
        raise ValidationError(f"unknown dump format {fmt!r}")
    settings = store.settings()
    if len(settings) > 1:
        raise ValidationError("a dump holds exactly one setting; split the store first")
    if settings:
        setting = settings.pop()
    elif setting is None:
        raise ValidationError("an empty store needs an explicit setting for the manifest")

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    records = sorted(store.entries.values(), key=lambda e: e.word)

    files: dict[str, str] = {}
    if records:
        if fmt == "jsonl":
            name = "records-00000.jsonl"
            with (path / name).open("w", encoding="utf-8") as fh:
                for emb in records:
                    fh.write(json.dumps({
                        "word": emb.word,
                        "n_instances": emb.n_instances,
                        "layers": [[float(x) for x in row] for row in emb.layers],
                    }, ensure_ascii=False) + "\n")
        else:
            name = "records-00000.cpe"
            with (path / name).open("wb") as fh:
                fh.write(PACKED_MAGIC)
                fh.write(struct.pack("<III", store.dim, store.n_layers, len(records)))
                for emb in records:
                    raw = emb.word.encode("utf-8")
                    fh.write(struct.pack("<H", len(raw)))
                    fh.write(raw)
                    fh.write(struct.pack("<I", emb.n_instances))
                    fh.write(np.ascontiguousarray(emb.layers, dtype="<f4").tobytes())
        files[name] = _sha256(path / name)

    manifest = {
        "format_version": FORMAT_VERSION,
        "dim": store.dim,
        "n_layers": store.n_layers,
        "first_layer": store.first_layer,
        "setting": setting.descriptor(),
        "record_count": len(records),
        "files": files,
        "provenance": store.provenance,
    }
    (path / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_jsonl_records(path: Path, dim: int, n_layers: int, setting: RepresentationSetting) -> list[LayeredEmbedding]:
    out = []
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            word, n_instances = rec["word"], int(rec["n_instances"])
            layers = np.asarray(rec["layers"], dtype=np.float32)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path.name} line {ln}: malformed record: {exc}") from None
        if layers.ndim != 2 or layers.shape != (n_layers, dim):
            raise ValidationError(
                f"{path.name} line {ln}: record {word!r} has shape {layers.shape}, "
                f"expected ({n_layers}, {dim})"
            )
        out.append(LayeredEmbedding(word, setting, layers, n_instances))
    return out


def _read_packed_records(path: Path, dim: int, n_layers: int, setting: RepresentationSetting) -> list[LayeredEmbedding]:
    blob = path.read_bytes()
    if blob[:4] != PACKED_MAGIC:
        raise ValidationError(f"{path.name}: bad magic, not a packed record file")
    f_dim, f_layers, count = struct.unpack_from("<III", blob, 4)
    if (f_dim, f_layers) != (dim, n_layers):
        raise ValidationError(
            f"{path.name}: header says dim={f_dim}, n_layers={f_layers}; "
            f"manifest says dim={dim}, n_layers={n_layers}"
        )
    out = []
    offset = 16
    vec_bytes = dim * n_layers * 4
    for _ in range(count):
        (wlen,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        word = blob[offset : offset + wlen].decode("utf-8")
        offset += wlen
        (n_instances,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        layers = np.frombuffer(blob, dtype="<f4", count=dim * n_layers, offset=offset).reshape(n_layers, dim).copy()
        offset += vec_bytes
        out.append(LayeredEmbedding(word, setting, layers, n_instances))
    if offset != len(blob):
        raise ValidationError(f"{path.name}: {len(blob) - offset} trailing bytes")
    return out


def load_dump(path: str | Path) -> EmbeddingStore:
    """Load and validate a dump directory written by write_dump."""
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise ValidationError(f"missing manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    for key in ("format_version", "dim", "n_layers", "setting", "record_count", "files"):
        if key not in manifest:
            raise ValidationError(f"manifest missing field {key!r}")
    if manifest["format_version"] != FORMAT_VERSION:
        raise ValidationError(f"unsupported dump format_version {manifest['format_version']}")
    dim, n_layers = int(manifest["dim"]), int(manifest["n_layers"])
    setting = RepresentationSetting.from_descriptor(manifest["setting"])

    records: list[LayeredEmbedding] = []
    for name, checksum in sorted(manifest["files"].items()):
        fpath = path / name
        if not fpath.exists():
            raise ValidationError(f"record file missing: {fpath}")
        actual = _sha256(fpath)
        if actual != checksum:
            raise ValidationError(f"checksum mismatch for {name}: {actual} != {checksum}")
        if name.endswith(".cpe"):
            records.extend(_read_packed_records(fpath, dim, n_layers, setting))
        else:
            records.extend(_read_jsonl_records(fpath, dim, n_layers, setting))

    if len(records) != int(manifest["record_count"]):
        raise ValidationError(
            f"manifest says {manifest['record_count']} records, found {len(records)}"
        )
    return EmbeddingStore(
        records,
        provenance=manifest.get("provenance", str(path)),
        first_layer=int(manifest.get("first_layer", 1)),
        dim=dim,
        n_layers=n_layers,
    )


def load_static(path: str | Path) -> StaticStore:
    """Read a text-format static-vector file: `word c1 c2 ... cD` per line."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"static vector file not found: {path}")
    entries: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open(encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if parts == [""]:
                continue
            word, comps = parts[0], parts[1:]
            if dim is None:
                dim = len(comps)
                if dim == 0:
                    raise ValidationError(f"line {ln}: no vector components")
            if len(comps) != dim:
                raise ValidationError(f"line {ln}: expected {dim} components, got {len(comps)}")
            try:
                vec = np.array([float(c) for c in comps], dtype=np.float32)
            except ValueError:
                col = next(i for i, c in enumerate(comps, start=1) if not _is_float(c))
                raise ValidationError(f"line {ln}, component {col}: not a number") from None
            if not np.isfinite(vec).all():
                raise ValidationError(f"line {ln}: non-finite component for {word!r}")
            if word in entries:
                log.warning("duplicate static entry %r at line %d; keeping the first", word, ln)
                continue
            entries[word] = vec
    if not entries:
        raise ValidationError(f"no vectors in static file: {path}")
    log.info("loaded %d static vectors, dim %d", len(entries), dim)
    return StaticStore(entries, dim or 0)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# --- inference-backend adapter -------------------------------------------


@dataclass
class BackendEncoding:
    """One encoded text: tokens, byte-offset spans, per-layer token vectors.

    Marker tokens (sequence begin/end) carry degenerate spans (start == end).
    layers has shape (n_layers, n_tokens, dim); when includes_input_layer is
    set, row 0 is the pre-encoder embedding layer.
    """

    tokens: list[str]
    spans: list[tuple[int, int]]
    layers: np.ndarray
    includes_input_layer: bool = False


class EncodeMiss(Exception):
    """The backend cannot tokenize or represent this text."""


class InferenceBackend(Protocol):
    def encode(self, text: str) -> BackendEncoding: ...


@dataclass(frozen=True)
class EmbedMiss:
    word: str
    reason: str


@dataclass
class EmbedResult:
    store: EmbeddingStore | None
    misses: list[EmbedMiss]
    token_counts: dict[str, int]  # subword tokens per word (first resolution)


_NC_VARIANTS = {
    SettingKind.NC_NOSPEC: NCVariant.NOSPEC,
    SettingKind.NC_WITHCLS: NCVariant.WITHCLS,
    SettingKind.NC_ALL: NCVariant.ALL,
}


def _effective_layers(enc: BackendEncoding, include_layer0: bool) -> tuple[np.ndarray, int]:
    if enc.includes_input_layer and not include_layer0:
        return enc.layers[1:], 1
    if include_layer0 and not enc.includes_input_layer:
        raise BackendError("backend does not expose the input embedding layer")
    return enc.layers, 0 if include_layer0 else 1


def _instances_for(enc: BackendEncoding, text: str, word: str, include_layer0: bool) -> list[TokenizedInstance] | None:
    aligned = align_word(text, word, enc.spans)
    if aligned is None:
        return None
    span, cls_index, sep_index = aligned
    layers, _ = _effective_layers(enc, include_layer0)
    return [TokenizedInstance(layers[i], span, cls_index, sep_index) for i in range(layers.shape[0])]


def embed_via_backend(
    items: Sequence[tuple[str, Sequence[str]]],
    setting: RepresentationSetting,
    backend: InferenceBackend,
    include_layer0: bool = False,
) -> EmbedResult:
    """Build a store by encoding words (or their sentences) through a backend.

    For the no-context and templated settings the input is the bare word or
    the instantiated template and any sentences are ignored; the in-context
    setting pools each sentence with the nospec rule and then averages
    across sentences. Unresolvable words become reported misses.
    """
    embeddings: list[LayeredEmbedding] = []
    misses: list[EmbedMiss] = []
    token_counts: dict[str, int] = {}

    for word, sentences in items:
        if setting.kind in _NC_VARIANTS or setting.kind is SettingKind.TEMPLATED:
            text = word if setting.kind in _NC_VARIANTS else instantiate_template(setting.template or "", word)
            try:
                enc = backend.encode(text)
            except EncodeMiss as exc:
                misses.append(EmbedMiss(word, f"tokenization miss: {exc}"))
                continue
            instances = _instances_for(enc, text, word, include_layer0)
            if instances is None:
                misses.append(EmbedMiss(word, "span resolution failed"))
                continue
            token_counts[word] = instances[0].word_span[1] - instances[0].word_span[0]
            if setting.kind is SettingKind.TEMPLATED:
                pooled = [pool_templated(inst) for inst in instances]
            else:
                variant = _NC_VARIANTS[setting.kind]
                pooled = [pool_nc(inst, variant) for inst in instances]
            layers = np.stack(pooled).astype(np.float32)
            embeddings.append(LayeredEmbedding(word, setting, layers, n_instances=1))
        elif setting.kind is SettingKind.IN_CONTEXT:
            per_sentence: list[list[np.ndarray]] = []
            # sentence order is the aggregation order; keep it stable
            for idx, sentence in enumerate(sentences):
                try:
                    enc = backend.encode(sentence)
                except EncodeMiss:
                    continue
                instances = _instances_for(enc, sentence, word, include_layer0)
                if instances is None:
                    log.debug("span resolution failed for %r in sentence %d", word, idx)
                    continue
                if word not in token_counts:
                    token_counts[word] = instances[0].word_span[1] - instances[0].word_span[0]
                per_sentence.append([pool_nc(inst, NCVariant.NOSPEC) for inst in instances])
            if not per_sentence:
                misses.append(EmbedMiss(word, "no usable sentence instances"))
                continue
            n_layers = len(per_sentence[0])
            layer_vecs = []
            n_instances = 0
            for li in range(n_layers):
                vec, n_instances = pool_in_context([inst[li] for inst in per_sentence])
                layer_vecs.append(vec)
            layers = np.stack(layer_vecs).astype(np.float32)
            embeddings.append(LayeredEmbedding(word, setting, layers, n_instances=n_instances))
        else:  # pragma: no cover - enum is exhaustive
            raise ValidationError(f"unsupported setting kind {setting.kind}")

    store = None
    if embeddings:
        store = EmbeddingStore(
            embeddings,
            provenance=f"backend:{type(backend).__name__}",
            first_layer=0 if include_layer0 else 1,
        )
    return EmbedResult(store, misses, token_counts)

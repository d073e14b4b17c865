from __future__ import annotations

from pathlib import Path

import pytest

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "snow", "##board", "hand", "##gun", "war", "##time", "sun", "##light",
    "gun", "time", "this", "is", "a", "the", "fast", "on", "slope",
]


def build_tokenizer():
    """WordPiece fast tokenizer assembled directly from the test vocabulary
    (constructing from a bare vocab.txt drops the vocab on current
    transformers)."""
    from tokenizers import Tokenizer, normalizers, pre_tokenizers, processors
    from tokenizers.models import WordPiece
    from transformers import BertTokenizerFast

    backend = Tokenizer(WordPiece({w: i for i, w in enumerate(VOCAB)}, unk_token="[UNK]"))
    backend.normalizer = normalizers.BertNormalizer(lowercase=True)
    backend.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    backend.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", VOCAB.index("[CLS]")), ("[SEP]", VOCAB.index("[SEP]"))],
    )
    return BertTokenizerFast(
        tokenizer_object=backend, unk_token="[UNK]", cls_token="[CLS]",
        sep_token="[SEP]", pad_token="[PAD]", mask_token="[MASK]",
    )


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory) -> Path:
    """A local weight directory with the published base architecture shape
    (12 encoder layers, 768-d) but a tiny vocabulary and thin MLPs, so tests
    stay offline and quick while the manifest constants remain honest."""
    import torch
    from transformers import BertConfig, BertModel

    out = tmp_path_factory.mktemp("encoder")
    tokenizer = build_tokenizer()

    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=768,
        num_hidden_layers=12,
        num_attention_heads=12,
        intermediate_size=512,
        max_position_embeddings=64,
    )
    model = BertModel(config)
    model.eval()
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return out

import json
import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

FIXTURE_WORDS = [
    "the", "a", "of", "is", "good", "bad", "fine", "poor", "movie", "book",
    "plot", "story", "sentiment", "attitude", "regarding", "energy", "tax",
    "great", "dull", "review",
]


@pytest.fixture(scope="session")
def tiny_model(tmp_path_factory):
    """A saved masked LM + tokenizer small enough to run in tests."""
    import torch
    from transformers import BertConfig, BertForMaskedLM, BertTokenizer

    model_dir = tmp_path_factory.mktemp("tiny-mlm")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + FIXTURE_WORDS
    (model_dir / "vocab.txt").write_text("\n".join(vocab) + "\n")
    tokenizer = BertTokenizer(str(model_dir / "vocab.txt"))
    tokenizer.save_pretrained(model_dir)

    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    BertForMaskedLM(config).save_pretrained(model_dir)
    return str(model_dir)


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """Ten instances over two topics with in-vocabulary texts."""
    corpus_dir = tmp_path_factory.mktemp("fixture-corpus")
    path = corpus_dir / "corpus.jsonl"
    rows = []
    for i in range(10):
        topic = "energy" if i < 5 else "tax"
        text = ("the movie is good." if i % 2 else "a dull book of poor story.")
        rows.append(
            {
                "id": f"x{i}",
                "text": text,
                "label": "pos" if i % 2 else "neg",
                "groups": {"topic": topic},
            }
        )
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))

    task = corpus_dir / "task.cfg"
    task.write_text("name = fixture\nshift_kind = topic\nlabels = pos,neg\npairwise = false\n")
    return path, task
